import time

import numpy as np
import pytest

from chewdet.peaks import Peak
from chewdet.periodic import (
    PeriodicSubsequence,
    SweepConfig,
    longest_abs_periodic,
    longest_rel_periodic,
    read_candidate_csv,
    segment,
    write_candidate_csv,
)
from oracles import brute_force_longest_periodic


def as_peaks(times):
    return [Peak(t=float(t), height=10.0, prominence=5.0) for t in times]


class TestWorkedExample:
    def test_published_example_reproduced_exactly(self):
        # Peaks at 0, 0.8, 0.9, 1.9 with band [0.9, 1.1]: the one optimum is
        # (0, 0.9, 1.9) of length 2; (0, 0.8) fails because 0.8 < p_min.
        result = longest_abs_periodic([0.0, 0.8, 0.9, 1.9], 0.9, 1.1)
        assert len(result) == 1
        assert result[0].timestamps == (0.0, 0.9, 1.9)
        assert result[0].length == 2

    def test_lower_bound_is_inclusive(self):
        # The 0.9 gap sits exactly on p_min and must be accepted.
        result = longest_abs_periodic([0.0, 0.9], 0.9, 1.1)
        assert result and result[0].timestamps == (0.0, 0.9)

    def test_strict_flag_drops_edge_gaps(self):
        # Every gap sits exactly on p_min: inclusive keeps the whole chain,
        # strict keeps nothing.
        t = [0.0, 0.9, 1.8]
        inclusive = longest_abs_periodic(t, 0.9, 1.1)
        assert inclusive and inclusive[0].length == 2
        assert longest_abs_periodic(t, 0.9, 1.1, strict=True) == []


class TestAbsolutePeriodic:
    def test_empty_and_single_inputs(self):
        assert longest_abs_periodic([], 0.5, 1.0) == []
        assert longest_abs_periodic([3.0], 0.5, 1.0) == []

    def test_perfectly_periodic_full_sequence(self):
        t = np.arange(10.0)
        result = longest_abs_periodic(t, 1.0, 1.0)
        assert len(result) == 1
        assert result[0].length == 9
        assert result[0].timestamps == tuple(t)

    def test_no_valid_pair(self):
        assert longest_abs_periodic([0.0, 5.0, 10.0], 0.5, 1.0) == []

    def test_non_increasing_times_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            longest_abs_periodic([0.0, 1.0, 1.0], 0.5, 1.5)

    def test_bad_band_rejected(self):
        with pytest.raises(ValueError, match="p_min"):
            longest_abs_periodic([0.0, 1.0], 1.5, 0.5)

    def test_all_ties_returned(self):
        # Two disjoint pairs, both of length 1.
        result = longest_abs_periodic([0.0, 1.0, 10.0, 11.0], 0.9, 1.1)
        assert sorted(s.timestamps for s in result) == [(0.0, 1.0), (10.0, 11.0)]

    def test_matches_brute_force_on_random_inputs(self):
        rng = np.random.default_rng(17)
        for trial in range(400):
            n = int(rng.integers(2, 11))
            t = np.sort(rng.uniform(0.0, 6.0, size=n))
            t = np.unique(np.round(t, 3))
            if len(t) < 2:
                continue
            p_min = float(rng.uniform(0.1, 1.0))
            p_max = p_min + float(rng.uniform(0.05, 1.0))
            best, optima = brute_force_longest_periodic(t, p_min, p_max)
            ours = longest_abs_periodic(t, p_min, p_max)
            got = len(ours[0].timestamps) - 1 if ours else 0
            assert got == best
            assert {s.timestamps for s in ours} == optima

    def test_strict_matches_brute_force(self):
        rng = np.random.default_rng(18)
        for trial in range(150):
            n = int(rng.integers(2, 10))
            t = np.unique(np.round(np.sort(rng.uniform(0.0, 4.0, size=n)), 2))
            if len(t) < 2:
                continue
            best, optima = brute_force_longest_periodic(t, 0.3, 0.9, strict=True)
            ours = longest_abs_periodic(t, 0.3, 0.9, strict=True)
            got = len(ours[0].timestamps) - 1 if ours else 0
            assert got == best
            assert {s.timestamps for s in ours} == optima

    def test_translation_equivariance(self):
        rng = np.random.default_rng(19)
        t = np.cumsum(rng.uniform(0.3, 1.2, size=40))
        base = longest_abs_periodic(t, 0.5, 0.9)
        shifted = longest_abs_periodic(t + 4096.0, 0.5, 0.9)
        assert len(base) == len(shifted)
        for a, b in zip(base, shifted):
            assert b.timestamps == tuple(v + 4096.0 for v in a.timestamps)

    def test_emitted_subsequences_satisfy_invariants(self):
        rng = np.random.default_rng(20)
        t = np.cumsum(rng.uniform(0.2, 1.5, size=60))
        for sub in longest_abs_periodic(t, 0.4, 0.8):
            gaps = np.diff(sub.timestamps)
            assert np.all(gaps >= sub.p_min) and np.all(gaps <= sub.p_max)
            assert sub.length == len(sub.timestamps) - 1


class TestSweep:
    def test_band_progression_clips_last(self):
        cfg = SweepConfig(min=0.4, max=1.5, epsilon=0.2)
        bands = cfg.bands()
        assert bands[0][0] == pytest.approx(0.4)
        for (lo, hi), (lo2, _) in zip(bands, bands[1:]):
            assert hi == pytest.approx(lo2)
            assert hi / lo <= 1.2 + 1e-12
        assert bands[-1][1] == pytest.approx(1.5)
        assert bands[-1][0] < 1.5

    def test_periodic_train_found_in_containing_band(self):
        t = np.arange(20) * 0.5
        found = longest_rel_periodic(t, SweepConfig(0.4, 1.5, 0.2))
        full = [s for s in found if s.timestamps == tuple(t)]
        assert len(full) == 1
        assert full[0].p_min <= 0.5 <= full[0].p_max

    def test_two_interleaved_trains_recovered(self):
        a = np.arange(9) * 0.5  # 0.0 .. 4.0
        b = 0.17 + np.arange(5) * 1.2  # 0.17 .. 4.97
        t = np.unique(np.concatenate([a, b]))
        cfg = SweepConfig(0.4, 1.5, 0.2)
        found = longest_rel_periodic(t, cfg)
        tuples = {s.timestamps for s in found}
        assert tuple(a) in tuples
        assert tuple(b) in tuples
        # Cross-check each band against exhaustive search.
        for lo, hi in cfg.bands():
            best, optima = brute_force_longest_periodic(t, lo, hi)
            ours = longest_abs_periodic(t, lo, hi)
            assert {s.timestamps for s in ours} == optima

    def test_gaps_beyond_sweep_yield_nothing(self):
        t = np.arange(10) * 2.0
        assert longest_rel_periodic(t, SweepConfig(0.4, 1.5, 0.2)) == []

    def test_no_duplicate_candidates_across_bands(self):
        rng = np.random.default_rng(21)
        t = np.cumsum(rng.uniform(0.3, 1.6, size=80))
        found = longest_rel_periodic(t, SweepConfig(0.4, 1.5, 0.2))
        tuples = [s.timestamps for s in found]
        assert len(tuples) == len(set(tuples))


class TestSegment:
    def test_single_burst_single_candidate(self):
        peaks = as_peaks(np.arange(31) * 1.0)  # 30 s of 1 Hz events
        cands = segment(peaks, SweepConfig(0.4, 1.5, 0.2), min_len=3)
        assert len(cands) == 1
        assert cands[0].c1 == 0.0
        assert cands[0].c2 == 30.0

    def test_two_bursts_split_by_silence(self):
        times = list(np.arange(11) * 1.0) + list(60.0 + np.arange(11) * 1.0)
        cands = segment(as_peaks(times), SweepConfig(0.4, 1.5, 0.2), min_len=3)
        assert len(cands) == 2
        assert cands[0].c1 == 0.0 and cands[1].c1 == 60.0

    def test_min_len_filters_short_runs(self):
        times = [0.0, 1.0, 2.0]  # length 2 run
        cands = segment(as_peaks(times), SweepConfig(0.4, 1.5, 0.2), min_len=3)
        assert cands == []

    def test_candidates_sorted_by_start(self):
        rng = np.random.default_rng(22)
        times = np.unique(np.round(np.cumsum(rng.uniform(0.3, 2.5, size=120)), 3))
        cands = segment(as_peaks(times), SweepConfig(0.4, 1.5, 0.2), min_len=2)
        keys = [(c.c1, c.p_min) for c in cands]
        assert keys == sorted(keys)

    def test_planted_train_with_spurious_peaks(self):
        # 1.5 Hz planted chewing plus ~5 spurious peaks per minute: the
        # planted interval must come back with boundary error within one
        # inter-chew period.
        rng = np.random.default_rng(23)
        period = 0.65
        planted = 100.0 + np.arange(46) * period
        for trial in range(5):
            spurious = rng.uniform(60.0, 160.0, size=8)
            times = np.unique(np.concatenate([planted, np.round(spurious, 3)]))
            cands = segment(as_peaks(times), SweepConfig(0.4, 1.5, 0.2), min_len=3)
            overlapping = [
                c for c in cands if c.c2 > planted[0] and c.c1 < planted[-1]
            ]
            best = max(overlapping, key=lambda c: c.length)
            assert abs(best.c1 - planted[0]) <= period + 1e-9
            assert abs(best.c2 - planted[-1]) <= period + 1e-9

    def test_translation_shifts_boundaries_only(self):
        rng = np.random.default_rng(24)
        times = np.cumsum(rng.uniform(0.3, 1.8, size=60))
        base = segment(as_peaks(times), SweepConfig(0.4, 1.5, 0.2), min_len=2)
        moved = segment(as_peaks(times + 4096.0), SweepConfig(0.4, 1.5, 0.2), min_len=2)
        assert len(base) == len(moved)
        for a, b in zip(base, moved):
            assert b.timestamps == tuple(v + 4096.0 for v in a.timestamps)
            assert (b.p_min, b.p_max, b.epsilon, b.length) == (
                a.p_min, a.p_max, a.epsilon, a.length,
            )


class TestLinearScaling:
    def test_runtime_is_roughly_linear(self):
        # Bounded density and fixed band: 10x the events should cost about
        # 10x the time.  Unit-level smoke check; the acceptance suite runs
        # the full-size version.
        def planted(n, seed):
            rng = np.random.default_rng(seed)
            return np.cumsum(rng.uniform(0.5, 1.0, size=n))

        def timed(n):
            t = planted(n, seed=1)
            start = time.perf_counter()
            longest_abs_periodic(t, 0.5, 1.0)
            return time.perf_counter() - start

        timed(2000)  # warm-up
        small = min(timed(2000) for _ in range(3))
        large = min(timed(20000) for _ in range(3))
        assert large / small < 25


class TestInvariantValidation:
    def test_gap_outside_band_rejected(self):
        with pytest.raises(ValueError, match="outside band"):
            PeriodicSubsequence(timestamps=(0.0, 2.0), p_min=0.5, p_max=1.0, epsilon=1.0)

    def test_band_ratio_must_respect_epsilon(self):
        with pytest.raises(ValueError, match="ratio"):
            PeriodicSubsequence(timestamps=(0.0, 0.9), p_min=0.5, p_max=1.0, epsilon=0.2)

    def test_band_edge_ratio_allowed(self):
        sub = PeriodicSubsequence(timestamps=(0.0, 0.45), p_min=0.4, p_max=0.48, epsilon=0.2)
        assert sub.length == 1

    def test_single_timestamp_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            PeriodicSubsequence(timestamps=(1.0,), p_min=0.5, p_max=0.6, epsilon=0.2)


class TestCandidateCsv:
    def test_roundtrip(self, tmp_path):
        cands = segment(as_peaks(np.arange(21) * 0.5), SweepConfig(0.4, 1.5, 0.2), 3)
        path = tmp_path / "candidates.csv"
        write_candidate_csv(path, cands)
        back = read_candidate_csv(path)
        assert len(back) == len(cands)
        for a, b in zip(cands, back):
            assert (b.c1, b.c2, b.p_min, b.p_max, b.epsilon, b.length) == (
                a.c1, a.c2, a.p_min, a.p_max, a.epsilon, a.length,
            )
