import numpy as np
import pytest

from chewdet.episodes import (
    DbscanConfig,
    SecondScore,
    cluster,
    episodes_from_clusters,
    read_episode_csv,
    score_seconds,
    write_episode_csv,
)
from chewdet.periodic import CandidateWindow
from oracles import naive_dbscan_1d


def cand(c1, c2):
    return CandidateWindow(c1=c1, c2=c2, p_min=0.5, p_max=0.6, epsilon=0.2, length=5)


def scores_from(pairs):
    return [SecondScore(second=s, score=v) for s, v in pairs]


class TestScoreSeconds:
    def test_single_candidate_coverage(self):
        out = score_seconds([cand(10.2, 13.8)])
        assert [(s.second, s.score) for s in out] == [(10, 1), (11, 1), (12, 1), (13, 1)]

    def test_duplicate_candidates_double_score(self):
        out = score_seconds([cand(10.2, 13.8), cand(10.2, 13.8)])
        assert [(s.second, s.score) for s in out] == [(10, 2), (11, 2), (12, 2), (13, 2)]

    def test_partial_overlap_counts(self):
        out = score_seconds([cand(0.0, 10.0), cand(5.0, 15.0)])
        by_second = {s.second: s.score for s in out}
        assert set(by_second) == set(range(0, 16))
        assert all(by_second[s] == 2 for s in range(5, 11))
        assert all(by_second[s] == 1 for s in list(range(0, 5)) + list(range(11, 16)))

    def test_total_mass_is_sum_of_coverages(self):
        rng = np.random.default_rng(1)
        cands = []
        for _ in range(30):
            c1 = float(rng.uniform(0, 500))
            cands.append(cand(c1, c1 + float(rng.uniform(0.5, 40))))
        out = score_seconds(cands)
        total = sum(s.score for s in out)
        expected = sum(
            int(np.floor(c.c2)) - int(np.floor(c.c1)) + 1 for c in cands
        )
        assert total == expected

    def test_empty_input(self):
        assert score_seconds([]) == []


class TestCluster:
    def test_isolated_second_is_noise(self):
        scores = scores_from([(100, 1)])
        assert cluster(scores, DbscanConfig(eps=5, min_pts=2)) == []

    def test_dense_run_is_one_cluster(self):
        scores = scores_from([(s, 1) for s in range(60)])
        out = cluster(scores, DbscanConfig(eps=5, min_pts=3, use_score_weight=False))
        assert len(out) == 1
        assert out[0] == tuple(range(60))

    def test_two_runs_far_apart_are_two_clusters(self):
        scores = scores_from(
            [(s, 1) for s in range(30)] + [(1000 + s, 1) for s in range(30)]
        )
        out = cluster(scores, DbscanConfig(eps=10, min_pts=3, use_score_weight=False))
        assert len(out) == 2

    def test_score_weighting_can_make_lone_second_core(self):
        cfg = DbscanConfig(eps=5, min_pts=3, use_score_weight=True)
        assert cluster(scores_from([(50, 3)]), cfg) == [(50,)]
        assert cluster(scores_from([(50, 2)]), cfg) == []

    def test_unsorted_scores_rejected(self):
        scores = [SecondScore(5, 1), SecondScore(3, 1)]
        with pytest.raises(ValueError, match="sorted"):
            cluster(scores, DbscanConfig(eps=5, min_pts=2))

    def test_matches_naive_reference_on_random_inputs(self):
        rng = np.random.default_rng(2)
        for trial in range(200):
            n = int(rng.integers(1, 60))
            seconds = np.unique(rng.integers(0, 300, size=n))
            weights = rng.integers(1, 4, size=len(seconds))
            scores = scores_from(list(zip(seconds.tolist(), weights.tolist())))
            eps = float(rng.integers(1, 20))
            min_pts = int(rng.integers(1, 8))
            use_weight = bool(rng.integers(0, 2))
            cfg = DbscanConfig(eps=eps, min_pts=min_pts, use_score_weight=use_weight)
            ours = cluster(scores, cfg)
            ref = naive_dbscan_1d(
                [s.second for s in scores],
                [s.score if use_weight else 1 for s in scores],
                eps,
                min_pts,
            )
            assert sorted(ours) == sorted(tuple(int(v) for v in c) for c in ref)

    def test_point_order_cannot_matter(self):
        # The implementation takes sorted input by contract; the reference
        # sees a shuffled copy and must land on the same set of clusters.
        rng = np.random.default_rng(3)
        seconds = np.unique(rng.integers(0, 200, size=40))
        scores = scores_from([(int(s), 1) for s in seconds])
        cfg = DbscanConfig(eps=8, min_pts=3, use_score_weight=False)
        ours = sorted(cluster(scores, cfg))
        perm = rng.permutation(len(seconds))
        ref = naive_dbscan_1d(seconds[perm], np.ones(len(seconds)), 8, 3)
        assert ours == sorted(tuple(int(v) for v in c) for c in ref)

    def test_every_clustered_second_was_scored(self):
        rng = np.random.default_rng(4)
        seconds = np.unique(rng.integers(0, 500, size=120))
        scores = scores_from([(int(s), int(v)) for s, v in zip(seconds, rng.integers(1, 5, len(seconds)))])
        out = cluster(scores, DbscanConfig(eps=10, min_pts=4))
        scored = {s.second for s in scores}
        for members in out:
            assert set(members) <= scored

    def test_raising_min_pts_never_adds_seconds(self):
        rng = np.random.default_rng(5)
        seconds = np.unique(rng.integers(0, 400, size=150))
        scores = scores_from([(int(s), 1) for s in seconds])
        previous = None
        for min_pts in (1, 2, 4, 8, 16):
            cfg = DbscanConfig(eps=12, min_pts=min_pts, use_score_weight=False)
            covered = {s for members in cluster(scores, cfg) for s in members}
            if previous is not None:
                assert covered <= previous
            previous = covered


class TestEpisodesFromClusters:
    def test_nearby_clusters_merge(self):
        clusters = [tuple(range(100, 161)), tuple(range(400, 461))]
        episodes = episodes_from_clusters(clusters, delta=900.0)
        assert [(e.start, e.end) for e in episodes] == [(100.0, 461.0)]

    def test_small_delta_keeps_separate(self):
        clusters = [tuple(range(100, 161)), tuple(range(400, 461))]
        episodes = episodes_from_clusters(clusters, delta=100.0)
        assert [(e.start, e.end) for e in episodes] == [(100.0, 161.0), (400.0, 461.0)]

    def test_disjointness_enforced(self):
        with pytest.raises(ValueError, match="disjoint"):
            episodes_from_clusters([(1, 2, 3), (3, 4)], delta=10.0)

    def test_output_sorted(self):
        clusters = [tuple(range(500, 520)), tuple(range(0, 20))]
        episodes = episodes_from_clusters(clusters, delta=10.0)
        starts = [e.start for e in episodes]
        assert starts == sorted(starts)


class TestEpisodeCsv:
    def test_roundtrip(self, tmp_path):
        positives = [cand(100.0, 160.0), cand(120.0, 170.0), cand(400.0, 450.0)]
        scores = score_seconds(positives)
        clusters = cluster(scores, DbscanConfig(eps=30, min_pts=10))
        episodes = episodes_from_clusters(clusters, delta=900.0, participant="P1")
        path = tmp_path / "episodes.csv"
        write_episode_csv(path, episodes, scores)
        back = read_episode_csv(path)
        assert [(e.start, e.end) for e in back] == [(e.start, e.end) for e in episodes]
        header = path.read_text().splitlines()[0]
        assert header == "participant,start_s,end_s,n_seconds,peak_score"
