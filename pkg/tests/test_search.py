from __future__ import annotations

import json

import numpy as np
import pytest
import scipy.stats

from fidsearch.clustering import kmeans
from fidsearch.errors import ValidationError
from fidsearch.features_io import FeatureTable, IdentityIndex, default_identity_index
from fidsearch.fid import fid, sqrt_psd, summarize
from fidsearch.search import (
    _cluster_fid,
    derive_seeds,
    draw_images,
    run_search,
    sample_training_set,
    score_clusters,
    softmax_weights,
)


def singleton_index(ids):
    return IdentityIndex(identities={x: [x] for x in ids}, attrs={x: {} for x in ids})


class TestSoftmaxWeights:
    def test_equal_scores_split_evenly(self):
        w = softmax_weights(np.array([7.0, 7.0]))
        assert np.max(np.abs(w - 0.5)) <= 1e-12

    def test_unit_gap(self):
        w = softmax_weights(np.array([100.0, 101.0]))
        assert abs(w[0] - 0.7310585786300049) <= 1e-9
        assert abs(w[1] - 0.2689414213699951) <= 1e-9

    def test_wide_gap_concentrates(self):
        w = softmax_weights(np.array([99.51, 170.80]))
        assert w[0] >= 1.0 - 1e-30

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            v = rng.uniform(0, 500, size=rng.integers(1, 20))
            assert abs(softmax_weights(v).sum() - 1.0) <= 1e-9

    def test_shift_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            v = rng.uniform(0, 300, size=rng.integers(2, 15))
            shift = rng.uniform(-1000, 1000)
            assert np.max(np.abs(softmax_weights(v) - softmax_weights(v + shift))) <= 1e-9

    def test_strict_order_reversal(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            v = rng.uniform(0, 100, size=8)
            w = softmax_weights(v)
            order = np.argsort(v)
            assert np.all(np.diff(w[order]) < 0)  # lower score, strictly higher weight

    def test_infinite_scores_get_zero_weight(self):
        w = softmax_weights(np.array([3.0, np.inf, 5.0]))
        assert w[1] == 0.0
        assert abs(w.sum() - 1.0) <= 1e-12
        assert w[0] > w[2] > 0

    def test_all_infinite_rejected(self):
        with pytest.raises(ValidationError):
            softmax_weights(np.array([np.inf, np.inf]))

    def test_single_cluster_gets_all_mass(self):
        assert softmax_weights(np.array([42.0]))[0] == 1.0


class TestDrawImages:
    def test_exhaustive_draw_any_seed(self):
        ids = [f"s{j}" for j in range(10)]
        idx = singleton_index(ids)
        for seed in (0, 7, 123):
            sel, _ = draw_images(ids, np.full(10, 0.1), idx, 10, np.random.default_rng(seed))
            assert sorted(sel) == sorted(ids)

    def test_zero_mass_identities_never_drawn(self):
        ids = [f"a{j}" for j in range(5)] + [f"b{j}" for j in range(5)]
        idx = singleton_index(ids)
        masses = np.array([0.2] * 5 + [0.0] * 5)
        for seed in range(20):
            sel, _ = draw_images(ids, masses.copy(), idx, 3, np.random.default_rng(seed))
            assert all(s.startswith("a") for s in sel)

    def test_expected_split_matches_weights(self):
        ids = [f"c{c}-{i:02d}" for c in (0, 1) for i in range(50)]
        idx = singleton_index(ids)
        masses = np.array([0.8 / 50] * 50 + [0.2 / 50] * 50)
        total = 0
        for seed in range(2000):
            sel, _ = draw_images(ids, masses.copy(), idx, 10, np.random.default_rng(seed))
            total += sum(1 for s in sel if s.startswith("c0"))
        mean = total / 2000
        assert 7.5 <= mean <= 8.5

    def test_multi_image_identity_truncated_to_hit_n(self):
        idx = IdentityIndex(
            identities={"p": ["x0", "x1", "x2"], "q": ["y0", "y1", "y2"]},
            attrs={"p": {}, "q": {}},
        )
        sel, drawn = draw_images(["p", "q"], np.array([0.5, 0.5]), idx, 4, np.random.default_rng(0))
        assert len(sel) == 4
        assert len(set(sel)) == 4
        assert set(drawn) == {"p", "q"}

    def test_n_beyond_available_rejected(self):
        ids = ["u0", "u1"]
        with pytest.raises(ValidationError):
            draw_images(ids, np.array([0.5, 0.5]), singleton_index(ids), 3, np.random.default_rng(0))

    def test_n_below_one_rejected(self):
        ids = ["u0"]
        with pytest.raises(ValidationError):
            draw_images(ids, np.array([1.0]), singleton_index(ids), 0, np.random.default_rng(0))

    def test_uniform_masses_sample_uniformly(self):
        # single-cluster case reduces to uniform sampling without replacement
        ids = [f"i{j:02d}" for j in range(30)]
        idx = singleton_index(ids)
        counts = np.zeros(30)
        for seed in range(2000):
            sel, _ = draw_images(ids, np.full(30, 1 / 30), idx, 5, np.random.default_rng(seed))
            for s in sel:
                counts[int(s[1:])] += 1
        assert scipy.stats.chisquare(counts).pvalue > 0.01


class TestClusterScoring:
    def test_low_rank_route_matches_plain_fid(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            d = int(rng.integers(2, 40))
            m = int(rng.integers(2, 60))
            rows = (rng.standard_normal((m, d)) * rng.uniform(0.5, 2.0)).astype(np.float32)
            trows = rng.standard_normal((max(3, d // 2 + 2), d)).astype(np.float32)
            target = summarize(trows)
            got = _cluster_fid(rows, target, sqrt_psd(target.cov))
            want = fid(target, summarize(rows))
            assert abs(got - want) <= 1e-6 * max(1.0, abs(want))

    def test_degenerate_cluster_rows(self):
        rng = np.random.default_rng(8)
        rows = np.ones((2, 5), dtype=np.float32)
        target = summarize(rng.standard_normal((20, 5)))
        got = _cluster_fid(rows, target, sqrt_psd(target.cov))
        want = fid(target, summarize(rows))
        assert abs(got - want) <= 1e-8

    def test_small_clusters_get_infinite_score(self):
        rng = np.random.default_rng(9)
        centers = np.array([[0.0, 0.0]] * 3 + [[10.0, 10.0]] * 2 + [[20.0, 20.0]])
        data = (centers + rng.standard_normal(centers.shape) * 0.01).astype(np.float32)
        t = FeatureTable(ids=[f"m{j}" for j in range(6)], data=data)
        idx = default_identity_index(t)
        from fidsearch.clustering import identity_features

        ids, feats = identity_features(t, idx)
        clustering = kmeans(feats, 3, seed=0, ids=ids)
        target = rng.standard_normal((10, 2)).astype(np.float32)
        scores = score_clusters(target, clustering, t, idx, min_cluster_images=3)
        below = clustering.sizes < 3
        assert below.sum() == 2
        assert np.all(np.isinf(scores.fids[below]))
        assert np.all(scores.weights[below] == 0.0)
        assert np.isfinite(scores.fids[~below]).all()

    def test_all_clusters_below_floor_rejected(self):
        rng = np.random.default_rng(19)
        data = rng.standard_normal((6, 2)).astype(np.float32)
        t = FeatureTable(ids=[f"w{j}" for j in range(6)], data=data)
        idx = default_identity_index(t)
        from fidsearch.clustering import identity_features

        ids, feats = identity_features(t, idx)
        clustering = kmeans(feats, 3, seed=0, ids=ids)
        with pytest.raises(ValidationError):
            score_clusters(data, clustering, t, idx, min_cluster_images=100)

    def test_threaded_scoring_matches_serial(self, small_pool, small_target):
        table, index = small_pool
        from fidsearch.clustering import identity_features

        ids, feats = identity_features(table, index)
        clustering = kmeans(feats, 5, seed=0, ids=ids)
        serial = score_clusters(small_target.data, clustering, table, index, threads=1)
        threaded = score_clusters(small_target.data, clustering, table, index, threads=4)
        assert np.array_equal(serial.fids, threaded.fids)
        assert np.array_equal(serial.weights, threaded.weights)


class TestSampleTrainingSet:
    def test_single_cluster_exhaustive(self):
        rng = np.random.default_rng(10)
        data = rng.standard_normal((8, 2)).astype(np.float32)
        t = FeatureTable(ids=[f"e{j}" for j in range(8)], data=data)
        idx = default_identity_index(t)
        from fidsearch.clustering import identity_features

        ids, feats = identity_features(t, idx)
        clustering = kmeans(feats, 1, seed=0, ids=ids)
        scores = score_clusters(rng.standard_normal((5, 2)), clustering, t, idx)
        manifest = sample_training_set(scores, clustering, idx, 8, seed=3)
        assert sorted(manifest.selected) == sorted(t.ids)

    def test_manifest_json_schema(self, tmp_path):
        rng = np.random.default_rng(11)
        data = rng.standard_normal((12, 2)).astype(np.float32)
        t = FeatureTable(ids=[f"g{j:02d}" for j in range(12)], data=data)
        idx = default_identity_index(t)
        from fidsearch.clustering import identity_features

        ids, feats = identity_features(t, idx)
        clustering = kmeans(feats, 2, seed=0, ids=ids)
        scores = score_clusters(rng.standard_normal((6, 2)), clustering, t, idx)
        manifest = sample_training_set(scores, clustering, idx, 5, seed=1)
        manifest.write(tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        assert set(doc) == {
            "version",
            "config",
            "cluster_fids",
            "weights",
            "selected_ids",
            "seed",
            "per_identity_weight",
        }
        assert len(doc["selected_ids"]) == 5
        assert len(doc["cluster_fids"]) == 2
        manifest.write_id_list(tmp_path / "m.ids")
        lines = (tmp_path / "m.ids").read_text().splitlines()
        assert lines == manifest.selected


class TestRunSearch:
    def test_biased_pool_selects_target_half(self, small_pool, small_target):
        table, index = small_pool
        hits = []
        for seed in range(20):
            manifest = run_search(table, index, small_target, k=2, n=20, seed=seed)
            frac = sum(1 for s in manifest.selected if s.startswith("minority")) / 20
            hits.append(frac)
        assert np.mean(hits) >= 0.9

    def test_seed_reproducibility(self, small_pool, small_target):
        table, index = small_pool
        a = run_search(table, index, small_target, k=3, n=10, seed=5)
        b = run_search(table, index, small_target, k=3, n=10, seed=5)
        assert a.selected == b.selected
        assert a.to_json() == b.to_json()

    def test_different_seed_differs(self, small_pool, small_target):
        table, index = small_pool
        a = run_search(table, index, small_target, k=3, n=10, seed=0)
        b = run_search(table, index, small_target, k=3, n=10, seed=1)
        assert a.selected != b.selected

    def test_derived_streams_are_distinct(self):
        seeds = derive_seeds(0)
        assert len(seeds) == 2 and seeds[0] != seeds[1]
        assert derive_seeds(0) == derive_seeds(0)
        assert derive_seeds(1) != derive_seeds(0)

    def test_selection_count_exact(self, small_pool, small_target):
        table, index = small_pool
        for n in (1, 7, 50):
            manifest = run_search(table, index, small_target, k=4, n=n, seed=2)
            assert len(manifest.selected) == n
            assert len(set(manifest.selected)) == n

    def test_selected_ids_exist_in_pool(self, small_pool, small_target):
        table, index = small_pool
        manifest = run_search(table, index, small_target, k=4, n=30, seed=3)
        pool_ids = set(table.ids)
        assert all(s in pool_ids for s in manifest.selected)
