import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maplesskd import metrics as M
from oracles import bf_scene, random_scene


def test_oracle_equivalence_200_scenes():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        K = int(rng.integers(1, 7))
        k = int(rng.integers(1, K + 1))
        modes, probs, gt = random_scene(rng, K)
        p = probs[:k] / probs[:k].sum()
        ref = bf_scene(modes.tolist(), p.tolist(), gt.tolist(), k)
        got = {
            "minADE": M.min_ade(modes, gt, k),
            "minFDE": M.min_fde(modes, gt, k),
            "MR": M.miss_rate(modes[None], gt[None], k),
            "brier_minFDE": M.brier_min_fde(modes[:k], p, gt, k),
        }
        for name in M.METRICS:
            worst = max(worst, abs(got[name] - ref[name]))
    assert worst <= 1e-12


def test_single_mode_exact_match_is_zero():
    gt = np.random.default_rng(1).normal(size=(30, 2))
    assert M.min_ade(gt[None], gt, 1) == 0.0
    assert M.min_fde(gt[None], gt, 1) == 0.0
    assert M.brier_min_fde(gt[None], np.array([1.0]), gt, 1) == 0.0


def test_miss_threshold_is_strict():
    gt = np.zeros((1, 5, 2))
    on = np.zeros((1, 1, 5, 2))
    on[0, 0, -1] = (2.0, 0.0)
    assert M.miss_rate(on, gt, 1) == 0.0
    on[0, 0, -1] = (2.0 + 1e-9, 0.0)
    assert M.miss_rate(on, gt, 1) == 1.0


def test_k_bounds():
    modes = np.zeros((3, 4, 2))
    with pytest.raises(ValueError):
        M.min_ade(modes, np.zeros((4, 2)), 4)
    with pytest.raises(ValueError):
        M.min_fde(modes, np.zeros((4, 2)), 0)


def test_brier_requires_normalized_probs():
    modes = np.zeros((2, 4, 2))
    with pytest.raises(ValueError):
        M.brier_min_fde(modes, np.array([0.7, 0.7]), np.zeros((4, 2)), 2)


def test_miss_rate_empty():
    with pytest.raises(ValueError):
        M.miss_rate(np.zeros((0, 1, 4, 2)), np.zeros((0, 4, 2)), 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 8))
def test_min_errors_non_increasing_in_k(seed, K):
    rng = np.random.default_rng(seed)
    modes, probs, gt = random_scene(rng, K, T=10)
    prev_ade = prev_fde = np.inf
    for k in range(1, K + 1):
        a, f = M.min_ade(modes, gt, k), M.min_fde(modes, gt, k)
        assert a <= prev_ade and f <= prev_fde
        prev_ade, prev_fde = a, f


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_report_top_k_nested_and_monotone(seed):
    rng = np.random.default_rng(seed)
    N, K = 12, 8
    data = [random_scene(rng, K, T=10) for _ in range(N)]
    modes = np.stack([d[0] for d in data])
    probs = np.stack([d[1] for d in data])
    gts = np.stack([d[2] for d in data])
    rep = M.compute_report(modes, probs, gts, range(1, K + 1))
    for k in range(1, K):
        for name in ("minADE", "minFDE", "MR"):
            assert rep.get(name, k + 1) <= rep.get(name, k) + 1e-15


def test_top_k_orders_by_probability():
    modes = np.arange(3)[:, None, None] * np.ones((3, 2, 2))
    m, p = M.top_k(modes[None], np.array([[0.2, 0.5, 0.3]]), 2)
    np.testing.assert_array_equal(m[0, :, 0, 0], [1, 2])
    np.testing.assert_allclose(p, [[0.625, 0.375]])


def test_report_outputs(tmp_path):
    rng = np.random.default_rng(2)
    data = [random_scene(rng, 6) for _ in range(5)]
    rep = M.compute_report(np.stack([d[0] for d in data]), np.stack([d[1] for d in data]),
                           np.stack([d[2] for d in data]), (1, 6))
    assert rep.n_scenes == 5
    assert "minFDE_6" in rep.to_text()
    rep.write_table(tmp_path / "m.csv")
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert rows[0].startswith("K,minADE") and len(rows) == 3


def test_aggregate_seeds_mean_and_std():
    reps = [M.MetricReport({6: {m: v for m in M.METRICS}}, n_scenes=10) for v in (1.0, 2.0, 3.0)]
    agg = M.aggregate_seeds(reps)
    assert agg.get("minFDE", 6) == 2.0
    assert agg.std[6]["minFDE"] == pytest.approx(1.0)
    assert "+-" in agg.to_text()
    with pytest.raises(ValueError):
        M.aggregate_seeds([])
