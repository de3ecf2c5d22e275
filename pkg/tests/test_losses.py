import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maplesskd import diffcore as dc
from maplesskd import losses as L
from maplesskd.diffcore import Tape, Tensor
from maplesskd.gradchecks import LOSS_CASES, run_case
from maplesskd.nets import GoalSetPrediction, MixturePrediction
from oracles import scan_minimize


def _mixture(mu, sigma, logits, sp=None):
    t = lambda x: None if x is None else Tensor(np.asarray(x, float))  # noqa: E731
    return MixturePrediction(t(mu), t(sigma), t(logits), t(sp))


# ---------------------------------------------------------------- prediction loss


def test_pred_loss_perfect_single_mode_laplace():
    T = 30
    gt = np.random.default_rng(0).normal(size=(1, T, 2))
    pred = _mixture(gt[:, None], np.ones((1, 1, T, 2)), np.zeros((1, 1)))
    assert L.pred_loss_wta(pred, gt, "laplace").item() == pytest.approx(2 * T * np.log(2), rel=1e-14)


def test_pred_loss_sigma_scaling():
    T, c = 30, 1.7
    gt = np.random.default_rng(1).normal(size=(1, T, 2))
    base = L.pred_loss_wta(_mixture(gt[:, None], np.ones((1, 1, T, 2)), np.zeros((1, 1))), gt).item()
    scaled = L.pred_loss_wta(_mixture(gt[:, None], np.full((1, 1, T, 2), c), np.zeros((1, 1))), gt).item()
    assert scaled - base == pytest.approx(2 * T * np.log(c), rel=1e-12)


def test_best_mode_tie_goes_to_lower_index():
    gt = np.zeros((1, 3, 2))
    mu = np.stack([np.full((3, 2), 1.0), np.full((3, 2), -1.0)])[None]
    assert L.best_mode(mu, gt)[0] == 0
    assert L.best_mode(mu[:, ::-1], gt)[0] == 0


def test_pred_loss_gradient_only_reaches_best_mode():
    rng = np.random.default_rng(2)
    mu = Tensor(rng.normal(size=(1, 3, 4, 2)) * 5, trainable=True)
    sigma = Tensor(np.ones((1, 3, 4, 2)), trainable=True)
    pi = Tensor(rng.normal(size=(1, 3)), trainable=True)
    gt = mu.data[:, 1] + 0.1
    with Tape() as tape:
        loss = L.pred_loss_wta(MixturePrediction(mu, sigma, pi), gt)
    g = dc.backward(tape, loss)
    assert np.abs(g[mu][:, [0, 2]]).max() == 0.0
    assert np.abs(g[sigma][:, [0, 2]]).max() == 0.0
    assert np.abs(g[mu][:, 1]).max() > 0


def test_nll_unknown_kind():
    with pytest.raises(ValueError):
        L.nll("cauchy", Tensor(0.0), Tensor(0.0), Tensor(1.0))


# ---------------------------------------------------------------- feature distillation


def test_fkd_unit_delta_is_squared_error():
    rng = np.random.default_rng(3)
    f_t, f_s = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
    z = 0.37
    got = L.fkd_loss(f_t, Tensor(f_s), Tensor(np.ones((4, 6))), z=z).item()
    want = np.mean(np.sum((f_t - f_s) ** 2, axis=1)) + 6 * z
    assert got == pytest.approx(want, rel=1e-14)


def test_fkd_zero_residual_is_constant():
    f = np.random.default_rng(4).normal(size=(2, 5))
    assert L.fkd_loss(f, Tensor(f), Tensor(np.ones((2, 5))), z=0.5).item() == pytest.approx(2.5, abs=1e-15)


@pytest.mark.parametrize("r", [0.05, 0.3, 1.0, 2.5, -1.7])
def test_fkd_optimal_delta_matches_scan(r):
    def loss(delta):
        return L.fkd_loss(np.array([[r]]), Tensor([[0.0]]), Tensor([[delta]])).item()

    found = scan_minimize(loss, 1e-3, 10.0)
    assert found ** 2 == pytest.approx(2 * r * r, rel=1e-6)
    assert loss(found) == pytest.approx(0.5 * np.log(2 * r * r) + 0.5, rel=1e-9, abs=1e-12)


def test_fkd_shape_mismatch():
    with pytest.raises(dc.ShapeError):
        L.fkd_loss(np.zeros((2, 3)), Tensor(np.zeros((2, 4))), Tensor(np.ones((2, 4))))


# ---------------------------------------------------------------- output distillation


@pytest.mark.parametrize("r", [0.1, 0.8, 3.0])
def test_okd_gaussian_optimal_scale_matches_scan(r):
    cfg = L.LossConfig(distribution="gaussian", temperature=1.0)
    teacher = _mixture(np.full((1, 1, 1, 1), r), np.ones((1, 1, 1, 1)), np.zeros((1, 1)))

    def loss(s):
        student = _mixture(np.zeros((1, 1, 1, 1)), np.ones((1, 1, 1, 1)), np.zeros((1, 1)), np.full((1, 1, 1, 1), s))
        return L.okd_regression(teacher, student, cfg).item()

    found = scan_minimize(loss, 1e-3, 10.0)
    assert found ** 2 == pytest.approx(r * r, rel=1e-6)


@pytest.mark.parametrize("r", [0.1, 0.8, -3.0])
def test_okd_laplace_optimal_scale_matches_scan(r):
    cfg = L.LossConfig(distribution="laplace", temperature=1.0)
    teacher = _mixture(np.full((1, 1, 1, 1), r), np.ones((1, 1, 1, 1)), np.zeros((1, 1)))

    def loss(s):
        student = _mixture(np.zeros((1, 1, 1, 1)), np.ones((1, 1, 1, 1)), np.zeros((1, 1)), np.full((1, 1, 1, 1), s))
        return L.okd_regression(teacher, student, cfg).item()

    assert scan_minimize(loss, 1e-3, 10.0) == pytest.approx(abs(r), rel=1e-6)


def test_okd_zero_residual_value():
    rng = np.random.default_rng(5)
    K, T, z, tau = 3, 4, 0.25, 0.5
    mu = rng.normal(size=(1, K, T, 2))
    logits = rng.normal(size=(1, K))
    cfg = L.LossConfig(distribution="gaussian", temperature=tau, normalization_constant_z=z)
    teacher = _mixture(mu, np.ones_like(mu), logits)
    student = _mixture(mu, np.ones_like(mu), logits, np.ones_like(mu))
    p = np.exp(logits / tau) / np.exp(logits / tau).sum()
    want = K * T * 2 * z - np.sum(p * np.log(p))
    assert L.okd_regression(teacher, student, cfg).item() == pytest.approx(want, rel=1e-12)


def test_soft_ce_large_temperature_tends_to_log_k():
    logits_t = np.array([[3.0, -1.0, 0.5, 2.0]])
    logits_s = np.array([[-2.0, 1.0, 0.0, 4.0]])
    ce = L.soft_cross_entropy(logits_t, Tensor(logits_s), 1e3).item()
    assert ce == pytest.approx(np.log(4), abs=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.2, 3.0))
def test_soft_ce_stationary_at_matching_distribution(seed, tau):
    rng = np.random.default_rng(seed)
    t = rng.normal(size=(1, 5))
    s = Tensor(t + rng.normal(), trainable=True)  # same softmax, shifted logits
    with Tape() as tape:
        ce = L.soft_cross_entropy(t, s, tau).sum()
    np.testing.assert_allclose(dc.backward(tape, ce)[s], 0.0, atol=1e-12)


def test_okd_requires_equal_modes():
    a = _mixture(np.zeros((1, 2, 3, 2)), np.ones((1, 2, 3, 2)), np.zeros((1, 2)))
    b = _mixture(np.zeros((1, 3, 3, 2)), np.ones((1, 3, 3, 2)), np.zeros((1, 3)), np.ones((1, 3, 3, 2)))
    with pytest.raises(dc.ShapeError):
        L.okd_regression(a, b, L.LossConfig())


def test_teacher_samples_are_fixed_seed_draws():
    rng = np.random.default_rng(6)
    teacher = _mixture(rng.normal(size=(2, 3, 4, 2)), np.full((2, 3, 4, 2), 0.5), np.zeros((2, 3)))
    cfg = L.LossConfig(teacher_samples=8, sample_seed=3)
    a, b = L.teacher_targets(teacher, cfg), L.teacher_targets(teacher, cfg)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, teacher.mu.data)
    np.testing.assert_array_equal(L.teacher_targets(teacher, L.LossConfig()), teacher.mu.data)


@pytest.mark.parametrize("kwargs", [dict(temperature=0.0), dict(lambda_fd=-1.0), dict(teacher_samples=-1),
                                    dict(distribution="student_t")])
def test_loss_config_validation(kwargs):
    with pytest.raises(ValueError):
        L.LossConfig(**kwargs)


# ---------------------------------------------------------------- goal heatmaps


def test_heatmap_single_goal_is_one():
    mu = np.random.default_rng(7).normal(size=(1, 1, 5, 2))
    pred = _mixture(mu, np.ones_like(mu), np.zeros((1, 1)))
    p = L.render_student_goal_heatmap(pred, mu[:, 0, -1][:, None, :])
    np.testing.assert_allclose(p.data, [[1.0]], rtol=0, atol=1e-15)


def test_heatmap_symmetric_goals_split_evenly():
    mu = np.zeros((1, 1, 3, 2))
    pred = _mixture(mu, np.ones_like(mu), np.zeros((1, 1)))
    p = L.render_student_goal_heatmap(pred, np.array([[[1.5, 0.0], [-1.5, 0.0]]]))
    np.testing.assert_allclose(p.data, [[0.5, 0.5]], rtol=0, atol=1e-15)


@pytest.mark.parametrize("kind", ["gaussian", "laplace"])
def test_heatmap_matches_brute_force(kind):
    rng = np.random.default_rng(8)
    B, K, T, N = 3, 4, 5, 9
    mu = rng.normal(scale=3, size=(B, K, T, 2))
    sigma = rng.uniform(0.5, 2, size=(B, K, T, 2))
    goals = rng.normal(scale=3, size=(B, N, 2))
    got = L.render_student_goal_heatmap(_mixture(mu, sigma, np.zeros((B, K))), goals, kind).data

    def density(x, m, s):
        if kind == "gaussian":
            return np.prod(np.exp(-((x - m) ** 2) / (2 * s * s)) / (np.sqrt(2 * np.pi) * s))
        return np.prod(np.exp(-np.abs(x - m) / s) / (2 * s))

    want = np.zeros((B, N))
    for b in range(B):
        for n in range(N):
            want[b, n] = max(density(goals[b, n], mu[b, k, -1], sigma[b, k, -1]) for k in range(K))
        want[b] /= want[b].sum()
    np.testing.assert_allclose(got, want, rtol=1e-10)


def test_heatmap_picks_dominant_mode_per_goal():
    mu = np.zeros((1, 2, 2, 2))
    mu[0, 0, -1] = (10.0, 0.0)
    mu[0, 1, -1] = (-10.0, 0.0)
    pred = _mixture(mu, np.ones_like(mu), np.array([[5.0, -5.0]]))
    p = L.render_student_goal_heatmap(pred, np.array([[[10.0, 0.0], [-10.0, 0.0]]])).data
    # pi is not applied, so each goal sees its own mode's peak density
    np.testing.assert_allclose(p, [[0.5, 0.5]], rtol=1e-12)


def test_heatmap_empty_goal_set():
    mu = np.zeros((1, 1, 2, 2))
    with pytest.raises(ValueError):
        L.render_student_goal_heatmap(_mixture(mu, np.ones_like(mu), np.zeros((1, 1))), np.zeros((1, 0, 2)))


def test_renormalize_uniform_top4():
    idx, p = L.renormalize_teacher_goals(np.full(10, 0.1), 4)
    np.testing.assert_allclose(p, 0.25, rtol=1e-15)
    np.testing.assert_array_equal(idx, [0, 1, 2, 3])


def test_renormalize_hand_example():
    idx, p = L.renormalize_teacher_goals(np.array([0.5, 0.3, 0.2]), 2)
    np.testing.assert_array_equal(idx, [0, 1])
    np.testing.assert_allclose(p, [0.625, 0.375], rtol=1e-15)


def test_renormalize_all_is_identity_sorted():
    probs = np.random.default_rng(9).dirichlet(np.ones(7))
    idx, p = L.renormalize_teacher_goals(probs, 7)
    np.testing.assert_allclose(p, probs[idx], rtol=1e-14)
    assert (np.diff(p) <= 0).all()


def test_renormalize_errors():
    with pytest.raises(ValueError):
        L.renormalize_teacher_goals(np.zeros(4), 2)
    with pytest.raises(ValueError):
        L.renormalize_teacher_goals(np.full(4, 0.25), 5)


def test_okd_goal_matched_is_binary_entropy():
    pt = np.array([[0.6, 0.3, 0.1]])
    got = L.okd_goal(Tensor(pt), pt).item()
    want = -np.mean(pt * np.log(pt) + (1 - pt) * np.log(1 - pt))
    assert got == pytest.approx(want, rel=1e-14)


def test_okd_goal_clamped_hand_example():
    lo, hi = L.BCE_CLAMP
    got = L.okd_goal(Tensor([[0.5, 0.5]]), np.array([[1.0, 0.0]])).item()
    want = -0.5 * ((hi * np.log(0.5) + lo * np.log(0.5)) + (lo * np.log(0.5) + hi * np.log(0.5)))
    assert got == pytest.approx(want, rel=1e-14)


def test_okd_goal_gradient_vanishes_at_match():
    pt = np.random.default_rng(10).dirichlet(np.ones(6), size=2)
    ps = Tensor(pt.copy(), trainable=True)
    with Tape() as tape:
        loss = L.okd_goal(ps, pt)
    np.testing.assert_allclose(dc.backward(tape, loss)[ps], 0.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_okd_goal_minimized_at_equality(seed):
    rng = np.random.default_rng(seed)
    pt = rng.dirichlet(np.ones(8))[None]
    best = L.okd_goal(Tensor(pt), pt).item()
    for _ in range(10):
        ps = np.clip(pt + rng.normal(scale=0.02, size=pt.shape), 1e-3, 1 - 1e-3)
        assert L.okd_goal(Tensor(ps), pt).item() >= best - 1e-15


def test_okd_goal_length_mismatch():
    with pytest.raises(dc.ShapeError):
        L.okd_goal(Tensor(np.full((1, 3), 1 / 3)), np.full((1, 4), 0.25))


# ---------------------------------------------------------------- total loss and teacher isolation


def test_total_loss_zero_weights_is_pred():
    lp = Tensor(1.25)
    rep = L.total_loss(lp, {"f_a": Tensor(3.0)}, Tensor(7.0), 0.0, 0.0)
    assert rep.value == 1.25


def test_total_loss_weighted_sum_and_linearity():
    rng = np.random.default_rng(11)
    lp, fa, fm, ok = (Tensor(x) for x in rng.normal(size=4))
    rep = L.total_loss(lp, {"f_a": fa, "f_m": fm}, ok, 10.0, 1.0)
    assert rep.value == pytest.approx(lp.item() + 10 * (fa.item() + fm.item()) + ok.item(), abs=1e-12)
    rep2 = L.total_loss(lp, {"f_a": fa, "f_m": fm}, ok, 20.0, 2.0)
    assert rep2.value - lp.item() == pytest.approx(2 * (rep.value - lp.item()), abs=1e-12)
    assert rep.as_dict()["fkd_f_a"] == fa.item()
    with pytest.raises(ValueError):
        L.total_loss(lp, None, None, -1.0, 0.0)


def test_teacher_inputs_receive_no_gradient():
    rng = np.random.default_rng(12)
    mu_t = Tensor(rng.normal(size=(2, 3, 4, 2)), trainable=True)
    pi_t = Tensor(rng.normal(size=(2, 3)), trainable=True)
    f_t = Tensor(rng.normal(size=(2, 5)), trainable=True)
    gp_t = Tensor(rng.dirichlet(np.ones(4), size=2), trainable=True)
    mu_s = Tensor(rng.normal(size=(2, 3, 4, 2)), trainable=True)
    sp = Tensor(np.ones((2, 3, 4, 2)), trainable=True)
    f_s = Tensor(rng.normal(size=(2, 5)), trainable=True)
    teacher = MixturePrediction(mu_t, Tensor(np.ones((2, 3, 4, 2))), pi_t)
    student = MixturePrediction(mu_s, Tensor(np.ones((2, 3, 4, 2))), Tensor(np.zeros((2, 3))), sp)
    goals = rng.normal(size=(2, 4, 2))
    with Tape() as tape:
        total = (L.okd_regression(teacher, student, L.LossConfig())
                 + L.fkd_loss(f_t, f_s, Tensor(np.ones((2, 5))))
                 + L.okd_goal(L.render_student_goal_heatmap(student, goals), gp_t))
    g = dc.backward(tape, total, [mu_t, pi_t, f_t, gp_t, mu_s, f_s])
    for t in (mu_t, pi_t, f_t, gp_t):
        assert not g[t].any()
    assert g[mu_s].any() and g[f_s].any()
    GoalSetPrediction(goals, gp_t, np.ones((2, 4), bool))  # type accepts teacher probs as a tensor


@pytest.mark.parametrize("name", sorted(LOSS_CASES))
def test_loss_gradcheck(name):
    result = run_case(name, LOSS_CASES[name], trials=100)
    assert result.passed, f"{name}: {result.max_rel_err:.2e}"
