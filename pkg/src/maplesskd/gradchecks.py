"""Finite-difference checks for every loss, decoder output and the total objective.

Each case draws random inputs from a generator and returns a scalar function
of the differentiable inputs; :func:`run_suite` reports the worst relative
error over many trials.
"""
from __future__ import annotations

import time
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import diffcore as dc
from . import losses as L
from .nets import MixturePrediction, ModelConfig, Predictor

TOLERANCE = 1e-4


@dataclass
class CheckResult:
    name: str
    trials: int
    max_rel_err: float
    seconds: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def _mixture_inputs(rng, B=2, K=3, T=4):
    mu = rng.normal(scale=2.0, size=(B, K, T, 2))
    sigma = rng.uniform(0.5, 2.0, size=(B, K, T, 2))
    logits = rng.normal(size=(B, K))
    return mu, sigma, logits


def _readout_weights(rng, shape):
    return rng.normal(size=shape)


# --- loss cases: (rng) -> (fn, inputs)


def _pred_wta(kind):
    def case(rng):
        mu, sigma, logits = _mixture_inputs(rng)
        best = rng.integers(0, mu.shape[1], size=mu.shape[0])
        # ground truth near one mode so the winner is unambiguous under perturbation
        gt = mu[np.arange(mu.shape[0]), best] + rng.normal(scale=0.3, size=mu.shape[2:])[None]

        def fn(m, s, p):
            return L.pred_loss_wta(MixturePrediction(m, s, p), gt, kind)
        return fn, [mu, sigma, logits]
    return case


def _fkd(rng):
    f_t = rng.normal(size=(3, 8))
    f_s = f_t + rng.normal(scale=0.5, size=(3, 8))
    delta = rng.uniform(0.3, 2.0, size=(3, 8))
    return (lambda fs, d: L.fkd_loss(f_t, fs, d, z=0.7)), [f_s, delta]


def _okd_reg(kind, samples=0):
    def case(rng):
        mu_t, sig_t, pi_t = _mixture_inputs(rng)
        mu_s, _, pi_s = _mixture_inputs(rng)
        sp = rng.uniform(0.5, 2.0, size=mu_s.shape)
        cfg = L.LossConfig(distribution=kind, teacher_samples=samples, normalization_constant_z=0.2,
                           sample_seed=int(rng.integers(1000)))
        teacher = MixturePrediction(dc.Tensor(mu_t), dc.Tensor(sig_t), dc.Tensor(pi_t))

        def fn(m, s, p):
            return L.okd_regression(teacher, MixturePrediction(m, dc.Tensor(np.ones_like(mu_s)), p, s), cfg)
        return fn, [mu_s, sp, pi_s]
    return case


def _soft_ce(rng):
    t = rng.normal(size=(4, 6))
    tau = float(rng.uniform(0.3, 2.0))
    return (lambda s: L.soft_cross_entropy(t, s, tau).mean()), [rng.normal(size=(4, 6))]


def _heatmap(kind):
    def case(rng):
        mu, sigma, logits = _mixture_inputs(rng)
        goals = rng.normal(scale=3.0, size=(mu.shape[0], 7, 2))
        mask = rng.random((mu.shape[0], 7)) < 0.8
        mask[:, 0] = True
        w = _readout_weights(rng, (mu.shape[0], 7))

        def fn(m, s):
            p = L.render_student_goal_heatmap(MixturePrediction(m, s, dc.Tensor(logits)), goals, kind, mask)
            return (p * w).sum()
        return fn, [mu, sigma]
    return case


def _okd_goal(rng):
    n = 9
    pt = rng.dirichlet(np.ones(n), size=3)
    ps = rng.dirichlet(np.ones(n), size=3) * 0.9 + 0.01
    return (lambda p: L.okd_goal(p, pt)), [ps]


def _goal_pipeline(rng):
    """Rendered student heatmap against renormalized teacher top-N goals."""
    mu, sigma, logits = _mixture_inputs(rng)
    sigma = sigma + 1.0
    B, N = mu.shape[0], 12
    # candidates scattered around the mode endpoints keep rendered probs clear of the BCE clamp
    anchor = mu[:, rng.integers(0, mu.shape[1], size=N), -1, :]
    goals = anchor + rng.normal(size=(B, N, 2))
    idx, pt = L.renormalize_teacher_goals(rng.dirichlet(np.ones(N), size=B), 6)
    sel = np.take_along_axis(goals, idx[..., None], axis=1)

    def fn(m, s):
        ps = L.render_student_goal_heatmap(MixturePrediction(m, s, dc.Tensor(logits)), sel, "gaussian")
        return L.okd_goal(ps, pt)
    return fn, [mu, sigma]


def _total(rng):
    lam_fd, lam_od = rng.uniform(0, 10, size=2)

    def fn(a, b, c, d):
        return L.total_loss(a.sum(), {"f_a": b.sum(), "f_m": c.sum()}, d.sum(), lam_fd, lam_od).total
    return fn, [rng.normal(size=3) for _ in range(4)]


def _total_composite(rng):
    """Full objective from raw student outputs: prediction + three taps + output distillation."""
    mu, sigma, logits = _mixture_inputs(rng)
    best = rng.integers(0, mu.shape[1], size=mu.shape[0])
    gt = mu[np.arange(mu.shape[0]), best] + rng.normal(scale=0.3, size=mu.shape[2:])[None]
    mu_t, sig_t, pi_t = _mixture_inputs(rng)
    teacher = MixturePrediction(dc.Tensor(mu_t), dc.Tensor(sig_t), dc.Tensor(pi_t))
    f_t = rng.normal(size=(mu.shape[0], 5))
    f_s = f_t + rng.normal(scale=0.5, size=f_t.shape)
    delta = rng.uniform(0.5, 2.0, size=f_t.shape)
    sp = rng.uniform(0.5, 2.0, size=mu.shape)
    cfg = L.LossConfig(distribution="laplace")

    def fn(m, s, p, fs, d, spr):
        pred = MixturePrediction(m, s, p, spr)
        l_pred = L.pred_loss_wta(pred, gt, "laplace")
        fkd = {"f_a": L.fkd_loss(f_t, fs, d)}
        return L.total_loss(l_pred, fkd, L.okd_regression(teacher, pred, cfg), 10.0, 1.0).total
    return fn, [mu, sigma, logits, f_s, delta, sp]


LOSS_CASES: dict[str, Callable] = {
    "pred_loss_wta[laplace]": _pred_wta("laplace"),
    "pred_loss_wta[gaussian]": _pred_wta("gaussian"),
    "fkd_loss": _fkd,
    "okd_regression[gaussian]": _okd_reg("gaussian"),
    "okd_regression[laplace]": _okd_reg("laplace"),
    "okd_regression[laplace,S=4]": _okd_reg("laplace", 4),
    "soft_cross_entropy": _soft_ce,
    "render_student_goal_heatmap[gaussian]": _heatmap("gaussian"),
    "render_student_goal_heatmap[laplace]": _heatmap("laplace"),
    "okd_goal": _okd_goal,
    "okd_goal[rendered]": _goal_pipeline,
    "total_loss": _total,
    "total_loss[composite]": _total_composite,
}


# --- decoder cases: gradients of each output wrt its input feature and head parameters


def _decoder_case(decoder: str, output: str):
    def case(rng):
        cfg = ModelConfig(hidden=6, modes=3, t_pred=4, decoder=decoder, distill_heads=True,
                          has_map_branch=decoder == "goal_based")
        model = Predictor(cfg, seed=int(rng.integers(1 << 30)))
        B = 2
        f_f = rng.normal(size=(B, cfg.hidden))
        goals = rng.normal(scale=10.0, size=(B, 5, 2))
        mask = np.ones((B, 5), bool)
        prefix = {"mu": "dec.mu", "sigma": "dec.log_sigma", "pi": "dec.pi",
                  "sigma_prime": "aux.sigma_prime.2", "goal": "goal.2"}[output]
        names = ["dec.hidden.w", prefix + ".w", prefix + ".b"]
        if output == "goal":
            names = ["goal.1.w", "goal.2.w", "goal.2.b"]
        base = {n: model.params[n].data.copy() for n in names}

        def fn(x, *ws):
            for n, w in zip(names, ws):
                model.params[n] = w
            if output == "goal":
                out = model.decode_goal(x, goals, mask).probs
            else:
                pred = model.decode_regression(x, with_sigma_prime=output == "sigma_prime")
                out = {"mu": pred.mu, "sigma": pred.sigma, "pi": pred.pi_logits,
                       "sigma_prime": pred.sigma_prime}[output]
            w = np.random.default_rng(7).normal(size=out.shape)
            return (out * w).sum()
        return fn, [f_f] + [base[n] for n in names]
    return case


DECODER_CASES: dict[str, Callable] = {
    f"{dec}.{out}": _decoder_case(dec, out)
    for dec in ("regression_laplace", "regression_gaussian")
    for out in ("mu", "sigma", "pi", "sigma_prime")
}
DECODER_CASES["goal_based.goal"] = _decoder_case("goal_based", "goal")

SUITES = {"losses": LOSS_CASES, "decoders": DECODER_CASES}


def run_case(name: str, case: Callable, trials: int = 100, seed: int = 0, step: float = 1e-6,
             max_coords: int = 12) -> CheckResult:
    rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(trials):
        fn, inputs = case(rng)
        worst = max(worst, dc.gradcheck(fn, inputs, step=step, rng=rng, max_coords=max_coords))
    return CheckResult(name, trials, worst, time.perf_counter() - t0)


def run_suite(module: str = "losses", trials: int = 100, seed: int = 0) -> list[CheckResult]:
    if module == "all":
        cases = {**LOSS_CASES, **DECODER_CASES}
    elif module in SUITES:
        cases = SUITES[module]
    else:
        raise KeyError(f"unknown gradcheck module {module!r}; choose from {sorted(SUITES) + ['all']}")
    return [run_case(name, case, trials, seed) for name, case in cases.items()]


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'trials':>6}  {'max_rel_err':>11}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.trials:>6}  {r.max_rel_err:>11.3e}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"
