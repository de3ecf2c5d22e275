"""Prediction and distillation objectives.

All losses sum over feature / coordinate dimensions and average over the
batch. Teacher-side inputs are consumed as plain arrays, so no gradient can
reach the teacher.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from .diffcore import Tensor
from .nets import MixturePrediction

LOG_2PI = float(np.log(2 * np.pi))
BCE_CLAMP = (1e-6, 1 - 1e-6)


@dataclass
class LossConfig:
    lambda_fd: float = 10.0
    lambda_od: float = 1.0
    temperature: float = 0.5
    # teacher draws per mode for the output-distillation target; 0 = teacher means
    teacher_samples: int = 0
    distribution: str = "laplace"
    normalization_constant_z: float = 0.0
    goal_top_n: int = 100
    sample_seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.lambda_fd < 0 or self.lambda_od < 0:
            raise ValueError("loss weights must be non-negative")
        if self.teacher_samples < 0:
            raise ValueError("teacher_samples must be >= 0")
        if self.distribution not in ("gaussian", "laplace"):
            raise ValueError(f"unknown distribution {self.distribution!r}")


@dataclass
class LossReport:
    total: Tensor
    pred: float
    fkd: dict[str, float] = field(default_factory=dict)
    okd: float = 0.0
    lambda_fd: float = 0.0
    lambda_od: float = 0.0
    grad_norms: dict[str, float] = field(default_factory=dict)

    @property
    def value(self) -> float:
        return float(self.total.data)

    def as_dict(self) -> dict:
        d = {"total": self.value, "pred": self.pred, "okd": self.okd,
             "lambda_fd": self.lambda_fd, "lambda_od": self.lambda_od}
        d.update({f"fkd_{k}": v for k, v in self.fkd.items()})
        d.update({f"gradnorm_{k}": v for k, v in self.grad_norms.items()})
        return d


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=float)


def _batch_mean(per_sample: Tensor) -> Tensor:
    return per_sample.mean() if per_sample.ndim else per_sample


# ---------------------------------------------------------------- likelihoods


def laplace_nll(x, mu, scale) -> Tensor:
    """Elementwise -log Laplace(x | mu, scale)."""
    return dc.log(scale * 2.0) + dc.absolute(x - mu) / scale


def gaussian_nll(x, mu, scale) -> Tensor:
    """Elementwise -log N(x | mu, scale^2)."""
    return dc.log(scale) + dc.square(x - mu) / (dc.square(scale) * 2.0) + 0.5 * LOG_2PI


def nll(kind: str, x, mu, scale) -> Tensor:
    if kind == "laplace":
        return laplace_nll(x, mu, scale)
    if kind == "gaussian":
        return gaussian_nll(x, mu, scale)
    raise ValueError(f"unknown distribution {kind!r}")


# ---------------------------------------------------------------- prediction


def best_mode(mu: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Index of the mode with lowest average displacement; ties go to the lower index."""
    ade = np.linalg.norm(mu - gt[:, None], axis=-1).mean(-1)
    return np.argmin(ade, axis=-1)


def pred_loss_wta(pred: MixturePrediction, gt, kind: str = "laplace") -> Tensor:
    """Winner-take-all NLL of the best mode plus mode-classification CE."""
    gt = _as_array(gt)
    B = pred.mu.shape[0]
    best = best_mode(pred.mu.data, gt)
    rows = np.arange(B)
    mu = pred.mu[rows, best]
    sigma = pred.sigma[rows, best]
    reg = nll(kind, Tensor(gt), mu, sigma).sum(axis=(1, 2))
    ce = -dc.log_softmax(pred.pi_logits)[rows, best]
    return (reg + ce).mean()


# ---------------------------------------------------------------- feature distillation


def fkd_loss(f_t, f_s: Tensor, delta_s: Tensor, z: float = 0.0) -> Tensor:
    """Variational feature matching: 1/2 log(d^2) + (f_t - f_s)^2 / d^2 + Z per dimension."""
    f_t = _as_array(f_t)
    if f_t.shape != f_s.shape or f_s.shape != delta_s.shape:
        raise dc.ShapeError(f"fkd_loss: shapes {f_t.shape}, {f_s.shape}, {delta_s.shape} differ")
    d2 = dc.square(delta_s)
    per_dim = dc.log(d2) * 0.5 + dc.square(Tensor(f_t) - f_s) / d2 + z
    return _batch_mean(per_dim.sum(axis=-1))


# ---------------------------------------------------------------- output distillation


def teacher_targets(teacher: MixturePrediction, config: LossConfig) -> np.ndarray:
    """Teacher means, or the mean of ``teacher_samples`` reparameterized draws per mode."""
    mu, sigma = teacher.mu.data, teacher.sigma.data
    S = config.teacher_samples
    if S == 0:
        return mu
    rng = np.random.default_rng(config.sample_seed)
    if config.distribution == "gaussian":
        eps = rng.standard_normal((S,) + mu.shape)
    else:
        eps = rng.laplace(size=(S,) + mu.shape)
    return (mu[None] + sigma[None] * eps).mean(0)


def soft_cross_entropy(teacher_logits, student_logits: Tensor, temperature: float) -> Tensor:
    """CE(softmax(t / tau), softmax(s / tau)) per sample."""
    t = _as_array(teacher_logits) / temperature
    e = np.exp(t - t.max(-1, keepdims=True))
    p = e / e.sum(-1, keepdims=True)
    return -(dc.log_softmax(student_logits * (1.0 / temperature)) * p).sum(axis=-1)


def okd_regression(teacher: MixturePrediction, student: MixturePrediction, config: LossConfig) -> Tensor:
    """Ordered mode-to-mode NLL under the student's distillation scales plus temperature CE."""
    if teacher.mu.shape != student.mu.shape:
        raise dc.ShapeError(f"teacher/student mode sets differ: {teacher.mu.shape} vs {student.mu.shape}")
    if student.sigma_prime is None:
        raise ValueError("student prediction carries no distillation scale")
    s_t = Tensor(teacher_targets(teacher, config))
    sp = student.sigma_prime
    if config.distribution == "gaussian":
        per = dc.log(dc.square(sp)) * 0.5 + dc.square(s_t - student.mu) / (dc.square(sp) * 2.0)
    else:
        per = dc.log(sp) + dc.absolute(s_t - student.mu) / sp
    per = per + config.normalization_constant_z
    reg = per.sum(axis=(1, 2, 3))
    ce = soft_cross_entropy(teacher.pi_logits, student.pi_logits, config.temperature)
    return (reg + ce).mean()


def _final_step_log_density(pred: MixturePrediction, goals: np.ndarray, kind: str) -> Tensor:
    B, K = pred.pi_logits.shape
    T = pred.mu.shape[2]
    mu = pred.mu[:, :, T - 1, :].reshape(B, K, 1, 2)
    sigma = pred.sigma[:, :, T - 1, :].reshape(B, K, 1, 2)
    g = Tensor(goals[:, None, :, :])
    return -nll(kind, g, mu, sigma).sum(axis=-1)        # (B, K, N)


def render_student_goal_heatmap(student: MixturePrediction, goals, kind: str = "gaussian",
                                goal_mask=None) -> Tensor:
    """Per goal, the final-step density of the mode most likely at that goal, renormalized over goals."""
    goals = np.asarray(goals, dtype=student.mu.dtype)
    if goals.ndim == 2:
        goals = goals[None]
    if goals.shape[1] == 0:
        raise ValueError("empty goal set")
    logd = _final_step_log_density(student, goals, kind)
    best = dc.reduce_max(logd, axis=1)                 # (B, N)
    mask = np.ones(best.shape, bool) if goal_mask is None else np.asarray(goal_mask, bool)
    return dc.masked_softmax(best, mask)


def renormalize_teacher_goals(probs, top_n: int, mask=None) -> tuple[np.ndarray, np.ndarray]:
    """Top-``top_n`` teacher goals (descending) and their probabilities renormalized to 1."""
    p = np.asarray(probs, dtype=float)
    squeeze = p.ndim == 1
    p = np.atleast_2d(p)
    if mask is not None:
        p = np.where(np.atleast_2d(mask), p, -np.inf)
    avail = np.isfinite(p).sum(axis=1)
    if (top_n > avail).any() or top_n < 1:
        raise ValueError(f"top_n={top_n} outside 1..{int(avail.min())}")
    idx = np.argsort(-p, axis=1, kind="stable")[:, :top_n]
    sel = np.take_along_axis(p, idx, axis=1)
    tot = sel.sum(axis=1, keepdims=True)
    if (tot <= 0).any():
        raise ValueError("teacher assigns zero probability to all selected goals")
    sel = sel / tot
    return (idx[0], sel[0]) if squeeze else (idx, sel)


def okd_goal(student_probs: Tensor, teacher_probs) -> Tensor:
    """Binary cross entropy between rendered student and teacher goal heatmaps, mean over goals."""
    pt = _as_array(teacher_probs)
    if pt.shape != student_probs.shape:
        raise dc.ShapeError(f"goal sets differ: {student_probs.shape} vs {pt.shape}")
    lo, hi = BCE_CLAMP
    pt = np.clip(pt, lo, hi)
    ps = dc.clip(student_probs, lo, hi)
    bce = -(dc.log(ps) * pt + dc.log(1.0 - ps) * (1.0 - pt))
    return bce.mean()


# ---------------------------------------------------------------- total


def total_loss(l_pred: Tensor, fkd_terms: dict[str, Tensor] | None, l_okd: Tensor | None,
               lambda_fd: float, lambda_od: float) -> LossReport:
    """L = L_pred + lambda_fd * sum(L_FKD) + lambda_od * L_OKD."""
    if lambda_fd < 0 or lambda_od < 0:
        raise ValueError("loss weights must be non-negative")
    fkd_terms = fkd_terms or {}
    total = l_pred
    for term in fkd_terms.values():
        total = total + term * lambda_fd
    if l_okd is not None:
        total = total + l_okd * lambda_od
    return LossReport(total, float(l_pred.data), {k: float(v.data) for k, v in fkd_terms.items()},
                      0.0 if l_okd is None else float(l_okd.data), lambda_fd, lambda_od)
