"""minADE / minFDE / miss rate / brier-minFDE over K hypotheses."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MISS_THRESHOLD = 2.0
METRICS = ("minADE", "minFDE", "MR", "brier_minFDE")


def _check_k(modes: np.ndarray, k: int) -> None:
    if k < 1 or k > modes.shape[-3]:
        raise ValueError(f"K={k} but only {modes.shape[-3]} modes available")


def ade(modes: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Average displacement per mode: (..., K, T, 2) vs (..., T, 2) -> (..., K)."""
    return np.linalg.norm(modes - gt[..., None, :, :], axis=-1).mean(-1)


def fde(modes: np.ndarray, gt: np.ndarray) -> np.ndarray:
    return np.linalg.norm(modes[..., -1, :] - gt[..., None, -1, :], axis=-1)


def min_ade(modes, gt, k: int) -> np.ndarray | float:
    """Minimum over the first ``k`` modes of the mean L2 error."""
    modes, gt = np.asarray(modes, float), np.asarray(gt, float)
    _check_k(modes, k)
    out = ade(modes[..., :k, :, :], gt).min(-1)
    return float(out) if out.ndim == 0 else out


def min_fde(modes, gt, k: int) -> np.ndarray | float:
    modes, gt = np.asarray(modes, float), np.asarray(gt, float)
    _check_k(modes, k)
    out = fde(modes[..., :k, :, :], gt).min(-1)
    return float(out) if out.ndim == 0 else out


def miss_rate(modes, gts, k: int, threshold: float = MISS_THRESHOLD) -> float:
    """Fraction of scenes whose best-of-k final error is strictly above ``threshold``."""
    modes, gts = np.asarray(modes, float), np.asarray(gts, float)
    if modes.ndim != 4 or len(modes) == 0:
        raise ValueError("miss_rate needs a non-empty (N, K, T, 2) set")
    return float((min_fde(modes, gts, k) > threshold).mean())


def brier_min_fde(modes, probs, gt, k: int, atol: float = 1e-6) -> np.ndarray | float:
    """minFDE_k + (1 - p)^2 with p the probability of the best-endpoint mode."""
    modes, gt = np.asarray(modes, float), np.asarray(gt, float)
    probs = np.asarray(probs, float)
    _check_k(modes, k)
    p = probs[..., :k]
    if not np.allclose(p.sum(-1), 1.0, atol=atol) or (p < 0).any():
        raise ValueError("probabilities over the K modes considered must be normalized")
    f = fde(modes[..., :k, :, :], gt)
    best = np.argmin(f, axis=-1)
    p_hat = np.take_along_axis(p, best[..., None], axis=-1)[..., 0]
    out = f.min(-1) + (1.0 - p_hat) ** 2
    return float(out) if out.ndim == 0 else out


def top_k(modes: np.ndarray, probs: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``k`` most probable modes (descending, stable) with probs renormalized over them."""
    order = np.argsort(-probs, axis=-1, kind="stable")[..., :k]
    sel_modes = np.take_along_axis(modes, order[..., None, None], axis=-3)
    sel_p = np.take_along_axis(probs, order, axis=-1)
    return sel_modes, sel_p / sel_p.sum(-1, keepdims=True)


@dataclass
class MetricReport:
    per_k: dict[int, dict[str, float]]
    per_scene: dict[int, dict[str, np.ndarray]] = field(default_factory=dict, repr=False)
    n_scenes: int = 0
    std: dict[int, dict[str, float]] = field(default_factory=dict)

    def get(self, metric: str, k: int) -> float:
        return self.per_k[k][metric]

    def to_text(self) -> str:
        lines = [f"n_scenes = {self.n_scenes}"]
        for k in sorted(self.per_k):
            for m in METRICS:
                line = f"{m}_{k} = {self.per_k[k][m]:.6f}"
                if k in self.std:
                    line += f" +- {self.std[k][m]:.6f}"
                lines.append(line)
        return "\n".join(lines) + "\n"

    def write_table(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["K"] + list(METRICS) + [f"{m}_std" for m in METRICS if self.std])
            for k in sorted(self.per_k):
                row = [k] + [f"{self.per_k[k][m]:.9g}" for m in METRICS]
                if self.std:
                    row += [f"{self.std[k][m]:.9g}" for m in METRICS]
                w.writerow(row)

    def to_dict(self) -> dict:
        out = {"n_scenes": self.n_scenes, "per_k": {str(k): v for k, v in self.per_k.items()}}
        if self.std:
            out["std"] = {str(k): v for k, v in self.std.items()}
        return out


def compute_report(modes: np.ndarray, probs: np.ndarray, gts: np.ndarray, ks: Sequence[int]) -> MetricReport:
    """Metrics on the top-k most probable modes for each k (so mode sets are nested)."""
    per_k, per_scene = {}, {}
    for k in ks:
        m, p = top_k(modes, probs, k)
        scene = {
            "minADE": min_ade(m, gts, k),
            "minFDE": min_fde(m, gts, k),
            "brier_minFDE": brier_min_fde(m, p, gts, k),
        }
        scene["MR"] = (scene["minFDE"] > MISS_THRESHOLD).astype(float)
        per_scene[k] = scene
        per_k[k] = {name: float(np.mean(scene[name])) for name in METRICS}
    return MetricReport(per_k, per_scene, len(gts))


def aggregate_seeds(reports: Sequence[MetricReport]) -> MetricReport:
    """Mean and sample standard deviation across runs."""
    if not reports:
        raise ValueError("no reports to aggregate")
    ks = sorted(reports[0].per_k)
    per_k, std = {}, {}
    for k in ks:
        per_k[k], std[k] = {}, {}
        for m in METRICS:
            vals = np.array([r.per_k[k][m] for r in reports])
            per_k[k][m] = float(vals.mean())
            std[k][m] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return MetricReport(per_k, {}, reports[0].n_scenes, std)
