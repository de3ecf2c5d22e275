"""Teacher pretraining, student distillation and the experiment harnesses.

The optimizer is AdamW (decoupled weight decay):

    m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)

with bias-corrected ``m_hat``/``v_hat`` and gradients clipped to a global
L2 norm before the update.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import diffcore as dc
from .losses import (LossConfig, LossReport, fkd_loss, okd_goal, okd_regression, pred_loss_wta,
                     render_student_goal_heatmap, renormalize_teacher_goals, total_loss)
from .metrics import MetricReport, compute_report
from .nets import Batch, MixturePrediction, ModelConfig, Predictor, build_batch, file_hash, load_checkpoint, \
    save_checkpoint
from .synthworld import Scene

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- schedules


@dataclass
class Schedule:
    """Piecewise-constant value; each event (epoch, op, value) applies from ``epoch`` on.

    ``op`` is ``"mul"`` (multiply the current value) or ``"set"`` (absolute).
    """

    initial: float
    events: list[tuple[int, str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.events = [(int(e), str(op), float(v)) for e, op, v in self.events]
        epochs = [e for e, _, _ in self.events]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ValueError("schedule epochs must be strictly increasing")
        if self.initial < 0 or any(v < 0 for _, _, v in self.events):
            raise ValueError("schedule values must be non-negative")
        if any(op not in ("mul", "set") for _, op, _ in self.events):
            raise ValueError("schedule ops are 'mul' or 'set'")

    def at(self, epoch: int) -> float:
        value = self.initial
        for e, op, v in self.events:
            if epoch < e:
                break
            value = value * v if op == "mul" else v
        return value

    def to_dict(self) -> dict:
        return {"initial": self.initial, "events": [list(e) for e in self.events]}

    @classmethod
    def from_dict(cls, d) -> "Schedule":
        if isinstance(d, (int, float)):
            return cls(float(d))
        unknown = set(d) - {"initial", "events"}
        if unknown:
            raise ValueError(f"unknown schedule keys {sorted(unknown)}")
        return cls(float(d["initial"]), [tuple(e) for e in d.get("events", [])])

    def scaled(self, factor: float) -> "Schedule":
        """Same schedule with event epochs relocated by ``factor``; events landing together are merged."""
        merged: list[tuple[int, str, float]] = []
        for e, op, v in self.events:
            e = max(1, int(round(e * factor)))
            if merged and merged[-1][0] == e:
                _, prev_op, prev_v = merged[-1]
                merged[-1] = (e, "set", v) if op == "set" else (e, prev_op, prev_v * v)
            else:
                merged.append((e, op, v))
        return Schedule(self.initial, merged)


# lambda_fd / lambda_od schedules used for each baseline family
PRESETS: dict[str, tuple[Schedule, Schedule]] = {
    "hivt": (Schedule(10.0, [(10, "set", 0.1)]),
             Schedule(1.0, [(10, "mul", 0.1), (20, "mul", 0.1), (40, "mul", 0.1)])),
    "vectornet": (Schedule(1.0, [(10, "set", 0.1)]), Schedule(50.0, [(10, "set", 0.1)])),
    "lanegcn": (Schedule(10.0, [(30, "set", 0.01)]), Schedule(1.0, [(30, "set", 0.001)])),
    "none": (Schedule(0.0), Schedule(0.0)),
}
PRESET_EPOCHS = {"hivt": 64, "vectornet": 25, "lanegcn": 80}


def preset(name: str, epochs: int | None = None) -> tuple[Schedule, Schedule]:
    """Named lambda schedules; with ``epochs`` the decay points move proportionally."""
    fd, od = PRESETS[name]
    if epochs is None or name not in PRESET_EPOCHS:
        return copy.deepcopy(fd), copy.deepcopy(od)
    f = epochs / PRESET_EPOCHS[name]
    return fd.scaled(f), od.scaled(f)


# ---------------------------------------------------------------- configs


@dataclass
class TrainConfig:
    epochs: int = 32
    batch_size: int = 32
    lr: float = 1e-3
    # "cosine" anneals to 0 over the run; "schedule" uses the piecewise lr_schedule multiplier
    lr_decay: str = "cosine"
    lr_schedule: Schedule = field(default_factory=lambda: Schedule(1.0))
    weight_decay: float = 1e-4
    grad_clip: float = 10.0
    seed: int = 0
    lambda_fd: Schedule = field(default_factory=lambda: preset("hivt", 32)[0])
    lambda_od: Schedule = field(default_factory=lambda: preset("hivt", 32)[1])
    temperature: float = 0.5
    teacher_samples: int = 0
    goal_top_n: int = 100
    eval_every: int = 0
    checkpoint: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("epochs, batch_size and lr must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.lr_decay not in ("cosine", "schedule"):
            raise ValueError(f"unknown lr_decay {self.lr_decay!r}")

    def lr_scale(self, epoch: int) -> float:
        if self.lr_decay == "cosine":
            return 0.5 * (1.0 + float(np.cos(np.pi * epoch / self.epochs)))
        return self.lr_schedule.at(epoch)

    @property
    def distribution(self) -> str:
        return self.model.distribution

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = v.to_dict() if hasattr(v, "to_dict") else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys {sorted(unknown)}")
        kw = dict(d)
        for key in ("lr_schedule", "lambda_fd", "lambda_od"):
            if key in kw:
                kw[key] = Schedule.from_dict(kw[key])
        if "model" in kw:
            kw["model"] = ModelConfig.from_dict(kw["model"])
        return cls(**kw)

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def loss_config(self, epoch: int) -> LossConfig:
        return LossConfig(self.lambda_fd.at(epoch), self.lambda_od.at(epoch), self.temperature,
                          self.teacher_samples, self.distribution, 0.0, self.goal_top_n, self.seed)


@dataclass
class RunRecord:
    kind: str
    seed: int
    config_hash: str
    epoch_losses: list[dict] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)
    wall_time: float = 0.0
    checkpoint_sha256: str | None = None
    teacher_sha256: str | None = None

    def final_loss(self) -> float:
        return self.epoch_losses[-1]["total"]

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    def numeric_fingerprint(self) -> dict:
        """Every reported number except wall time."""
        d = self.to_dict()
        d.pop("wall_time")
        return d


# ---------------------------------------------------------------- optimizer


class AdamW:
    def __init__(self, params: dict[str, dc.Tensor], lr: float, weight_decay: float = 0.0,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr, self.wd, self.b1, self.b2, self.eps = lr, weight_decay, betas[0], betas[1], eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], lr_scale: float = 1.0) -> None:
        self.t += 1
        lr = self.lr * lr_scale
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for name in sorted(self.params):
            p, g = self.params[name], grads[name]
            m, v = self.m[name], self.v[name]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p.data -= lr * ((m / c1) / (np.sqrt(v / c2) + self.eps) + self.wd * p.data)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = 0.0
    for name in sorted(grads):
        total += float(np.sum(grads[name] * grads[name]))
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale
    return norm


# ---------------------------------------------------------------- data


class Dataset:
    """Scenes pre-batched into padded arrays, sliced into minibatches by index."""

    def __init__(self, scenes: Sequence[Scene], model_cfg: ModelConfig, with_map: bool | None = None,
                 history: int | None = None):
        self.scenes = list(scenes)
        self.batch = build_batch(self.scenes, model_cfg, with_map=with_map)
        if history is not None:
            truncate_history(self.batch, history)

    def __len__(self) -> int:
        return len(self.scenes)

    def take(self, idx: np.ndarray, with_map: bool = True) -> Batch:
        b = self.batch
        sub = lambda x: None if x is None else x[idx]  # noqa: E731
        out = Batch(b.agents[idx], b.step_mask[idx], b.agent_mask[idx], b.origin[idx], b.rotation[idx],
                    sub(b.gt))
        if with_map and b.has_map:
            out.seg_pts, out.seg_flags, out.seg_mask = sub(b.seg_pts), sub(b.seg_flags), sub(b.seg_mask)
            out.goals, out.goal_mask = sub(b.goals), sub(b.goal_mask)
        return out


def truncate_history(batch: Batch, length: int) -> None:
    """Keep only the last ``length`` observed steps of every agent (in place)."""
    T = batch.agents.shape[2]
    if length < 1 or length > T:
        raise ValueError(f"history length must be in 1..{T}")
    batch.step_mask[:, :, : T - length] = False
    batch.agents[~batch.step_mask] = 0.0
    batch.agent_mask = batch.step_mask.any(axis=2)
    # target must keep at least its last step
    batch.step_mask[:, 0, T - 1] = True
    batch.agent_mask[:, 0] = True


def _epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch, 7]).permutation(n)


# ---------------------------------------------------------------- evaluation


def predict_dataset(model: Predictor, data: Dataset, batch_size: int = 256) -> tuple[np.ndarray, np.ndarray]:
    mus, probs = [], []
    for start in range(0, len(data), batch_size):
        idx = np.arange(start, min(start + batch_size, len(data)))
        pred = model.predict(data.take(idx, with_map=model.config.has_map_branch))
        mus.append(pred.mu.data)
        probs.append(pred.probs())
    return np.concatenate(mus), np.concatenate(probs)


def evaluate(model: Predictor, data: Dataset, ks: Sequence[int] = (1, 6)) -> MetricReport:
    if max(ks) > model.config.modes:
        raise ValueError(f"K={max(ks)} exceeds the model's {model.config.modes} modes")
    mu, probs = predict_dataset(model, data)
    return compute_report(mu, probs, data.batch.gt, ks)


# ---------------------------------------------------------------- training


@dataclass
class TeacherCache:
    """Frozen-teacher outputs for every training scene."""

    taps: dict[str, np.ndarray]
    mu: np.ndarray
    sigma: np.ndarray
    pi: np.ndarray
    goals: np.ndarray | None = None
    goal_probs: np.ndarray | None = None
    goal_mask: np.ndarray | None = None

    @classmethod
    def build(cls, teacher: Predictor, data: Dataset, batch_size: int = 256) -> "TeacherCache":
        parts: dict[str, list] = {}
        for start in range(0, len(data), batch_size):
            idx = np.arange(start, min(start + batch_size, len(data)))
            out = teacher.forward(data.take(idx, with_map=True))
            for k, v in out.taps.items():
                parts.setdefault("tap." + k, []).append(v.data)
            parts.setdefault("mu", []).append(out.pred.mu.data)
            parts.setdefault("sigma", []).append(out.pred.sigma.data)
            parts.setdefault("pi", []).append(out.pred.pi_logits.data)
            if out.goal is not None:
                parts.setdefault("goals", []).append(out.goal.goals)
                parts.setdefault("goal_probs", []).append(out.goal.probs.data)
                parts.setdefault("goal_mask", []).append(out.goal.mask)
        cat = {k: np.concatenate(v) for k, v in parts.items()}
        taps = {k[4:]: v for k, v in cat.items() if k.startswith("tap.")}
        return cls(taps, cat["mu"], cat["sigma"], cat["pi"], cat.get("goals"), cat.get("goal_probs"),
                   cat.get("goal_mask"))


def _step(model: Predictor, opt: AdamW, tape: dc.Tape, report: LossReport, clip: float, lr_scale: float):
    grads_by_t = dc.backward(tape, report.total, model.params.values())
    grads = {name: grads_by_t[p] for name, p in model.params.items()}
    report.grad_norms["global"] = clip_global_norm(grads, clip)
    opt.step(grads, lr_scale)


def _epoch_means(reports: list[LossReport]) -> dict:
    keys = reports[0].as_dict().keys()
    return {k: float(np.mean([r.as_dict()[k] for r in reports])) for k in keys}


def train_teacher(train: Sequence[Scene] | Dataset, config: TrainConfig, eval_data: Dataset | None = None,
                  checkpoint: str | Path | None = None) -> tuple[Predictor, RunRecord]:
    """Map-based teacher trained with the winner-take-all prediction loss only."""
    mcfg = replace(config.model, has_map_branch=True, distill_heads=False)
    if not isinstance(train, Dataset):
        if any(s.map is None for s in train):
            raise ValueError("teacher training needs map-annotated scenes")
        train = Dataset(train, mcfg, with_map=True)
    elif not train.batch.has_map:
        raise ValueError("teacher training needs map-annotated scenes")
    model = Predictor(mcfg, seed=config.seed)
    record = RunRecord("teacher", config.seed, config.config_hash())
    _fit(model, train, config, record, eval_data, teacher=None, distill=False)
    ckpt = checkpoint or config.checkpoint
    if ckpt:
        record.checkpoint_sha256 = save_checkpoint(model, ckpt, extra={"kind": "teacher"})
    return model, record


def train_student(train: Sequence[Scene] | Dataset, config: TrainConfig, teacher: Predictor | str | Path | None,
                  eval_data: Dataset | None = None, checkpoint: str | Path | None = None,
                  history: int | None = None) -> tuple[Predictor, RunRecord]:
    """Mapless student. With ``teacher=None`` this is the plain mapless baseline.

    A teacher given as a checkpoint path is loaded, frozen and re-hashed after
    training to prove it was not modified.
    """
    teacher_path, teacher_hash = None, None
    if isinstance(teacher, (str, Path)):
        teacher_path = Path(teacher)
        teacher_hash = file_hash(teacher_path)
        teacher, _ = load_checkpoint(teacher_path)
    distill = teacher is not None
    mcfg = replace(config.model, has_map_branch=False, distill_heads=distill, decoder=_student_decoder(config))
    if not isinstance(train, Dataset):
        train = Dataset(train, replace(mcfg, has_map_branch=distill), with_map=distill, history=history)
    model = Predictor(mcfg, seed=config.seed)
    record = RunRecord("fokd" if distill else "baseline", config.seed, config.config_hash())
    if distill:
        teacher.freeze()
        _check_taps(teacher, model, train)
        before = _param_digest(teacher)
        record.teacher_sha256 = teacher_hash or before
    _fit(model, train, config, record, eval_data, teacher=teacher, distill=distill)
    if distill:
        if _param_digest(teacher) != before:
            raise RuntimeError("teacher parameters changed during student training")
        if teacher_path is not None and file_hash(teacher_path) != teacher_hash:
            raise RuntimeError("teacher checkpoint changed during student training")
    ckpt = checkpoint or config.checkpoint
    if ckpt:
        record.checkpoint_sha256 = save_checkpoint(model, ckpt, inference_only=True,
                                                   extra={"kind": record.kind})
    return model, record


def _student_decoder(config: TrainConfig) -> str:
    # a goal-based teacher distils into its Gaussian regression variant
    return "regression_gaussian" if config.model.decoder == "goal_based" else config.model.decoder


def _param_digest(model: Predictor) -> str:
    h = hashlib.sha256()
    for name in sorted(model.params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(model.params[name].data).tobytes())
    return h.hexdigest()


def _check_taps(teacher: Predictor, student: Predictor, data: Dataset) -> None:
    idx = np.arange(min(2, len(data)))
    t = teacher.forward(data.take(idx, with_map=True))
    s = student.forward(data.take(idx, with_map=False), distill=True)
    for tap in student.config.taps:
        if t.taps[tap].shape != s.taps[tap].shape:
            raise ValueError(f"tap {tap}: teacher {t.taps[tap].shape} vs student {s.taps[tap].shape}")
    if t.pred.mu.shape != s.pred.mu.shape and teacher.config.decoder != "goal_based":
        raise ValueError("teacher and student mode sets differ")


def distill_terms(out, cache: TeacherCache, idx: np.ndarray, config: TrainConfig, lcfg: LossConfig,
                  kind: str):
    """Feature and output distillation losses for one minibatch."""
    fkd = {tap: fkd_loss(cache.taps[tap][idx], out.taps[tap], out.deltas[tap]) for tap in config.model.taps}
    if cache.goal_probs is not None:
        n = min(lcfg.goal_top_n, int(cache.goal_mask[idx].sum(axis=1).min()))
        sel, pt = renormalize_teacher_goals(cache.goal_probs[idx], n, cache.goal_mask[idx])
        goals = np.take_along_axis(cache.goals[idx], sel[..., None], axis=1)
        ps = render_student_goal_heatmap(out.pred, goals, kind)
        okd = okd_goal(ps, pt)
    else:
        teacher_pred = MixturePrediction(dc.Tensor(cache.mu[idx]), dc.Tensor(cache.sigma[idx]),
                                         dc.Tensor(cache.pi[idx]))
        okd = okd_regression(teacher_pred, out.pred, lcfg)
    return fkd, okd


def _fit(model: Predictor, data: Dataset, config: TrainConfig, record: RunRecord, eval_data: Dataset | None,
         teacher: Predictor | None, distill: bool) -> None:
    t0 = time.perf_counter()
    opt = AdamW(model.params, config.lr, config.weight_decay)
    kind = model.config.distribution
    cache = TeacherCache.build(teacher, data) if distill else None
    map_input = model.config.has_map_branch
    n = len(data)
    for epoch in range(config.epochs):
        lcfg = config.loss_config(epoch)
        lr_scale = config.lr_scale(epoch)
        order = _epoch_order(n, config.seed, epoch)
        reports = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = data.take(idx, with_map=map_input)
            with dc.Tape() as tape:
                out = model.forward(batch, distill=distill)
                l_pred = pred_loss_wta(out.pred, batch.gt, kind)
                if distill:
                    fkd, okd = distill_terms(out, cache, idx, config, lcfg, kind)
                    report = total_loss(l_pred, fkd, okd, lcfg.lambda_fd, lcfg.lambda_od)
                else:
                    report = total_loss(l_pred, None, None, 0.0, 0.0)
                if model.config.decoder == "goal_based":
                    report.total = report.total + goal_classification_loss(out.goal, batch.gt)
            _step(model, opt, tape, report, config.grad_clip, lr_scale)
            reports.append(report)
        means = _epoch_means(reports)
        means["epoch"] = epoch
        record.epoch_losses.append(means)
        log.info("%s seed=%d epoch %d loss %.4f", record.kind, config.seed, epoch, means["total"])
        if eval_data is not None and config.eval_every and (epoch + 1) % config.eval_every == 0:
            ks = tuple(k for k in (1, 6, 20) if k <= model.config.modes)
            rep = evaluate(model, eval_data, ks)
            record.evals.append({"epoch": epoch, **rep.to_dict()})
    record.wall_time = time.perf_counter() - t0


def goal_classification_loss(goal, gt: np.ndarray) -> dc.Tensor:
    """Cross entropy of the goal heatmap against the candidate nearest the true endpoint."""
    d = np.linalg.norm(goal.goals - gt[:, None, -1, :], axis=-1)
    d = np.where(goal.mask, d, np.inf)
    target = np.argmin(d, axis=1)
    rows = np.arange(len(target))
    p = dc.clip(goal.probs[rows, target], 1e-9, 1.0)
    return -dc.log(p).mean()


# ---------------------------------------------------------------- experiments


def ablation_configs(base: TrainConfig) -> dict[tuple[bool, bool], TrainConfig]:
    """The {FKD off/on} x {OKD off/on} grid; off cells zero that weight."""
    grid = {}
    for fd_on in (False, True):
        for od_on in (False, True):
            grid[(fd_on, od_on)] = replace(
                base,
                lambda_fd=base.lambda_fd if fd_on else Schedule(0.0),
                lambda_od=base.lambda_od if od_on else Schedule(0.0),
            )
    return grid


def run_ablation(train: Dataset, teacher: Predictor, base: TrainConfig, eval_data: Dataset,
                 ks: Sequence[int] = (6,)) -> dict[tuple[bool, bool], tuple[RunRecord, MetricReport]]:
    """Four student runs differing only in which distillation weights are zeroed."""
    results = {}
    for cell, cfg in ablation_configs(base).items():
        model, rec = train_student(train, cfg, teacher)
        results[cell] = (rec, evaluate(model, eval_data, ks))
    return results


def ablation_table(results: dict[tuple[bool, bool], MetricReport], ks: Sequence[int] = (6,)) -> str:
    cols = [f"{m}_{k}" for k in ks for m in ("minADE", "minFDE", "MR")]
    lines = ["FeatureKD\tOutputKD\t" + "\t".join(cols)]
    for (fd, od) in [(False, False), (True, False), (False, True), (True, True)]:
        rep = results[(fd, od)]
        vals = [f"{rep.get(m, k):.4f}" for k in ks for m in ("minADE", "minFDE", "MR")]
        lines.append(f"{'x' if fd else ''}\t{'x' if od else ''}\t" + "\t".join(vals))
    return "\n".join(lines) + "\n"


def improvement_curve(student: MetricReport, baseline: MetricReport, xs: Sequence[int], key: str = "K",
                      metric: str = "minFDE", k_for: dict | None = None) -> list[dict]:
    """Rows {key, baseline, fokd, improvement}; improvement is the relative error reduction."""
    rows = []
    for x in xs:
        k = x if k_for is None else k_for[x]
        b, s = baseline.get(metric, k), student.get(metric, k)
        rows.append({key: x, f"baseline_{metric}": b, f"fokd_{metric}": s,
                     "improvement": (b - s) / b if b > 0 else 0.0})
    return rows


def run_k_scaling(student: Predictor | str | Path, baseline: Predictor | str | Path, data: Dataset,
                  ks: Sequence[int] = (1, 6, 20)) -> list[dict]:
    """Relative minFDE improvement of the distilled student over the baseline for each K."""
    if isinstance(student, (str, Path)):
        student = load_checkpoint(student)[0]
    if isinstance(baseline, (str, Path)):
        baseline = load_checkpoint(baseline)[0]
    for m in (student, baseline):
        if max(ks) > m.config.modes:
            raise ValueError(f"K={max(ks)} exceeds decoder modes ({m.config.modes})")
    s = evaluate(student, data, ks)
    b = evaluate(baseline, data, ks)
    return improvement_curve(s, b, ks, "K")


def run_history_length_sweep(train: Sequence[Scene], eval_scenes: Sequence[Scene], teacher: Predictor,
                             config: TrainConfig, lengths: Sequence[int]) -> list[dict]:
    """FOKD improvement on minFDE_6 when every agent's history is cut to each length."""
    rows = []
    mcfg = config.model
    k = min(6, mcfg.modes)
    for length in lengths:
        if length < 1 or length > mcfg.t_obs:
            raise ValueError(f"history length {length} outside 1..{mcfg.t_obs}")
        tr = Dataset(train, replace(mcfg, has_map_branch=True), with_map=True, history=length)
        ev = Dataset(eval_scenes, replace(mcfg, has_map_branch=False), with_map=False, history=length)
        base, _ = train_student(tr, config, None)
        fokd, _ = train_student(tr, config, teacher)
        rows += improvement_curve(evaluate(fokd, ev, (k,)), evaluate(base, ev, (k,)), [length], "history",
                                  k_for={length: k})
    return rows


def write_curve(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in r.items()})
