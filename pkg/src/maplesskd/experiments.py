"""Desk-scale comparison of a map-based teacher, the mapless baseline and distilled students.

``run_desk`` trains, for every seed, one teacher plus the four cells of the
{feature KD, output KD} grid (the all-off cell is the plain mapless
baseline), then a pair of 20-mode models for the K-scaling curve.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .metrics import MetricReport, aggregate_seeds
from .nets import ModelConfig, Predictor
from .synthworld import SceneConfig, SimConfig, generate_dataset
from .trainer import Dataset, Schedule, TrainConfig, evaluate, improvement_curve, run_ablation, train_student, train_teacher

log = logging.getLogger(__name__)

CELLS = {"baseline": (False, False), "fkd_only": (True, False), "okd_only": (False, True), "fokd": (True, True)}


def desk_scene_config() -> SceneConfig:
    """Busier scenes whose context traffic runs ahead of the target, so lanes it will use are populated."""
    return SceneConfig(sim=SimConfig(n_agents=10, context_lookahead=20.0, context_radius=35.0))


def desk_model_config(modes: int = 6) -> ModelConfig:
    return ModelConfig(modes=modes, max_agents=12, taps=("f_m",), delta_log_bounds=(-2.0, 10.0))


def desk_train_config(seed: int = 0, modes: int = 6) -> TrainConfig:
    # constant weights: the hivt preset's early lambda_fd = 10 leaves feature KD alone worse than no KD here
    return TrainConfig(seed=seed, lr=3e-3, model=desk_model_config(modes),
                       lambda_fd=Schedule(1.0), lambda_od=Schedule(0.1))


def rescale_epochs(config: TrainConfig, epochs: int) -> TrainConfig:
    """Same run with a different length; lambda schedule events move proportionally."""
    f = epochs / config.epochs
    return replace(config, epochs=epochs, lambda_fd=config.lambda_fd.scaled(f), lambda_od=config.lambda_od.scaled(f))


@dataclass
class DeskConfig:
    scenes: SceneConfig = field(default_factory=desk_scene_config)
    n_train: int = 2000
    n_eval: int = 4000
    data_seed: int = 1
    eval_seed: int = 3
    seeds: tuple[int, ...] = (0, 1, 2)
    train: TrainConfig = field(default_factory=desk_train_config)
    # teachers train longer than students; None keeps train.epochs
    teacher_epochs: int | None = 64
    # the K-scaling pair is trained with this many modes, for the first seed only
    k_modes: int = 20
    k_list: tuple[int, ...] = (1, 6, 20)


@dataclass
class DeskResults:
    per_seed: dict[int, dict[str, MetricReport]]
    k_curve: list[dict]
    k_reports: dict[str, MetricReport]
    seconds: dict[str, float]

    def mean(self, model: str, metric: str = "minFDE", k: int = 6) -> float:
        return float(np.mean([r[model].get(metric, k) for r in self.per_seed.values()]))

    def aggregate(self, model: str) -> MetricReport:
        return aggregate_seeds([r[model] for r in self.per_seed.values()])

    def table(self, k: int | None = None) -> str:
        """minFDE_k per seed and model; ``k`` defaults to the largest evaluated."""
        models = ["teacher", *CELLS]
        k = k or max(next(iter(self.per_seed.values()))["teacher"].per_k)
        lines = ["seed\t" + "\t".join(models)]
        for seed, reps in self.per_seed.items():
            lines.append(f"{seed}\t" + "\t".join(f"{reps[m].get('minFDE', k):.4f}" for m in models))
        lines.append("mean\t" + "\t".join(f"{self.mean(m, k=k):.4f}" for m in models))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"per_seed": {str(s): {m: r.to_dict() for m, r in reps.items()} for s, reps in self.per_seed.items()},
                "k_curve": self.k_curve, "k_reports": {m: r.to_dict() for m, r in self.k_reports.items()},
                "seconds": self.seconds}

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))


def make_data(cfg: DeskConfig):
    train_scenes = generate_dataset(cfg.scenes, cfg.n_train, seed=cfg.data_seed)
    eval_scenes = generate_dataset(cfg.scenes, cfg.n_eval, seed=cfg.eval_seed)
    return train_scenes, eval_scenes


def teacher_config(config: TrainConfig, epochs: int | None) -> TrainConfig:
    return config if epochs is None else replace(config, epochs=epochs)


def run_seed(train: Dataset, ev_map: Dataset, ev: Dataset, config: TrainConfig,
             teacher_epochs: int | None = None) -> tuple[dict, Predictor]:
    """Teacher plus the four ablation cells for one seed; returns metric reports keyed by model name."""
    teacher, _ = train_teacher(train, teacher_config(config, teacher_epochs))
    ks = tuple(sorted({1, min(6, config.model.modes)}))
    reports = {"teacher": evaluate(teacher, ev_map, ks)}
    cells = run_ablation(train, teacher, config, ev, ks)
    for name, cell in CELLS.items():
        reports[name] = cells[cell][1]
    return reports, teacher


def run_k_scaling_pair(train: Dataset, ev: Dataset, config: TrainConfig, ks,
                       teacher_epochs: int | None = None) -> tuple[list[dict], dict]:
    """Teacher, baseline and distilled student with ``config.model.modes`` outputs."""
    teacher, _ = train_teacher(train, teacher_config(config, teacher_epochs))
    base, _ = train_student(train, config, None)
    student, _ = train_student(train, config, teacher)
    reports = {"baseline": evaluate(base, ev, ks), "fokd": evaluate(student, ev, ks)}
    return improvement_curve(reports["fokd"], reports["baseline"], ks, "K"), reports


def run_desk(cfg: DeskConfig | None = None, data=None, progress: Callable[[str], None] = log.info) -> DeskResults:
    cfg = cfg or DeskConfig()
    t0 = time.perf_counter()
    train_scenes, eval_scenes = data if data is not None else make_data(cfg)
    seconds = {"data": time.perf_counter() - t0}
    mcfg = cfg.train.model
    train = Dataset(train_scenes, replace(mcfg, has_map_branch=True), with_map=True)
    ev_map = Dataset(eval_scenes, replace(mcfg, has_map_branch=True), with_map=True)
    ev = Dataset(eval_scenes, replace(mcfg, has_map_branch=False), with_map=False)
    per_seed = {}
    for seed in cfg.seeds:
        t = time.perf_counter()
        per_seed[seed], _ = run_seed(train, ev_map, ev, replace(cfg.train, seed=seed), cfg.teacher_epochs)
        seconds[f"seed{seed}"] = time.perf_counter() - t
        progress(f"seed {seed}: " + ", ".join(f"{m} {r.get('minFDE', max(r.per_k)):.4f}"
                                               for m, r in per_seed[seed].items()))
    t = time.perf_counter()
    kcfg = replace(cfg.train, seed=cfg.seeds[0], model=replace(mcfg, modes=cfg.k_modes))
    k_curve, k_reports = run_k_scaling_pair(train, ev, kcfg, cfg.k_list, cfg.teacher_epochs)
    seconds["k_scaling"] = time.perf_counter() - t
    seconds["total"] = time.perf_counter() - t0
    return DeskResults(per_seed, k_curve, k_reports, seconds)
