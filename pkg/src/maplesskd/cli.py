"""Command-line entry point: ``maplesskd <verb> [options]``.

Every verb reads one effective configuration (defaults, then ``--config``,
then ``--set`` overrides, then ``--seed``) and echoes it as ``config.json``
into the output directory, so ``--config <out>/config.json`` re-runs it.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 bad config.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import gradchecks, sceneio, trainer, viz
from .nets import ModelConfig, load_checkpoint
from .synthworld import SceneConfig, generate_dataset

VERBS = ("gen", "import", "train-teacher", "distill", "eval", "ablate", "kscan", "histscan", "gradcheck", "viz")
log = logging.getLogger("maplesskd")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- configuration


def default_config() -> dict:
    return {"seed": 0, "n_scenes": 2000, "scenes": SceneConfig().to_dict(), "train": trainer.TrainConfig().to_dict()}


def _merge(base: dict, update: dict, where: str = "") -> dict:
    out = dict(base)
    for k, v in update.items():
        key = f"{where}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in ("lambda_fd", "lambda_od", "lr_schedule"):
            out[k] = _merge(base[k], v, key + ".")
        else:
            out[k] = v
    return out


def _check_type(key: str, old, new):
    if old is None or new is None:
        return new
    if isinstance(old, bool):
        ok = isinstance(new, bool)
    elif isinstance(old, (int, float)) and not isinstance(old, bool):
        ok = isinstance(new, (int, float)) and not isinstance(new, bool)
        if ok and isinstance(old, int) and not isinstance(old, bool) and float(new) != int(new):
            ok = False
    elif isinstance(old, (list, tuple)):
        ok = isinstance(new, (list, tuple)) and (not old or len(new) == len(old) or key.endswith(("taps", "events")))
    elif isinstance(old, dict):
        # schedules accept a bare number
        ok = isinstance(new, dict) or (key.endswith(("lambda_fd", "lambda_od", "lr_schedule"))
                                      and isinstance(new, (int, float)))
    else:
        ok = isinstance(new, type(old))
    if not ok:
        raise ConfigError(f"{key}: expected {type(old).__name__}, got {new!r}")
    return new


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value``; the value is parsed as YAML and type-checked against the current entry."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {key}: {exc}") from None
    node = cfg
    parts = key.strip().split(".")
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = _check_type(key, node[parts[-1]], value)
    return cfg


def load_config(path: str | None, overrides: list[str], seed: int | None) -> dict:
    cfg = default_config()
    if path:
        try:
            text = Path(path).read_text()
            data = yaml.safe_load(text) if not path.endswith(".json") else json.loads(text)
        except (OSError, yaml.YAMLError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if data is not None:
            if not isinstance(data, dict):
                raise ConfigError(f"config {path} must be a mapping")
            cfg = _merge(cfg, data)
    for o in overrides:
        cfg = apply_override(cfg, o)
    if seed is not None:
        cfg["seed"] = seed
    cfg["train"]["seed"] = cfg["seed"]
    try:
        scene_cfg = SceneConfig.from_dict(cfg["scenes"])
        train_cfg = trainer.TrainConfig.from_dict(cfg["train"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    # normalized echo: everything the run used, in canonical form
    return {"seed": int(cfg["seed"]), "n_scenes": int(cfg["n_scenes"]), "scenes": scene_cfg.to_dict(),
            "train": train_cfg.to_dict()}


# ---------------------------------------------------------------- helpers


def _train_config(cfg: dict) -> trainer.TrainConfig:
    return trainer.TrainConfig.from_dict(cfg["train"])


def _scenes(path) -> list:
    if path is None:
        raise ValueError("--data is required for this verb")
    return sceneio.read_scenes(path)


def _ks(text: str) -> tuple[int, ...]:
    return tuple(int(k) for k in text.split(","))


def _write_metrics(report, out: Path, name: str = "metrics") -> None:
    report.write_table(out / f"{name}.csv")
    (out / f"{name}.txt").write_text(report.to_text())
    print(report.to_text(), end="")


def _eval_data(path, model_cfg: ModelConfig, with_map: bool = False):
    if path is None:
        return None
    return trainer.Dataset(sceneio.read_scenes(path), replace(model_cfg, has_map_branch=with_map), with_map=with_map)


def _usable_ks(ks, modes):
    return tuple(k for k in ks if k <= modes) or (modes,)


def predictions_world(model, scenes) -> list[dict]:
    """Per-scene ``{target_id: (modes (K,T,2) world frame, probs)}`` for plotting."""
    data = trainer.Dataset(scenes, model.config, with_map=model.config.has_map_branch)
    pred = model.predict(data.batch)
    mu = data.batch.to_world(pred.mu.data)
    probs = pred.probs()
    return [{s.target_id: (mu[i], probs[i])} for i, s in enumerate(scenes)]


# ---------------------------------------------------------------- verbs


def cmd_gen(args, cfg, out: Path) -> None:
    n = args.n if args.n is not None else cfg["n_scenes"]
    scenes = generate_dataset(SceneConfig.from_dict(cfg["scenes"]), n, seed=cfg["seed"])
    path = out / "scenes.jsonl"
    sceneio.write_scenes(path, scenes)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    manifest = {"file": path.name, "n_scenes": n, "seed": cfg["seed"], "sha256": digest,
                "behaviors": {b: sum(s.behavior == b for s in scenes) for b in sorted({s.behavior for s in scenes})}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    print(f"wrote {n} scenes to {path}")


def cmd_import(args, cfg, out: Path) -> None:
    if not args.csv:
        raise ValueError("import needs at least one --csv file")
    scenes = [s for f in args.csv for s in sceneio.import_csv(f)]
    sceneio.write_scenes(out / "scenes.jsonl", scenes)
    print(f"imported {len(scenes)} scenes")


def cmd_train_teacher(args, cfg, out: Path) -> None:
    tc = _train_config(cfg)
    ev = _eval_data(args.eval_data, tc.model, with_map=True)
    model, rec = trainer.train_teacher(_scenes(args.data), tc, eval_data=ev, checkpoint=out / "teacher.ckpt")
    rec.write(out / "record.json")
    if ev is not None:
        _write_metrics(trainer.evaluate(model, ev, _usable_ks(_ks(args.k), model.config.modes)), out)
    print(f"teacher checkpoint {out / 'teacher.ckpt'} final loss {rec.final_loss():.4f}")


def cmd_distill(args, cfg, out: Path) -> None:
    tc = _train_config(cfg)
    if args.teacher is None and not args.baseline:
        raise ValueError("distill needs --teacher (or --baseline for the mapless baseline)")
    teacher = None if args.baseline else args.teacher
    name = "baseline" if args.baseline else "student"
    ev = _eval_data(args.eval_data, tc.model)
    model, rec = trainer.train_student(_scenes(args.data), tc, teacher, eval_data=ev,
                                       checkpoint=out / f"{name}.ckpt")
    rec.write(out / "record.json")
    if ev is not None:
        _write_metrics(trainer.evaluate(model, ev, _usable_ks(_ks(args.k), model.config.modes)), out)
    print(f"{name} checkpoint {out / f'{name}.ckpt'} final loss {rec.final_loss():.4f}")


def cmd_eval(args, cfg, out: Path) -> None:
    if not args.checkpoint or len(args.checkpoint) != 1:
        raise ValueError("eval needs exactly one --checkpoint")
    model, _ = load_checkpoint(args.checkpoint[0])
    data = trainer.Dataset(_scenes(args.data), model.config, with_map=model.config.has_map_branch)
    _write_metrics(trainer.evaluate(model, data, _ks(args.k)), out)


def cmd_ablate(args, cfg, out: Path) -> None:
    tc = _train_config(cfg)
    if args.teacher is None or args.eval_data is None:
        raise ValueError("ablate needs --teacher and --eval-data")
    teacher, _ = load_checkpoint(args.teacher)
    train = trainer.Dataset(_scenes(args.data), tc.model, with_map=True)
    ev = _eval_data(args.eval_data, tc.model)
    ks = _usable_ks(_ks(args.k), tc.model.modes)
    results = trainer.run_ablation(train, teacher, tc, ev, ks)
    table = trainer.ablation_table({c: r for c, (_, r) in results.items()}, ks)
    (out / "ablation.tsv").write_text(table)
    for (fd, od), (rec, _) in results.items():
        rec.write(out / f"record_fd{int(fd)}_od{int(od)}.json")
    print(table, end="")


def cmd_kscan(args, cfg, out: Path) -> None:
    if args.student is None or args.baseline_ckpt is None:
        raise ValueError("kscan needs --student and --baseline-ckpt")
    model, _ = load_checkpoint(args.student)
    data = trainer.Dataset(_scenes(args.data), replace(model.config, has_map_branch=False), with_map=False)
    rows = trainer.run_k_scaling(model, args.baseline_ckpt, data, _ks(args.k))
    trainer.write_curve(rows, out / "kscan.csv")
    print((out / "kscan.csv").read_text(), end="")


def cmd_histscan(args, cfg, out: Path) -> None:
    tc = _train_config(cfg)
    if args.teacher is None or args.eval_data is None:
        raise ValueError("histscan needs --teacher and --eval-data")
    teacher, _ = load_checkpoint(args.teacher)
    rows = trainer.run_history_length_sweep(_scenes(args.data), sceneio.read_scenes(args.eval_data), teacher, tc,
                                            _ks(args.lengths))
    trainer.write_curve(rows, out / "histscan.csv")
    print((out / "histscan.csv").read_text(), end="")


def cmd_gradcheck(args, cfg, out: Path) -> int:
    results = gradchecks.run_suite(args.module, trials=args.trials, seed=cfg["seed"])
    table = gradchecks.format_table(results)
    (out / "gradcheck.txt").write_text(table)
    print(table, end="")
    return 0 if all(r.passed for r in results) else 1


def cmd_viz(args, cfg, out: Path) -> None:
    if not args.checkpoint:
        raise ValueError("viz needs --checkpoint (give two for a side-by-side plot)")
    scenes = _scenes(args.data)
    picked = [scenes[i] for i in (args.index or [0])]
    panels = []
    for ck in args.checkpoint:
        model, _ = load_checkpoint(ck)
        panels.append((f"{Path(ck).stem} K={model.config.modes}", predictions_world(model, picked)))
    for j, scene in enumerate(picked):
        svg = viz.render_panels(scene, [(title, preds[j]) for title, preds in panels])
        path = viz.write_svg(svg, out / f"scene_{(args.index or [0])[j]:05d}.svg")
        print(f"wrote {path}")


COMMANDS = {"gen": cmd_gen, "import": cmd_import, "train-teacher": cmd_train_teacher, "distill": cmd_distill,
            "eval": cmd_eval, "ablate": cmd_ablate, "kscan": cmd_kscan, "histscan": cmd_histscan,
            "gradcheck": cmd_gradcheck, "viz": cmd_viz}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maplesskd", description="Map-free trajectory prediction with distillation.")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--config", help="YAML or JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted override, e.g. train.lr=0.003 (repeatable)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, help="seed for every random choice of the run")
    p.add_argument("--data", help="scene file (.jsonl)")
    p.add_argument("--eval-data", help="held-out scene file")
    p.add_argument("--teacher", help="teacher checkpoint")
    p.add_argument("--baseline", action="store_true", help="distill: train the plain mapless baseline")
    p.add_argument("--student", help="kscan: distilled student checkpoint")
    p.add_argument("--baseline-ckpt", help="kscan: baseline checkpoint")
    p.add_argument("--checkpoint", action="append", help="model checkpoint (viz accepts several)")
    p.add_argument("--csv", action="append", help="import: sequence CSV file (repeatable)")
    p.add_argument("--n", type=int, help="gen: number of scenes (default: n_scenes)")
    p.add_argument("--k", default="1,6", help="comma-separated K values")
    p.add_argument("--lengths", default="5,10,20", help="histscan: history lengths")
    p.add_argument("--module", default="losses", choices=sorted(set(gradchecks.SUITES) | {"all"}))
    p.add_argument("--trials", type=int, default=100, help="gradcheck trials per case")
    p.add_argument("--index", type=int, action="append", help="viz: scene index (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True))
        code = COMMANDS[args.verb](args, cfg, out)
    except Exception as exc:  # noqa: BLE001 - one-line diagnostic for any runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
