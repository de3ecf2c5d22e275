"""Acceptance criteria 1-10, one test each, each printing a single PASS/FAIL line.

Criteria 6-9 share one desk-scale run (module fixture, roughly 15-20 minutes
on one CPU core).
"""
import time
from dataclasses import replace

import numpy as np
import pytest

from maplesskd import experiments as X
from maplesskd import gradchecks
from maplesskd import losses as L
from maplesskd import metrics as M
from maplesskd import trainer as T
from maplesskd.diffcore import Tensor
from maplesskd.nets import (ModelConfig, MixturePrediction, Predictor, build_batch, decompose_equivalent, file_hash,
                            joint_attention_weights, save_checkpoint)
from maplesskd.sceneio import scene_to_dict
from maplesskd.synthworld import SceneConfig, generate_dataset
from oracles import bf_scene, random_scene, scan_minimize

SMALL = ModelConfig(hidden=8, modes=3, max_agents=4, max_segments=10, goal_candidates=30)


def report(capsys, n, name, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {name}: {detail}")


# ---------------------------------------------------------------- 1-5, 10


def test_c1_gradient_fidelity(capsys):
    t0 = time.perf_counter()
    results = gradchecks.run_suite("all", trials=100)
    seconds = time.perf_counter() - t0
    worst = max(results, key=lambda r: r.max_rel_err)
    ok = all(r.max_rel_err <= 1e-4 and r.trials == 100 for r in results) and seconds <= 120
    report(capsys, 1, "gradient fidelity", ok,
           f"{len(results)} checks x 100 trials, worst {worst.name} {worst.max_rel_err:.2e}, {seconds:.0f}s")
    assert ok, gradchecks.format_table(results)


def _mix(mu, scale=None):
    shape = (1, 1, 1, 1)
    sp = None if scale is None else Tensor(np.full(shape, scale))
    return MixturePrediction(Tensor(np.full(shape, mu)), Tensor(np.ones(shape)), Tensor(np.zeros((1, 1))), sp)


def test_c2_stationarity_oracles(capsys):
    worst = {}
    for r in (0.1, 0.7, 2.5):
        found = scan_minimize(lambda d: L.fkd_loss(np.array([[r]]), Tensor([[0.0]]), Tensor([[d]])).item(), 1e-3, 10)
        worst["fkd"] = max(worst.get("fkd", 0), abs(found ** 2 / (2 * r * r) - 1))
        for dist in ("gaussian", "laplace"):
            cfg = L.LossConfig(distribution=dist, temperature=1.0)
            found = scan_minimize(lambda s: L.okd_regression(_mix(r), _mix(0.0, s), cfg).item(), 1e-3, 10)
            err = abs(found ** 2 / r ** 2 - 1) if dist == "gaussian" else abs(found / r - 1)
            worst[dist] = max(worst.get(dist, 0), err)
    ok = all(v <= 1e-6 for v in worst.values())
    report(capsys, 2, "stationarity oracles", ok, ", ".join(f"{k} rel err {v:.1e}" for k, v in worst.items()))
    assert ok


def test_c3_metric_oracle(capsys):
    rng = np.random.default_rng(123)
    worst, monotone = 0.0, True
    for _ in range(200):
        K = int(rng.integers(1, 7))
        modes, probs, gt = random_scene(rng, K)
        for k in range(1, K + 1):
            m, p = M.top_k(modes, probs, k)
            ref = bf_scene(m.tolist(), p.tolist(), gt.tolist(), k)
            got = {"minADE": M.min_ade(m, gt, k), "minFDE": M.min_fde(m, gt, k),
                   "MR": M.miss_rate(m[None], gt[None], k), "brier_minFDE": M.brier_min_fde(m, p, gt, k)}
            worst = max(worst, max(abs(got[n] - ref[n]) for n in M.METRICS))
        fdes = [M.min_fde(modes, gt, k) for k in range(1, K + 1)]
        monotone &= all(b <= a for a, b in zip(fdes, fdes[1:]))
    ok = worst <= 1e-12 and monotone
    report(capsys, 3, "metric oracle equivalence", ok, f"200 scenes, max abs diff {worst:.1e}, monotone in K {monotone}")
    assert ok


@pytest.fixture(scope="module")
def small_scenes():
    return generate_dataset(SceneConfig(), 32, seed=4)


@pytest.fixture(scope="module")
def small_teacher(small_scenes):
    return T.train_teacher(small_scenes, T.TrainConfig(epochs=1, batch_size=8, model=SMALL))[0]


def test_c4_baseline_recovery(capsys, small_scenes, small_teacher):
    cfg = T.TrainConfig(epochs=2, batch_size=8, model=SMALL, lambda_fd=T.Schedule(0.0), lambda_od=T.Schedule(0.0))
    base, _ = T.train_student(small_scenes, cfg, None)
    off, _ = T.train_student(small_scenes, cfg, small_teacher)
    same = set(base.params) == set(off.inference_params()) and all(
        base.params[n].data.tobytes() == off.params[n].data.tobytes() for n in base.params)
    report(capsys, 4, "baseline recovery", same, f"{len(base.params)} parameter arrays bitwise equal: {same}")
    assert same


def test_c5_frozen_teacher_and_taps(capsys, tmp_path, small_scenes, small_teacher):
    path = tmp_path / "teacher.ckpt"
    save_checkpoint(small_teacher, path)
    before = file_hash(path)
    T.train_student(small_scenes, T.TrainConfig(epochs=1, batch_size=8, model=SMALL), path)
    unchanged = file_hash(path) == before
    batch = build_batch(small_scenes[:4], SMALL)
    t_out = small_teacher.forward(batch)
    s_out = Predictor(replace(SMALL, has_map_branch=False, distill_heads=True), seed=0).forward(batch, distill=True)
    shapes = {tap: (t_out.taps[tap].shape, s_out.taps[tap].shape) for tap in SMALL.taps}
    taps_ok = all(a == b for a, b in shapes.values())
    ok = unchanged and taps_ok
    report(capsys, 5, "frozen teacher and tap shapes", ok,
           f"hash unchanged {unchanged}, taps {', '.join(f'{k}{v[0]}' for k, v in shapes.items())} match {taps_ok}")
    assert ok


def test_c10_decomposition(capsys):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        H = int(rng.integers(2, 17))
        fa, fm = rng.normal(size=(int(rng.integers(1, 9)), H)), rng.normal(size=(int(rng.integers(1, 9)), H))
        wa, wm = joint_attention_weights(rng.normal(size=H), fa, fm)
        d = decompose_equivalent(fa, fm, wa, wm)
        worst = max(worst, float(np.abs(d.reconstruct() - d.f_global).max()))
    ok = worst <= 1e-9
    report(capsys, 10, "equivalent-feature decomposition", ok, f"100 instances, max abs err {worst:.1e}")
    assert ok


# ---------------------------------------------------------------- desk-scale run (6-9)


@pytest.fixture(scope="module")
def desk():
    cfg = X.DeskConfig()
    t0 = time.perf_counter()
    data = X.make_data(cfg)
    results = X.run_desk(cfg, data)
    return cfg, data, results, time.perf_counter() - t0


def test_c6_gap_narrowing(capsys, desk):
    cfg, _, res, seconds = desk
    t, s, b = res.mean("teacher"), res.mean("fokd"), res.mean("baseline")
    gain = (b - s) / b
    ordered = t < s < b
    ok = ordered and gain >= 0.03 and seconds <= 1800 and cfg.n_train >= 2000 and len(cfg.seeds) == 3
    report(capsys, 6, "desk gap narrowing", ok,
           f"minFDE6 teacher {t:.4f} < fokd {s:.4f} < baseline {b:.4f}: {ordered}; "
           f"gain {100 * gain:.2f}% (need >= 3%); {seconds / 60:.1f} min")
    with capsys.disabled():
        print(res.table())
    assert ok


def test_c7_ablation_structure(capsys, desk):
    _, _, res, _ = desk
    wins = [r["fokd"].get("minFDE", 6) <= min(r["fkd_only"].get("minFDE", 6), r["okd_only"].get("minFDE", 6))
            for r in res.per_seed.values()]
    complete = all(set(r) == {"teacher", *X.CELLS} for r in res.per_seed.values())
    ok = complete and sum(wins) >= 2
    report(capsys, 7, "ablation structure", ok, f"4 cells per seed {complete}; both-on <= single-on in "
                                                 f"{sum(wins)}/{len(wins)} seeds")
    assert ok


def test_c8_k_scaling(capsys, desk):
    cfg, _, res, _ = desk
    ks = list(cfg.k_list)
    curves = {m: [r.get("minFDE", k) for k in ks] for m, r in res.k_reports.items()}
    monotone = all(all(b <= a for a, b in zip(v, v[1:])) for v in curves.values())
    emitted = [row["K"] for row in res.k_curve] == ks
    ok = monotone and emitted and ks == [1, 6, 20]
    trend = ", ".join(f"K={row['K']} {100 * row['improvement']:+.1f}%" for row in res.k_curve)
    report(capsys, 8, "K-scaling", ok, f"non-increasing in K {monotone}; improvement {trend}")
    assert ok


def test_c9_determinism(capsys, desk):
    cfg, (train_scenes, eval_scenes), res, _ = desk
    # regenerate a slice of each set and compare, then retrain the first seed's teacher and student
    same_data = all(scene_to_dict(a) == scene_to_dict(b) for a, b in zip(
        generate_dataset(cfg.scenes, 50, seed=cfg.data_seed, start=1950), train_scenes[1950:]))
    same_data &= all(scene_to_dict(a) == scene_to_dict(b) for a, b in zip(
        generate_dataset(cfg.scenes, 50, seed=cfg.eval_seed), eval_scenes[:50]))
    seed = cfg.seeds[0]
    run_cfg = replace(cfg.train, seed=seed)
    mcfg = run_cfg.model
    train = T.Dataset(train_scenes, replace(mcfg, has_map_branch=True), with_map=True)
    teacher, _ = T.train_teacher(train, X.teacher_config(run_cfg, cfg.teacher_epochs))
    student, _ = T.train_student(train, run_cfg, teacher)
    again = {"teacher": T.evaluate(teacher, T.Dataset(eval_scenes, replace(mcfg, has_map_branch=True), True), (1, 6)),
             "fokd": T.evaluate(student, T.Dataset(eval_scenes, replace(mcfg, has_map_branch=False), False), (1, 6))}
    worst = max(abs(again[m].get(metric, k) - res.per_seed[seed][m].get(metric, k))
                for m in again for k in (1, 6) for metric in M.METRICS)
    ok = same_data and worst <= 1e-9
    report(capsys, 9, "determinism", ok, f"regenerated scenes identical {same_data}; "
                                         f"seed {seed} teacher and fokd metrics max diff {worst:.1e}")
    assert ok
