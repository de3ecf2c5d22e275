"""Desk-scale teacher / baseline / distilled-student comparison with the ablation grid and K-scaling pair.

Writes results.json, minfde6.tsv and k_curve.csv to --out. Takes about 15-20
minutes on one CPU core with the defaults.
"""
import argparse
import logging
from dataclasses import replace
from pathlib import Path

from maplesskd import experiments as X
from maplesskd.trainer import write_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seeds", default="0,1,2", help="comma-separated training seeds")
    ap.add_argument("--n-train", type=int, default=2000)
    ap.add_argument("--n-eval", type=int, default=4000)
    ap.add_argument("--epochs", type=int, default=None, help="override the student epoch count")
    ap.add_argument("--teacher-epochs", type=int, default=None, help="override the teacher epoch count")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = X.DeskConfig(n_train=args.n_train, n_eval=args.n_eval, seeds=tuple(int(s) for s in args.seeds.split(",")))
    if args.epochs is not None:
        cfg.train = X.rescale_epochs(cfg.train, args.epochs)
    if args.teacher_epochs is not None:
        cfg.teacher_epochs = args.teacher_epochs
    res = X.run_desk(cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.write(out / "results.json")
    (out / "minfde6.tsv").write_text(res.table())
    write_curve(res.k_curve, out / "k_curve.csv")
    t, s, b = res.mean("teacher"), res.mean("fokd"), res.mean("baseline")
    print(res.table())
    print(f"teacher {t:.4f}  fokd {s:.4f}  baseline {b:.4f}  relative gain {100 * (b - s) / b:.2f}%")
    print(f"total {res.seconds['total'] / 60:.1f} min")


if __name__ == "__main__":
    main()
