"""FOKD improvement over the mapless baseline as the observed history is shortened."""
import argparse
import logging
from pathlib import Path

from maplesskd import experiments as X
from maplesskd.trainer import Dataset, run_history_length_sweep, train_teacher, write_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/history")
    ap.add_argument("--lengths", default="5,10,20")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-train", type=int, default=2000)
    ap.add_argument("--n-eval", type=int, default=1000)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = X.DeskConfig(n_train=args.n_train, n_eval=args.n_eval)
    train_scenes, eval_scenes = X.make_data(cfg)
    run_cfg = X.desk_train_config(seed=args.seed)
    teacher, _ = train_teacher(Dataset(train_scenes, run_cfg.model, with_map=True),
                               X.teacher_config(run_cfg, cfg.teacher_epochs))
    lengths = [int(x) for x in args.lengths.split(",")]
    rows = run_history_length_sweep(train_scenes, eval_scenes, teacher, run_cfg, lengths)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_curve(rows, out / "history_curve.csv")
    for r in rows:
        print(f"history {r['history']:>2}: baseline {r['baseline_minFDE']:.4f}  fokd {r['fokd_minFDE']:.4f}  "
              f"improvement {100 * r['improvement']:+.2f}%")


if __name__ == "__main__":
    main()
