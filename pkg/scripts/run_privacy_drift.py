"""Run the privacy-drift matrix for one config and print a per-group summary.

    python3 scripts/run_privacy_drift.py configs/quick.json --jobs 2

Same computation as ``driftbench run`` but prints phase-mean tables instead of
writing the result tree, which is handy when iterating on a config.
"""
import argparse
import time

import numpy as np

from driftbench.config import load_config
from driftbench.experiment import build_dataset, build_splits, reports_by_group, run_matrix


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None, help="override every seed in the config")
    args = ap.parse_args(argv)

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    start = time.perf_counter()
    dataset = build_dataset(cfg)
    splitset = build_splits(cfg, dataset)
    results = run_matrix(cfg, dataset, splitset, jobs=args.jobs)
    for cell in results:
        if cell.error:
            print(f"FAILED {cell.key}: {cell.error}")

    for rep in reports_by_group(cfg, results):
        rs = rep.pearson_values
        print(f"\n{rep.paradigm}, {rep.client_count} client(s): mean Pearson {np.mean(rs):+.3f}, "
              f"{sum(r > 0 for r in rs)}/{len(rs)} positive, pooled {rep.pooled_pearson}")
        print("  phase  train_acc  test_acc  mia_auc")
        for k, m in enumerate(rep.phase_means):
            print(f"  {k:5d}  {m['train_acc']:9.3f}  {m['test_acc']:8.3f}  {m['mia_auc']:7.3f}")
    print(f"\n{len(results)} cells in {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
