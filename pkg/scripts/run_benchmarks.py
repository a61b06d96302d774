"""Run committed experiment configs and print their summary tables.

Usage: python scripts/run_benchmarks.py [config ...] [--out-root runs]
Without arguments every ``configs/*.yaml`` is run (this takes hours on one core).
"""
import argparse
import logging
from pathlib import Path

from rkdenoise.config import load_config
from rkdenoise.experiment import SUMMARY_COLUMNS, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("configs", nargs="*", type=Path)
    p.add_argument("--out-root", type=Path, default=ROOT / "runs")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s: %(message)s")
    paths = args.configs or sorted((ROOT / "configs").glob("*.yaml"))
    for path in paths:
        cfg = load_config(path)
        result = run_experiment(cfg, args.out_root / cfg.name)
        print(f"== {cfg.name}")
        print("  ".join(SUMMARY_COLUMNS))
        for row in result["summary"]:
            print("  ".join("-" if row[c] is None else f"{row[c]:.4g}" if isinstance(row[c], float)
                            else str(row[c]) for c in SUMMARY_COLUMNS))


if __name__ == "__main__":
    main()
