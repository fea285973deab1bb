"""Run the full training and evaluation pipeline from a YAML config.

Thin wrapper over the `citegen pipeline` command body that also prints a
compact stage-timing table and the headline numbers from the report, which
is the usual thing one wants when comparing configs side by side.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import yaml

from citegen.cli import run_pipeline


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=Path, default=Path("configs/desk.yaml"))
    parser.add_argument("--workdir", type=Path, required=True)
    args = parser.parse_args()

    config = yaml.safe_load(args.config.read_text()) or {}
    report = run_pipeline(config, args.workdir)

    print()
    print(f"{'stage':<14} {'seconds':>9}")
    for name, info in report["stages"].items():
        print(f"{name:<14} {info['seconds']:>9.2f}")
    total = sum(info["seconds"] for info in report["stages"].values())
    print(f"{'total':<14} {total:>9.2f}")

    evaluation = report["evaluation"]
    match = evaluation["keyword_match_rate"]
    print()
    print(f"conditioning gap R-1: {evaluation['conditioning_gap_rouge1']:+.2f}")
    print(
        f"keyword match rate:   {match['frequency']:.3f} "
        f"(Wilson lower 95%: {match['wilson_lower_95']:.3f}, n={match['trials']})"
    )
    print(f"classifier macro F1:  {report['classifier']['macro_f1']:.3f}")
    print(f"report: {args.workdir / 'report.json'}")


if __name__ == "__main__":
    main()
