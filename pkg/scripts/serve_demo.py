"""Serve the suggestion and generation API from a pipeline workdir.

Points the HTTP service at the artifacts a pipeline run leaves behind
(`corpus.jsonl`, `labeled/`, `models/`) and starts it.  Feedback collected
through the API lands in `feedback.jsonl` inside the same workdir.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from citegen.service import ServiceConfig, run_service


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, required=True, help="pipeline output directory")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument(
        "--presentation-seed",
        type=int,
        default=None,
        help="seed for the blinded A/B card order (default: nondeterministic)",
    )
    default_static = Path(__file__).resolve().parent.parent / "frontend" / "dist"
    parser.add_argument(
        "--static",
        type=Path,
        default=default_static if default_static.exists() else None,
        help="built browser UI to mount at /ui (default: frontend/dist when present)",
    )
    args = parser.parse_args()

    config = ServiceConfig(
        corpus_path=args.workdir / "corpus.jsonl",
        models_dir=args.workdir / "models",
        dataset_dir=args.workdir / "labeled",
        feedback_path=args.workdir / "feedback.jsonl",
        host=args.host,
        port=args.port,
        presentation_seed=args.presentation_seed,
        static_dir=str(args.static) if args.static else None,
    )
    print(f"serving on http://{args.host}:{args.port}")
    print("endpoints: /health /suggest /generate /feedback /feedback/summary")
    if config.static_dir:
        print(f"browser UI: http://{args.host}:{args.port}/ui/")
    run_service(config)


if __name__ == "__main__":
    main()
