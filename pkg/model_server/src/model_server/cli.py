"""Command line entry points: serve, finetune, grid."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from model_server.artifact import ArtifactError
from model_server.training import BatchTooLarge, build_run, finetune, grid


def _add_train_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--dataset", required=True, help="CSV or JSONL dataset (project,text,label)")
    sub.add_argument("--model-id", required=True)
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--batch-size", type=int, default=8)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--budget-mb", type=float, default=None,
                     help="memory budget used for the batch ladder check")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="model-server")
    parser.add_argument("-v", "--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    serve_p = commands.add_parser("serve", help="serve a trained artifact")
    serve_p.add_argument("artifact", help="artifact directory")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8080)
    serve_p.add_argument("--max-batch", type=int, default=64)

    tune_p = commands.add_parser("finetune", help="run one fine-tuning configuration")
    _add_train_args(tune_p)
    tune_p.add_argument("--learning-rate", type=float, default=5e-5)
    tune_p.add_argument("--weight-decay", type=float, default=0.01)
    tune_p.add_argument("--int8", action="store_true",
                        help="record 8-bit backbone loading in the run metadata")

    grid_p = commands.add_parser("grid", help="train the full 3x3 hyperparameter grid")
    _add_train_args(grid_p)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "serve":
            from model_server.server import serve

            serve(args.artifact, host=args.host, port=args.port, max_batch=args.max_batch)
            return 0

        if args.command == "finetune":
            run = build_run(
                args.model_id,
                learning_rate=args.learning_rate,
                weight_decay=args.weight_decay,
                batch_size=args.batch_size,
                seed=args.seed,
                int8=args.int8,
            )
            result = finetune(args.dataset, run, args.out, budget_mb=args.budget_mb)
            print(json.dumps({
                "artifact": str(result.artifact_dir),
                "epochs_run": result.epochs_run,
                "stopped_early": result.stopped_early,
                "weighted_f1": result.report["weighted_f1"],
                "macro_f1": result.report["macro_f1"],
            }, indent=2))
            return 0

        if args.command == "grid":
            results, best = grid(
                args.dataset, args.model_id, args.out,
                batch_size=args.batch_size, seed=args.seed,
            )
            print(json.dumps({
                "runs": len(results),
                "best": {
                    "learning_rate": best.run.learning_rate,
                    "weight_decay": best.run.weight_decay,
                    "artifact": str(best.artifact_dir),
                    "weighted_f1": best.report["weighted_f1"],
                },
            }, indent=2))
            return 0
    except BatchTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArtifactError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
