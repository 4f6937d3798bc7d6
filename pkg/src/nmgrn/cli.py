"""Command line entry point: ``python -m nmgrn <command>``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import data as dio
from . import harness

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--base", choices=["sgd", "adam"])
    p.add_argument("--model", choices=list(harness.MODEL_IDS))
    p.add_argument("--models", help="comma-separated model ids sampled during evolution")
    p.add_argument("--scale", choices=["paper", "desk"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--out")
    p.add_argument("--dataset", choices=["cifar10", "cifar100", "blobs", "spirals"])
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--subset", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--workers", type=int)


_RUN_KEYS = ("seed", "base", "model", "models", "scale", "epochs", "batch_size", "out",
             "dataset", "data_dir", "subset", "population", "generations", "workers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmgrn", description="GRN neuromodulation of SGD/Adam")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("evolve", help="evolve a controller genome")
    _run_flags(p)
    p = sub.add_parser("compare", help="baseline vs neuromodulated training curves")
    _run_flags(p)
    p.add_argument("genome")
    p = sub.add_parser("trace", help="per-iteration controller telemetry")
    _run_flags(p)
    p.add_argument("genome")
    p = sub.add_parser("print-config", help="print the effective configuration")
    _run_flags(p)
    p = sub.add_parser("validate-genome", help="check a genome file")
    p.add_argument("genome")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-genome":
            gf = dio.load_genome(args.genome)
            print(f"ok: {len(gf.genome)} proteins, base {gf.base}")
            return EXIT_OK
        try:
            run = harness.load_run_config(args.config, **{k: getattr(args, k) for k in _RUN_KEYS})
        except (ValueError, OSError) as e:
            print(f"nmgrn: config error: {e}", file=sys.stderr)
            return EXIT_USAGE
        if args.command == "print-config":
            sys.stdout.write(run.to_text())
        elif args.command == "evolve":
            best, history, gpath, hpath = harness.cmd_evolve(run)
            print(f"best fitness {best.fitness:.4f}; wrote {gpath} and {hpath}")
        elif args.command == "compare":
            rows = harness.cmd_compare(run, args.genome)
            print(f"wrote {len(rows)} rows to {run.out}/compare.csv")
        elif args.command == "trace":
            rows = harness.cmd_trace(run, args.genome)
            print(f"wrote {len(rows)} rows to {run.out}/trace.csv")
        return EXIT_OK
    except (dio.DataError, FileNotFoundError) as e:
        print(f"nmgrn: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001 - surfaced as exit code 3
        print(f"nmgrn: failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
