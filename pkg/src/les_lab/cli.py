"""Command line entry point: ``les-lab run`` and ``les-lab suites``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .partitions import BudgetError
from .runner import (
    EXIT_BUDGET,
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_PASS,
    ConfigError,
    list_suites,
    load_config_text,
    parse_config,
    run_config,
    write_artifacts,
)

log = logging.getLogger("les_lab")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="les-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True, help="path to a JSON config or a bundled suite name")
    run.add_argument("--out", default=None, help="output directory (default: out/<config id>)")
    run.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    run.add_argument("--seed-override", type=int, default=None, help="replace the config's master seed")
    sub.add_parser("suites", help="list bundled acceptance suites")
    return parser


def _sidecar_logger(out: Path) -> logging.Handler:
    # timestamps live only here so report bytes stay reproducible
    handler = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def cmd_run(args) -> int:
    try:
        text, origin = load_config_text(args.config)
        cfg = parse_config(text)
        if args.seed_override is not None:
            cfg["seed"] = args.seed_override
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as e:
        print(f"config error ({args.config}): {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as e:
        print(f"budget error ({args.config}): {e}", file=sys.stderr)
        return EXIT_BUDGET
    out = Path(args.out) if args.out else Path("out") / cfg["id"].replace("/", "_")
    out.mkdir(parents=True, exist_ok=True)
    handler = _sidecar_logger(out)
    try:
        log.info("config %s from %s, threads=%d", cfg["id"], origin, args.threads)
        start = time.perf_counter()
        try:
            res = run_config(cfg, threads=args.threads)
        except BudgetError as e:
            print(f"budget error: {e}", file=sys.stderr)
            log.error("budget error: %s", e)
            return EXIT_BUDGET
        except ConfigError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        write_artifacts(res, out)
        log.info("finished in %.2fs, verdict=%s", time.perf_counter() - start, "pass" if res.passed else "fail")
    finally:
        log.removeHandler(handler)
        handler.close()
    sys.stdout.write(res.summary_text())
    return EXIT_PASS if res.passed else EXIT_FAIL


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "suites":
        for name in list_suites():
            print(name)
        return EXIT_PASS
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
