"""Command-line entry point: ``perron COMMAND [--config PATH] [--out DIR] [--seed N] [--threads N]``.

Exit status is 0 when every check passes, 2 when a check fails and 1 on
errors (bad configuration, numerical failures).
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import PerronError
from .experiments import EXPERIMENTS, Context, run_all, run_experiment

COMMANDS = list(EXPERIMENTS) + ["all"]

log = logging.getLogger("perron")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perron", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, default=None,
                   help="JSON config (default: bundled z^2 benchmark)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output root directory")
    p.add_argument("--seed", type=int, default=None, help="override the sample seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (results do not depend on this)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def write_outputs(root: Path, cfg, command: str, results, threads: int) -> Path:
    out = root / cfg.content_hash()
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for res in results:
        for name, data in sorted(res.files.items()):
            (out / name).write_bytes(data)
    summary = {r.name: {"passed": r.passed, "summary": r.summary} for r in results}
    (out / f"summary_{command}.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    meta = {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "command": command, "version": __version__, "threads": threads}
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return out


def run(command: str, config_path=None, out=Path("out"), seed=None, threads: int = 1) -> int:
    try:
        cfg = load_config(config_path).with_seed(seed)
        ctx = Context(cfg)
        results = run_all(ctx) if command == "all" else [run_experiment(command, ctx)]
        out_dir = write_outputs(Path(out), cfg, command, results, threads)
    except PerronError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for res in results:
        print(res.line())
    passed = all(r.passed for r in results)
    if command == "all":
        print(f"all: {'PASS' if passed else 'FAIL'} "
              f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    log.info("outputs written to %s", out_dir)
    return 0 if passed else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 1
    return run(args.command, args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
