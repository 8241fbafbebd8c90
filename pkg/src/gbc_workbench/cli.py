"""Command-line harness: ``gbc-workbench --suite NAME [options]``.

Settings come from flags, then ``GBC_*`` environment variables, then
defaults.  Exit status: 0 all cases pass, 1 a case failed, 2 bad input
(flags or fixture), 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Optional

from .fixtures import FixtureError
from .suites import SUITES, SuiteConfig, run

log = logging.getLogger("gbc_workbench")

SCHEMA = "gbc-report/1"
EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INTERNAL = 0, 1, 2, 3

# flag -> (config field, type)
OPTIONS = {
    "suite": ("suite", str),
    "bundle": ("bundle", str),
    "section": ("section", str),
    "charge": ("charge", int),
    "quad-order": ("quad_order", int),
    "fd-step": ("fd_step", float),
    "tol-form": ("tol_form", float),
    "tol-mod": ("tol_mod", float),
    "tol-int": ("tol_int", float),
    "clearance": ("clearance", float),
    "jobs": ("jobs", int),
    "out": ("out", str),
    "seed": ("seed", int),
    "samples": ("samples", int),
}


def env_name(flag: str) -> str:
    return "GBC_" + flag.upper().replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gbc-workbench", description=__doc__.split("\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter,
                                epilog="Every option may also be set as GBC_<OPTION> (e.g. GBC_QUAD_ORDER=32).")
    for flag, (dest, typ) in OPTIONS.items():
        kw = {"choices": SUITES} if flag == "suite" else {}
        p.add_argument(f"--{flag}", dest=dest, type=typ, default=None, **kw)
    p.add_argument("--orders", type=lambda s: [int(x) for x in s.split(",")], default=None,
                   help="comma-separated quadrature orders for the convergence suite")
    p.add_argument("--csv", default=None, help="convergence table output (CSV)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(args: argparse.Namespace, environ=None) -> SuiteConfig:
    """Flags override ``GBC_*`` variables, which override defaults."""
    environ = os.environ if environ is None else environ
    cfg = SuiteConfig()
    for flag, (dest, typ) in OPTIONS.items():
        val = getattr(args, dest, None)
        if val is None and env_name(flag) in environ:
            raw = environ[env_name(flag)]
            try:
                val = typ(raw)
            except ValueError:
                raise FixtureError(f"{env_name(flag)}={raw!r} is not a valid {typ.__name__}") from None
            if flag == "suite" and val not in SUITES:
                raise FixtureError(f"{env_name(flag)}={raw!r} is not a suite")
        if val is not None:
            setattr(cfg, dest, val)
    orders = getattr(args, "orders", None)
    if orders is None and "GBC_ORDERS" in environ:
        orders = [int(x) for x in environ["GBC_ORDERS"].split(",")]
    if orders is not None:
        cfg.orders = tuple(orders)
    return cfg


def round_sig(obj, digits: int = 12):
    """Round every float in a JSON-like structure to ``digits`` significant digits."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    return obj


def write_report(report: dict, path: Optional[str]) -> str:
    text = json.dumps(round_sig({"schema": SCHEMA, **report}), indent=2, sort_keys=False)
    if path:
        Path(path).write_text(text + "\n")
    return text


def write_table(rows: List[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["order", "residual"])
        w.writeheader()
        for r in rows:
            w.writerow({"order": r["order"], "residual": f"{r['residual']:.12g}"})


def summary_lines(report: dict) -> List[str]:
    lines = []
    for c in report["cases"]:
        tag = "PASS" if c["pass"] else "FAIL"
        lines.append(f"{tag}  {c['name']}: {c['value']:.3e} (tol {c['tolerance']:.1e})")
    return lines


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = make_config(args)
        cfg.validate()
    except (FixtureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        report = run(cfg)
    except FixtureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Exception as exc:  # noqa: BLE001 - reported as an internal error
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    text = write_report(report, cfg.out)
    if cfg.suite == "convergence" and args.csv:
        write_table(report["table"], args.csv)
    if cfg.out is None:
        print(text)
    for line in summary_lines(report):
        print(line, file=sys.stderr)
    return EXIT_OK if report["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
