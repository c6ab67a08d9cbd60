"""Command-line entry point.

Exit codes: 0 success, 1 configuration or validation error, 2 numeric failure.
Errors print one line to stderr of the form ``error[config] <message>`` or
``error[numeric] <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .config import ConfigError, load_config
from .experiments import ResultTable, run_experiment

# subcommand -> (default kind, kinds it accepts)
SUBCOMMANDS = {
    "theory": ("ridge_risk", None),
    "simulate": ("ridge_risk", None),
    "cv": ("cv", ("cv",)),
    "loo": ("loo", ("loo",)),
    "sketch-bench": ("primal_orth", ("primal_orth", "dual_orth", "full", "marginal",
                                     "dual_gaussian", "primal_gaussian")),
    "timing": ("timing", ("timing",)),
}


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def metadata_line(meta):
    return "# " + " ".join(f"{k}={meta[k]}" for k in ("tool", "version", "kind", "config_hash", "seed"))


def table_to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    buf.write(metadata_line(table.meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(row[c]) for c in table.columns])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


def table_to_json(table: ResultTable) -> str:
    doc = {"meta": table.meta, "columns": list(table.columns),
           "rows": [{c: _json_safe(r[c]) for c in table.columns} for r in table.rows]}
    return json.dumps(doc, indent=1) + "\n"


def read_csv_table(text):
    """Parse a CSV result back into (meta, rows); numeric cells become floats."""
    lines = text.splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
    rows = []
    for rec in csv.DictReader(lines[1:]):
        out = {}
        for k, v in rec.items():
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
        rows.append(out)
    return meta, rows


def build_parser():
    ap = argparse.ArgumentParser(prog="ridgesketch", description="Sketched ridge regression experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value configuration file")
        sp.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--threads", type=int, help="worker threads (0 = all cores)")
        sp.add_argument("--kind", help="experiment kind (overrides the subcommand default)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key; repeatable")
        if name == "cv":
            sp.add_argument("--dataset", help="CSV file with a header row")
            sp.add_argument("--response", help="response column name")
    return ap


def resolve_config(args):
    overrides = list(args.set)
    for key in ("seed", "format", "threads", "kind", "dataset", "response"):
        val = getattr(args, key, None)
        if val is not None:
            overrides.append(f"{key}={val}")
    if args.out is not None:
        overrides.append(f"output={args.out}")
    default_kind, allowed = SUBCOMMANDS[args.command]
    cfg = load_config(args.config, overrides, kind=default_kind)
    if allowed is not None and cfg.kind not in allowed:
        raise ConfigError(f"kind: {cfg.kind!r} is not valid for '{args.command}' (expected one of {allowed})")
    if args.command == "theory":
        cfg = cfg.replace(replicates=0)
    return cfg


def _fail(tag, msg, code):
    print(f"error[{tag}] {' '.join(str(msg).split())}", file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        table = run_experiment(cfg)
    except (ConfigError, ValueError, OSError) as exc:
        return _fail("config", exc, 1)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail("numeric", exc, 2)
    text = table_to_json(table) if cfg.format == "json" else table_to_csv(table)
    if cfg.output:
        try:
            with open(cfg.output, "w") as fh:
                fh.write(text)
        except OSError as exc:
            return _fail("config", exc, 1)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
