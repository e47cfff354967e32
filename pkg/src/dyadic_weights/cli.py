"""Command-line front end.

    dyadic-weights <subcommand> [--config PATH] [--seed N] [--out DIR] [--jobs N]

Exit status: 0 when every declared check passes, 1 on a numeric failure (the
failing invariant is printed to stderr), 2 on a malformed config or CSV.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema

from .suites import SUITES

SCHEMA_VERSION = 1

_weight = {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string"}}}
_young = {"type": "object", "required": ["family"], "properties": {"family": {"type": "string"}}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "kind"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "kind": {"enum": sorted(SUITES)},
        "dimension": {"enum": [1, 2]},
        "mesh": {
            "type": "object",
            "required": ["K", "L"],
            "additionalProperties": False,
            "properties": {"K": {"type": "integer", "minimum": 0, "maximum": 12}, "L": {"type": "integer", "minimum": 0, "maximum": 14}},
        },
        "exponents": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number"} for k in ("p", "q", "alpha", "delta")},
        },
        "alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _weight for k in ("u", "sigma", "w", "f", "b", "pair")},
        },
        "young": {"type": "object", "additionalProperties": _young},
        "constants": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "properties": {
                    "name": {"enum": ["A_pq", "A_pq_alpha", "bump_right", "bump_left", "bump_conjoined", "testing_M", "testing_I", "testing_C"]},
                    "A": _young,
                    "B": _young,
                    "side": {"enum": ["forward", "dual"]},
                    "locality": {"enum": ["full", "dyadic_in", "dyadic_out"]},
                    "window": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                    "expect": {"enum": ["finite", "growing", "infinite"]},
                    "max_value": {"type": "number"},
                },
                "additionalProperties": False,
            },
        },
        "Ks": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 12}},
        "window_lo": {"type": "integer"},
        "variants": {"type": "array", "items": {"type": "string"}},
        "expect": {"type": "object", "additionalProperties": {"enum": ["finite", "growing", "infinite"]}},
        "checks": {"type": "array", "items": {"enum": ["sparse", "sandwich", "continuum"]}},
        "operators": {"type": "array", "items": {"enum": ["maximal", "frac", "commutator"]}},
        "functions": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "example": {"enum": ["factored", "apq_insufficient_strong", "apq_insufficient_weak", "separated_vs_conjoined"]},
        "k_max": {"type": "integer", "minimum": 2, "maximum": 30},
        "realize": {"type": "boolean"},
        "roots": {"type": "array", "items": {"type": "string"}},
        "grid": {"type": "array", "items": {"enum": [-1, 0, 1]}},
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"csv": {"type": "string"}, "summary": {"type": "string"}, "plot": {"type": "boolean"}},
        },
    },
}

DEFAULTS = {
    "constants": {
        "mesh": {"K": 3, "L": 4},
        "exponents": {"p": 2.0, "q": 2.0, "alpha": 0.5},
        "weights": {"u": {"kind": "indicator", "interval": [0, 1]}, "sigma": {"kind": "indicator", "interval": [2, 3]}},
        "constants": [{"name": "A_pq_alpha"}],
    },
    "verify-equivalence": {"mesh": {"K": 3, "L": 6}, "alphas": [0.5], "trials": 10},
    "testing": {
        "mesh": {"K": 3, "L": 4},
        "exponents": {"p": 2.0, "q": 2.0, "alpha": 0.5},
        "weights": {"u": {"kind": "indicator", "interval": [0, 1]}, "sigma": {"kind": "indicator", "interval": [2, 3]}},
    },
    "corona-dump": {
        "mesh": {"K": 2, "L": 4},
        "weights": {"f": {"kind": "indicator", "interval": [0, 0.25], "value": 4.0}, "sigma": {"kind": "constant", "value": 1.0}},
        "roots": ["t=(0);k=0;m=(0)"],
    },
    "gallery": {"mesh": {"K": 3, "L": 4}, "example": "apq_insufficient_weak", "exponents": {"p": 4.0, "q": 4.0, "alpha": 0.5}},
    "bump-sufficiency": {"mesh": {"K": 2, "L": 4}, "exponents": {"p": 2.0, "q": 3.0, "alpha": 0.5, "delta": 1.0}, "trials": 2, "functions": 10},
}


class ConfigError(ValueError):
    pass


class CSVFormatError(ValueError):
    pass


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the JSON member addressed by ``path``."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return 1
    needle = f'"{keys[-1]}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def load_config(path: str | None, kind: str) -> dict:
    if path is None:
        cfg = {"version": SCHEMA_VERSION, "kind": kind}
        cfg.update(json.loads(json.dumps(DEFAULTS[kind])))
        return cfg
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        line = _line_of(text, list(e.absolute_path))
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{path}:{line or '?'}: schema violation at {where}: {e.message}")
    if cfg["kind"] != kind:
        raise ConfigError(f"{path}:{_line_of(text, ['kind'])}: config kind {cfg['kind']!r} does not match subcommand {kind!r}")
    base = json.loads(json.dumps(DEFAULTS[kind]))
    base.update(cfg)
    return base


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def read_series(text: str) -> dict[str, tuple[list[float], list[float]]]:
    """Parse a CSV into named (x, y) series.

    ``parameter, quantity, value`` files give one series per quantity; otherwise
    the first column is x and every other numeric column is a series."""
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise CSVFormatError("CSV has no data rows")
    header, body = rows[0], rows[1:]
    try:
        if [h.strip() for h in header] == ["parameter", "quantity", "value"]:
            out: dict[str, tuple[list, list]] = {}
            for r in body:
                xs, ys = out.setdefault(r[1], ([], []))
                xs.append(float(r[0]))
                ys.append(float(r[2]))
            return out
        if len(header) < 2:
            raise CSVFormatError("need at least two numeric columns")
        out = {}
        xs = [float(r[0]) for r in body]
        for j in range(1, len(header)):
            out[header[j]] = (xs, [float(r[j]) for r in body])
        return out
    except (ValueError, IndexError) as e:
        raise CSVFormatError(f"malformed CSV: {e}") from None


def emit_plot(csv_text: str, out_path: str | Path, title: str = "", logx: bool = False) -> Path:
    """Deterministic line plot of every series in the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = read_series(csv_text)
    with matplotlib.rc_context({"font.family": "DejaVu Sans", "font.size": 9, "svg.hashsalt": "0", "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=100)
        for name in sorted(series):
            xs, ys = series[name]
            ax.plot(xs, ys, marker="o", markersize=2.5, linewidth=1.0, label=name)
        if logx:
            ax.set_xscale("log")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", fontsize=7)
        fig.tight_layout()
        out_path = Path(out_path)
        fig.savefig(out_path, format="png", metadata={"Software": None})
        plt.close(fig)
    return out_path


def _dump(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return repr(v)
        if isinstance(v, dict):
            return {str(k): clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if hasattr(v, "item"):
            return clean(v.item())
        return v

    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def run(kind: str, config: str | None, seed: int | None, out: str, jobs: int) -> int:
    try:
        cfg = load_config(config, kind)
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    seed = int(seed if seed is not None else cfg.get("seed", 0))
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        res = SUITES[kind](cfg, seed, jobs)
    except (ValueError, KeyError) as e:
        print(f"error: invalid experiment: {e}", file=sys.stderr)
        return 2
    outputs = cfg.get("outputs", {})
    stem = kind.replace("-", "_")
    csv_name = outputs.get("csv", f"{stem}.csv")
    text = _csv_text(res.header, res.rows)
    (outdir / csv_name).write_text(text)
    for name, body in sorted(res.files.items()):
        (outdir / name).write_text(body)
    summary = res.summary()
    summary["seed"] = seed
    if outputs.get("plot") and res.rows and kind == "gallery":
        try:
            emit_plot(text, outdir / (Path(csv_name).stem + ".png"), title=cfg.get("example", ""), logx=True)
        except CSVFormatError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
    (outdir / outputs.get("summary", "summary.json")).write_text(_dump(summary))
    sys.stdout.write(_dump(summary))
    if res.failures:
        for name in sorted(set(res.failures)):
            print(f"FAILED: {name}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dyadic-weights", description="Dyadic weight-constant experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in sorted(SUITES):
        sp = sub.add_parser(kind)
        sp.add_argument("--config", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default="out")
        sp.add_argument("--jobs", type=int, default=1)
    pp = sub.add_parser("plot", help="render a CSV series file to PNG")
    pp.add_argument("csv")
    pp.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    if args.command == "plot":
        try:
            emit_plot(Path(args.csv).read_text(), args.out)
        except (CSVFormatError, OSError) as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        return 0
    return run(args.command, args.config, args.seed, args.out, max(1, args.jobs))


if __name__ == "__main__":
    sys.exit(main())
