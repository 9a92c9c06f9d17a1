"""Command-line interface: ``skell <command> [options]``.

Commands: sample, pdf, cf, moments, qform, validate, adjudicate.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.
Errors are also written to stderr as a one-line JSON object.

Options may be given in the ``--config`` JSON document (model fields plus
``seed``, ``n_draws``, ``variant``, ``grid_file``, ``out``, ``format``,
``threads``); command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import charfn
from .density import logpdf
from .exceptions import SkellError, ValidationError
from .model import dump_model, load_model
from .moments import qform_mean, qform_second, se_moments
from .sampling import VARIANTS, RngState, resolve_threads, sample_representation
from .verification import default_suite, mc_moment_set, write_reports

__all__ = ["main", "run"]

COMMANDS = ("sample", "pdf", "cf", "moments", "qform", "validate", "adjudicate")
CF_METHODS = ("auto", "skew_normal", "skew_t", "theorem32", "generic_corrected", "generic_paper_3_16", "mc")
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser():
    p = _Parser(prog="skell", description="Skew-elliptical distributions: sampling, density, CF, moments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, draws=False, grid=False):
        sp.add_argument("--config", help="model JSON document")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--threads", type=int, help="worker threads (default: $SKELL_THREADS or all cores)")
        if draws:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--n-draws", type=int, dest="n_draws")
        if grid:
            sp.add_argument("--grid", help="CSV file of evaluation points, one per row")
        return sp

    s = common(sub.add_parser("sample", help="draw variates"), draws=True)
    s.add_argument("--variant", choices=VARIANTS)
    common(sub.add_parser("pdf", help="density on a grid"), grid=True)
    c = common(sub.add_parser("cf", help="characteristic function on a grid"), draws=True, grid=True)
    c.add_argument("--method", choices=CF_METHODS, default="auto")
    m = common(sub.add_parser("moments", help="moments M1-M4"))
    m.add_argument("--empirical", metavar="SAMPLES", help="estimate from a samples CSV instead")
    q = common(sub.add_parser("qform", help="quadratic-form moments"))
    q.add_argument("--A", dest="A", required=True, help="CSV file with the symmetric matrix A")
    q.add_argument("--B", dest="B", help="CSV file with the symmetric matrix B (default: A)")
    common(sub.add_parser("validate", help="check a model document"))
    a = common(sub.add_parser("adjudicate", help="run the adjudication suite"), draws=True)
    a.add_argument("--append", action="store_true", help="append to --out instead of overwriting")
    a.add_argument("--timestamp", action="store_true", help="record wall-clock timestamps")
    a.add_argument("--cf-points", type=int, default=8, dest="cf_points")
    return p


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------


def _fmt(x):
    """Shortest round-trip text for a number."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _dump_json(obj):
    # json uses repr for floats, which round-trips exactly
    return json.dumps(_jsonify(obj), allow_nan=True) + "\n"


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_matrix(path):
    """Numeric CSV as a 2-D array; a non-numeric first row is taken as a header."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError:
        raise
    if not rows:
        raise ValidationError(f"{path} contains no rows")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        arr = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError(f"{path} is not a rectangular numeric table")
    return arr


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolve(args):
    """Merge the config document with flags (flags win)."""
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config is not valid JSON: {exc}") from None
    cfg = dict(doc)
    for key in ("seed", "n_draws", "variant", "out", "format", "threads", "grid"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key if key != "grid" else "grid_file"] = val
    cfg.setdefault("format", "csv")
    cfg.setdefault("seed", 0)
    cfg.setdefault("variant", "conditioning")
    if "n_draws" in cfg and int(cfg["n_draws"]) < 1:
        raise ValidationError("n_draws must be >= 1")
    if cfg["variant"] not in VARIANTS:
        raise ValidationError(f"unknown variant {cfg['variant']!r}")
    if cfg.get("grid_file") and not os.path.exists(cfg["grid_file"]):
        raise FileNotFoundError(cfg["grid_file"])
    return doc, cfg


def _model(doc):
    if not doc:
        raise ValidationError("a model document is required (--config)")
    return load_model(doc)


def _grid(cfg, n):
    if not cfg.get("grid_file"):
        raise ValidationError("--grid is required")
    g = read_matrix(cfg["grid_file"])
    if g.shape[1] != n:
        raise ValidationError(f"grid has {g.shape[1]} columns, model has n = {n}")
    return g


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_sample(args, doc, cfg):
    params, gen = _model(doc)
    count = int(cfg.get("n_draws", 1000))
    x = sample_representation(params, gen, cfg["variant"], count, RngState(int(cfg["seed"])), cfg.get("threads"))
    if cfg["format"] == "json":
        return _dump_json({"variant": cfg["variant"], "seed": int(cfg["seed"]), "samples": x})
    return _csv_text([f"x{i + 1}" for i in range(params.n)], x.tolist())


def _cmd_pdf(args, doc, cfg):
    params, gen = _model(doc)
    x = _grid(cfg, params.n)
    lp = logpdf(params, gen, x)
    pdf = np.exp(lp)
    if cfg["format"] == "json":
        return _dump_json({"x": x, "pdf": pdf, "logpdf": lp})
    rows = [list(xi) + [p, l] for xi, p, l in zip(x, pdf, lp)]
    return _csv_text([f"x{i + 1}" for i in range(params.n)] + ["pdf", "logpdf"], rows)


def _cf_eval(method, params, gen, t, cfg):
    if method == "auto":
        if gen.family == "normal":
            method = "skew_normal"
        elif gen.t_equivalent_nu is not None:
            method = "skew_t"
        else:
            method = "generic_corrected"
    if method == "skew_normal":
        if gen.family != "normal":
            raise ValidationError("skew_normal route needs the normal family")
        return charfn.cf_skew_normal(params, t)
    if method == "skew_t":
        nu = gen.t_equivalent_nu
        if nu is None:
            raise ValidationError("skew_t route needs a Student-t family")
        return charfn.cf_skew_t(params, nu, t)
    if method == "theorem32":
        return charfn.cf_theorem32(params, gen, t)
    if method.startswith("generic_"):
        return charfn.cf_generic(params, gen, t, reading=method[len("generic_") :])
    raise AssertionError(method)


def _cmd_cf(args, doc, cfg):
    params, gen = _model(doc)
    grid = _grid(cfg, params.n)
    if args.method == "mc":
        from .verification import empirical_cf  # noqa: PLC0415

        count = int(cfg.get("n_draws", 10**5))
        x = sample_representation(params, gen, "conditioning", count, RngState(int(cfg["seed"])), cfg.get("threads"))
        est = empirical_cf(x, grid)
        vals = [(float(r), float(i), "mc", float(s)) for r, i, s in zip(est.re, est.im, est.se)]
    else:
        vals = []
        for t in grid:
            v = _cf_eval(args.method, params, gen, t, cfg)
            vals.append((v.re, v.im, v.method, v.err_estimate))
    if cfg["format"] == "json":
        return _dump_json(
            [{"t": t, "re": r, "im": i, "method": m, "err": e} for t, (r, i, m, e) in zip(grid, vals)]
        )
    rows = [list(t) + list(v) for t, v in zip(grid, vals)]
    return _csv_text([f"t{i + 1}" for i in range(params.n)] + ["re", "im", "method", "err"], rows)


def _moment_rows(ms, prefix=""):
    rows = []
    for name, block in ms.blocks().items():
        b = np.atleast_2d(block) if block.ndim == 2 else block[:, None]
        for i in range(b.shape[0]):
            for j in range(b.shape[1]):
                rows.append([prefix + name, i, j, b[i, j]])
    return rows


def _cmd_moments(args, doc, cfg):
    if args.empirical:
        x = read_matrix(args.empirical)
        est = mc_moment_set(x)
        if cfg["format"] == "json":
            out = est.estimate.blocks()
            out["se"] = est.se.blocks()
            out["N"] = est.count
            return _dump_json(out)
        rows = [r + [s[3]] for r, s in zip(_moment_rows(est.estimate), _moment_rows(est.se))]
        return _csv_text(["block", "row", "col", "value", "se"], rows)
    params, gen = _model(doc)
    ms = se_moments(params, gen, partial=True)
    if cfg["format"] == "json":
        return _dump_json(ms.to_dict())
    rows = _moment_rows(ms) + [["ratio", k, 0, r] for k, r in enumerate(ms.ratios, 1)]
    return _csv_text(["block", "row", "col", "value"], rows)


def _cmd_qform(args, doc, cfg):
    params, gen = _model(doc)
    A = read_matrix(args.A)
    B = read_matrix(args.B) if args.B else A
    mean = qform_mean(params, gen, A)
    sec = qform_second(params, gen, A, B)
    out = {"mean": mean, "second": sec["second_moment"], "var": sec["var_A"], "cov": sec["cov_AB"]}
    if cfg["format"] == "json":
        return _dump_json(out)
    return _csv_text(["quantity", "value"], list(out.items()))


def _cmd_validate(args, doc, cfg):
    params, gen = _model(doc)
    out = {"valid": True, "model": dump_model(params, gen), "derived": params.derived_dict()}
    if cfg["format"] == "json":
        return _dump_json(out)
    rows = [["valid", "true"], ["n", params.n], ["family", gen.family]]
    return _csv_text(["field", "value"], rows)


def _cmd_adjudicate(args, doc, cfg):
    params, gen = _model(doc)
    N = int(cfg.get("n_draws", 10**6))
    reports = default_suite(
        params, gen, N=N, seed=int(cfg["seed"]), threads=cfg.get("threads"),
        timestamp=args.timestamp, cf_points=args.cf_points,
    )
    summary = "".join(r.summary() + "\n" for r in reports)
    out = cfg.get("out")
    if cfg["format"] == "csv":
        text = _csv_text(
            ["subject", "reference", "verdict", "max_z"],
            [[r.subject, r.reference, r.verdict, r.max_z] for r in reports],
        )
        _emit(text, out)
        return None
    if out:
        write_reports(reports, out, append=args.append)
        sys.stdout.write(summary)
    else:
        sys.stdout.write("".join(r.to_json() + "\n" for r in reports))
        sys.stderr.write(summary)
    return None


_HANDLERS = {
    "sample": _cmd_sample,
    "pdf": _cmd_pdf,
    "cf": _cmd_cf,
    "moments": _cmd_moments,
    "qform": _cmd_qform,
    "validate": _cmd_validate,
    "adjudicate": _cmd_adjudicate,
}


def _error(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def run(argv=None):
    """Run one command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        doc, cfg = _resolve(args)
        if cfg.get("threads") is not None:
            cfg["threads"] = resolve_threads(cfg["threads"])
        text = _HANDLERS[args.command](args, doc, cfg)
        if text is not None:
            _emit(text, cfg.get("out"))
        return 0
    except SkellError as exc:
        return _error(exc, exc.exit_code)
    except OSError as exc:
        return _error(exc, EXIT_IO)
    except (ValueError, TypeError, KeyError) as exc:
        return _error(exc, 1)
    except ArithmeticError as exc:
        return _error(exc, 2)


def main(argv=None):
    sys.exit(run(argv))
