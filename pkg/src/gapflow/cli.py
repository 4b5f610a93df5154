"""Command-line entry point: ``gapflow {gap,diag,spacing,verify}``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numerical failure.  Curves go to files (CSV with a ``.meta.json``
sidecar, or JSON with the metadata inline); stdout carries only the human
report of ``verify``.

Settings resolve as built-in defaults < ``--config`` file < flags.  The config
file holds ``key = value`` lines using the long flag names (``s-from`` or
``s_from``); ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checks import default_suite
from .curves import GapCurve, fmt
from .ensembles import EnsembleSpec, Kind, make_ensemble, recurrence_data
from .errors import GapflowError, NumericalError, ParameterDomainError
from .fredholm import (
    DEFAULT_ORDER,
    anchored_interval,
    default_s_grid,
    gap_curve_fredholm,
    moving_index,
    spacing_pdf,
)
from .montecarlo import estimate_gap, estimate_spacing, sample_batch, worker_count

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "ensemble": "gaussian",
    "n": 2,
    "a": 0.0,
    "b": 0.0,
    "method": "fredholm",
    "s_from": None,
    "s_to": None,
    "points": 50,
    "order": DEFAULT_ORDER,
    "tol": 1e-10,
    "seed": 42,
    "samples": 100_000,
    "workers": None,
    "output": None,
    "format": "csv",
    "row": 1,
    "sign": 1,
    "delta": 1e-3,
    "a1": 0.0,
    "a2_from": None,
    "a2_to": None,
    "window": 0.05,
    "perturb_sigma": 0.0,
    "painleve": True,
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# computations behind the subcommands


def s_values(cfg: dict, spec: EnsembleSpec) -> np.ndarray:
    if cfg["points"] < 1:
        raise UsageError("--points must be >= 1")
    if cfg["s_from"] is None and cfg["s_to"] is None:
        return default_s_grid(spec, cfg["points"])
    if cfg["s_from"] is None or cfg["s_to"] is None:
        raise UsageError("give both --s-from and --s-to, or neither")
    if not cfg["s_to"] > cfg["s_from"]:
        raise UsageError("--s-to must exceed --s-from")
    return np.linspace(cfg["s_from"], cfg["s_to"], cfg["points"])


def fredholm_curve(spec: EnsembleSpec, s, order: int = DEFAULT_ORDER, workers: int = 1) -> GapCurve:
    sols = gap_curve_fredholm(spec, s, order, workers=workers)
    i = moving_index(spec)
    m = recurrence_data(spec).m(np.asarray(s))
    r = np.array([x.r_diag[i] for x in sols])
    cols = {
        "s": np.asarray(s, dtype=float),
        "E2": np.exp([x.log_det for x in sols]),
        "sigma": m * r,
        "q": [x.q_endpoints[i] for x in sols],
        "p": [x.p_endpoints[i] for x in sols],
        "u": [x.u for x in sols],
        "v": [x.v for x in sols],
        "w": [x.w for x in sols],
        "R": r,
    }
    return GapCurve("fredholm", spec, cols, meta={"order": order})


def mc_curve(spec: EnsembleSpec, s, samples: int, seed: int, workers: int | None) -> GapCurve:
    batch = sample_batch(spec, samples, seed=seed, workers=workers)
    est = [estimate_gap(batch, anchored_interval(spec, x)) for x in s]
    cols = {"s": np.asarray(s, dtype=float), "E2": [e[0] for e in est], "stderr": [e[1] for e in est]}
    return GapCurve("mc", spec, cols, meta={"samples": samples, "seed": seed, **batch.meta})


def compute_gap(cfg: dict, spec: EnsembleSpec) -> GapCurve:
    s = s_values(cfg, spec)
    method = cfg["method"]
    workers = worker_count(cfg["workers"])
    if method == "fredholm":
        return fredholm_curve(spec, s, cfg["order"], workers)
    if method == "tw-ode":
        from .twode import gap_curve_tw

        return gap_curve_tw(spec, s, tol=cfg["tol"], delta=cfg["delta"], order=cfg["order"])
    if method == "painleve":
        from .painleve import gap_curve_painleve

        return gap_curve_painleve(
            spec, s, row=cfg["row"], sign=cfg["sign"], tol=cfg["tol"], delta=cfg["delta"], order=cfg["order"]
        )
    if method == "mc":
        return mc_curve(spec, s, cfg["samples"], cfg["seed"], cfg["workers"])
    raise UsageError(f"unknown method {method!r}")


DIAG_COLUMNS = ("s", "q", "p", "u", "v", "w", "R", "sigma")


def compute_diag(cfg: dict, spec: EnsembleSpec) -> GapCurve:
    if cfg["method"] not in ("fredholm", "tw-ode"):
        raise UsageError("diag supports --method fredholm or tw-ode")
    curve = compute_gap(cfg, spec)
    cols = {k: curve[k] for k in DIAG_COLUMNS}
    return GapCurve(curve.method, spec, cols, meta=curve.meta)


def compute_spacing(cfg: dict, spec: EnsembleSpec) -> tuple[list[str], list[list[float]], dict]:
    a1 = cfg["a1"]
    lo = a1 + 0.05 if cfg["a2_from"] is None else cfg["a2_from"]
    hi = a1 + 4.0 if cfg["a2_to"] is None else cfg["a2_to"]
    if not (hi > lo > a1):
        raise UsageError("need a1 < a2-from < a2-to")
    k = cfg["points"]
    if cfg["method"] == "fredholm":
        a2 = np.linspace(lo, hi, k)
        p = [spacing_pdf(spec, a1, x, order=cfg["order"]) for x in a2]
        return ["a2", "p"], [list(r) for r in zip(a2, p)], {}
    if cfg["method"] == "mc":
        batch = sample_batch(spec, cfg["samples"], seed=cfg["seed"], workers=cfg["workers"])
        hist = estimate_spacing(batch, a1, np.linspace(lo, hi, k + 1), window=cfg["window"])
        rows = [list(r) for r in zip(hist.centers, hist.density, hist.std_error)]
        return ["a2", "p", "stderr"], rows, {"conditioned": hist.samples, **batch.meta}
    raise UsageError("spacing supports --method fredholm or mc")


# ---------------------------------------------------------------------------
# output


def _default_output(cmd: str, cfg: dict) -> Path:
    ext = "json" if cmd == "verify" else cfg["format"]
    return Path(f"gapflow_{cmd}.{ext}")


def _write_curve(curve: GapCurve, path: Path, fmt_name: str) -> None:
    if fmt_name == "json":
        path.write_text(curve.to_json())
    else:
        path.write_text(curve.to_csv())
        path.with_name(path.name + ".meta.json").write_text(
            json.dumps({"method": curve.method, "ensemble": curve.spec.as_dict(), "meta": curve.meta}, indent=2, default=_jsonable)
        )


def _write_table(header, rows, meta, path: Path, fmt_name: str) -> None:
    if fmt_name == "json":
        path.write_text(json.dumps({"meta": meta, "columns": header, "rows": rows}, indent=2, default=_jsonable))
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    path.write_text(buf.getvalue())
    path.with_name(path.name + ".meta.json").write_text(json.dumps({"meta": meta}, indent=2, default=_jsonable))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


# ---------------------------------------------------------------------------
# argument handling


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", help="key=value file; flags override it", default=S)
    p.add_argument("--ensemble", choices=[k.value for k in Kind], default=S)
    p.add_argument("--n", type=int, default=S, help="matrix size N (default 2)")
    p.add_argument("--a", type=float, default=S, help="Laguerre/Jacobi exponent a")
    p.add_argument("--b", type=float, default=S, help="Jacobi exponent b")
    p.add_argument("--order", type=int, default=S, help="quadrature order (default 64)")
    p.add_argument("--tol", type=float, default=S, help="ODE tolerance (default 1e-10)")
    p.add_argument("--seed", type=int, default=S, help="Monte Carlo seed (default 42)")
    p.add_argument("--samples", type=int, default=S, help="Monte Carlo sample count (default 1e5)")
    p.add_argument("--workers", type=int, default=S, help="thread cap; default $GAPFLOW_THREADS or CPU count")
    p.add_argument("--points", type=int, default=S, help="number of s points (default 50)")
    p.add_argument("--output", "-o", default=S, help="output file (default gapflow_<command>.<format>)")
    p.add_argument("--format", choices=["csv", "json"], default=S)
    p.add_argument("--delta", type=float, default=S, help="offset from the anchored endpoint for ODE starts")


def _add_range(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--s-from", dest="s_from", type=float, default=S)
    p.add_argument("--s-to", dest="s_to", type=float, default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gapflow", description="Gap probabilities of unitary ensembles.")
    parser.add_argument("--version", action="version", version=f"gapflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    gap = sub.add_parser("gap", help="E_2 along the one-endpoint family of gaps")
    _add_common(gap)
    _add_range(gap)
    gap.add_argument("--method", choices=["fredholm", "tw-ode", "painleve", "mc"], default=S)
    gap.add_argument("--row", type=int, default=S, help="Painleve parameter row (default 1)")
    gap.add_argument("--sign", type=int, choices=[1, -1], default=S, help="branch of the second Gaussian row")

    diag = sub.add_parser("diag", help="q, p, u, v, w, R and sigma along the family")
    _add_common(diag)
    _add_range(diag)
    diag.add_argument("--method", choices=["fredholm", "tw-ode"], default=S)

    sp = sub.add_parser("spacing", help="nearest-right-neighbour density p(0; (a1, a2))")
    _add_common(sp)
    sp.add_argument("--method", choices=["fredholm", "mc"], default=S)
    sp.add_argument("--a1", type=float, default=S)
    sp.add_argument("--a2-from", dest="a2_from", type=float, default=S)
    sp.add_argument("--a2-to", dest="a2_to", type=float, default=S)
    sp.add_argument("--window", type=float, default=S, help="conditioning half-width for --method mc")

    ver = sub.add_parser("verify", help="structural and cross-route checks")
    _add_common(ver)
    ver.add_argument("--perturb-sigma", dest="perturb_sigma", type=float, default=S, help="fault injection on the ODE sigma")
    ver.add_argument("--no-painleve", dest="painleve", action="store_false", default=S)
    return parser


def _read_config(path: str) -> list[str]:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise UsageError(f"cannot read config {path}: {err}") from None
    argv = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        key = key.replace("_", "-")
        if key in ("config",):
            raise UsageError(f"{path}:{lineno}: nested config files are not supported")
        if key == "painleve":
            if val.lower() in ("0", "false", "no", "off"):
                argv.append("--no-painleve")
            continue
        argv += [f"--{key}", val]
    return argv


def resolve(argv: list[str]) -> tuple[str, dict]:
    """Parse flags over the config file over the defaults."""
    parser = build_parser()
    first = parser.parse_args(argv)
    cfg = dict(DEFAULTS)
    if hasattr(first, "config"):
        # config values go through the same parser, then the real flags win
        merged = parser.parse_args([first.command] + _read_config(first.config) + argv[1:])
        ns = merged
    else:
        ns = first
    for k, v in vars(ns).items():
        if k not in ("command", "config"):
            cfg[k] = v
    cfg["config"] = getattr(first, "config", None)
    return first.command, cfg


def _spec(cfg: dict) -> EnsembleSpec:
    try:
        return make_ensemble(cfg["ensemble"], cfg["n"], cfg["a"], cfg["b"])
    except ParameterDomainError as err:
        raise UsageError(str(err)) from None


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cmd, cfg = resolve(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as err:
        print(f"gapflow: {err}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg["output"]) if cfg["output"] else _default_output(cmd, cfg)
    t0 = time.perf_counter()
    try:
        spec = _spec(cfg)
        if cfg["points"] < 1 or cfg["order"] < 2 or cfg["tol"] <= 0 or cfg["samples"] < 1:
            raise UsageError("points, order, tol and samples must be positive")
        if cmd == "verify":
            return _run_verify(cfg, spec, out, t0)
        if cmd == "spacing":
            header, rows, meta = compute_spacing(cfg, spec)
            meta.update(config=cfg, runtime_s=time.perf_counter() - t0, ensemble=spec.as_dict(), method=cfg["method"])
            _write_table(header, rows, meta, out, cfg["format"])
            return EXIT_OK
        curve = compute_diag(cfg, spec) if cmd == "diag" else compute_gap(cfg, spec)
    except UsageError as err:
        print(f"gapflow: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterDomainError as err:
        print(f"gapflow: invalid parameters: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as err:
        return _numerical_failure(err, cfg, out, t0)
    except GapflowError as err:
        print(f"gapflow: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    curve.meta.update(config=cfg, runtime_s=time.perf_counter() - t0, version=__version__)
    _write_curve(curve, out, cfg["format"])
    return EXIT_OK


def _numerical_failure(err, cfg, out: Path, t0: float) -> int:
    partial = getattr(err, "partial", None)
    rows = 0
    if isinstance(partial, GapCurve):
        partial.meta.update(config=cfg, runtime_s=time.perf_counter() - t0, error=str(err))
        _write_curve(partial, out, cfg["format"])
        rows = len(partial)
    last = getattr(err, "last_good", None)
    where = f"; last good point {last:.10g}" if isinstance(last, (int, float)) and math.isfinite(last) else ""
    print(f"gapflow: numerical failure: {err}{where}; {rows} rows written", file=sys.stderr)
    return EXIT_NUMERIC


def _run_verify(cfg: dict, spec: EnsembleSpec, out: Path, t0: float) -> int:
    checks = default_suite(spec, tol=cfg["tol"], perturb_sigma=cfg["perturb_sigma"], painleve=cfg["painleve"])
    print(f"gapflow verify {spec.label}")
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print("all checks passed" if ok else f"{sum(not c.passed for c in checks)} check(s) failed")
    report = {
        "ensemble": spec.as_dict(),
        "config": cfg,
        "runtime_s": time.perf_counter() - t0,
        "pass": ok,
        "checks": [c.as_dict() for c in checks],
    }
    out.write_text(json.dumps(report, indent=2, default=_jsonable))
    return EXIT_OK if ok else EXIT_VERIFY


if __name__ == "__main__":
    raise SystemExit(main())
