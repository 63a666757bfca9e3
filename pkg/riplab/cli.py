#!/usr/bin/env python3
"""
cli.py — riplab command line
============================

    riplab bounds     --delta 0.5 --rho 0.25 | --grid lo:hi:steps --rho-grid lo:hi:steps
    riplab curve      --method FL|RV|CANDES|FL_Q|FL_Q_BOUNDED [--q Q] [--factor C1 --cap Υ]
    riplab lq-curve   --q 0.5 [--factor C1 --cap 50]
    riplab empirical  --n 100 [--N-list 105,200,...] [--k-range 1:40:1] --trials 10
    riplab wishart    --n 200 --rho-list 0.25 --trials 200
    riplab recover    --n 100 --grid 0.1:0.9:5 --trials 10

Common flags: --seed --grid --tol --out --config --threads --verbose.
Any flag may also come from a key=value --config file or RIPLAB_* env
(see settings.py). Results go to --out (stdout when omitted) and every
file output gets a JSON manifest at <out>.manifest.

Exit codes: 0 ok, 1 runtime/convergence failure (or interrupted), 2 usage/domain error.
"""

from __future__ import annotations

# stdlib
import argparse
import csv
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence, Tuple

# third-party
import numpy as np

from . import __version__
from .empirical_lab import DEFAULT_RESTARTS, empirical_vs_analytic, wishart_histogram
from .errors import DomainError, RipLabError
from .l1_recovery import SignalModel, empirical_weak_transition
from .output import curve_rows, fmt, write_csv, write_manifest, CURVE_HEADER
from .phase_transitions import FACTORS, CurveMethod, build_curve
from .rip_bounds import PhasePoint, rip_bounds
from .settings import Settings, load_settings

LOG = logging.getLogger("riplab")

BOUNDS_HEADER = ("delta", "rho", "lambda_min", "lambda_max", "L", "U")
TRIALS_HEADER = ("seed", "trial", "n", "N", "k", "mode", "eigenvalue", "support")
RATIOS_HEADER = ("n", "N", "k", "delta", "rho", "L_analytic", "U_analytic", "L_empirical",
                 "U_empirical", "L_ratio", "U_ratio", "exceedances", "trials")
WISHART_HEADER = ("rho", "k", "trial", "min_eig", "max_eig")
RECOVER_HEADER = ("delta", "n", "N", "k", "rho", "successes", "trials", "fraction", "smoothed",
                  "crossing", "censored", "rho_fl", "rho_rv", "rho_c")


class Interrupted(RipLabError):
    """Raised after partial results were flushed on Ctrl-C."""


# ─────────────────────────── setup ────────────────────────────
def _setup_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose or os.getenv("DEBUG") == "1" else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s | %(levelname)-7s | riplab | %(message)s")
    logging.getLogger().setLevel(level)


def parse_grid(spec: str) -> np.ndarray:
    """'lo:hi:steps' → steps evenly spaced values (fractions like 20/21 allowed)."""
    try:
        lo, hi, steps = spec.split(":")
        lo_v, hi_v = (_number(lo), _number(hi))
        n = int(steps)
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"bad grid {spec!r}; expected lo:hi:steps") from exc
    if n < 1 or (n > 1 and not hi_v > lo_v):
        raise DomainError(f"bad grid {spec!r}; need steps >= 1 and hi > lo")
    return np.linspace(lo_v, hi_v, n) if n > 1 else np.array([lo_v])


def _number(text: str) -> float:
    if "/" in text:
        num, den = text.split("/")
        return float(num) / float(den)
    return float(text)


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise DomainError(f"bad integer list {text!r}") from exc


def _float_list(text: str) -> List[float]:
    try:
        return [_number(v) for v in text.replace(" ", "").split(",") if v]
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"bad number list {text!r}") from exc


# ─────────────────────────── args ────────────────────────────
def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--grid", help="delta grid lo:hi:steps")
    common.add_argument("--tol", type=float, help="solver tolerance")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    p = argparse.ArgumentParser(prog="riplab",
                                description="Asymmetric RIP bounds, phase transitions and Monte-Carlo checks")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", parents=[common], help="lambda_min, lambda_max, L, U on a phase grid")
    b.add_argument("--delta", type=float)
    b.add_argument("--rho", type=float)
    b.add_argument("--rho-grid", dest="rho_grid", help="rho grid lo:hi:steps")

    c = sub.add_parser("curve", parents=[common], help="strong-equivalence curve rho_S(delta)")
    c.add_argument("--method", help="FL, RV, CANDES, FL_Q or FL_Q_BOUNDED")
    c.add_argument("--q", type=float)
    c.add_argument("--factor", help=f"capped stability factor ({', '.join(FACTORS)})")
    c.add_argument("--cap", type=float, help="cap on the stability factor")

    lq = sub.add_parser("lq-curve", parents=[common], help="l^q curve, optionally with a factor cap")
    lq.add_argument("--q", type=float)
    lq.add_argument("--factor")
    lq.add_argument("--cap", type=float)

    e = sub.add_parser("empirical", parents=[common], help="greedy RIP lower bounds vs analytic bounds")
    e.add_argument("--n", type=int)
    e.add_argument("--N-list", dest="N_list", help="comma separated N values")
    e.add_argument("--k-range", dest="k_range", help="k values lo:hi:step (inclusive)")
    e.add_argument("--trials", type=int)
    e.add_argument("--restarts", type=int)
    e.add_argument("--allow-large", dest="allow_large", action="store_true")

    w = sub.add_parser("wishart", parents=[common], help="extreme Wishart eigenvalue samples")
    w.add_argument("--n", type=int)
    w.add_argument("--rho-list", dest="rho_list", help="comma separated rho values")
    w.add_argument("--trials", type=int)
    w.add_argument("--allow-large", dest="allow_large", action="store_true")

    r = sub.add_parser("recover", parents=[common], help="basis-pursuit success surface")
    r.add_argument("--n", type=int)
    r.add_argument("--k-grid", dest="k_grid", help="comma separated k values")
    r.add_argument("--trials", type=int)
    r.add_argument("--model", help="UNIT, GAUSSIAN or RADEMACHER")
    r.add_argument("--allow-large", dest="allow_large", action="store_true")
    return p.parse_args(argv)


def _opt(ns: argparse.Namespace, cfg: Settings, name: str, cast: Callable[[str], Any], default: Any) -> Any:
    """Flag, then config-file key, then default."""
    val = getattr(ns, name, None)
    if val is not None and val is not False:
        return val
    raw = cfg.extra.get(name.lower())
    if raw is not None:
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise DomainError(f"bad config value for {name}: {raw!r}") from exc
    return default


def _flag(ns: argparse.Namespace, cfg: Settings, name: str) -> bool:
    if getattr(ns, name, False):
        return True
    return str(cfg.extra.get(name.lower(), "")).lower() in ("1", "true", "yes")


def _check_n(n: int, cfg: Settings, allow_large: bool) -> None:
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    if n > cfg.max_n and not allow_large:
        raise DomainError(f"n={n} exceeds the desk-scale cap {cfg.max_n}; pass --allow-large to override")


# ─────────────────────────── output plumbing ────────────────────────────
class _Emitter:
    """Collects tables; writes to --out (and side files) or to stdout."""

    def __init__(self, out: Optional[str]) -> None:
        self.out = out
        self.files: List[Path] = []

    def table(self, header: Sequence[str], rows: List[Sequence[Any]], suffix: str = "") -> None:
        if self.out:
            path = Path(f"{self.out}{suffix}")
            write_csv(path, header, rows)
            self.files.append(path)
        else:
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(header)
            w.writerows([fmt(v) for v in row] for row in rows)


# ─────────────────────────── commands ────────────────────────────
def cmd_bounds(ns: argparse.Namespace, cfg: Settings, emit: _Emitter) -> None:
    delta = _opt(ns, cfg, "delta", float, None)
    rho = _opt(ns, cfg, "rho", float, None)
    if delta is not None and rho is not None:
        points = [PhasePoint(delta, rho)]
    elif delta is not None or rho is not None:
        raise DomainError("--delta and --rho must be given together")
    else:
        deltas = parse_grid(_opt(ns, cfg, "grid", str, "1/20:20/21:10"))
        rhos = parse_grid(_opt(ns, cfg, "rho_grid", str, "0.01:0.99:10"))
        points = [PhasePoint(float(d), float(r)) for d in deltas for r in rhos]

    LOG.info("bounds on %d phase points", len(points))
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        pairs = list(pool.map(rip_bounds, points))
    emit.table(BOUNDS_HEADER, [(p.point.delta, p.point.rho, p.lambda_min, p.lambda_max, p.L, p.U)
                               for p in pairs])


def _curve(ns: argparse.Namespace, cfg: Settings, emit: _Emitter, method: CurveMethod, q: float) -> None:
    cap = _opt(ns, cfg, "cap", float, None)
    factor = str(_opt(ns, cfg, "factor", str, "C1")).upper()
    constraint: Optional[Tuple[str, float]] = None
    if method is CurveMethod.FL_Q_BOUNDED:
        if cap is None:
            raise DomainError("FL_Q_BOUNDED needs --cap")
        constraint = (factor, cap)
    elif cap is not None:
        raise DomainError(f"--cap applies to FL_Q_BOUNDED only, not {method.value}")
    grid = parse_grid(_opt(ns, cfg, "grid", str, "0.05:0.95:91"))
    curve = build_curve(method, q=q, constraint=constraint, delta_grid=grid,
                        tol=cfg.tol, threads=cfg.threads)
    for s in curve.failures:
        LOG.warning("delta=%g: %s", s.delta, s.error)
    LOG.info("%s: min 1/rho_S = %.6g over %d samples", method.value, curve.min_inverse(), len(curve.samples))
    emit.table(CURVE_HEADER, curve_rows(curve))


def cmd_curve(ns: argparse.Namespace, cfg: Settings, emit: _Emitter) -> None:
    method = CurveMethod.parse(_opt(ns, cfg, "method", str, "FL"))
    q = _opt(ns, cfg, "q", float, 1.0)
    _curve(ns, cfg, emit, method, q)


def cmd_lq_curve(ns: argparse.Namespace, cfg: Settings, emit: _Emitter) -> None:
    q = _opt(ns, cfg, "q", float, 0.5)
    bounded = _opt(ns, cfg, "cap", float, None) is not None
    _curve(ns, cfg, emit, CurveMethod.FL_Q_BOUNDED if bounded else CurveMethod.FL_Q, q)


def _k_range(spec: str) -> List[int]:
    try:
        lo, hi, step = (int(v) for v in spec.split(":"))
    except ValueError as exc:
        raise DomainError(f"bad k range {spec!r}; expected lo:hi:step") from exc
    if step < 1:
        raise DomainError(f"k range step must be >= 1, got {step}")
    return list(range(lo, hi + 1, step))


def cmd_empirical(ns: argparse.Namespace, cfg: Settings, emit: _Emitter) -> None:
    n = _opt(ns, cfg, "n", int, 100)
    _check_n(n, cfg, _flag(ns, cfg, "allow_large"))
    default_N = ",".join(str(int(round(n / d))) for d in parse_grid("1/20:20/21:20"))
    N_list = sorted(set(_int_list(_opt(ns, cfg, "N_list", str, default_N))))
    ks = _k_range(_opt(ns, cfg, "k_range", str, f"1:{n // 2}:1"))
    trials = _opt(ns, cfg, "trials", int, 10)
    restarts = _opt(ns, cfg, "restarts", int, DEFAULT_RESTARTS)

    records: List[Tuple[Any, ...]] = []
    cells: List[Tuple[Any, ...]] = []
    try:
        for N in N_list:
            table = empirical_vs_analytic(n, [N], ks, trials, cfg.seed, restarts, cfg.threads)
            records += [(r.seed, r.trial, r.size.n, r.size.N, r.size.k, r.mode.value, r.eigenvalue,
                         " ".join(map(str, r.support))) for r in table.records]
            cells += [(c.n, c.N, c.k, c.delta, c.rho, c.L_analytic, c.U_analytic, c.L_empirical,
                       c.U_empirical, c.L_ratio, c.U_ratio, c.exceedances, c.trials)
                      for c in table.cells]
    except KeyboardInterrupt:
        _flush_empirical(emit, records, cells)
        raise Interrupted(f"interrupted; flushed {len(cells)} cells") from None
    _flush_empirical(emit, records, cells)


def _flush_empirical(emit: _Emitter, records: list, cells: list) -> None:
    emit.table(TRIALS_HEADER, records)
    ok = [c for c in cells if c[11] == 0]
    exceed = sum(c[11] for c in cells)
    total = sum(c[12] for c in cells)
    if total:
        LOG.info("empirical: %d of %d trial cells exceed the analytic bounds (%.2f%%)",
                 exceed, total, 100.0 * exceed / total)
    summary = ("max", "", "", "", "", "", "", "", "",
               max((c[9] for c in ok), default=float("nan")),
               max((c[10] for c in ok), default=float("nan")), exceed, total)
    emit.table(RATIOS_HEADER, cells + [summary], suffix=".ratios.csv")


def cmd_wishart(ns: argparse.Namespace, cfg: Settings, emit: _Emitter) -> None:
    n = _opt(ns, cfg, "n", int, 200)
    _check_n(n, cfg, _flag(ns, cfg, "allow_large"))
    rhos = _float_list(_opt(ns, cfg, "rho_list", str, "0.25"))
    trials = _opt(ns, cfg, "trials", int, 200)
    samples = wishart_histogram(n, rhos, trials, cfg.seed, cfg.threads)
    emit.table(WISHART_HEADER, [(s.rho, s.k, s.trial, s.min_eig, s.max_eig) for s in samples])


def cmd_recover(ns: argparse.Namespace, cfg: Settings, emit: _Emitter) -> None:
    n = _opt(ns, cfg, "n", int, 100)
    _check_n(n, cfg, _flag(ns, cfg, "allow_large"))
    deltas = parse_grid(_opt(ns, cfg, "grid", str, "0.1:0.9:5"))
    k_grid = _opt(ns, cfg, "k_grid", _int_list, None)
    if isinstance(k_grid, str):
        k_grid = _int_list(k_grid)
    trials = _opt(ns, cfg, "trials", int, 10)
    model = SignalModel.parse(_opt(ns, cfg, "model", str, "UNIT"))

    curves = {m: build_curve(m, delta_grid=deltas, tol=cfg.tol, threads=cfg.threads)
              for m in (CurveMethod.FL, CurveMethod.RV, CurveMethod.CANDES)}
    rows: List[Tuple[Any, ...]] = []
    try:
        for i, delta in enumerate(deltas):
            surf = empirical_weak_transition([float(delta)], n, trials, cfg.seed, k_grid=k_grid,
                                             model=model, threads=cfg.threads)
            cross = surf.crossings[0]
            fl, rv, c = (curves[m].samples[i].rho for m in (CurveMethod.FL, CurveMethod.RV, CurveMethod.CANDES))
            if not cross.censored and math.isfinite(fl) and cross.rho < fl:
                LOG.warning("delta=%g: empirical crossing %.4g lies below rho_S^FL %.4g", delta, cross.rho, fl)
            rows += [(cell.delta, cell.n, cell.N, cell.k, cell.rho, cell.successes, cell.trials,
                      cell.fraction, cell.smoothed, cross.rho, cross.censored, fl, rv, c)
                     for cell in surf.cells]
    except KeyboardInterrupt:
        emit.table(RECOVER_HEADER, rows)
        raise Interrupted(f"interrupted; flushed {len(rows)} cells") from None
    emit.table(RECOVER_HEADER, rows)


COMMANDS = {
    "bounds": cmd_bounds,
    "curve": cmd_curve,
    "lq-curve": cmd_lq_curve,
    "empirical": cmd_empirical,
    "wishart": cmd_wishart,
    "recover": cmd_recover,
}


# ─────────────────────────── main ────────────────────────────
def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = _parse_args(argv)
    _setup_logging(ns.verbose)

    try:
        flags = {"seed": ns.seed, "threads": ns.threads, "tol": ns.tol}
        cfg = load_settings(ns.config, flags)
        emit = _Emitter(ns.out or cfg.extra.get("out"))
        t0 = time.perf_counter()
        COMMANDS[ns.command](ns, cfg, emit)
        wall = time.perf_counter() - t0
        if emit.files:
            m = write_manifest(emit.out, ["riplab", *argv], cfg.config_digest, cfg.seed,
                               __version__, wall, emit.files)
            LOG.info("manifest %s (%.2fs)", m, wall)
        return 0
    except DomainError as exc:
        LOG.error("%s", exc)
        return 2
    except RipLabError as exc:
        LOG.error("%s", exc)
        return 1
    except KeyboardInterrupt:
        LOG.error("interrupted")
        return 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
