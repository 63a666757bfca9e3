"""
output.py — CSV tables and run manifests
========================================

CSV: UTF-8, header row, comma separator, LF line ends, floats written with
17 significant digits so every value reads back to the same double.
"""

from __future__ import annotations

# stdlib
import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import DomainError
from .phase_transitions import TransitionCurve

log = logging.getLogger(__name__)

CURVE_HEADER = ("delta", "rho_S", "residual", "inverse", "alpha")


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if hasattr(value, "dtype"):          # numpy scalar
        return fmt(value.item())
    return str(value)


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Write the table and return its SHA-256."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(p, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise DomainError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([fmt(v) for v in row])
            n += 1
    log.info("wrote %d rows to %s", n, p)
    return file_digest(p)


def read_csv(path: str | Path) -> Tuple[List[str], List[List[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path} is empty")
    return rows[0], rows[1:]


# ─────────────────────────── curves ────────────────────────────
def curve_rows(curve: TransitionCurve) -> List[Tuple[Any, ...]]:
    return [(s.delta, s.rho, s.residual, (1.0 / s.rho) if s.ok and s.rho > 0 else math.nan, s.alpha)
            for s in curve.samples]


def write_curve(path: str | Path, curve: TransitionCurve) -> str:
    return write_csv(path, CURVE_HEADER, curve_rows(curve))


def read_curve(path: str | Path) -> List[Tuple[float, float]]:
    """(delta, rho_S) pairs of a curve file."""
    header, rows = read_csv(path)
    if tuple(header[:2]) != CURVE_HEADER[:2]:
        raise DomainError(f"{path} is not a curve file (header {header})")
    return [(float(r[0]), float(r[1])) for r in rows]


# ─────────────────────────── manifest ────────────────────────────
def manifest_path(out: str | Path) -> Path:
    return Path(f"{out}.manifest")


def write_manifest(out: str | Path, argv: Sequence[str], config_digest: str, seed: int,
                   version: str, wall_time: float, outputs: Sequence[str | Path],
                   extra: Optional[Dict[str, Any]] = None) -> Path:
    body = {
        "argv": list(argv),
        "config_digest": config_digest,
        "seed": seed,
        "version": version,
        "wall_time": round(wall_time, 6),
        "outputs": [{"path": Path(p).name, "sha256": file_digest(p)} for p in outputs],
    }
    if extra:
        body.update(extra)
    p = manifest_path(out)
    p.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p
