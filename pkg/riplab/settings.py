"""
settings.py — run configuration
===============================

Values are resolved in this order (first hit wins):

    command-line flag  >  --config file  >  environment  >  default

Env
---
RIPLAB_SEED     master seed (default: 0)
RIPLAB_THREADS  worker threads for trials and curve samples (default: 1)
RIPLAB_TOL      root / decoder tolerance (default: 1e-10)
RIPLAB_MAX_N    desk-scale cap on n for Monte-Carlo commands (default: 1000)
DEBUG           "1" turns on debug logging

Config files use the same key=value format as `.env` files, with keys named
after the flags (`seed=7`, `grid=0.05:0.95:91`, `rho-grid=...`).
"""

from __future__ import annotations

# stdlib
import hashlib
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

# third-party
from dotenv import dotenv_values, load_dotenv

from .errors import DomainError

load_dotenv(override=False)


def _norm_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_file(path: str | Path) -> Dict[str, str]:
    """Parse a key=value config file; keys normalised to flag dest names."""
    p = Path(path)
    if not p.is_file():
        raise DomainError(f"config file not found: {p}")
    raw = dotenv_values(p)
    return {_norm_key(k): v for k, v in raw.items() if v not in (None, "")}


# ─────────────────────────── Settings ────────────────────────────
@dataclass(frozen=True)
class Settings:
    seed: int = 0
    threads: int = 1
    tol: float = 1e-10
    max_n: int = 1000
    debug: bool = False
    # everything else the config file carried (command specific keys)
    extra: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_env(cls) -> "Settings":
        try:
            return cls(
                seed=int(os.getenv("RIPLAB_SEED", "0")),
                threads=int(os.getenv("RIPLAB_THREADS", "1")),
                tol=float(os.getenv("RIPLAB_TOL", "1e-10")),
                max_n=int(os.getenv("RIPLAB_MAX_N", "1000")),
                debug=os.getenv("DEBUG") == "1",
            ).validated()
        except ValueError as exc:
            raise DomainError(f"bad RIPLAB_* environment value: {exc}") from exc

    def merged(self, values: Mapping[str, Any]) -> "Settings":
        """Overlay config-file or flag values (None means 'not given')."""
        known = {"seed": int, "threads": int, "tol": float, "max_n": int}
        changes: Dict[str, Any] = {}
        extra = dict(self.extra)
        for key, val in values.items():
            if val is None:
                continue
            k = _norm_key(key)
            if k in known:
                try:
                    changes[k] = known[k](val)
                except (TypeError, ValueError) as exc:
                    raise DomainError(f"bad value for {k}: {val!r}") from exc
            elif k == "debug":
                changes[k] = str(val).lower() in ("1", "true", "yes")
            else:
                extra[k] = str(val)
        return replace(self, **changes, extra=extra).validated()

    def validated(self) -> "Settings":
        if self.seed < 0 or self.seed >= 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.threads < 1:
            raise DomainError(f"threads must be >= 1, got {self.threads}")
        if not (0.0 < self.tol < 1.0):
            raise DomainError(f"tol must lie in (0, 1), got {self.tol}")
        if self.max_n < 1:
            raise DomainError(f"max_n must be >= 1, got {self.max_n}")
        return self

    def canonical_lines(self) -> list[str]:
        lines = [f"max_n={self.max_n}", f"seed={self.seed}",
                 f"threads={self.threads}", f"tol={self.tol!r}"]
        lines += [f"{k}={v}" for k, v in sorted(self.extra.items())]
        return sorted(lines)

    @property
    def config_digest(self) -> str:
        blob = "\n".join(self.canonical_lines()).encode()
        return hashlib.sha256(blob).hexdigest()


def load_settings(config_path: Optional[str] = None,
                  flags: Optional[Mapping[str, Any]] = None) -> Settings:
    cfg = Settings.from_env()
    if config_path:
        cfg = cfg.merged(read_config_file(config_path))
    if flags:
        cfg = cfg.merged(flags)
    return cfg
