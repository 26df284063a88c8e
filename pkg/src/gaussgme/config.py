"""Repository-wide numerical tolerances and the key-value config format.

Config files are plain text with one ``key = value`` pair per line; ``#``
starts a comment. Keys are the long CLI flag names with dashes or
underscores (``d-max``, ``workers``, ``tol_psd`` ...).
"""

from __future__ import annotations

import dataclasses
import os
from pathlib import Path
from typing import Any

from .exceptions import InvalidArgumentError


@dataclasses.dataclass(frozen=True)
class Tolerances:
    symmetry: float = 1e-12
    psd: float = 1e-9
    hermitian: float = 1e-10
    inequality: float = 1e-10
    witness_detect: float = 1e-8
    witness_sdp: float = 1e-7
    cm_witness: float = 1e-7
    solver_feas: float = 1e-8
    solver_gap: float = 1e-8
    solver_max_iter: int = 200

    def replace(self, **changes: Any) -> "Tolerances":
        return dataclasses.replace(self, **changes)


DEFAULT_TOLERANCES = Tolerances()

WORKERS_ENV = "GAUSSGME_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    if value < 1:
        raise InvalidArgumentError(f"{WORKERS_ENV} must be >= 1, got {value}")
    return value


def _coerce(text: str) -> Any:
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def read_config(path: str | os.PathLike) -> dict[str, Any]:
    """Parse a key-value config file into a dict with underscore keys."""
    values: dict[str, Any] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InvalidArgumentError(f"{path}:{lineno}: empty key")
        values[key.replace("-", "_")] = _coerce(value)
    return values


def tolerances_from_mapping(values: dict[str, Any], base: Tolerances = DEFAULT_TOLERANCES) -> Tolerances:
    """Pick ``tol_<field>`` entries out of a config mapping."""
    fields = {f.name for f in dataclasses.fields(Tolerances)}
    changes = {}
    for key, value in values.items():
        if key.startswith("tol_"):
            name = key[4:]
            if name not in fields:
                raise InvalidArgumentError(f"unknown tolerance {key!r}")
            changes[name] = type(getattr(base, name))(value)
    return base.replace(**changes)
