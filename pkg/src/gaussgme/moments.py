"""Covariance-matrix algebra and constructors for the three-mode state families.

Conventions: ``[x, p] = i`` and ``cm_jk = <{d xi_j, d xi_k}>``, so the vacuum has
the identity as covariance matrix. Public values are always in ``XP_BLOCK``
ordering ``(x_1..x_N, p_1..p_N)``.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np

from ._linalg import max_asymmetry, min_eigh, real_embedding
from .config import DEFAULT_TOLERANCES
from .exceptions import DomainError, InvalidArgumentError


class Ordering(enum.Enum):
    XP_BLOCK = "xp_block"
    PPXX = "ppxx"


class Bipartition(enum.Enum):
    """Bipartition ``k|lm`` labelled by its isolated mode ``k``."""

    A = 0
    B = 1
    C = 2

    @property
    def mode(self) -> int:
        return self.value

    @property
    def complement(self) -> tuple[int, int]:
        return tuple(m for m in range(3) if m != self.value)

    @property
    def label(self) -> str:
        rest = "".join("ABC"[m] for m in self.complement)
        return f"{self.name}|{rest}"


class Family(enum.Enum):
    VAC = "vac"
    SMSV = "smsv"
    THERMAL = "thermal"
    COHERENT = "coherent"
    NOISY_GHZ = "noisy_ghz"

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        if isinstance(name, Family):
            return name
        try:
            return cls(name.lower())
        except ValueError:
            try:
                return cls[name.upper()]
            except KeyError:
                raise InvalidArgumentError(f"unknown family {name!r}") from None


# Second parameter (if any) and its admissible closed range for each family.
FAMILY_PARAMETERS: dict[Family, dict[str, tuple[float, float]]] = {
    Family.VAC: {"r": (0.0, np.inf)},
    Family.SMSV: {"r": (0.0, np.inf)},
    Family.THERMAL: {"r": (0.0, np.inf), "nbar": (0.0, np.inf)},
    Family.COHERENT: {"r": (0.0, np.inf), "alpha": (0.0, np.inf)},
    Family.NOISY_GHZ: {"r": (0.0, np.inf), "eta": (0.0, 1.0)},
}


def second_parameter(family: Family) -> str | None:
    names = [name for name in FAMILY_PARAMETERS[family] if name != "r"]
    return names[0] if names else None


@dataclasses.dataclass(frozen=True, eq=False)
class GaussianMoments:
    """First and second moments of an N-mode Gaussian state.

    Only the upper triangle of ``cm`` is kept; it is mirrored on construction
    after checking the input is symmetric to ``symmetry_tol``. With
    ``physical=True`` the uncertainty relation is also enforced.
    """

    cm: np.ndarray
    mean: np.ndarray | None = None
    ordering: Ordering = Ordering.XP_BLOCK
    physical: bool = False

    def __post_init__(self) -> None:
        cm = np.array(self.cm, dtype=float)
        if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] % 2:
            raise InvalidArgumentError(f"cm must be square with even size, got shape {cm.shape}")
        if not np.all(np.isfinite(cm)):
            raise InvalidArgumentError("cm contains non-finite entries")
        asym = max_asymmetry(cm)
        if asym > DEFAULT_TOLERANCES.symmetry * max(1.0, float(np.max(np.abs(cm)))):
            raise InvalidArgumentError(f"cm is not symmetric (max asymmetry {asym:.3e})")
        upper = np.triu(cm)
        cm = upper + np.triu(cm, 1).T
        mean = np.zeros(cm.shape[0]) if self.mean is None else np.array(self.mean, dtype=float)
        if mean.shape != (cm.shape[0],):
            raise InvalidArgumentError(f"mean must have length {cm.shape[0]}, got {mean.shape}")
        cm.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "cm", cm)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        if self.physical:
            ok, eig = is_valid_cm(self)
            if not ok:
                raise InvalidArgumentError(f"cm violates the uncertainty relation (min eigenvalue {eig:.3e})")

    @property
    def n_modes(self) -> int:
        return self.cm.shape[0] // 2

    def with_zero_mean(self) -> "GaussianMoments":
        return GaussianMoments(self.cm, None, self.ordering, self.physical)

    def allclose(self, other: "GaussianMoments", atol: float = 1e-12) -> bool:
        return (
            self.ordering is other.ordering
            and self.cm.shape == other.cm.shape
            and np.allclose(self.cm, other.cm, rtol=0, atol=atol)
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_modes": self.n_modes,
            "ordering": self.ordering.value,
            "cm": self.cm.tolist(),
            "mean": self.mean.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], physical: bool = False) -> "GaussianMoments":
        try:
            cm = np.asarray(data["cm"], dtype=float)
        except KeyError:
            raise InvalidArgumentError("moments JSON needs a 'cm' entry") from None
        ordering = Ordering(data.get("ordering", Ordering.XP_BLOCK.value))
        if ordering is not Ordering.XP_BLOCK:
            raise InvalidArgumentError("serialized moments must use xp_block ordering")
        return cls(cm, data.get("mean"), ordering, physical)

    @classmethod
    def from_json(cls, text: str, physical: bool = False) -> "GaussianMoments":
        return cls.from_dict(json.loads(text), physical=physical)


@dataclasses.dataclass(frozen=True)
class MixtureComponent:
    weight: float
    moments: GaussianMoments


def symplectic_form(n_modes: int) -> np.ndarray:
    """``[[0, 1], [-1, 0]]`` in XP_BLOCK ordering."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidArgumentError(f"n_modes must be a positive integer, got {n_modes}")
    n = int(n_modes)
    eye, zero = np.eye(n), np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def _require_xp(m: GaussianMoments) -> None:
    if m.ordering is not Ordering.XP_BLOCK:
        raise InvalidArgumentError("expected XP_BLOCK ordering")


def uncertainty_min_eigenvalue(cm: np.ndarray) -> float:
    """Minimum eigenvalue of ``cm + i Omega`` via its real embedding."""
    omega = symplectic_form(cm.shape[0] // 2)
    return min_eigh(real_embedding(cm, omega))


def is_valid_cm(m: GaussianMoments, tol: float | None = None) -> tuple[bool, float]:
    """Check the uncertainty relation ``cm + i Omega >= 0``.

    Returns the verdict and the minimum eigenvalue of the embedding.
    """
    tol = DEFAULT_TOLERANCES.psd if tol is None else tol
    _require_xp(m)
    eig = uncertainty_min_eigenvalue(m.cm)
    return eig >= -tol, eig


def _check_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be a finite non-negative number, got {value}")
    return value


def tmsv_cm(r: float) -> GaussianMoments:
    r = _check_nonneg("r", r)
    a, c = np.cosh(2 * r), np.sinh(2 * r)
    x = np.array([[a, c], [c, a]])
    p = np.array([[a, -c], [-c, a]])
    zero = np.zeros((2, 2))
    return GaussianMoments(np.block([[x, zero], [zero, p]]), physical=True)


def smsv_cm(r: float) -> GaussianMoments:
    r = _check_nonneg("r", r)
    return GaussianMoments(np.diag([np.exp(2 * r), np.exp(-2 * r)]), physical=True)


def thermal_cm(nbar: float) -> GaussianMoments:
    nbar = _check_nonneg("nbar", nbar)
    return GaussianMoments((2 * nbar + 1) * np.eye(2), physical=True)


def coherent_moments(alpha: float) -> GaussianMoments:
    """Coherent state ``|alpha>`` for real alpha; ``<x> = sqrt(2) alpha``."""
    alpha = _check_nonneg("alpha", alpha)
    return GaussianMoments(np.eye(2), [np.sqrt(2) * alpha, 0.0], physical=True)


def vacuum_moments(n_modes: int) -> GaussianMoments:
    return GaussianMoments(np.eye(2 * n_modes), physical=True)


def ghz_cm(r: float) -> GaussianMoments:
    """Pure three-mode GHZ-like state."""
    r = _check_nonneg("r", r)
    ep, em = np.exp(2 * r), np.exp(-2 * r)
    a_plus, c_plus = (ep + 2 * em) / 3, (ep - em) / 3
    a_minus, c_minus = (em + 2 * ep) / 3, (em - ep) / 3
    ones = np.ones((3, 3))
    x = c_plus * ones + (a_plus - c_plus) * np.eye(3)
    p = c_minus * ones + (a_minus - c_minus) * np.eye(3)
    zero = np.zeros((3, 3))
    return GaussianMoments(np.block([[x, zero], [zero, p]]), physical=True)


def _xp_indices(modes: Sequence[int], n_modes: int) -> list[int]:
    return list(modes) + [n_modes + m for m in modes]


def direct_sum(*parts: GaussianMoments) -> GaussianMoments:
    """Moments of the product state, modes concatenated in argument order."""
    if not parts:
        raise InvalidArgumentError("direct_sum needs at least one argument")
    for part in parts:
        _require_xp(part)
    n_total = sum(p.n_modes for p in parts)
    cm = np.zeros((2 * n_total, 2 * n_total))
    mean = np.zeros(2 * n_total)
    offset = 0
    for part in parts:
        dst = _xp_indices(range(offset, offset + part.n_modes), n_total)
        cm[np.ix_(dst, dst)] = part.cm
        mean[dst] = part.mean
        offset += part.n_modes
    return GaussianMoments(cm, mean, physical=all(p.physical for p in parts))


def permute_modes(m: GaussianMoments, perm: Sequence[int]) -> GaussianMoments:
    """Relabel modes so that new mode ``i`` is old mode ``perm[i]``."""
    _require_xp(m)
    n = m.n_modes
    if sorted(perm) != list(range(n)):
        raise InvalidArgumentError(f"{perm} is not a permutation of {n} modes")
    idx = _xp_indices(perm, n)
    return GaussianMoments(m.cm[np.ix_(idx, idx)], m.mean[idx], physical=m.physical)


def embed_modes(
    m: GaussianMoments, slots: Sequence[int], background: GaussianMoments | None = None
) -> GaussianMoments:
    """Place ``m`` on ``slots`` of ``background`` (three-mode vacuum by default).

    Correlations between the slots and the rest of the background are removed.
    """
    _require_xp(m)
    background = vacuum_moments(3) if background is None else background
    _require_xp(background)
    n = background.n_modes
    slots = list(slots)
    if len(slots) != m.n_modes or len(set(slots)) != len(slots) or not all(0 <= s < n for s in slots):
        raise InvalidArgumentError(f"invalid slots {slots} for a {m.n_modes}-mode state in {n} modes")
    rest = [k for k in range(n) if k not in slots]
    cm = np.zeros((2 * n, 2 * n))
    mean = np.zeros(2 * n)
    src = _xp_indices(slots, n)
    cm[np.ix_(src, src)] = m.cm
    mean[src] = m.mean
    keep = _xp_indices(rest, n)
    cm[np.ix_(keep, keep)] = background.cm[np.ix_(keep, keep)]
    mean[keep] = background.mean[keep]
    return GaussianMoments(cm, mean, physical=m.physical and background.physical)


def mix_gaussian_moments(components: Sequence[MixtureComponent]) -> GaussianMoments:
    """Moments of a convex mixture.

    ``mean = sum p_i d_i`` and ``cm = sum p_i (cm_i + 2 d_i d_i^T) - 2 mean mean^T``.
    """
    if not components:
        raise InvalidArgumentError("a mixture needs at least one component")
    dim = components[0].moments.cm.shape[0]
    weights = np.array([c.weight for c in components], dtype=float)
    if np.any(weights < 0) or np.any(weights > 1):
        raise InvalidArgumentError("mixture weights must lie in [0, 1]")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError(f"mixture weights sum to {weights.sum()!r}, not 1")
    cm = np.zeros((dim, dim))
    mean = np.zeros(dim)
    for weight, comp in zip(weights, components):
        _require_xp(comp.moments)
        if comp.moments.cm.shape[0] != dim:
            raise InvalidArgumentError("mixture components have different mode counts")
        d = comp.moments.mean
        cm += weight * (comp.moments.cm + 2 * np.outer(d, d))
        mean += weight * d
    cm -= 2 * np.outer(mean, mean)
    return GaussianMoments(cm, mean, physical=all(c.moments.physical for c in components))


def tmsv_mixture(r: float, single: GaussianMoments) -> GaussianMoments:
    """Equal mixture of TMSV(r) on each mode pair with ``single`` on the third mode."""
    tmsv = tmsv_cm(r)
    third = 1.0 / 3.0
    placements = [((0, 1), 2), ((0, 2), 1), ((1, 2), 0)]
    comps = []
    for pair, lone in placements:
        state = embed_modes(single, [lone], embed_modes(tmsv, pair))
        comps.append(MixtureComponent(third, state))
    return mix_gaussian_moments(comps)


def _param(params: Mapping[str, float], name: str, family: Family) -> float:
    if name not in params:
        raise InvalidArgumentError(f"family {family.name} needs parameter {name!r}")
    value = float(params[name])
    low, high = FAMILY_PARAMETERS[family][name]
    if not np.isfinite(value) or value < low or value > high:
        raise DomainError(f"{name}={value} outside [{low}, {high}] for family {family.name}")
    return value


def family_moments(family: Family | str, params: Mapping[str, float]) -> GaussianMoments:
    """Covariance matrix of a named family, always with zero mean."""
    family = Family.parse(family)
    unknown = set(params) - set(FAMILY_PARAMETERS[family])
    if unknown:
        raise InvalidArgumentError(f"unexpected parameters {sorted(unknown)} for family {family.name}")
    r = _param(params, "r", family)
    if family is Family.VAC:
        out = tmsv_mixture(r, vacuum_moments(1))
    elif family is Family.SMSV:
        out = tmsv_mixture(r, smsv_cm(r))
    elif family is Family.THERMAL:
        out = tmsv_mixture(r, thermal_cm(_param(params, "nbar", family)))
    elif family is Family.COHERENT:
        out = tmsv_mixture(r, coherent_moments(_param(params, "alpha", family)))
    else:
        eta = _param(params, "eta", family)
        out = GaussianMoments(eta * ghz_cm(r).cm + (1 - eta) * np.eye(6))
    return GaussianMoments(out.cm, None, physical=True)
