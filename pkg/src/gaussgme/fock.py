"""Fock-basis density-matrix elements of Gaussian states.

Two independent routes are implemented.

Derivative route (Husimi Q / Glauber-Sudarshan P overlap).
    With ladder moments ``sigma = S cm S^dag / 2``, ``beta = S d`` and
    ``sigma_Q = sigma + 1/2``::

        A     = X (1 - sigma_Q^-1)
        theta = (beta^dag sigma_Q^-1)^T
        <k|rho|k'> = T * d^{k'}_alpha d^{k}_{alpha*} exp(a^T A a / 2 + theta^T a) |_{a=0}
        T     = exp(-beta^dag sigma_Q^-1 beta / 2) / sqrt(det sigma_Q  prod k! k'!)

    The formal variables are ordered ``(alpha_1..alpha_N, alpha*_1..alpha*_N)``.
    Note the ket index ``k'`` drives the ``alpha`` derivatives; with the
    roles the other way round the same expression yields ``<k'|rho|k>``.
    Taylor coefficients are extracted exactly by polynomial algebra.

Hermite route (pinned convention).
    In ``ppxx`` ordering (``cm'``, ``d'``) and with
    ``U = [[-i 1, 1], [i 1, 1]]``::

        R = U^* (1 - cm') (1 + cm')^-1 U^dag / 2
        y = sqrt(2) U^* (1 + cm')^-1 d'
        <k|rho|k'> = 2^N exp(-d'^T (1 + cm')^-1 d') H_{(k, k')}(y)
                     / sqrt(det(cm' + 1) prod k! k'!)

    where ``H`` has generating function ``exp(a^T y - a^T R a / 2)``, i.e.
    ``H_{m+e_i} = y_i H_m - sum_j R_ij m_j H_{m-e_j}``. Here ``cm'`` uses the
    vacuum-is-identity unit, so the vacuum gives ``R = 0`` and element 1.
    The convention was fixed by agreement with the derivative route and with
    brute-force truncated-Fock states; see the test suite.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import struct
from collections.abc import Sequence
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._linalg import max_antihermiticity, max_asymmetry, min_eigh
from .config import DEFAULT_TOLERANCES
from .exceptions import InvalidArgumentError
from .moments import GaussianMoments, Ordering

# Per-mode occupation bound for single elements; blocks use d - 1 <= 3.
MAX_ORDER = 4
BLOCK_DIMS = (2, 3, 4)


class FockIndex(NamedTuple):
    """Occupation numbers of the three modes."""

    a: int
    b: int
    c: int


class Method(enum.Enum):
    HERMITE = "hermite"
    DERIVATIVE = "derivative"


def _check_index(k: Sequence[int], n_modes: int, bound: int = MAX_ORDER) -> tuple[int, ...]:
    k = tuple(int(v) for v in k)
    if len(k) != n_modes:
        raise InvalidArgumentError(f"index {k} needs {n_modes} entries")
    if any(v < 0 for v in k):
        raise InvalidArgumentError(f"negative occupation in {k}")
    if any(v > bound for v in k):
        raise InvalidArgumentError(f"occupation in {k} exceeds the order bound {bound}")
    return k


def _factorial_weight(k: Sequence[int], kp: Sequence[int]) -> float:
    return math.sqrt(math.prod(math.factorial(v) for v in (*k, *kp)))


def ladder_transform(n_modes: int) -> np.ndarray:
    """``S`` with ``(a, a^dag) = S (x, p)`` in XP_BLOCK ordering."""
    eye = np.eye(n_modes)
    return np.block([[eye, 1j * eye], [eye, -1j * eye]]) / np.sqrt(2)


def xp_to_ppxx(n_modes: int) -> np.ndarray:
    """Permutation matrix taking XP_BLOCK vectors to PPXX ordering."""
    eye, zero = np.eye(n_modes), np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [eye, zero]])


# -- derivative route ---------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class LadderMoments:
    sigma: np.ndarray
    beta: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.sigma.shape[0] // 2


def to_ladder(m: GaussianMoments) -> LadderMoments:
    if m.ordering is not Ordering.XP_BLOCK:
        raise InvalidArgumentError("to_ladder expects XP_BLOCK ordering")
    s = ladder_transform(m.n_modes)
    sigma = 0.5 * s @ m.cm @ s.conj().T
    if max_antihermiticity(sigma) > DEFAULT_TOLERANCES.hermitian:
        raise InvalidArgumentError("ladder covariance is not Hermitian")
    sigma = 0.5 * (sigma + sigma.conj().T)
    return LadderMoments(sigma, s @ m.mean)


@dataclasses.dataclass(frozen=True)
class HusimiParams:
    a_matrix: np.ndarray
    theta: np.ndarray
    prefactor_t: complex

    @property
    def n_modes(self) -> int:
        return self.a_matrix.shape[0] // 2


def husimi_params(lm: LadderMoments) -> HusimiParams:
    """Quadratic form, linear term and index-independent prefactor."""
    n = lm.n_modes
    sigma_q = lm.sigma + 0.5 * np.eye(2 * n)
    try:
        inv = np.linalg.inv(sigma_q)
    except np.linalg.LinAlgError:
        raise InvalidArgumentError("sigma_Q is singular") from None
    swap = xp_to_ppxx(n)  # the same block swap X
    a_matrix = swap @ (np.eye(2 * n) - inv)
    asym = max_asymmetry(a_matrix)
    if asym > 1e-10:
        raise InvalidArgumentError(f"A is not symmetric (asymmetry {asym:.2e})")
    a_matrix = 0.5 * (a_matrix + a_matrix.T)
    theta = lm.beta.conj() @ inv
    det = np.linalg.det(sigma_q).real
    prefactor = np.exp(-0.5 * (lm.beta.conj() @ inv @ lm.beta)) / np.sqrt(det)
    return HusimiParams(a_matrix, theta, complex(prefactor))


def _derivative_step(poly: np.ndarray, a_row: np.ndarray, theta_j: complex) -> np.ndarray:
    """``P -> dP/da_0 + P (theta_j + sum_l a_row[l] a_l)`` on a truncated dense polynomial.

    Axis ``l`` of ``poly`` holds exponents of the ``l``-th remaining variable,
    with the differentiated variable on axis 0.
    """
    d = poly.shape[0]
    out = theta_j * poly
    exps = np.arange(1, d).reshape((-1,) + (1,) * (poly.ndim - 1))
    out[:-1] += exps * poly[1:]
    for axis, coeff in enumerate(a_row):
        if coeff == 0:
            continue
        src = [slice(None)] * poly.ndim
        dst = [slice(None)] * poly.ndim
        src[axis], dst[axis] = slice(0, d - 1), slice(1, d)
        out[tuple(dst)] += coeff * poly[tuple(src)]
    return out


def _taylor_table(hp: HusimiParams, max_order: int) -> np.ndarray:
    """All derivatives ``d^e exp(a^T A a/2 + theta^T a)`` at 0 for ``e_j <= max_order``.

    Derivatives are taken one variable at a time; once a variable is done
    the polynomial is restricted to that variable being zero, so the shared
    prefixes of all exponent vectors are computed once.
    """
    n_vars = 2 * hp.n_modes
    d = max_order + 1
    table = np.zeros((d,) * n_vars, dtype=complex)
    a, theta = hp.a_matrix, hp.theta

    def visit(poly: np.ndarray, var: int, prefix: tuple[int, ...]) -> None:
        for count in range(d):
            if count:
                poly = _derivative_step(poly, a[var, var:], theta[var])
            reduced = poly[0]
            if var == n_vars - 1:
                table[prefix + (count,)] = reduced
            else:
                visit(reduced, var + 1, prefix + (count,))

    start = np.zeros((d,) * n_vars, dtype=complex)
    start[(0,) * n_vars] = 1.0
    visit(start, 0, ())
    return table


def element_by_derivatives(hp: HusimiParams, k: Sequence[int], k_prime: Sequence[int]) -> complex:
    """``<k|rho|k'>`` by exact Taylor-coefficient extraction."""
    n = hp.n_modes
    k, kp = _check_index(k, n), _check_index(k_prime, n)
    exps = kp + k
    n_vars = 2 * n
    deg = max(exps) + 1
    poly = np.zeros((deg,) * n_vars, dtype=complex)
    poly[(0,) * n_vars] = 1.0
    for var in range(n_vars):
        for _ in range(exps[var]):
            poly = _derivative_step(poly, hp.a_matrix[var, var:], hp.theta[var])
        poly = poly[0]
    return complex(hp.prefactor_t * poly / _factorial_weight(k, kp))


def derivative_elements(hp: HusimiParams, d: int) -> np.ndarray:
    """Elements ``<k|rho|k'>`` for occupations ``< d``, shape ``(d,)*N + (d,)*N``."""
    n = hp.n_modes
    table = _taylor_table(hp, d - 1)
    # table axes are (k' on alpha, k on alpha*); reorder to (k, k').
    perm = list(range(n, 2 * n)) + list(range(n))
    taylor = np.transpose(table, perm)
    return hp.prefactor_t * taylor / _factorial_grid(n, d)


def _factorial_grid(n: int, d: int) -> np.ndarray:
    f = np.sqrt([math.factorial(v) for v in range(d)])
    grid = np.ones((d,) * (2 * n))
    for axis in range(2 * n):
        shape = [1] * (2 * n)
        shape[axis] = d
        grid = grid * f.reshape(shape)
    return grid


# -- Hermite route ------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class HermiteParams:
    r_matrix: np.ndarray
    y_vector: np.ndarray
    prefactor: float

    @property
    def n_modes(self) -> int:
        return self.r_matrix.shape[0] // 2


def hermite_params(m: GaussianMoments) -> HermiteParams:
    if m.ordering is not Ordering.XP_BLOCK:
        raise InvalidArgumentError("hermite_params expects XP_BLOCK ordering")
    n = m.n_modes
    perm = xp_to_ppxx(n)
    cm = perm @ m.cm @ perm.T
    mean = perm @ m.mean
    eye = np.eye(2 * n)
    u = np.block([[-1j * np.eye(n), np.eye(n)], [1j * np.eye(n), np.eye(n)]])
    try:
        inv = np.linalg.inv(eye + cm)
    except np.linalg.LinAlgError:
        raise InvalidArgumentError("1 + cm is singular") from None
    r = 0.5 * u.conj() @ (eye - cm) @ inv @ u.conj().T
    if max_asymmetry(r) > 1e-10:
        raise InvalidArgumentError("Hermite matrix R is not symmetric")
    r = 0.5 * (r + r.T)
    y = np.sqrt(2) * u.conj() @ inv @ mean
    prefactor = 2**n * np.exp(-mean @ inv @ mean) / np.sqrt(np.linalg.det(eye + cm))
    return HermiteParams(r, y, float(prefactor))


def hermite_table(r: np.ndarray, y: np.ndarray, max_order: int) -> np.ndarray:
    """``H_m(y)`` for every multi-index with entries ``<= max_order``."""
    dim = len(y)
    table = np.zeros((max_order + 1,) * dim, dtype=complex)
    table[(0,) * dim] = 1.0
    for m in np.ndindex(*table.shape):
        if not any(m):
            continue
        i = next(j for j, v in enumerate(m) if v)
        low = list(m)
        low[i] -= 1
        value = y[i] * table[tuple(low)]
        for j in range(dim):
            if low[j]:
                lower = list(low)
                lower[j] -= 1
                value -= r[i, j] * low[j] * table[tuple(lower)]
        table[m] = value
    return table


def multidim_hermite(hp: HermiteParams, idx: Sequence[int], _cache: dict | None = None) -> complex:
    """Single multidimensional Hermite value by memoized recursion."""
    idx = tuple(int(v) for v in idx)
    dim = len(hp.y_vector)
    if len(idx) != dim or any(v < 0 for v in idx):
        raise InvalidArgumentError(f"multi-index {idx} must have {dim} non-negative entries")
    if any(v > 2 * MAX_ORDER for v in idx):
        raise InvalidArgumentError(f"multi-index {idx} exceeds the order bound")
    cache = {} if _cache is None else _cache
    r, y = hp.r_matrix, hp.y_vector

    def rec(m: tuple[int, ...]) -> complex:
        if not any(m):
            return 1.0
        if m in cache:
            return cache[m]
        i = next(j for j, v in enumerate(m) if v)
        low = list(m)
        low[i] -= 1
        value = y[i] * rec(tuple(low))
        for j in range(dim):
            if low[j]:
                lower = list(low)
                lower[j] -= 1
                value -= r[i, j] * low[j] * rec(tuple(lower))
        cache[m] = value
        return value

    return complex(rec(idx))


def element_by_hermite(m: GaussianMoments, k: Sequence[int], k_prime: Sequence[int]) -> complex:
    hp = hermite_params(m)
    n = m.n_modes
    k, kp = _check_index(k, n), _check_index(k_prime, n)
    return hp.prefactor * multidim_hermite(hp, k + kp) / _factorial_weight(k, kp)


def hermite_elements(hp: HermiteParams, d: int) -> np.ndarray:
    n = hp.n_modes
    table = hermite_table(hp.r_matrix, hp.y_vector, d - 1)
    return hp.prefactor * table / _factorial_grid(n, d)


# -- density blocks -----------------------------------------------------------


def flat_index(k: Sequence[int], d: int) -> int:
    """Row of ``|k_A k_B k_C>`` in a block of local dimension ``d``."""
    out = 0
    for v in k:
        out = out * d + int(v)
    return out


def fock_indices(d: int, n_modes: int = 3) -> list[FockIndex]:
    return [FockIndex(*k) for k in np.ndindex(*(d,) * n_modes)]


_BINARY_MAGIC = b"GGDB"
_BINARY_HEADER = struct.Struct("<4sIIdB")


@dataclasses.dataclass(frozen=True, eq=False)
class DensityBlock:
    """Three-mode density matrix restricted to occupations ``0..d-1`` per mode."""

    dim_per_mode: int
    matrix: np.ndarray
    captured_trace: float
    normalized: bool
    min_eigenvalue: float = np.nan
    method: str = ""

    def __post_init__(self) -> None:
        mat = np.array(self.matrix, dtype=complex)
        n = self.dim_per_mode**3
        if mat.shape != (n, n):
            raise InvalidArgumentError(f"matrix must be {n}x{n} for d={self.dim_per_mode}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        if np.isnan(self.min_eigenvalue):
            object.__setattr__(self, "min_eigenvalue", min_eigh(mat))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, d: int | None = None, normalize: bool = False) -> "DensityBlock":
        """Wrap an arbitrary Hermitian three-qudit matrix (tests, external data)."""
        matrix = np.asarray(matrix, dtype=complex)
        if d is None:
            d = int(round(matrix.shape[0] ** (1 / 3)))
        if max_antihermiticity(matrix) > DEFAULT_TOLERANCES.hermitian:
            raise InvalidArgumentError("density block must be Hermitian")
        matrix = 0.5 * (matrix + matrix.conj().T)
        trace = float(np.trace(matrix).real)
        if normalize:
            matrix = matrix / trace
        return cls(d, matrix, trace, normalize)

    @property
    def dim(self) -> int:
        return self.dim_per_mode**3

    def element(self, k: Sequence[int], k_prime: Sequence[int]) -> complex:
        d = self.dim_per_mode
        return complex(self.matrix[flat_index(k, d), flat_index(k_prime, d)])

    def normalized_copy(self) -> "DensityBlock":
        if self.normalized:
            return self
        tr = float(np.trace(self.matrix).real)
        return DensityBlock(self.dim_per_mode, self.matrix / tr, self.captured_trace, True, method=self.method)

    def scaled(self, factor: float) -> "DensityBlock":
        return DensityBlock(self.dim_per_mode, self.matrix * factor, self.captured_trace, False, method=self.method)

    def to_dict(self) -> dict:
        return {
            "d": self.dim_per_mode,
            "captured_trace": self.captured_trace,
            "normalized": self.normalized,
            "min_eigenvalue": self.min_eigenvalue,
            "method": self.method,
            "real": self.matrix.real.tolist(),
            "imag": self.matrix.imag.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "DensityBlock":
        matrix = np.asarray(data["real"], dtype=float) + 1j * np.asarray(data["imag"], dtype=float)
        return cls(int(data["d"]), matrix, float(data["captured_trace"]), bool(data["normalized"]),
                   method=data.get("method", ""))

    def to_bytes(self) -> bytes:
        """Header (magic, version, d, captured trace, normalized) then complex128 LE row-major."""
        header = _BINARY_HEADER.pack(_BINARY_MAGIC, 1, self.dim_per_mode, self.captured_trace, int(self.normalized))
        return header + np.ascontiguousarray(self.matrix, dtype="<c16").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DensityBlock":
        magic, version, d, trace, normalized = _BINARY_HEADER.unpack_from(data)
        if magic != _BINARY_MAGIC or version != 1:
            raise InvalidArgumentError("not a density-block file")
        n = d**3
        body = np.frombuffer(data, dtype="<c16", offset=_BINARY_HEADER.size, count=n * n)
        return cls(d, body.reshape(n, n), trace, bool(normalized))

    def write(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(self.to_json())
        else:
            path.write_bytes(self.to_bytes())


def element_grid(m: GaussianMoments, d: int, method: Method | str = Method.HERMITE) -> np.ndarray:
    """Raw elements ``<k|rho|k'>``, shape ``(d,)*N + (d,)*N``."""
    method = Method(method)
    if method is Method.HERMITE:
        return hermite_elements(hermite_params(m), d)
    return derivative_elements(husimi_params(to_ladder(m)), d)


def project_to_qudits(
    m: GaussianMoments,
    d: int,
    normalize: bool = True,
    method: Method | str = Method.HERMITE,
    cross_check: bool = False,
) -> DensityBlock:
    """Local projection of a three-mode state onto occupations ``0..d-1``.

    With ``cross_check`` both routes are evaluated and must agree to 1e-8.
    The block is not repaired to be PSD; ``min_eigenvalue`` is a diagnostic.
    """
    if m.n_modes != 3:
        raise InvalidArgumentError("project_to_qudits expects three modes")
    if d not in BLOCK_DIMS:
        raise InvalidArgumentError(f"d must be one of {BLOCK_DIMS}, got {d}")
    method = Method(method)
    grid = element_grid(m, d, method)
    if cross_check:
        other = element_grid(m, d, Method.DERIVATIVE if method is Method.HERMITE else Method.HERMITE)
        diff = float(np.max(np.abs(grid - other)))
        if diff > 1e-8:
            raise InvalidArgumentError(f"element routes disagree by {diff:.2e}")
    n = d**3
    raw = grid.reshape(n, n)
    asym = max_antihermiticity(raw)
    if asym > 1e-9:
        raise InvalidArgumentError(f"projected block is not Hermitian (deviation {asym:.2e})")
    mat = 0.5 * (raw + raw.conj().T)
    trace = float(np.trace(mat).real)
    if normalize:
        mat = mat / trace
    return DensityBlock(d, mat, trace, normalize, method=method.value)
