"""GME tests on truncated three-mode density blocks.

* Matrix-element inequalities whose violation rules out biseparability:
  the product-vector form and the extended occupation-one form.
* The fully decomposable witness program
  ``min Tr(W rho)`` s.t. ``Tr W = 1`` and, for every bipartition ``k``,
  ``W = P_k + Q_k^{T_k}`` with ``P_k, Q_k >= 0``.
  A negative optimum certifies GME.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import itertools
import json
import time

import numpy as np
import scipy.sparse as sp

from . import conic
from ._linalg import max_antihermiticity, min_eigh
from .config import DEFAULT_TOLERANCES, Tolerances
from .exceptions import InvalidArgumentError
from .fock import BLOCK_DIMS, DensityBlock, FockIndex
from .moments import Bipartition


@functools.cache
def _pt_permutation(d: int, mode: int) -> np.ndarray:
    """Flat-index permutation realizing the partial transpose on ``mode``."""
    n = d**3
    idx = np.arange(n * n).reshape((d,) * 6)
    axes = list(range(6))
    axes[mode], axes[3 + mode] = axes[3 + mode], axes[mode]
    perm = np.transpose(idx, axes).reshape(-1)
    perm.setflags(write=False)
    return perm


def partial_transpose_matrix(matrix: np.ndarray, d: int, b: Bipartition) -> np.ndarray:
    n = d**3
    matrix = np.asarray(matrix)
    if matrix.shape != (n, n):
        raise InvalidArgumentError(f"expected a {n}x{n} matrix for d={d}, got {matrix.shape}")
    return matrix.reshape(-1)[_pt_permutation(d, b.mode)].reshape(n, n)


def partial_transpose_dm(rho: DensityBlock, b: Bipartition) -> DensityBlock:
    mat = partial_transpose_matrix(rho.matrix, rho.dim_per_mode, b)
    return DensityBlock(rho.dim_per_mode, mat, rho.captured_trace, rho.normalized, method=rho.method)


# -- inequalities -------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class InequalityMargin:
    lhs: float
    rhs: float
    margin: float
    detected: bool

    @classmethod
    def of(cls, lhs: float, rhs: float, tol: float | None = None) -> "InequalityMargin":
        tol = DEFAULT_TOLERANCES.inequality if tol is None else tol
        margin = float(lhs - rhs)
        return cls(float(lhs), float(rhs), margin, margin > tol)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _diag(rho: DensityBlock, k: tuple[int, ...]) -> float:
    # Diagonal entries of a non-PSD truncation can be slightly negative.
    return max(rho.element(k, k).real, 0.0)


def _check_fock(rho: DensityBlock, k) -> tuple[int, int, int]:
    k = tuple(int(v) for v in k)
    if len(k) != 3 or any(not 0 <= v < rho.dim_per_mode for v in k):
        raise InvalidArgumentError(f"index {k} outside the block of dimension {rho.dim_per_mode}")
    return k


def ghh_product_criterion(rho: DensityBlock, a, b_idx, tol: float | None = None) -> InequalityMargin:
    """Biseparability inequality evaluated on the product vector ``|a>|b>``.

    ``|rho[a,b]| <= sum_k sqrt(rho[a~k, a~k] rho[b~k, b~k])`` where ``a~k`` and
    ``b~k`` exchange their entries on mode ``k``.
    """
    a, b = _check_fock(rho, a), _check_fock(rho, b_idx)
    if a == b:
        raise InvalidArgumentError("the two product vectors must differ")
    lhs = abs(rho.element(a, b))
    rhs = 0.0
    for k in range(3):
        at, bt = list(a), list(b)
        at[k], bt[k] = b[k], a[k]
        rhs += np.sqrt(_diag(rho, tuple(at)) * _diag(rho, tuple(bt)))
    return InequalityMargin.of(lhs, rhs, tol)


def ghh_default_sweep(rho: DensityBlock, tol: float | None = None) -> tuple[InequalityMargin, tuple[FockIndex, FockIndex]]:
    """Most violated product-vector inequality over index pairs with occupations <= 1."""
    best = None
    binary = [FockIndex(*k) for k in itertools.product((0, 1), repeat=3)]
    for a, b in itertools.combinations(binary, 2):
        res = ghh_product_criterion(rho, a, b, tol)
        if best is None or res.margin > best[0].margin:
            best = (res, (a, b))
    return best


def bisep_inequality_margin(rho: DensityBlock, tol: float | None = None) -> InequalityMargin:
    """Extended occupation-one inequality; a positive margin certifies GME."""
    e = rho.element
    lhs = abs(e((0, 0, 0), (0, 1, 1))) + abs(e((0, 0, 0), (1, 0, 1))) + abs(e((0, 0, 0), (1, 1, 0)))
    p001, p010, p100 = _diag(rho, (0, 0, 1)), _diag(rho, (0, 1, 0)), _diag(rho, (1, 0, 0))
    doubles = _diag(rho, (0, 1, 1)) + _diag(rho, (1, 0, 1)) + _diag(rho, (1, 1, 0))
    rhs = (
        np.sqrt(_diag(rho, (0, 0, 0))) * np.sqrt(doubles)
        + np.sqrt(p001 * p010)
        + np.sqrt(p001 * p100)
        + np.sqrt(p010 * p100)
    )
    return InequalityMargin.of(lhs, rhs, tol)


# -- fully decomposable witness -----------------------------------------------


class WitnessStatus(enum.Enum):
    OPTIMAL = "optimal"
    INDETERMINATE = "indeterminate"
    SOLVER_ERROR = "solver_error"


@dataclasses.dataclass(frozen=True, eq=False)
class WitnessOutcome:
    value: float
    witness: np.ndarray
    p_parts: tuple[np.ndarray, ...]
    q_parts: tuple[np.ndarray, ...]
    status: WitnessStatus
    duality_gap: float
    wall_time: float = 0.0
    message: str = ""
    reduction: str = ""

    @property
    def detects(self) -> bool:
        return self.status is WitnessStatus.OPTIMAL and self.value < -DEFAULT_TOLERANCES.witness_detect

    def to_dict(self, include_matrices: bool = False) -> dict:
        out = {
            "value": self.value,
            "status": self.status.value,
            "duality_gap": self.duality_gap,
            "detects": self.detects,
            "wall_time": self.wall_time,
            "reduction": self.reduction,
            "message": self.message,
        }
        if include_matrices:
            out["witness_real"] = self.witness.real.tolist()
            out["witness_imag"] = self.witness.imag.tolist()
        return out

    def to_json(self, include_matrices: bool = False) -> str:
        return json.dumps(self.to_dict(include_matrices))


def parity_sectors(d: int) -> list[np.ndarray]:
    """Basis rows grouped by total photon-number parity."""
    total = np.array([sum(k) for k in itertools.product(range(d), repeat=3)])
    return [np.flatnonzero(total % 2 == 0), np.flatnonzero(total % 2 == 1)]


def _commutes_with_parity(mat: np.ndarray, d: int, tol: float) -> bool:
    even, odd = parity_sectors(d)
    scale = max(1.0, float(np.max(np.abs(mat))))
    return float(np.max(np.abs(mat[np.ix_(even, odd)]), initial=0.0)) <= tol * scale


def _scatter(n: int, rows: np.ndarray) -> sp.csr_matrix:
    """Embed a flattened ``len(rows)``-square block into a flattened ``n``-square matrix."""
    m = len(rows)
    dest = (rows[:, None] * n + rows[None, :]).reshape(-1)
    return sp.csr_matrix((np.ones(m * m), (dest, np.arange(m * m))), shape=(n * n, m * m))


class _BlockHermitian:
    """Hermitian matrix variable that is block diagonal over ``sectors``."""

    def __init__(self, prog: conic.ConicProgram, name: str, n: int, sectors: list[np.ndarray], complex_: bool):
        self.blocks = []
        re = im = None
        for s, rows in enumerate(sectors):
            m = len(rows)
            b_re = prog.add_variable(f"{name}_re{s}", (m, m), "symmetric")
            b_im = prog.add_variable(f"{name}_im{s}", (m, m), "antisymmetric") if complex_ else None
            self.blocks.append((rows, b_re, b_im))
            scatter = _scatter(n, rows)
            part_re = b_re.linear(scatter, (n, n))
            re = part_re if re is None else re + part_re
            if complex_:
                part_im = b_im.linear(scatter, (n, n))
                im = part_im if im is None else im + part_im
        self.re, self.im = re, im

    def add_block_psd(self, prog: conic.ConicProgram, name: str) -> None:
        for s, (_, b_re, b_im) in enumerate(self.blocks):
            prog.add_psd(conic.embed_expression(b_re, b_im) if b_im is not None else b_re, name=f"{name}_{s}")


def _add_sector_psd(prog, re, im, sectors, name):
    for s, rows in enumerate(sectors):
        blk_re = re.take(rows, rows)
        blk_im = im.take(rows, rows) if im is not None else None
        prog.add_psd(conic.embed_expression(blk_re, blk_im) if blk_im is not None else blk_re, name=f"{name}_{s}")


def build_fdw_program(rho: np.ndarray, d: int, complex_: bool, sectors: list[np.ndarray]):
    n = d**3
    prog = conic.ConicProgram()
    w = _BlockHermitian(prog, "W", n, sectors, complex_)
    prog.add_eq(w.re.trace(), 1.0, name="trace")
    parts = []
    for b in Bipartition:
        q = _BlockHermitian(prog, f"Q_{b.name}", n, sectors, complex_)
        q.add_block_psd(prog, f"Q_{b.name}")
        perm = _pt_permutation(d, b.mode)
        q_re_t = q.re.permute(perm)
        q_im_t = q.im.permute(perm) if complex_ else None
        p_re = w.re - q_re_t
        p_im = w.im - q_im_t if complex_ else None
        _add_sector_psd(prog, p_re, p_im, sectors, f"P_{b.name}")
        parts.append((q, q_re_t, q_im_t))
    # Tr(W rho) = <Re W, Re rho> + <Im W, Im rho> for Hermitian W and rho.
    objective = w.re.inner(rho.real)
    if complex_:
        objective = objective + w.im.inner(rho.imag)
    prog.minimize(objective)
    return prog, w, parts


def fully_decomposable_witness(
    rho: DensityBlock,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    options: conic.SolveOptions | None = None,
    use_symmetries: bool = True,
) -> WitnessOutcome:
    """Optimal fully decomposable witness for a block with ``d`` in {2, 3, 4}.

    Exact reductions when ``use_symmetries`` is set: a real block admits a
    real optimal witness (average with the complex conjugate), and a block
    commuting with the total photon-number parity admits a parity
    block-diagonal one (twirl with the parity; partial transposes keep the
    block structure). Neither changes the optimum.
    """
    d = rho.dim_per_mode
    if d not in BLOCK_DIMS:
        raise InvalidArgumentError(f"d must be one of {BLOCK_DIMS}, got {d}")
    mat = np.asarray(rho.matrix, dtype=complex)
    if max_antihermiticity(mat) > tolerances.hermitian:
        raise InvalidArgumentError("density block is not Hermitian")
    n = d**3
    start = time.perf_counter()
    complex_ = not (use_symmetries and float(np.max(np.abs(mat.imag))) <= tolerances.symmetry)
    if use_symmetries and _commutes_with_parity(mat, d, tolerances.symmetry):
        sectors, reduction = parity_sectors(d), "parity"
    else:
        sectors, reduction = [np.arange(n)], "none"
    reduction += "+complex" if complex_ else "+real"
    prog, w, parts = build_fdw_program(mat, d, complex_, sectors)
    if options is None:
        options = conic.SolveOptions(tolerances.solver_feas, tolerances.solver_gap, tolerances.solver_max_iter)
    report = conic.solve(prog, options)
    elapsed = time.perf_counter() - start
    if report.status is conic.Status.ERROR or not report.x:
        empty = np.zeros((n, n), dtype=complex)
        return WitnessOutcome(np.nan, empty, (), (), WitnessStatus.SOLVER_ERROR, np.nan, elapsed, report.message,
                              reduction)

    def value_of(re, im):
        out = report.value(re).astype(complex)
        if im is not None:
            out = out + 1j * report.value(im)
        return out

    witness = value_of(w.re, w.im)
    q_parts = tuple(value_of(q.re, q.im) for q, _, _ in parts)
    p_parts = tuple(witness - value_of(qt_re, qt_im) for _, qt_re, qt_im in parts)
    value = float(np.real(np.sum(witness * mat.conj())))
    # A near-optimal solve counts once its gap and certificates check out below.
    near = report.solver_status == "AlmostSolved" and report.duality_gap < 1e-7 * (1 + abs(value))
    optimal = report.status is conic.Status.OPTIMAL or near
    status = WitnessStatus.OPTIMAL if optimal else WitnessStatus.INDETERMINATE
    message = report.message
    if abs(np.trace(witness).real - 1) > 1e-7:
        status, message = WitnessStatus.INDETERMINATE, message + " (trace constraint violated)"
    worst = min(min(min_eigh(x) for x in p_parts), min(min_eigh(x) for x in q_parts))
    if worst < -10 * tolerances.witness_sdp:
        status, message = WitnessStatus.INDETERMINATE, message + f" (certificate eigenvalue {worst:.2e})"
    return WitnessOutcome(value, witness, p_parts, q_parts, status, report.duality_gap, elapsed, message, reduction)
