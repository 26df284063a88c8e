"""A narrow conic-program layer: affine matrix expressions, PSD and linear
constraints, and a uniform solve report.

Programs are compiled to the standard form ``min q.x  s.t.  A x + s = b,
s in K`` of the Clarabel interior-point solver. Symmetric matrix variables
and PSD slacks use the packed upper-triangular, column-major ``svec``
layout with off-diagonals scaled by ``sqrt(2)``, so the PSD cone is
self-dual under the plain vector inner product.

Complex Hermitian constraints are never formed directly; callers express
them through :func:`hermitian_embed` / :func:`embed_expression`.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import json
import time
from collections.abc import Iterable, Sequence
from typing import Any

import numpy as np
import scipy.sparse as sp

from ._linalg import max_antihermiticity, real_embedding
from .config import DEFAULT_TOLERANCES
from .exceptions import InvalidArgumentError

_SQRT2 = np.sqrt(2.0)


def svec_indices(n: int) -> list[tuple[int, int]]:
    """``(row, col)`` pairs of the packed upper triangle, column-major."""
    return [(i, j) for j in range(n) for i in range(j + 1)]


def svec(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    return np.array([m[i, j] if i == j else _SQRT2 * 0.5 * (m[i, j] + m[j, i]) for i, j in svec_indices(n)])


def smat(v: np.ndarray) -> np.ndarray:
    n = int(round((np.sqrt(8 * len(v) + 1) - 1) / 2))
    if n * (n + 1) // 2 != len(v):
        raise InvalidArgumentError(f"length {len(v)} is not a triangular number")
    m = np.zeros((n, n), dtype=np.result_type(v, float))
    for k, (i, j) in enumerate(svec_indices(n)):
        if i == j:
            m[i, i] = v[k]
        else:
            m[i, j] = m[j, i] = v[k] / _SQRT2
    return m


@functools.cache
def _svec_operator(n: int) -> sp.csr_matrix:
    """Sparse map from a row-major flattened n x n matrix to its svec."""
    rows, cols, vals = [], [], []
    for k, (i, j) in enumerate(svec_indices(n)):
        if i == j:
            rows.append(k), cols.append(i * n + i), vals.append(1.0)
        else:
            rows += [k, k]
            cols += [i * n + j, j * n + i]
            vals += [_SQRT2 / 2, _SQRT2 / 2]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n * (n + 1) // 2, n * n))


def _param_to_full(n: int, kind: str) -> sp.csr_matrix:
    """Sparse map from a variable's parameter vector to its row-major full matrix."""
    rows, cols, vals = [], [], []
    if kind == "symmetric":
        for k, (i, j) in enumerate(svec_indices(n)):
            if i == j:
                rows.append(i * n + i), cols.append(k), vals.append(1.0)
            else:
                rows += [i * n + j, j * n + i]
                cols += [k, k]
                vals += [1 / _SQRT2, 1 / _SQRT2]
        size = n * (n + 1) // 2
    elif kind == "antisymmetric":
        k = 0
        for j in range(n):
            for i in range(j):
                rows += [i * n + j, j * n + i]
                cols += [k, k]
                vals += [1.0, -1.0]
                k += 1
        size = n * (n - 1) // 2
    else:
        raise InvalidArgumentError(f"unknown matrix variable kind {kind!r}")
    return sp.csr_matrix((vals, (rows, cols)), shape=(n * n, size))


def hermitian_embed(h: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Real symmetric ``[[Re h, -Im h], [Im h, Re h]]``.

    Its spectrum is that of ``h`` with every multiplicity doubled.
    """
    tol = DEFAULT_TOLERANCES.hermitian if tol is None else tol
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {h.shape}")
    if max_antihermiticity(h) > tol:
        raise InvalidArgumentError("input is not Hermitian")
    return real_embedding(h.real, h.imag)


class Affine:
    """Affine matrix expression ``reshape(sum_v M_v x_v + c, shape)``.

    ``terms`` maps a variable name to a sparse matrix acting on that
    variable's parameter vector; values are flattened row-major.
    """

    __slots__ = ("terms", "const", "shape")
    # Make ``ndarray - Affine`` dispatch to the reflected operators below.
    __array_ufunc__ = None

    def __init__(self, terms: dict[str, sp.csr_matrix], const: np.ndarray, shape: tuple[int, ...]):
        self.terms = terms
        self.const = np.asarray(const, dtype=float).reshape(-1)
        self.shape = tuple(shape)
        size = int(np.prod(self.shape))
        if self.const.size != size or any(m.shape[0] != size for m in terms.values()):
            raise InvalidArgumentError("inconsistent affine expression sizes")

    @classmethod
    def constant(cls, value: Any) -> "Affine":
        arr = np.asarray(value, dtype=float)
        return cls({}, arr.reshape(-1), arr.shape or (1,))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def variables(self) -> set[str]:
        return set(self.terms)

    def linear(self, op: sp.spmatrix | np.ndarray, shape: tuple[int, ...]) -> "Affine":
        """Apply a linear map to the flattened value."""
        op = sp.csr_matrix(op)
        return Affine({k: (op @ m).tocsr() for k, m in self.terms.items()}, op @ self.const, shape)

    def permute(self, perm: np.ndarray, shape: tuple[int, ...] | None = None) -> "Affine":
        """New flat entry ``i`` is old flat entry ``perm[i]``."""
        perm = np.asarray(perm)
        out_shape = self.shape if shape is None else shape
        return Affine({k: m[perm] for k, m in self.terms.items()}, self.const[perm], out_shape)

    @property
    def T(self) -> "Affine":
        rows, cols = self.shape
        perm = np.arange(rows * cols).reshape(rows, cols).T.reshape(-1)
        return self.permute(perm, (cols, rows))

    def take(self, rows: Sequence[int], cols: Sequence[int]) -> "Affine":
        n_cols = self.shape[1]
        idx = (np.asarray(rows)[:, None] * n_cols + np.asarray(cols)[None, :]).reshape(-1)
        return self.permute(idx, (len(rows), len(cols)))

    def trace(self) -> "Affine":
        n = self.shape[0]
        return self.linear(sp.csr_matrix(np.eye(n).reshape(1, -1)), (1,))

    def inner(self, coeff: np.ndarray) -> "Affine":
        """Frobenius inner product ``sum_ij coeff_ij X_ij`` (scalar)."""
        return self.linear(sp.csr_matrix(np.asarray(coeff, dtype=float).reshape(1, -1)), (1,))

    def _combine(self, other: Any, sign: float) -> "Affine":
        if not isinstance(other, Affine):
            other = Affine.constant(np.broadcast_to(np.asarray(other, dtype=float), self.shape))
        if other.shape != self.shape:
            raise InvalidArgumentError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = dict(self.terms)
        for k, m in other.terms.items():
            terms[k] = (terms[k] + sign * m).tocsr() if k in terms else (sign * m).tocsr()
        return Affine(terms, self.const + sign * other.const, self.shape)

    def __add__(self, other: Any) -> "Affine":
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Affine":
        return self._combine(other, -1.0)

    def __rsub__(self, other: Any) -> "Affine":
        return (-self)._combine(other, 1.0)

    def __neg__(self) -> "Affine":
        return self * -1.0

    def __mul__(self, scalar: float) -> "Affine":
        scalar = float(scalar)
        return Affine({k: (scalar * m).tocsr() for k, m in self.terms.items()}, scalar * self.const, self.shape)

    __rmul__ = __mul__

    def evaluate(self, x: dict[str, np.ndarray]) -> np.ndarray:
        flat = self.const.copy()
        for k, m in self.terms.items():
            flat = flat + m @ x[k]
        return flat.reshape(self.shape)


def bmat(blocks: Sequence[Sequence[Affine | np.ndarray | None]]) -> Affine:
    """Assemble a block matrix; ``None`` is a zero block."""
    n_rows = [None] * len(blocks)
    n_cols = [None] * len(blocks[0])
    for bi, row in enumerate(blocks):
        for bj, blk in enumerate(row):
            if blk is not None:
                shape = blk.shape if isinstance(blk, Affine) else np.shape(blk)
                n_rows[bi], n_cols[bj] = shape[0], shape[1]
    if None in n_rows or None in n_cols:
        raise InvalidArgumentError("every block row and column needs one non-empty block")
    total_r, total_c = sum(n_rows), sum(n_cols)
    out = Affine.constant(np.zeros((total_r, total_c)))
    r0 = 0
    for bi, row in enumerate(blocks):
        c0 = 0
        for bj, blk in enumerate(row):
            if blk is not None:
                blk = blk if isinstance(blk, Affine) else Affine.constant(blk)
                rr, cc = np.meshgrid(np.arange(n_rows[bi]), np.arange(n_cols[bj]), indexing="ij")
                dest = ((rr + r0) * total_c + (cc + c0)).reshape(-1)
                scatter = sp.csr_matrix(
                    (np.ones(blk.size), (dest, np.arange(blk.size))), shape=(total_r * total_c, blk.size)
                )
                out = out + blk.linear(scatter, (total_r, total_c))
            c0 += n_cols[bj]
        r0 += n_rows[bi]
    return out


def embed_expression(re: Affine, im: Affine | None) -> Affine:
    """Real embedding of the Hermitian expression ``re + i im``."""
    if im is None:
        return bmat([[re, None], [None, re]])
    return bmat([[re, -im], [im, re]])


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    INDETERMINATE = "indeterminate"
    ERROR = "error"


@dataclasses.dataclass(frozen=True)
class SolveOptions:
    tol_feas: float = DEFAULT_TOLERANCES.solver_feas
    tol_gap: float = DEFAULT_TOLERANCES.solver_gap
    max_iter: int = DEFAULT_TOLERANCES.solver_max_iter
    verbose: bool = False


@dataclasses.dataclass
class _Constraint:
    name: str
    kind: str  # "eq", "nonneg" or "psd"
    expr: Affine
    rhs: np.ndarray | None = None


@dataclasses.dataclass(frozen=True)
class SolveReport:
    status: Status
    primal_value: float
    dual_value: float
    duality_gap: float
    x: dict[str, np.ndarray]
    primal_solution: dict[str, np.ndarray]
    dual_certificates: dict[str, np.ndarray]
    iterations: int
    wall_time: float
    message: str = ""
    solver_status: str = ""

    def value(self, expr: Affine) -> np.ndarray:
        return expr.evaluate(self.x)


class ConicProgram:
    """Registry of variables and constraints for one minimization problem."""

    def __init__(self) -> None:
        self._vars: dict[str, tuple[int, tuple[int, ...], str]] = {}
        self._full: dict[str, Affine] = {}
        self._constraints: list[_Constraint] = []
        self._objective: Affine | None = None

    # -- variables ---------------------------------------------------------
    def add_variable(self, name: str, shape: int | tuple[int, ...], symmetry: str = "none") -> Affine:
        """Register a variable and return it as a full-matrix expression.

        ``symmetry`` is ``"symmetric"`` or ``"antisymmetric"`` for square
        matrices, ``"none"`` for unstructured vectors/matrices.
        """
        if name in self._vars:
            raise InvalidArgumentError(f"variable {name!r} already registered")
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        if symmetry == "none":
            size = int(np.prod(shape))
            to_full = sp.identity(size, format="csr")
        else:
            if len(shape) != 2 or shape[0] != shape[1]:
                raise InvalidArgumentError(f"{symmetry} variables must be square, got {shape}")
            to_full = _param_to_full(shape[0], symmetry)
            size = to_full.shape[1]
        self._vars[name] = (size, shape, symmetry)
        expr = Affine({name: to_full}, np.zeros(int(np.prod(shape))), shape)
        self._full[name] = expr
        return expr

    def variable(self, name: str) -> Affine:
        return self._full[name]

    @property
    def n_params(self) -> int:
        return sum(size for size, _, _ in self._vars.values())

    # -- constraints -------------------------------------------------------
    def _check(self, expr: Affine) -> None:
        unknown = expr.variables() - set(self._vars)
        if unknown:
            raise InvalidArgumentError(f"expression references unregistered variables {sorted(unknown)}")

    def _name(self, name: str | None, prefix: str) -> str:
        name = name or f"{prefix}{len(self._constraints)}"
        if any(c.name == name for c in self._constraints):
            raise InvalidArgumentError(f"constraint {name!r} already exists")
        return name

    def add_psd(self, expr: Affine, name: str | None = None) -> str:
        """Require the (symmetric) square expression to be positive semidefinite."""
        self._check(expr)
        if len(expr.shape) != 2 or expr.shape[0] != expr.shape[1]:
            raise InvalidArgumentError(f"PSD constraint needs a square matrix, got {expr.shape}")
        name = self._name(name, "psd")
        self._constraints.append(_Constraint(name, "psd", expr))
        return name

    def add_eq(self, expr: Affine, rhs: Any = 0.0, name: str | None = None) -> str:
        self._check(expr)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), expr.shape).reshape(-1).copy()
        name = self._name(name, "eq")
        self._constraints.append(_Constraint(name, "eq", expr, rhs))
        return name

    def add_nonneg(self, expr: Affine, name: str | None = None) -> str:
        self._check(expr)
        name = self._name(name, "nonneg")
        self._constraints.append(_Constraint(name, "nonneg", expr))
        return name

    def minimize(self, expr: Affine) -> None:
        self._check(expr)
        if expr.size != 1:
            raise InvalidArgumentError("objective must be scalar")
        self._objective = expr

    # -- compilation -------------------------------------------------------
    def _offsets(self) -> dict[str, int]:
        offsets, pos = {}, 0
        for name, (size, _, _) in self._vars.items():
            offsets[name] = pos
            pos += size
        return offsets

    def _stack(self, expr: Affine, offsets: dict[str, int]) -> sp.csr_matrix:
        rows, cols, vals = [np.zeros(0, int)], [np.zeros(0, int)], [np.zeros(0)]
        for name, m in expr.terms.items():
            m = m.tocoo()
            rows.append(m.row)
            cols.append(m.col + offsets[name])
            vals.append(m.data)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(expr.size, self.n_params)
        )

    def compile(self):
        """Return ``(q, q0, A, b, cone_spec, segments)`` in solver standard form."""
        offsets = self._offsets()
        n = self.n_params
        if self._objective is None:
            q, q0 = np.zeros(n), 0.0
        else:
            q = np.asarray(self._stack(self._objective, offsets).todense()).reshape(-1)
            q0 = float(self._objective.const[0])
        rows_a, rows_b, cones, segments = [], [], [], []
        pos = 0
        for kind in ("eq", "nonneg", "psd"):
            for con in self._constraints:
                if con.kind != kind:
                    continue
                a = self._stack(con.expr, offsets)
                if kind == "eq":
                    a_rows, b_rows = a, con.rhs - con.expr.const
                    cones.append(("zero", con.expr.size))
                elif kind == "nonneg":
                    a_rows, b_rows = -a, con.expr.const
                    cones.append(("nonneg", con.expr.size))
                else:
                    op = _svec_operator(con.expr.shape[0])
                    a_rows, b_rows = -(op @ a), op @ con.expr.const
                    cones.append(("psd", con.expr.shape[0]))
                rows_a.append(sp.csr_matrix(a_rows))
                rows_b.append(np.asarray(b_rows, dtype=float).reshape(-1))
                segments.append((con, pos, pos + rows_b[-1].size))
                pos += rows_b[-1].size
        a_mat = sp.vstack(rows_a, format="csc") if rows_a else sp.csc_matrix((0, n))
        b_vec = np.concatenate(rows_b) if rows_b else np.zeros(0)
        return q, q0, a_mat, b_vec, cones, segments

    def to_json(self) -> str:
        """Self-describing dump for debugging."""
        q, q0, a_mat, b_vec, cones, segments = self.compile()
        coo = a_mat.tocoo()
        return json.dumps(
            {
                "variables": [
                    {"name": k, "params": s, "shape": list(sh), "symmetry": sym}
                    for k, (s, sh, sym) in self._vars.items()
                ],
                "constraints": [
                    {"name": c.name, "kind": c.kind, "shape": list(c.expr.shape), "rows": [lo, hi]}
                    for c, lo, hi in segments
                ],
                "objective": {"q": q.tolist(), "constant": q0},
                "A": {"shape": list(a_mat.shape), "row": coo.row.tolist(), "col": coo.col.tolist(), "data": coo.data.tolist()},
                "b": b_vec.tolist(),
                "cones": [list(c) for c in cones],
            }
        )


_STATUS_MAP = {
    "Solved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostSolved": Status.INDETERMINATE,
    "AlmostPrimalInfeasible": Status.INDETERMINATE,
    "AlmostDualInfeasible": Status.INDETERMINATE,
    "DualInfeasible": Status.INDETERMINATE,
    "MaxIterations": Status.INDETERMINATE,
    "MaxTime": Status.INDETERMINATE,
    "InsufficientProgress": Status.INDETERMINATE,
    "NumericalError": Status.ERROR,
}


def _cones_for_clarabel(cones: Iterable[tuple[str, int]]):
    import clarabel

    out = []
    for kind, dim in cones:
        if kind == "zero":
            out.append(clarabel.ZeroConeT(dim))
        elif kind == "nonneg":
            out.append(clarabel.NonnegativeConeT(dim))
        else:
            out.append(clarabel.PSDTriangleConeT(dim))
    return out


def solve(program: ConicProgram, options: SolveOptions | None = None) -> SolveReport:
    """Solve with Clarabel. Solver failures come back as ``Status.ERROR``."""
    import clarabel

    options = options or SolveOptions()
    start = time.perf_counter()
    q, q0, a_mat, b_vec, cones, segments = program.compile()
    n = q.size
    settings = clarabel.DefaultSettings()
    settings.verbose = options.verbose
    settings.max_iter = int(options.max_iter)
    settings.tol_feas = options.tol_feas
    settings.tol_gap_abs = options.tol_gap
    settings.tol_gap_rel = options.tol_gap
    settings.max_threads = 1
    try:
        solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), q, a_mat, b_vec, _cones_for_clarabel(cones), settings)
        sol = solver.solve()
    except Exception as exc:  # noqa: BLE001 - solver internals are opaque
        return SolveReport(
            Status.ERROR, np.nan, np.nan, np.nan, {}, {}, {}, 0, time.perf_counter() - start, f"solver failure: {exc}"
        )
    raw_status = str(sol.status).split(".")[-1]
    status = _STATUS_MAP.get(raw_status, Status.ERROR)
    x_all = np.asarray(sol.x, dtype=float)
    z_all = np.asarray(sol.z, dtype=float)
    offsets = program._offsets()
    x = {name: x_all[offsets[name] : offsets[name] + size] for name, (size, _, _) in program._vars.items()}
    primal_solution = {name: program._full[name].evaluate(x) for name in program._vars}
    duals = {}
    for con, lo, hi in segments:
        z = z_all[lo:hi]
        duals[con.name] = smat(z) if con.kind == "psd" else z.reshape(con.expr.shape)
    primal_value = float(q @ x_all + q0)
    dual_value = float(-b_vec @ z_all + q0)
    gap = abs(primal_value - dual_value)
    message = raw_status
    if status is Status.OPTIMAL and not gap < 1e-7 * (1 + abs(primal_value)):
        status = Status.INDETERMINATE
        message += f" (duality gap {gap:.2e} too large)"
    if status is Status.INFEASIBLE:
        primal_value = dual_value = np.inf
    return SolveReport(
        status,
        primal_value,
        dual_value,
        gap if np.isfinite(gap) else np.nan,
        x,
        primal_solution,
        duals,
        int(sol.iterations),
        time.perf_counter() - start,
        message,
        raw_status,
    )
