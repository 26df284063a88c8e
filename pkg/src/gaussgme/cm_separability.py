"""Separability tests that only look at the covariance matrix.

* PPT per bipartition and full inseparability.
* The covariance-matrix biseparability condition: ``cm - sum_i p_i cm_i >= 0``
  for partition-separable ``cm_i``, solved as an SDP in the scaled variables
  ``K_i = p_i cm_i``. A dual matrix ``Z >= 0`` with ``Tr(Z cm) < 1`` and
  ``Tr(Z K) >= 1`` on every partition-separable CM certifies GME.
* Closed-form region boundaries for the coherent and noisy GHZ families.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from . import conic
from ._linalg import min_eigh, real_embedding, symmetrize
from .config import DEFAULT_TOLERANCES, Tolerances
from .exceptions import DomainError, InvalidArgumentError
from .moments import Bipartition, GaussianMoments, Ordering, symplectic_form, uncertainty_min_eigenvalue

COHERENT_R_MAX = 1.2428
GHZ_SEPARABLE_R_MIN = 0.5 * np.log(17 + 12 * np.sqrt(2))


def _require_three_modes(m: GaussianMoments) -> None:
    if m.ordering is not Ordering.XP_BLOCK or m.n_modes != 3:
        raise InvalidArgumentError("expected three-mode moments in XP_BLOCK ordering")


def _partition_modes(b: Bipartition) -> tuple[list[int], list[int]]:
    """XP_BLOCK indices of the isolated mode and of its complement."""
    k = b.mode
    rest = list(b.complement)
    return [k, 3 + k], rest + [3 + m for m in rest]


def partial_transpose_cm(m: GaussianMoments, b: Bipartition) -> GaussianMoments:
    """Flip the sign of the isolated mode's momentum (rows, columns and mean)."""
    _require_three_modes(m)
    sign = np.ones(6)
    sign[3 + b.mode] = -1.0
    return GaussianMoments(m.cm * np.outer(sign, sign), m.mean * sign)


@dataclasses.dataclass(frozen=True)
class PptVerdict:
    bipartition: Bipartition
    min_eigenvalue: float
    is_npt: bool

    def to_dict(self) -> dict:
        return {"bipartition": self.bipartition.label, "min_eigenvalue": self.min_eigenvalue, "is_npt": self.is_npt}


def ppt_check(m: GaussianMoments, b: Bipartition, tol: float | None = None) -> PptVerdict:
    tol = DEFAULT_TOLERANCES.psd if tol is None else tol
    eig = uncertainty_min_eigenvalue(partial_transpose_cm(m, b).cm)
    return PptVerdict(b, eig, eig < -tol)


def is_fully_inseparable(m: GaussianMoments, tol: float | None = None) -> tuple[bool, list[PptVerdict]]:
    """NPT across all three bipartitions (necessary and sufficient for Gaussian states)."""
    verdicts = [ppt_check(m, b, tol) for b in Bipartition]
    return all(v.is_npt for v in verdicts), verdicts


def coherent_npt_alpha_max(r: float) -> float:
    """Largest coherent amplitude for which the coherent family stays fully inseparable."""
    r = float(r)
    if not 0 < r < COHERENT_R_MAX:
        raise DomainError(f"r={r} outside (0, {COHERENT_R_MAX})")
    num = 66 * np.sinh(r) + 31 * np.sinh(3 * r) - 3 * np.sinh(5 * r)
    den = 22 * np.cosh(r) + 2 * np.cosh(3 * r) + 4 * np.sinh(3 * r)
    return 0.5 * float(np.sqrt(max(num / den, 0.0)))


def noisy_ghz_partition_separable(r: float, eta: float) -> bool:
    """Closed-form partition-separable region of the noisy GHZ-like family."""
    r, eta = float(r), float(eta)
    if r < 0 or not 0 <= eta <= 1:
        raise DomainError(f"(r, eta)=({r}, {eta}) outside r >= 0, 0 <= eta <= 1")
    if r == 0 or eta == 0:
        return True
    return r > GHZ_SEPARABLE_R_MIN and eta <= 1 - (2 * np.sqrt(2) / 3) / np.tanh(r)


def min_trace_over_cms(z: np.ndarray) -> float:
    """``min Tr(z cm)`` over physical covariance matrices, for ``z >= 0``.

    Equals the sum of absolute eigenvalues of ``i Omega z`` (twice the sum of
    the symplectic eigenvalues of ``z``).
    """
    z = symmetrize(np.asarray(z, dtype=float))
    omega = symplectic_form(z.shape[0] // 2)
    return float(np.sum(np.abs(np.linalg.eigvals(1j * omega @ z))))


def min_trace_over_partition(z: np.ndarray, b: Bipartition) -> float:
    """``min Tr(z cm)`` over CMs that are block diagonal across ``b``."""
    iso, rest = _partition_modes(b)
    return min_trace_over_cms(z[np.ix_(iso, iso)]) + min_trace_over_cms(z[np.ix_(rest, rest)])


class CmStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INDETERMINATE = "indeterminate"
    SOLVER_ERROR = "solver_error"


@dataclasses.dataclass(frozen=True)
class CmWitnessZ:
    z: np.ndarray
    value: float
    partition_minima: tuple[float, float, float]

    @property
    def detects(self) -> bool:
        return self.value < 1 - DEFAULT_TOLERANCES.cm_witness


@dataclasses.dataclass(frozen=True)
class CmBisepCertificate:
    weights: np.ndarray
    scaled_cms: tuple[np.ndarray, np.ndarray, np.ndarray]
    residual_min_eig: float
    feasible: bool
    status: CmStatus
    objective: float
    witness: CmWitnessZ | None = None
    message: str = ""

    @property
    def gme(self) -> bool:
        return self.status is CmStatus.INFEASIBLE

    def to_dict(self) -> dict:
        out = {
            "status": self.status.value,
            "feasible": self.feasible,
            "weights": np.asarray(self.weights).tolist(),
            "residual_min_eig": self.residual_min_eig,
            "objective": self.objective,
            "message": self.message,
        }
        if self.witness is not None:
            out["witness_value"] = self.witness.value
            out["witness_partition_minima"] = list(self.witness.partition_minima)
        return out


def _witness_from_dual(y: np.ndarray, gamma: np.ndarray) -> CmWitnessZ | None:
    vals, vecs = np.linalg.eigh(symmetrize(y))
    y_psd = (vecs * np.clip(vals, 0, None)) @ vecs.T
    minima = tuple(min_trace_over_partition(y_psd, b) for b in Bipartition)
    scale = min(minima)
    if not scale > 0:
        return None
    z = y_psd / scale
    return CmWitnessZ(z, float(np.sum(z * gamma)), tuple(v / scale for v in minima))


def build_cm_bisep_program(gamma: np.ndarray) -> conic.ConicProgram:
    """``min s`` s.t. ``gamma + s 1 - sum K_i >= 0`` and partition-separable ``K_i``.

    The optimum is ``<= 0`` exactly when the biseparability condition holds.
    """
    omega = symplectic_form(3)
    prog = conic.ConicProgram()
    slack = prog.add_variable("s", 1)
    weights = prog.add_variable("p", 3)
    total = None
    for b in Bipartition:
        k = prog.add_variable(f"K_{b.name}", (6, 6), "symmetric")
        iso, rest = _partition_modes(b)
        prog.add_eq(k.take(iso, rest), 0.0, name=f"block_{b.name}")
        p_i = weights.linear(np.eye(3)[[b.value]], (1,))
        p_omega = p_i.linear(omega.reshape(-1, 1), (6, 6))
        prog.add_psd(conic.bmat([[k, p_omega], [-p_omega, k]]), name=f"uncertainty_{b.name}")
        total = k if total is None else total + k
    prog.add_nonneg(weights, name="weights_nonneg")
    prog.add_eq(weights.inner(np.ones(3)), 1.0, name="weights_sum")
    residual = slack.linear(np.eye(6).reshape(-1, 1), (6, 6)) + gamma - total
    prog.add_psd(residual, name="residual")
    prog.minimize(slack)
    return prog


def cm_bisep_feasibility(
    m: GaussianMoments,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    options: conic.SolveOptions | None = None,
) -> CmBisepCertificate:
    """Decide the biseparability condition for a three-mode CM, with certificates."""
    _require_three_modes(m)
    gamma = np.array(m.cm)
    report = conic.solve(build_cm_bisep_program(gamma), options)
    if report.status is conic.Status.ERROR or not report.x:
        empty = tuple(np.zeros((6, 6)) for _ in range(3))
        return CmBisepCertificate(np.full(3, np.nan), empty, np.nan, False, CmStatus.SOLVER_ERROR, np.nan,
                                  message=report.message)
    sol = report.primal_solution
    weights = sol["p"].copy()
    scaled = []
    for b in Bipartition:
        k = symmetrize(sol[f"K_{b.name}"])
        iso, rest = _partition_modes(b)
        k[np.ix_(iso, rest)] = 0.0
        k[np.ix_(rest, iso)] = 0.0
        scaled.append(k)
    # Shift each K_i by a multiple of the identity so its scaled uncertainty
    # relation holds exactly; the shift is charged to the residual.
    shifts = [max(0.0, -scaled_uncertainty_min_eig(k, max(p, 0.0))) for k, p in zip(scaled, weights)]
    scaled = tuple(k + shift * np.eye(6) for k, shift in zip(scaled, shifts))
    residual_eig = min_eigh(gamma - sum(scaled))
    objective = float(sol["s"][0])
    witness = _witness_from_dual(report.dual_certificates["residual"], gamma)
    tol = tolerances.cm_witness
    primal_ok = _verify_primal(weights, scaled, residual_eig, tol)
    if witness is not None and witness.value < 1 - tol:
        status = CmStatus.INFEASIBLE
    elif primal_ok and report.status in (conic.Status.OPTIMAL, conic.Status.INDETERMINATE):
        status = CmStatus.FEASIBLE
    else:
        status = CmStatus.INDETERMINATE
    return CmBisepCertificate(
        weights,
        scaled,
        residual_eig,
        status is CmStatus.FEASIBLE,
        status,
        objective,
        witness,
        report.message,
    )


def _verify_primal(weights: np.ndarray, scaled: tuple[np.ndarray, ...], residual_eig: float, tol: float) -> bool:
    """Check a candidate decomposition directly, independent of the solver status."""
    if np.any(weights < -tol) or abs(weights.sum() - 1) > tol or residual_eig < -tol:
        return False
    return all(scaled_uncertainty_min_eig(k, max(p, 0.0)) >= -tol for k, p in zip(scaled, weights))


def scaled_uncertainty_min_eig(k: np.ndarray, p: float) -> float:
    """Min eigenvalue of the real embedding of ``K + i p Omega``."""
    return min_eigh(real_embedding(k, p * symplectic_form(k.shape[0] // 2)))
