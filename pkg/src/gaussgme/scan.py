"""Detector stack, parameter scans and threshold bisection over state families."""

from __future__ import annotations

import concurrent.futures
import dataclasses
import enum
import time
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .cm_separability import CmStatus, cm_bisep_feasibility, is_fully_inseparable
from .config import DEFAULT_TOLERANCES, Tolerances, default_workers
from .exceptions import BracketError, InvalidArgumentError, SolverError
from .fock import DensityBlock, Method, project_to_qudits
from .moments import FAMILY_PARAMETERS, Family, family_moments, second_parameter
from .witness import WitnessStatus, bisep_inequality_margin, fully_decomposable_witness, ghh_default_sweep


class Detector(enum.Enum):
    PPT_FULL_INSEP = "ppt_full_insep"
    CM_BISEP_SDP = "cm_bisep_sdp"
    INEQ_EQ10 = "ineq_eq10"
    INEQ_EQ9_SWEEP = "ineq_eq9_sweep"
    FDW_QUBIT = "fdw_qubit"
    FDW_QUTRIT = "fdw_qutrit"
    FDW_QUQUART = "fdw_ququart"

    @property
    def dim(self) -> int | None:
        """Local projection dimension the detector works on."""
        return {
            Detector.INEQ_EQ10: 2,
            Detector.INEQ_EQ9_SWEEP: 2,
            Detector.FDW_QUBIT: 2,
            Detector.FDW_QUTRIT: 3,
            Detector.FDW_QUQUART: 4,
        }.get(self)

    @property
    def is_gme_test(self) -> bool:
        return self is not Detector.PPT_FULL_INSEP

    @classmethod
    def parse(cls, name: "str | Detector") -> "Detector":
        if isinstance(name, Detector):
            return name
        try:
            return cls(name.strip().lower())
        except ValueError:
            try:
                return cls[name.strip().upper()]
            except KeyError:
                raise InvalidArgumentError(f"unknown detector {name!r}") from None


ALL_DETECTORS = tuple(Detector)


def detectors_up_to(d_max: int, detectors: Iterable[Detector] = ALL_DETECTORS) -> tuple[Detector, ...]:
    """Drop detectors whose projection dimension exceeds ``d_max``."""
    return tuple(det for det in detectors if det.dim is None or det.dim <= d_max)


@dataclasses.dataclass(frozen=True)
class DetectorSpec:
    kind: Detector
    tolerances: Tolerances = DEFAULT_TOLERANCES

    @classmethod
    def of(cls, item: "DetectorSpec | Detector | str") -> "DetectorSpec":
        return item if isinstance(item, DetectorSpec) else cls(Detector.parse(item))


@dataclasses.dataclass(frozen=True)
class DetectorResult:
    """``verdict`` is True when the detector fires (fully inseparable for PPT, GME otherwise).

    ``None`` means no verdict could be reached; ``status`` says why.
    """

    detector: Detector
    verdict: bool | None
    margin: float
    value: float
    trace_d: float
    time_ms: float
    status: str
    message: str = ""

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["detector"] = self.detector.value
        return out


@dataclasses.dataclass(frozen=True)
class ScanRecord:
    family: Family
    params: dict[str, float]
    results: tuple[DetectorResult, ...]
    captured_traces: dict[int, float]
    anomalies: tuple[str, ...] = ()

    def result(self, detector: Detector | str) -> DetectorResult:
        detector = Detector.parse(detector)
        for res in self.results:
            if res.detector is detector:
                return res
        raise KeyError(detector.value)

    def verdict(self, detector: Detector | str) -> bool | None:
        return self.result(detector).verdict

    @property
    def r(self) -> float:
        return self.params["r"]

    @property
    def second_value(self) -> float | None:
        name = second_parameter(self.family)
        return None if name is None else self.params[name]

    @property
    def has_solver_error(self) -> bool:
        return any(res.status == "solver_error" for res in self.results)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "params": dict(self.params),
            "results": [res.to_dict() for res in self.results],
            "captured_traces": {str(d): t for d, t in sorted(self.captured_traces.items())},
            "anomalies": list(self.anomalies),
        }


@dataclasses.dataclass(frozen=True)
class ThresholdResult:
    detector: Detector
    family: Family
    fixed: dict[str, float]
    parameter: str
    bracket: tuple[float, float]
    interval: tuple[float, float]
    estimate: float
    width: float
    verdict_low: bool
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "detector": self.detector.value,
            "family": self.family.value,
            "fixed": dict(self.fixed),
            "parameter": self.parameter,
            "bracket": list(self.bracket),
            "interval": list(self.interval),
            "estimate": self.estimate,
            "width": self.width,
            "verdict_low": self.verdict_low,
            "evaluations": self.evaluations,
        }


# -- single point ---------------------------------------------------------------


def _run_detector(spec: DetectorSpec, moments, block_for) -> DetectorResult:
    det, tol = spec.kind, spec.tolerances
    start = time.perf_counter()
    trace = np.nan
    try:
        if det is Detector.PPT_FULL_INSEP:
            full, verdicts = is_fully_inseparable(moments, tol.psd)
            worst = max(v.min_eigenvalue for v in verdicts)
            verdict, margin, value, status, message = full, -worst, worst, "ok", ""
        elif det is Detector.CM_BISEP_SDP:
            cert = cm_bisep_feasibility(moments, tol)
            value = cert.witness.value if cert.witness is not None else np.nan
            margin, message = cert.objective, cert.message
            if cert.status is CmStatus.INFEASIBLE:
                verdict, status = True, "ok"
            elif cert.status is CmStatus.FEASIBLE:
                verdict, status = False, "ok"
            elif cert.status is CmStatus.SOLVER_ERROR:
                verdict, status = None, "solver_error"
            else:
                verdict, status = None, "indeterminate"
        elif det in (Detector.INEQ_EQ10, Detector.INEQ_EQ9_SWEEP):
            block = block_for(2, False)
            trace = block.captured_trace
            if det is Detector.INEQ_EQ10:
                res = bisep_inequality_margin(block, tol.inequality)
                message = ""
            else:
                res, (a, b) = ghh_default_sweep(block, tol.inequality)
                message = f"best pair {tuple(a)} {tuple(b)}"
            verdict, margin, value, status = res.detected, res.margin, res.lhs, "ok"
        else:
            block = block_for(det.dim, True)
            trace = block.captured_trace
            out = fully_decomposable_witness(block, tol)
            value, margin, message = out.value, -out.value, out.message
            if out.status is WitnessStatus.OPTIMAL:
                verdict, status = out.detects, "ok"
            elif out.status is WitnessStatus.SOLVER_ERROR:
                verdict, status = None, "solver_error"
            else:
                verdict, status = None, "indeterminate"
    except (InvalidArgumentError, SolverError, np.linalg.LinAlgError) as exc:
        verdict, margin, value, status, message = None, np.nan, np.nan, "error", str(exc)
    elapsed = (time.perf_counter() - start) * 1e3
    return DetectorResult(det, verdict, float(margin), float(value), float(trace), elapsed, status, message)


def _anomalies(results: Sequence[DetectorResult], moments, tol: Tolerances) -> tuple[str, ...]:
    """GME detection must imply full inseparability."""
    fired = [res.detector.value for res in results if res.detector.is_gme_test and res.verdict]
    if not fired:
        return ()
    ppt = next((res for res in results if res.detector is Detector.PPT_FULL_INSEP), None)
    full = ppt.verdict if ppt is not None else is_fully_inseparable(moments, tol.psd)[0]
    if full:
        return ()
    return tuple(f"{name} detects GME but the state is not fully inseparable" for name in fired)


def evaluate_point(
    family: Family | str,
    params: Mapping[str, float],
    detectors: Sequence[DetectorSpec | Detector | str],
    method: Method | str = Method.HERMITE,
) -> ScanRecord:
    """Run every detector on one family state; detector failures are recorded, not raised."""
    family = Family.parse(family)
    specs = [DetectorSpec.of(d) for d in detectors]
    if not specs:
        raise InvalidArgumentError("empty detector stack")
    params = {k: float(v) for k, v in params.items()}
    moments = family_moments(family, params)
    blocks: dict[tuple[int, bool], DensityBlock] = {}

    def block_for(d: int, normalize: bool) -> DensityBlock:
        key = (d, normalize)
        if key not in blocks:
            raw = blocks.get((d, False))
            if normalize and raw is not None:
                blocks[key] = raw.normalized_copy()
            else:
                blocks[key] = project_to_qudits(moments, d, normalize=normalize, method=method)
        return blocks[key]

    results = tuple(_run_detector(spec, moments, block_for) for spec in specs)
    traces = {d: blk.captured_trace for (d, _), blk in blocks.items()}
    return ScanRecord(family, params, results, traces, _anomalies(results, moments, specs[0].tolerances))


def _evaluate_task(task: tuple) -> ScanRecord:
    return evaluate_point(*task)


def _run_tasks(tasks: list[tuple], workers: int | None) -> list[ScanRecord]:
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise InvalidArgumentError("workers must be >= 1")
    if workers == 1 or len(tasks) < 2:
        return [_evaluate_task(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        # map preserves submission order, so output order is the grid order.
        return list(pool.map(_evaluate_task, tasks))


# -- grids ------------------------------------------------------------------------


def make_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid, rounded to the step's decimals to avoid drift."""
    if step <= 0:
        raise InvalidArgumentError("grid step must be positive")
    if stop < start:
        raise InvalidArgumentError("grid stop must not precede start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    decimals = max(0, int(np.ceil(-np.log10(step))) + 3)
    return np.round(start + step * np.arange(count), decimals)


def _check_grid(family: Family, name: str, grid: Sequence[float]) -> list[float]:
    grid = [float(v) for v in grid]
    if not grid:
        raise InvalidArgumentError(f"empty {name} grid")
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise InvalidArgumentError(f"{name} grid must be strictly monotone")
    low, high = FAMILY_PARAMETERS[family][name]
    if min(grid) < low or max(grid) > high:
        raise InvalidArgumentError(f"{name} grid leaves [{low}, {high}]")
    return grid


def _check_fixed(family: Family, fixed: Mapping[str, float] | None, scanned: Sequence[str]) -> dict[str, float]:
    fixed = dict(fixed or {})
    needed = set(FAMILY_PARAMETERS[family]) - set(scanned)
    missing = needed - set(fixed)
    if missing:
        raise InvalidArgumentError(f"family {family.name} needs fixed values for {sorted(missing)}")
    extra = set(fixed) - needed
    if extra:
        raise InvalidArgumentError(f"unexpected fixed parameters {sorted(extra)} for family {family.name}")
    return {k: float(v) for k, v in fixed.items()}


def scan_1d(
    family: Family | str,
    detectors: Sequence[DetectorSpec | Detector | str],
    r_grid: Sequence[float],
    fixed: Mapping[str, float] | None = None,
    workers: int | None = None,
    method: Method | str = Method.HERMITE,
) -> list[ScanRecord]:
    family = Family.parse(family)
    if not detectors:
        raise InvalidArgumentError("empty detector stack")
    grid = _check_grid(family, "r", r_grid)
    fixed = _check_fixed(family, fixed, ["r"])
    specs = tuple(DetectorSpec.of(d) for d in detectors)
    tasks = [(family, {"r": r, **fixed}, specs, Method(method)) for r in grid]
    return _run_tasks(tasks, workers)


def last_detected(records: Sequence[ScanRecord], detector: Detector | str) -> float | None:
    """Largest grid ``r`` of the initial detected run of a 1-D scan."""
    detector = Detector.parse(detector)
    last = None
    for rec in records:
        if rec.verdict(detector):
            last = rec.r
        elif last is not None:
            break
    return last


# -- bisection ----------------------------------------------------------------------


def _verdict_at(family: Family, spec: DetectorSpec, params: dict[str, float], method: Method) -> bool:
    rec = evaluate_point(family, params, [spec], method)
    res = rec.results[0]
    if res.verdict is None:
        raise SolverError(f"{spec.kind.value} gave no verdict at {params}: {res.status} {res.message}")
    return res.verdict


def bisect_threshold(
    family: Family | str,
    detector: DetectorSpec | Detector | str,
    fixed: Mapping[str, float] | None,
    bracket: tuple[float, float],
    tol: float,
    parameter: str = "r",
    method: Method | str = Method.HERMITE,
) -> ThresholdResult:
    """Bisection on the detector verdict; the endpoint verdicts must differ."""
    family = Family.parse(family)
    spec = DetectorSpec.of(detector)
    method = Method(method)
    if parameter not in FAMILY_PARAMETERS[family]:
        raise InvalidArgumentError(f"family {family.name} has no parameter {parameter!r}")
    if not tol > 0:
        raise InvalidArgumentError("tolerance must be positive")
    fixed = _check_fixed(family, fixed, [parameter])
    lo, hi = sorted(float(v) for v in bracket)
    _check_grid(family, parameter, [lo, hi] if hi > lo else [lo])
    evaluate = lambda x: _verdict_at(family, spec, {**fixed, parameter: x}, method)  # noqa: E731
    v_lo, v_hi = evaluate(lo), evaluate(hi)
    count = 2
    if v_lo == v_hi:
        raise BracketError(
            f"{spec.kind.value} gives {v_lo} at both {parameter}={lo} and {parameter}={hi}"
        )
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        count += 1
        if evaluate(mid) == v_lo:
            a = mid
        else:
            b = mid
    return ThresholdResult(spec.kind, family, fixed, parameter, (lo, hi), (a, b), 0.5 * (a + b), b - a, v_lo, count)


# -- 2-D scans ------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Boundary:
    """Verdict change along the second parameter at fixed ``r``.

    ``estimate`` is None when the verdict never changes on the grid;
    ``constant_verdict`` then holds that verdict.
    """

    detector: Detector
    r: float
    estimate: float | None
    interval: tuple[float, float] | None
    verdict_low: bool | None
    constant_verdict: bool | None = None
    refined: bool = False

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["detector"] = self.detector.value
        out["interval"] = None if self.interval is None else list(self.interval)
        return out


@dataclasses.dataclass(frozen=True)
class Scan2DResult:
    family: Family
    records: list[ScanRecord]
    boundaries: list[Boundary]
    r_grid: tuple[float, ...]
    second_grid: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "r_grid": list(self.r_grid),
            "second_parameter": second_parameter(self.family),
            "second_grid": list(self.second_grid),
            "records": [rec.to_dict() for rec in self.records],
            "boundaries": [b.to_dict() for b in self.boundaries],
        }


def scan_2d(
    family: Family | str,
    detectors: Sequence[DetectorSpec | Detector | str],
    r_grid: Sequence[float],
    second_grid: Sequence[float],
    workers: int | None = None,
    boundary_tol: float | None = None,
    method: Method | str = Method.HERMITE,
) -> Scan2DResult:
    """Grid scan in ``(r, second)`` plus, per ``r``, the first verdict change along the second parameter.

    With ``boundary_tol`` each change is refined by bisection between the
    two neighbouring grid points.
    """
    family = Family.parse(family)
    name = second_parameter(family)
    if name is None:
        raise InvalidArgumentError(f"family {family.name} has a single parameter")
    if not detectors:
        raise InvalidArgumentError("empty detector stack")
    rs = _check_grid(family, "r", r_grid)
    ss = _check_grid(family, name, second_grid)
    specs = tuple(DetectorSpec.of(d) for d in detectors)
    method = Method(method)
    tasks = [(family, {"r": r, name: s}, specs, method) for r in rs for s in ss]
    records = _run_tasks(tasks, workers)
    boundaries = []
    for i, r in enumerate(rs):
        row = records[i * len(ss) : (i + 1) * len(ss)]
        for spec in specs:
            boundaries.append(_row_boundary(family, spec, r, name, ss, row, boundary_tol, method))
    return Scan2DResult(family, records, boundaries, tuple(rs), tuple(ss))


def _row_boundary(family, spec, r, name, ss, row, boundary_tol, method) -> Boundary:
    verdicts = [rec.verdict(spec.kind) for rec in row]
    known = [(s, v) for s, v in zip(ss, verdicts) if v is not None]
    if not known:
        return Boundary(spec.kind, r, None, None, None)
    for (s0, v0), (s1, v1) in zip(known, known[1:]):
        if v0 != v1:
            lo, hi = sorted((s0, s1))
            v_low = v0 if s0 < s1 else v1
            if boundary_tol is None or hi - lo <= boundary_tol:
                return Boundary(spec.kind, r, 0.5 * (lo + hi), (lo, hi), v_low)
            try:
                res = bisect_threshold(family, spec, {"r": r}, (lo, hi), boundary_tol, name, method)
            except SolverError:
                return Boundary(spec.kind, r, 0.5 * (lo + hi), (lo, hi), v_low)
            return Boundary(spec.kind, r, res.estimate, res.interval, res.verdict_low, refined=True)
    return Boundary(spec.kind, r, None, None, None, constant_verdict=known[0][1])
