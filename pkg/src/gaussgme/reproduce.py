"""Canned scan recipes behind the ``reproduce`` subcommand."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from . import emit
from .cm_separability import GHZ_SEPARABLE_R_MIN
from .exceptions import BracketError, InvalidArgumentError, SolverError
from .fock import Method
from .moments import Family, second_parameter
from .scan import (
    Detector,
    ScanRecord,
    ThresholdResult,
    bisect_threshold,
    detectors_up_to,
    make_grid,
    scan_1d,
    scan_2d,
)

GME_STACK = (
    Detector.PPT_FULL_INSEP,
    Detector.INEQ_EQ10,
    Detector.INEQ_EQ9_SWEEP,
    Detector.FDW_QUBIT,
    Detector.FDW_QUTRIT,
    Detector.FDW_QUQUART,
)


@dataclasses.dataclass(frozen=True)
class Recipe:
    """``bars`` recipes locate 1-D thresholds; ``regions`` recipes scan a 2-D grid."""

    figure: str
    kind: str
    family: Family
    detectors: tuple[Detector, ...]
    r_range: tuple[float, float]
    r_step: float
    second_range: tuple[float, float] | None = None
    second_step: float | None = None
    tol: float = 1e-4
    tol_ququart: float = 1e-3
    title: str = ""


RECIPES = {
    "fig2": Recipe("fig2", "bars", Family.VAC, GME_STACK, (0.05, 1.5), 0.05, title="TMSV mixed with vacuum"),
    "fig3": Recipe("fig3", "bars", Family.SMSV, GME_STACK, (0.05, 1.5), 0.05,
                   title="TMSV mixed with squeezed vacuum"),
    "fig4": Recipe("fig4", "regions", Family.THERMAL, GME_STACK, (0.1, 1.2), 0.1, (0.0, 0.5), 0.05,
                   tol=1e-3, title="TMSV mixed with thermal states"),
    "fig5": Recipe("fig5", "regions", Family.COHERENT, GME_STACK, (0.1, 1.2), 0.1, (0.0, 1.0), 0.1,
                   tol=1e-3, title="TMSV mixed with coherent states"),
    "fig6": Recipe("fig6", "regions", Family.NOISY_GHZ, (Detector.PPT_FULL_INSEP, Detector.CM_BISEP_SDP),
                   (0.1, 2.0), 0.1, (0.0, 1.0), 0.05, tol=1e-3, title="Noisy GHZ-like state, CM criteria"),
    "fig7": Recipe("fig7", "regions", Family.NOISY_GHZ, GME_STACK, (0.1, 2.0), 0.1, (0.0, 1.0), 0.05,
                   tol=1e-3, title="Noisy GHZ-like state, density-matrix criteria"),
}


@dataclasses.dataclass
class RecipeOutput:
    figure: str
    records: list[ScanRecord]
    payload: dict
    files: list[Path]
    solver_errors: bool


def thresholds_from_scan(
    family: Family,
    records: list[ScanRecord],
    detectors: tuple[Detector, ...],
    tol: float,
    tol_ququart: float,
    method: Method,
) -> list[tuple[Detector, ThresholdResult | None, float | None, bool]]:
    """Refine the first verdict change of each detector along a coarse ``r`` scan.

    Returns ``(detector, bisection result, threshold, open_ended)`` per detector;
    ``open_ended`` marks a detector that still fires at the last grid point.
    """
    out = []
    for det in detectors:
        verdicts = [(rec.r, rec.verdict(det)) for rec in records if rec.verdict(det) is not None]
        flip = next(((a, b) for a, b in zip(verdicts, verdicts[1:]) if a[1] != b[1]), None)
        if flip is None:
            fires = bool(verdicts) and verdicts[-1][1]
            out.append((det, None, verdicts[-1][0] if fires else None, fires))
            continue
        (lo, _), (hi, _) = flip
        tol_det = tol_ququart if det is Detector.FDW_QUQUART else tol
        try:
            res = bisect_threshold(family, det, None, (lo, hi), tol_det, "r", method)
        except (BracketError, SolverError):
            out.append((det, None, 0.5 * (lo + hi), False))
            continue
        out.append((det, res, res.estimate, False))
    return out


def run_recipe(
    figure: str,
    out_dir: str | Path,
    d_max: int = 4,
    workers: int | None = None,
    method: Method | str = Method.HERMITE,
    r_step: float | None = None,
    second_step: float | None = None,
    tol: float | None = None,
    timing: bool = False,
) -> RecipeOutput:
    if figure not in RECIPES:
        raise InvalidArgumentError(f"unknown figure {figure!r}; choose from {sorted(RECIPES)}")
    rec = RECIPES[figure]
    method = Method(method)
    out_dir = Path(out_dir)
    detectors = detectors_up_to(d_max, rec.detectors)
    r_grid = make_grid(*rec.r_range, r_step or rec.r_step)
    tol = rec.tol if tol is None else tol
    files = [out_dir / f"{figure}.csv", out_dir / f"{figure}.json", out_dir / f"{figure}.svg"]
    meta = {"figure": figure, "family": rec.family.value, "d_max": d_max, "method": method.value,
            "r_step": float(r_grid[1] - r_grid[0]) if len(r_grid) > 1 else None, "tolerance": tol,
            "normalized_blocks": True}
    if rec.kind == "bars":
        records = scan_1d(rec.family, detectors, r_grid, workers=workers, method=method)
        found = thresholds_from_scan(rec.family, records, detectors, tol, max(tol, rec.tol_ququart), method)
        payload = {
            "metadata": meta,
            "thresholds": [
                {"detector": det.value, "threshold": value, "open_ended": open_,
                 "bisection": None if res is None else res.to_dict()}
                for det, res, value, open_ in found
            ],
            "records": [r.to_dict() for r in records],
        }
        emit.threshold_bars_svg([(det, value, open_) for det, _, value, open_ in found], files[2], rec.title,
                                x_max=rec.r_range[1])
    else:
        s_grid = make_grid(*rec.second_range, second_step or rec.second_step)
        result = scan_2d(rec.family, detectors, r_grid, s_grid, workers=workers, boundary_tol=tol, method=method)
        records = result.records
        payload = {"metadata": meta, **result.to_dict()}
        extra = []
        if rec.family is Family.NOISY_GHZ:
            xs = [r for r in np.linspace(min(r_grid), max(r_grid), 200) if r > GHZ_SEPARABLE_R_MIN]
            if xs:
                tops = [1 - (2 * np.sqrt(2) / 3) / np.tanh(r) for r in xs]
                extra.append(("partition separable", xs, [0.0] * len(xs), tops, "white"))
        emit.region_plot_svg(result.boundaries, r_grid, s_grid, second_parameter(rec.family), files[2],
                             rec.title, extra)
    emit.write_text(files[0], emit.records_to_csv(records, timing))
    emit.write_text(files[1], emit.to_json(payload, timing))
    return RecipeOutput(figure, records, payload, files, any(r.has_solver_error for r in records))
