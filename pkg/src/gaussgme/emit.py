"""CSV, JSON and SVG outputs for scan records and thresholds."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Sequence
from pathlib import Path

from .scan import Boundary, Detector, ScanRecord, ThresholdResult

CSV_COLUMNS = ("family", "r", "second_param", "detector", "verdict", "margin", "value", "trace_d", "time_ms")

# Region labels used on the plots.
REGION_LABELS = {
    Detector.INEQ_EQ10: "I",
    Detector.FDW_QUBIT: "II",
    Detector.FDW_QUTRIT: "III",
    Detector.FDW_QUQUART: "IV",
    Detector.PPT_FULL_INSEP: "V",
}
REGION_COLORS = {
    Detector.PPT_FULL_INSEP: "#4f81bd",
    Detector.CM_BISEP_SDP: "#e6c229",
    Detector.INEQ_EQ10: "#8e44ad",
    Detector.INEQ_EQ9_SWEEP: "#7f8c8d",
    Detector.FDW_QUBIT: "#2e9e4f",
    Detector.FDW_QUTRIT: "#c0392b",
    Detector.FDW_QUQUART: "#e67e22",
}


def format_float(x: float | None) -> str:
    """Fixed 12 significant digits; empty for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x) + 0.0, ".12g")  # + 0.0 folds -0 into 0


def _verdict_text(v: bool | None, status: str) -> str:
    if v is None:
        return status
    return "detected" if v else "not_detected"


def records_to_csv(records: Sequence[ScanRecord], timing: bool = False) -> str:
    """One row per (grid point, detector); ``time_ms`` is left blank unless ``timing``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        for res in rec.results:
            writer.writerow([
                rec.family.value,
                format_float(rec.r),
                format_float(rec.second_value),
                res.detector.value,
                _verdict_text(res.verdict, res.status),
                format_float(res.margin),
                format_float(res.value),
                format_float(res.trace_d),
                format_float(res.time_ms) if timing else "",
            ])
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy: NaN and infinities become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def to_json(payload, timing: bool = False) -> str:
    data = _clean(payload)
    if not timing:
        data = _strip_timing(data)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in ("time_ms", "wall_time")}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def write_text(path: str | Path, text: str) -> None:
    if str(path) == "-":
        print(text, end="")
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -- SVG ------------------------------------------------------------------------


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "gaussgme"
    matplotlib.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def _label(det: Detector) -> str:
    tag = REGION_LABELS.get(det)
    return f"{tag}: {det.value}" if tag else det.value


def threshold_bars_svg(
    thresholds: Sequence[tuple[Detector, float | None, bool]],
    path: str | Path,
    title: str = "",
    x_max: float | None = None,
) -> None:
    """Horizontal bars ``0 .. threshold`` per detector.

    Each item is ``(detector, threshold, open_ended)``; open-ended bars ran
    past the end of the scanned range and are drawn hatched.
    """
    plt = _figure()
    fig, ax = plt.subplots(figsize=(7, 0.5 + 0.5 * max(1, len(thresholds))))
    for i, (det, value, open_ended) in enumerate(thresholds):
        if value is None:
            continue
        ax.barh(i, value, color=REGION_COLORS.get(det, "#999999"), hatch="//" if open_ended else None)
        ax.text(value, i, f" {value:.4f}", va="center", fontsize=8)
    ax.set_yticks(range(len(thresholds)), [_label(det) for det, _, _ in thresholds])
    ax.set_xlabel("r")
    if x_max is not None:
        ax.set_xlim(0, x_max)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def region_plot_svg(
    boundaries: Sequence[Boundary],
    r_grid: Sequence[float],
    second_grid: Sequence[float],
    second_name: str,
    path: str | Path,
    title: str = "",
    extra_regions: Sequence[tuple[str, Sequence[float], Sequence[float], Sequence[float], str]] = (),
) -> None:
    """Shade the detected side of each detector's boundary, linearly interpolated in ``r``.

    ``extra_regions`` are ``(label, x, y_low, y_high, colour)`` bands drawn
    on top, e.g. a closed-form region.
    """
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    s_lo, s_hi = min(second_grid), max(second_grid)
    by_det: dict[Detector, list[Boundary]] = {}
    for b in boundaries:
        by_det.setdefault(b.detector, []).append(b)
    # Widest regions first so the nested ones stay visible.
    order = [Detector.PPT_FULL_INSEP, Detector.CM_BISEP_SDP, Detector.FDW_QUQUART, Detector.FDW_QUTRIT,
             Detector.FDW_QUBIT, Detector.INEQ_EQ10, Detector.INEQ_EQ9_SWEEP]
    for det in order:
        rows = sorted(by_det.get(det, []), key=lambda b: b.r)
        if not rows:
            continue
        xs, lows, highs = [], [], []
        for b in rows:
            if b.estimate is not None:
                low, high = (s_lo, b.estimate) if b.verdict_low else (b.estimate, s_hi)
            elif b.constant_verdict:
                low, high = s_lo, s_hi
            else:
                low = high = s_lo
            xs.append(b.r)
            lows.append(low)
            highs.append(high)
        if any(h > l for l, h in zip(lows, highs)):
            ax.fill_between(xs, lows, highs, color=REGION_COLORS[det], alpha=0.55, linewidth=0, label=_label(det))
    for label, x, y_low, y_high, colour in extra_regions:
        ax.fill_between(x, y_low, y_high, color=colour, linewidth=0, label=label)
    ax.set_xlim(min(r_grid), max(r_grid))
    ax.set_ylim(s_lo, s_hi)
    ax.set_xlabel("r")
    ax.set_ylabel(second_name)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=7)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def thresholds_payload(results: Sequence[ThresholdResult]) -> list[dict]:
    return [res.to_dict() for res in results]


