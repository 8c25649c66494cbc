"""JSON/CSV emission of solver reports with a stable layout."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .fw import SolveReport

SIG_DIGITS = 12

REPORT_FIELDS = ("solver", "objective", "iterations", "termination", "a",
                 "objective_trace", "gap_trace", "step_sizes", "iteration_times",
                 "budget_excess", "box_excess", "curvature", "extra")


def round_sig(x: float, digits: int = SIG_DIGITS):
    """``x`` rounded to ``digits`` significant digits; non-finite as strings."""
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return float(f"{x:.{digits}g}")


def _clean(obj: Any):
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_sig(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def report_to_dict(report: SolveReport, timing: bool = True) -> dict:
    """Report as a plain dict with keys in :data:`REPORT_FIELDS` order.

    With ``timing=False`` the wall-clock entries are dropped so that
    repeated runs serialise identically.
    """
    d = {
        "solver": report.solver,
        "objective": report.objective,
        "iterations": report.iterations,
        "termination": report.termination,
        "a": report.a,
        "objective_trace": report.objective_trace,
        "gap_trace": report.gap_trace,
        "step_sizes": report.step_sizes,
        "iteration_times": report.iteration_times if timing else None,
        "budget_excess": report.budget_excess,
        "box_excess": report.box_excess,
        "curvature": report.curvature,
        "extra": report.extra,
    }
    if not timing:
        del d["iteration_times"]
    return _clean(d)


def report_from_dict(d: Mapping) -> SolveReport:
    """Inverse of :func:`report_to_dict` (up to the 12-digit rounding)."""
    return SolveReport(
        solver=d["solver"],
        a=np.asarray(d["a"], dtype=np.float64),
        objective_trace=[float(v) for v in d["objective_trace"]],
        gap_trace=[float(v) for v in d["gap_trace"]],
        step_sizes=[float(v) for v in d["step_sizes"]],
        iteration_times=[float(v) for v in d.get("iteration_times") or []],
        termination=d["termination"],
        budget_excess=float(d["budget_excess"]),
        box_excess=float(d["box_excess"]),
        curvature=None if d.get("curvature") is None else float(d["curvature"]),
        extra=dict(d.get("extra") or {}),
        final_objective=float(d["objective"]),
    )


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def report_json(report: SolveReport, timing: bool = True) -> str:
    return json.dumps(report_to_dict(report, timing), indent=2) + "\n"


TRACE_COLUMNS = ("iteration", "step_size", "objective", "gap", "time_ms")


def report_csv(report: SolveReport, timing: bool = True) -> str:
    """One row per step taken: the step size and the state it leads to.

    ``iteration`` counts from 1; the starting point appears only in the
    JSON form.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    times = report.iteration_times
    for t, gamma in enumerate(report.step_sizes, start=1):
        obj = report.objective_trace[t] if t < len(report.objective_trace) else ""
        gap = report.gap_trace[t] if t < len(report.gap_trace) else ""
        ms = _fmt(1e3 * times[t - 1]) if timing and t - 1 < len(times) else ""
        w.writerow([t, _fmt(gamma), _fmt(obj), _fmt(gap), ms])
    return buf.getvalue()


def _fmt(x) -> str:
    if x == "" or x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(round_sig(x)) if math.isfinite(float(x)) else round_sig(x)


def table_csv(columns: Sequence[str], rows: Iterable[Mapping]) -> str:
    """CSV with fixed column order; floats at 12 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) if not isinstance(row.get(c), str)
                    else row[c] for c in columns])
    return buf.getvalue()


def emit_report(report: SolveReport, path: str | os.PathLike, fmt: str = "json",
                timing: bool = True) -> None:
    """Write ``report`` to ``path`` as ``json`` or ``csv``."""
    if fmt == "json":
        text = report_json(report, timing)
    elif fmt == "csv":
        text = report_csv(report, timing)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    write_text(path, text)


def write_text(path: str | os.PathLike, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
