"""Structured JSON report for simulation results."""

from __future__ import annotations

import json
import math
from pathlib import Path

from ..device import DeviceParams
from .config import PropagatorConfig, SimResult

REPORT_VERSION = 1


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item"):
        return _clean(x.item())
    return x


def result_to_report(result: SimResult, params: DeviceParams, cfg: PropagatorConfig,
                     extra: dict | None = None) -> dict:
    """JSON-safe dictionary with the result, settings and exact SI parameters."""
    diag = {k: v for k, v in result.diagnostics.items() if k != "checks"}
    return _clean({
        "version": REPORT_VERSION,
        "engine": result.engine,
        "fidelity": result.fidelity,
        "stderr": result.stderr,
        "n_trajectories": result.n_trajectories,
        "final_guard_population": result.final_guard,
        "times_s": result.times,
        "trace_history": result.trace_history,
        "guard_history": result.guard_history,
        "seeds": result.seeds,
        "diagnostics": diag,
        "config": cfg.__dict__,
        "params": params.to_dict(),
        **(extra or {}),
    })


def write_report(path: str | Path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def params_from_report(path_or_dict) -> DeviceParams:
    data = path_or_dict if isinstance(path_or_dict, dict) else json.loads(Path(path_or_dict).read_text())
    return DeviceParams.from_dict(data["params"])
