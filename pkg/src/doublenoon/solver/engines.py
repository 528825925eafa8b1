"""Single-space engines: unitary propagation, dense master equation, MCWF."""

from __future__ import annotations

import math
import time
from typing import Sequence

import numpy as np

from ..device import NoiseSet
from ..hamiltonian import HamiltonianSpec
from ..hilbert import CAVITY_LABELS, DensityMatrix, HilbertSpace, Operator, SpaceMismatchError, StateVector
from .config import (
    DimensionCapError,
    PropagatorConfig,
    SimResult,
    StepControlError,
    TruncationLeakError,
)
from .evolve import Evolver
from .factored import PlanSegment, map_trajectories, run_trajectory, trajectory_seeds

__all__ = [
    "propagate_unitary",
    "lindblad_solve",
    "mcwf_solve",
    "fidelity",
    "guard_masks",
    "as_jumps",
    "trajectory_statistics",
]

_NORM_TOL = 1e-8


def as_jumps(noise) -> list[tuple[str, float, Operator]]:
    """Normalise a NoiseSet or ``(rate, op)`` list to ``(name, rate, op)`` triples."""
    if noise is None:
        return []
    if isinstance(noise, NoiseSet):
        return [(ch.name, ch.rate, ch.operator) for ch in noise if ch.rate > 0]
    out = []
    for i, item in enumerate(noise):
        if len(item) == 3:
            out.append(tuple(item))
        else:
            rate, op = item
            out.append((f"c{i}", rate, op))
    return [j for j in out if j[1] > 0]


def guard_masks(space: HilbertSpace) -> dict[str, np.ndarray]:
    """Per-cavity boolean masks of basis states whose cavity sits in its top level."""
    table = space.level_table
    return {
        lab: table[:, space.position(lab)] == space.dim_of(lab) - 1
        for lab in space.labels if lab in CAVITY_LABELS
    }


def _guard_vec(psi: np.ndarray, masks) -> float:
    p = np.abs(psi) ** 2
    return max((float(p[m].sum()) for m in masks.values()), default=0.0)


def _guard_rho(rho: np.ndarray, masks) -> float:
    d = np.diagonal(rho).real
    return max((float(d[m].sum()) for m in masks.values()), default=0.0)


def _check_leak(value: float, cfg: PropagatorConfig, where: str) -> None:
    if value > cfg.leak_threshold:
        raise TruncationLeakError(
            f"guard-level population {value:.3e} exceeds {cfg.leak_threshold:.1e} {where}; "
            "increase the cavity truncation"
        )


def _check_space(spec: HamiltonianSpec, space: HilbertSpace) -> None:
    if spec.space != space:
        raise SpaceMismatchError("Hamiltonian and state live on different spaces")


def propagate_unitary(spec: HamiltonianSpec, psi0: StateVector, T: float,
                      cfg: PropagatorConfig = PropagatorConfig(), t0: float = 0.0) -> StateVector:
    """Schrodinger evolution of ``psi0`` from ``t0`` to ``t0 + T`` (reference picture)."""
    _check_space(spec, psi0.space)
    if T < 0:
        raise ValueError("T must be >= 0")
    y = Evolver(spec, (), "state", cfg).evolve(psi0.data, t0, t0 + T)
    n0, n1 = psi0.norm(), float(np.linalg.norm(y))
    if abs(n1 - n0) > _NORM_TOL * max(n0, 1.0):
        raise StepControlError(f"norm drifted from {n0:.12f} to {n1:.12f}")
    _check_leak(_guard_vec(y, guard_masks(spec.space)), cfg, f"at t={t0 + T:.6e} s")
    return StateVector(spec.space, y)


def _density_diagnostics(rho: np.ndarray) -> dict:
    herm = float(np.abs(rho - rho.conj().T).max())
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return {"trace": float(np.trace(rho).real), "hermiticity": herm, "min_eigenvalue": float(evals[0])}


def lindblad_solve(spec: HamiltonianSpec, noise, rho0, T: float,
                   cfg: PropagatorConfig = PropagatorConfig(), t0: float = 0.0,
                   times: Sequence[float] | None = None,
                   target: StateVector | None = None) -> SimResult:
    """Dense master-equation evolution.

    ``times`` (relative to ``t0``) selects output points; the trace,
    Hermiticity deviation and minimum eigenvalue at each are stored in
    ``diagnostics["checks"]``.
    """
    space = spec.space
    if isinstance(rho0, StateVector):
        rho0 = rho0.to_density()
    if rho0.space != space:
        raise SpaceMismatchError("Hamiltonian and state live on different spaces")
    if space.total_dim > cfg.dense_dim_cap:
        raise DimensionCapError(
            f"dimension {space.total_dim} exceeds the dense cap {cfg.dense_dim_cap}; use the mcwf engine"
        )
    jumps = as_jumps(noise)
    start = time.perf_counter()
    ev = Evolver(spec, [(r, op) for _, r, op in jumps], "density", cfg)
    out_times = sorted(times) if times is not None else [T]
    if out_times and (out_times[0] < 0 or out_times[-1] > T + 1e-15 * max(T, 1.0)):
        raise ValueError("output times must lie in [0, T]")
    masks = guard_masks(space)
    d = space.total_dim
    vec = rho0.data.ravel().copy()
    t = 0.0
    res = SimResult("lindblad")
    checks = []
    for tk in out_times:
        vec = ev.evolve(vec, t0 + t, t0 + tk)
        t = tk
        rho = vec.reshape(d, d)
        diag = _density_diagnostics(rho)
        checks.append(diag)
        res.times.append(tk)
        res.trace_history.append(diag["trace"])
        res.guard_history.append(_guard_rho(rho, masks))
    if t < T:
        vec = ev.evolve(vec, t0 + t, t0 + T)
    rho = vec.reshape(d, d)
    res.state = DensityMatrix(space, rho)
    if target is not None:
        res.fidelity = fidelity(res.state, target)
    res.diagnostics.update(checks=checks, wall_time=time.perf_counter() - start,
                           time_dependent=ev.time_dependent)
    _check_leak(res.guard_history[-1] if res.guard_history else 0.0, cfg, "at the final time")
    return res


def trajectory_statistics(values: np.ndarray) -> tuple[float, float]:
    """Mean and standard error of per-trajectory samples."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _fidelity_from_samples(p: np.ndarray) -> tuple[float, float]:
    mean, se = trajectory_statistics(p)
    f = math.sqrt(max(mean, 0.0))
    if len(p) > 1:
        se_f = se / (2 * f) if f > 0 else math.sqrt(se)
        se_f = max(se_f, np.finfo(float).tiny)
    else:
        se_f = 0.0
    return min(f, 1.0), se_f


def _as_segments(spec_or_segments, T):
    if isinstance(spec_or_segments, HamiltonianSpec):
        if T is None:
            raise ValueError("T is required when a single Hamiltonian is given")
        return [(spec_or_segments, float(T), True)]
    segs = []
    for item in spec_or_segments:
        spec, dur, *rest = item
        segs.append((spec, float(dur), bool(rest[0]) if rest else True))
    return segs


def mcwf_solve(spec_or_segments, noise, psi0: StateVector, T: float | None = None,
               cfg: PropagatorConfig = PropagatorConfig(), target: StateVector | None = None,
               observables: dict[str, Operator] | None = None) -> SimResult:
    """Monte-Carlo wave-function unravelling of the master equation.

    ``spec_or_segments`` is one Hamiltonian (evolved for ``T``) or a list of
    ``(spec, duration[, noise_active])`` segments.  Trajectory ``k`` draws
    from its own generator seeded by index, so results do not depend on
    ``cfg.workers``.  ``observables`` are averaged with standard errors into
    ``diagnostics["observables"]``.
    """
    segments = _as_segments(spec_or_segments, T)
    space = psi0.space
    for spec, _, _ in segments:
        _check_space(spec, space)
    jumps = as_jumps(noise)
    start = time.perf_counter()
    plan = []
    t = 0.0
    cache: dict = {}
    for spec, dur, active in segments:
        key = (id(spec), active)
        if key not in cache:
            js = jumps if active else []
            cache[key] = (Evolver(spec, [(r, op) for _, r, op in js], "state", cfg),
                          [(0, name, r, op.matrix) for name, r, op in js])
        ev, js = cache[key]
        plan.append(PlanSegment(t, t + dur, [ev], js))
        t += dur
    seeds = trajectory_seeds(cfg.seed, cfg.trajectories)
    psi = psi0.data[:, None]
    masks = guard_masks(space)
    obs = {k: v.matrix for k, v in (observables or {}).items()}
    tgt = target.data if target is not None else None
    want_rho = space.total_dim <= cfg.dense_dim_cap

    def one(i, seed):
        out = run_trajectory(plan, [psi], np.random.default_rng(seed), cfg)
        y = out.final[0][:, 0]
        rec = {
            "jumps": out.n_jumps,
            "guard": _guard_vec(y, masks),
            "obs": {k: complex(np.vdot(y, m @ y)).real for k, m in obs.items()},
        }
        if tgt is not None:
            rec["p"] = abs(np.vdot(tgt, y)) ** 2
        if want_rho:
            rec["psi"] = y
        return rec

    recs = map_trajectories(one, seeds, cfg.workers)
    res = SimResult("mcwf", seeds=seeds, n_trajectories=len(recs))
    if tgt is not None:
        res.fidelity, res.stderr = _fidelity_from_samples(np.array([r["p"] for r in recs]))
    if want_rho:
        Y = np.stack([r["psi"] for r in recs], axis=1)
        res.state = DensityMatrix(space, (Y @ Y.conj().T) / len(recs))
    res.guard_history.append(float(np.mean([r["guard"] for r in recs])))
    res.times.append(t)
    res.diagnostics.update(
        wall_time=time.perf_counter() - start,
        mean_jumps=float(np.mean([r["jumps"] for r in recs])),
        observables={k: trajectory_statistics([r["obs"][k] for r in recs]) for k in obs},
    )
    _check_leak(res.guard_history[-1], cfg, "at the final time")
    return res


def fidelity(state, psi_id: StateVector) -> float:
    """``sqrt(<psi_id| rho |psi_id>)`` for a density matrix, ``|<psi_id|psi>|`` for a state."""
    if isinstance(state, SimResult):
        if state.fidelity is None:
            raise ValueError("result carries no fidelity estimate")
        return state.fidelity
    if state.space != psi_id.space:
        raise SpaceMismatchError("state and target live on different spaces")
    v = psi_id.data
    if isinstance(state, StateVector):
        return min(1.0, abs(np.vdot(v, state.data)))
    if isinstance(state, DensityMatrix):
        val = float(np.real(np.vdot(v, state.data @ v)))
        return min(1.0, math.sqrt(max(val, 0.0)))
    raise TypeError(f"cannot take the fidelity of {type(state).__name__}")
