"""Execution of a compiled protocol schedule.

The two halves of the device (qutrit-L with cavities 1, 2 and qutrit-R with
cavities 3, 4) never interact during the protocol and every noise channel is
local, so states are kept as sums of left (x) right products and each half is
propagated on its own space.  This is exact, not an approximation.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..analytic import LadderState, ideal_ladder
from ..device import SIDES, DeviceParams, NoiseSet, build_noise
from ..hamiltonian import (
    HamiltonianSpec,
    bell_prep_interaction,
    drive_pulse,
    effective_interaction,
    modified_hamiltonians,
    zero_hamiltonian,
)
from ..hilbert import DensityMatrix, HilbertSpace, StateVector, basis_state, build_space
from ..schedule import Schedule
from .config import DimensionCapError, PropagatorConfig, SimResult
from .engines import _check_leak, _fidelity_from_samples, as_jumps, guard_masks
from .evolve import Evolver
from .factored import (
    PlanSegment,
    evolve_seeds,
    local_expectation,
    map_trajectories,
    norm2,
    overlap,
    run_trajectory,
    seeds_dense,
    seeds_fidelity2,
    seeds_from_pure,
    seeds_local_trace,
    seeds_trace,
    split_bipartite,
    split_operator,
    trajectory_seeds,
)

__all__ = [
    "ENGINES",
    "run_protocol",
    "side_spaces",
    "protocol_space",
    "bell_space",
    "factor_state",
    "join_factors",
    "ladder_factors",
    "initial_bell_factors",
]

ENGINES = ("unitary", "lindblad", "mcwf", "effective")
_MATERIALISE_CAP = 2000
_SIDE_ORDER = ("left", "right")


def side_spaces(cavity_dim: int) -> dict[str, HilbertSpace]:
    return {
        s: build_space([(q, 3), (ca, cavity_dim), (cb, cavity_dim)])
        for s, (q, ca, cb) in SIDES.items()
    }


def protocol_space(cavity_dim: int) -> HilbertSpace:
    """Canonical six-subsystem space: both qutrits first, then cavities 1-4."""
    return build_space([("qutrit-L", 3), ("qutrit-R", 3)] + [(f"cav{i}", cavity_dim) for i in range(1, 5)])


def bell_space(central_dim: int = 3) -> HilbertSpace:
    return build_space([("qutrit-L", 3), ("qutrit-R", 3), ("cav-central", central_dim)])


def join_factors(Ys, cavity_dim: int) -> np.ndarray:
    """Factored (left, right) state -> vector on :func:`protocol_space`."""
    d = cavity_dim
    YL, YR = Ys
    psi = np.einsum("ik,jk->ij", YL, YR).reshape(3, d, d, 3, d, d)
    return psi.transpose(0, 3, 1, 2, 4, 5).ravel()


def factor_state(psi: StateVector, cavity_dim: int):
    """Vector on :func:`protocol_space` -> Schmidt-factored (left, right) columns."""
    d = cavity_dim
    arr = psi.data.reshape(3, 3, d, d, d, d).transpose(0, 2, 3, 1, 4, 5)
    return list(split_bipartite(arr.ravel(), (3 * d * d, 3 * d * d)))


_Q = {"g": 0, "e": 1, "f": 2}


def _side_ket(space: HilbertSpace, q, n1, n2) -> np.ndarray:
    v = np.zeros(space.total_dim, dtype=np.complex128)
    v[space.index((_Q[q], n1, n2))] = 1.0
    return v


def ladder_factors(state: LadderState, cavity_dim: int, canonical: bool = True):
    """Ladder entry as factored left/right columns (one column per ket)."""
    spaces = side_spaces(cavity_dim)
    amps = state.canonical() if canonical else state.amplitudes
    if state.max_photons() >= cavity_dim:
        raise ValueError("cavity truncation too small for this ladder state")
    L, R = [], []
    for (ql, qr, n1, n2, n3, n4), a in amps.items():
        L.append(a * _side_ket(spaces["left"], ql, n1, n2))
        R.append(_side_ket(spaces["right"], qr, n3, n4))
    return [np.stack(L, axis=1), np.stack(R, axis=1)]


def initial_bell_factors(cavity_dim: int):
    """``(|e,g> + |g,e>)/sqrt(2)`` with all side cavities empty."""
    return ladder_factors(ideal_ladder(1)[0], cavity_dim)


def _segment_spec(kind: str, params: DeviceParams, space: HilbertSpace, side: str,
                  model: str, ideal_pulses: bool) -> HamiltonianSpec:
    if kind == "gap":
        return zero_hamiltonian(space)
    if model == "effective":
        inter = effective_interaction(params, space, side)
        if kind == "interact":
            return inter
        pulse = drive_pulse(params, space, "gf" if kind == "pulse-gf" else "ge", side=side)
        return pulse if ideal_pulses else inter + pulse
    index = {"interact": 1, "pulse-gf": 2, "pulse-ge": 3}[kind]
    return modified_hamiltonians(params, space, index, side=side, ideal_pulses=ideal_pulses)


def _side_noise(noise, params: DeviceParams, space: HilbertSpace, side: str):
    if noise is None:
        ns = build_noise(params, space, sides=[side])
    elif isinstance(noise, NoiseSet):
        ns = noise.rebuild(space)
    else:
        raise TypeError("noise must be a NoiseSet or None")
    return as_jumps(ns)


class _Plan:
    """Per-segment evolvers for the factored protocol (built lazily per mode)."""

    def __init__(self, schedule: Schedule, spaces, noise, cfg, model, ideal_pulses, noisy):
        self.schedule = schedule
        self.spaces = spaces
        self.cfg = cfg
        self.model = model
        self.ideal_pulses = ideal_pulses
        params = schedule.params
        self.jumps = {s: (_side_noise(noise, params, spaces[s], s) if noisy else []) for s in _SIDE_ORDER}
        self.masks = {s: guard_masks(spaces[s]) for s in _SIDE_ORDER}
        self._specs: dict = {}
        self._evolvers: dict = {}
        self.segments = []
        t = 0.0
        for seg in schedule.segments:
            self.segments.append((seg, t, t + seg.duration))
            t += seg.duration
        self.total = t

    def spec(self, kind, side):
        key = (kind, side)
        if key not in self._specs:
            self._specs[key] = _segment_spec(kind, self.schedule.params, self.spaces[side], side,
                                             self.model, self.ideal_pulses)
        return self._specs[key]

    def evolvers(self, seg, mode):
        out = []
        for side in _SIDE_ORDER:
            key = (seg.kind, side, seg.noise_active, mode)
            if key not in self._evolvers:
                js = self.jumps[side] if seg.noise_active else []
                self._evolvers[key] = Evolver(self.spec(seg.kind, side), [(r, op) for _, r, op in js],
                                              mode, self.cfg)
            out.append(self._evolvers[key])
        return out

    def jump_list(self, seg):
        if not seg.noise_active:
            return []
        return [(f, name, r, op.matrix) for f, side in enumerate(_SIDE_ORDER)
                for name, r, op in self.jumps[side]]

    def guard_pure(self, Ys) -> float:
        n2 = norm2(Ys)
        vals = [local_expectation(Ys, f, diag=m).real / n2
                for f, side in enumerate(_SIDE_ORDER) for m in self.masks[side].values()]
        return max(vals, default=0.0)

    def guard_seeds(self, seeds) -> float:
        tr = seeds_trace(seeds).real
        vals = [seeds_local_trace(seeds, f, m).real / tr
                for f, side in enumerate(_SIDE_ORDER) for m in self.masks[side].values()]
        return max(vals, default=0.0)


# --- Bell preparation stage ---------------------------------------------------


class _BellStage:
    def __init__(self, schedule: Schedule, noise, cfg, noisy):
        seg = schedule.segments[0]
        self.space = bell_space()
        self.spec = bell_prep_interaction(schedule.params, self.space)
        if noisy:
            ns = build_noise(schedule.params, self.space) if noise is None else noise.rebuild(self.space)
            self.jumps = as_jumps(ns)
        else:
            self.jumps = []
        self.cfg = cfg
        self.duration = seg.duration

    def evolver(self, mode):
        return Evolver(self.spec, [(r, op) for _, r, op in self.jumps], mode, self.cfg)


def _embed_qutrit_vector(space: HilbertSpace, v: np.ndarray) -> np.ndarray:
    out = np.zeros(space.total_dim, dtype=np.complex128)
    for q in range(3):
        out[space.index((q, 0, 0))] = v[q]
    return out


def _embed_qutrit_operator(space: HilbertSpace, A: np.ndarray) -> np.ndarray:
    idx = [space.index((q, 0, 0)) for q in range(3)]
    out = np.zeros((space.total_dim,) * 2, dtype=np.complex128)
    out[np.ix_(idx, idx)] = A
    return out


def _qutrit_pair_to_factors(phi: np.ndarray, spaces):
    """Two-qutrit amplitudes (3x3) -> factored side states with empty cavities."""
    a, b = split_bipartite(phi.ravel(), (3, 3), tol=1e-15)
    L = np.stack([_embed_qutrit_vector(spaces["left"], a[:, k]) for k in range(a.shape[1])], axis=1)
    R = np.stack([_embed_qutrit_vector(spaces["right"], b[:, k]) for k in range(b.shape[1])], axis=1)
    return [L, R]


def _initial_bell_vector(space: HilbertSpace, initial) -> np.ndarray:
    if initial is None:
        return basis_state(space, {"cav-central": 1}).data
    if initial.space != space:
        raise ValueError(f"initial state for Bell preparation must live on {space.describe()}")
    return initial.data


# --- main entry ---------------------------------------------------------------


def run_protocol(
    schedule: Schedule,
    initial: StateVector | None = None,
    noise: NoiseSet | None = None,
    cfg: PropagatorConfig = PropagatorConfig(),
    engine: str = "mcwf",
    ideal_pulses: bool = False,
    model: str = "full",
    cavity_dim: int | None = None,
) -> SimResult:
    """Run every segment of ``schedule`` and score the final state.

    Parameters
    ----------
    schedule : Schedule
        Compiled protocol; its parameter snapshot defines all operators.
    initial : StateVector, optional
        Starting state on :func:`protocol_space` (default: the Bell state with
        empty cavities) or, when the schedule includes Bell preparation, on
        :func:`bell_space` (default ``|g, g, 1>``).
    noise : NoiseSet, optional
        Channels to use; default is built from the parameters.  Ignored by
        the ``unitary`` and ``effective`` engines.
    engine : {"unitary", "lindblad", "mcwf", "effective"}
        ``effective`` is unitary evolution under the large-detuning effective
        Hamiltonian with ideal pulses.
    ideal_pulses : bool
        Switch off interaction and crosstalk during pulses.
    model : {"full", "effective"}
        Hamiltonian used for the interaction.
    cavity_dim : int, optional
        Cavity truncation, default ``N + 2`` (one guard level).

    Returns
    -------
    SimResult
        Fidelity against the ideal double NOON state (phase insensitive),
        with trace and guard-level histories per segment.
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}, got {engine!r}")
    requested = engine
    if engine == "effective":
        model, ideal_pulses, engine = "effective", True, "unitary"
    if model not in ("full", "effective"):
        raise ValueError(f"model must be 'full' or 'effective', got {model!r}")
    N = schedule.N
    d = cavity_dim or N + 2
    if d < N + 1:
        raise ValueError(f"cavity dimension {d} cannot hold {N} photons")
    spaces = side_spaces(d)
    noisy = engine in ("lindblad", "mcwf")
    start = time.perf_counter()

    main = schedule
    bell = None
    if schedule.include_bell:
        bell = _BellStage(schedule, noise, cfg, noisy)
        main = Schedule(schedule.segments[1:], schedule.params, N, False, schedule.include_gaps)
    plan = _Plan(main, spaces, noise, cfg, model, ideal_pulses, noisy)
    offset = bell.duration if bell else 0.0
    target = ladder_factors(ideal_ladder(N)[-1], d)

    if engine == "lindblad":
        side_dim = spaces["left"].total_dim
        if side_dim > cfg.dense_dim_cap:
            raise DimensionCapError(
                f"per-side dimension {side_dim} exceeds the dense cap {cfg.dense_dim_cap}; use mcwf"
            )
        res = _run_lindblad(plan, bell, initial, target, offset, d)
    elif engine == "unitary":
        res = _run_unitary(plan, bell, initial, target, offset, d)
    else:
        res = _run_mcwf(plan, bell, initial, target, offset, d, cfg)
    res.engine = requested
    res.diagnostics.update(
        wall_time=time.perf_counter() - start,
        N=N,
        cavity_dim=d,
        model=model,
        ideal_pulses=ideal_pulses,
        total_time=offset + plan.total,
        channels=[name for name, _, _ in plan.jumps["left"] + plan.jumps["right"]],
        time_dependent_segments=sorted({
            k[0] for k, ev in plan._evolvers.items() if ev.time_dependent
        }),
    )
    _check_leak(res.final_guard, cfg, "at the end of the protocol")
    return res


def _initial_factors(initial, d):
    if initial is None:
        return initial_bell_factors(d)
    return factor_state(initial, d)


def _run_unitary(plan: _Plan, bell, initial, target, offset, d) -> SimResult:
    res = SimResult("unitary")
    if bell is not None:
        psi = _initial_bell_vector(bell.space, initial)
        psi = bell.evolver("state").evolve(psi, 0.0, bell.duration)
        branches = []
        for c in range(bell.space.dim_of("cav-central")):
            phi = psi.reshape(3, 3, -1)[:, :, c]
            if np.linalg.norm(phi) > 1e-14:
                branches.append(_qutrit_pair_to_factors(phi, plan.spaces))
        res.times.append(bell.duration)
        res.trace_history.append(float(np.vdot(psi, psi).real))
        res.guard_history.append(0.0)
    else:
        branches = [_initial_factors(initial, d)]
    for seg, t0, t1 in plan.segments:
        evs = plan.evolvers(seg, "state")
        branches = [[ev.evolve(Y, offset + t0, offset + t1) for ev, Y in zip(evs, Ys)] for Ys in branches]
        res.times.append(offset + t1)
        res.trace_history.append(sum(norm2(Ys) for Ys in branches))
        weights = [norm2(Ys) for Ys in branches]
        res.guard_history.append(
            sum(w * plan.guard_pure(Ys) for w, Ys in zip(weights, branches)) / sum(weights)
        )
    f2 = sum(abs(overlap(target, Ys)) ** 2 for Ys in branches)
    res.fidelity = min(1.0, math.sqrt(f2))
    if len(branches) == 1 and protocol_space(d).total_dim <= 200_000:
        res.state = StateVector(protocol_space(d), join_factors(branches[0], d))
    res.diagnostics["norm"] = res.trace_history[-1] if res.trace_history else 1.0
    return res


def _run_lindblad(plan: _Plan, bell, initial, target, offset, d) -> SimResult:
    res = SimResult("lindblad")
    checks = []
    if bell is not None:
        psi = _initial_bell_vector(bell.space, initial)
        dim = bell.space.total_dim
        vec = np.outer(psi, psi.conj()).ravel()
        rho = bell.evolver("density").evolve(vec, 0.0, bell.duration).reshape(dim, dim)
        dc = bell.space.dim_of("cav-central")
        rho_q = np.einsum("acbc->ab", rho.reshape(9, dc, 9, dc))
        As, Bs = split_operator(rho_q, (3, 3))
        seeds = [[_embed_qutrit_operator(plan.spaces["left"], A), _embed_qutrit_operator(plan.spaces["right"], B)]
                 for A, B in zip(As, Bs)]
        res.times.append(bell.duration)
        res.trace_history.append(float(np.trace(rho).real))
        res.guard_history.append(0.0)
    else:
        seeds = seeds_from_pure(_initial_factors(initial, d))
    materialise = protocol_space(d).total_dim <= _MATERIALISE_CAP
    for seg, t0, t1 in plan.segments:
        seeds = evolve_seeds(seeds, plan.evolvers(seg, "density"), offset + t0, offset + t1)
        res.times.append(offset + t1)
        res.trace_history.append(seeds_trace(seeds).real)
        res.guard_history.append(plan.guard_seeds(seeds))
        if materialise:
            rho = seeds_dense(seeds)
            evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
            checks.append({
                "trace": float(np.trace(rho).real),
                "hermiticity": float(np.abs(rho - rho.conj().T).max()),
                "min_eigenvalue": float(evals[0]),
            })
    res.fidelity = min(1.0, math.sqrt(max(seeds_fidelity2(seeds, target), 0.0)))
    if materialise:
        # seeds are ordered (left, right); reorder to the canonical layout
        rho = seeds_dense(seeds).reshape((3, d, d, 3, d, d) * 2)
        perm = (0, 3, 1, 2, 4, 5)
        rho = rho.transpose(perm + tuple(p + 6 for p in perm)).reshape(9 * d ** 4, 9 * d ** 4)
        res.state = DensityMatrix(protocol_space(d), rho)
    res.diagnostics["checks"] = checks
    return res


def _run_mcwf(plan: _Plan, bell, initial, target, offset, d, cfg) -> SimResult:
    main_plan = [
        PlanSegment(offset + t0, offset + t1, plan.evolvers(seg, "state"), plan.jump_list(seg), seg.label)
        for seg, t0, t1 in plan.segments
    ]
    if bell is not None:
        psi_b = _initial_bell_vector(bell.space, initial)
        bell_plan = [PlanSegment(0.0, bell.duration, [bell.evolver("state")],
                                 [(0, n, r, op.matrix) for n, r, op in bell.jumps], "bell")]
        dc = bell.space.dim_of("cav-central")
    else:
        start_factors = _initial_factors(initial, d)
    seeds = trajectory_seeds(cfg.seed, cfg.trajectories)

    def one(i, seed):
        rng = np.random.default_rng(seed)
        jumps = 0
        if bell is not None:
            out = run_trajectory(bell_plan, [psi_b[:, None]], rng, cfg)
            jumps += out.n_jumps
            amp = out.final[0][:, 0].reshape(3, 3, dc)
            probs = np.array([np.vdot(amp[:, :, c], amp[:, :, c]).real for c in range(dc)])
            c = int(rng.choice(dc, p=probs / probs.sum()))
            Ys = _qutrit_pair_to_factors(amp[:, :, c] / math.sqrt(probs[c]), plan.spaces)
        else:
            Ys = start_factors
        out = run_trajectory(main_plan, Ys, rng, cfg, record_segments=True)
        return {
            "p": abs(overlap(target, out.final)) ** 2,
            "jumps": jumps + out.n_jumps,
            "guard": [plan.guard_pure(s) for s in out.segment_states],
        }

    recs = map_trajectories(one, seeds, cfg.workers)
    res = SimResult("mcwf", seeds=seeds, n_trajectories=len(recs))
    res.fidelity, res.stderr = _fidelity_from_samples(np.array([r["p"] for r in recs]))
    res.times = [offset + t1 for _, _, t1 in plan.segments]
    res.guard_history = list(np.mean([r["guard"] for r in recs], axis=0)) if plan.segments else []
    res.diagnostics["mean_jumps"] = float(np.mean([r["jumps"] for r in recs]))
    res.diagnostics["no_jump_fraction"] = float(np.mean([r["jumps"] == 0 for r in recs]))
    return res
