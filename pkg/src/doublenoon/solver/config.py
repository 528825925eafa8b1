"""Solver configuration, result container and error types."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..hilbert import DensityMatrix, StateVector


class SolverError(RuntimeError):
    """Base class; ``category`` is the machine-readable error tag."""

    category = "solver"


class StepControlError(SolverError):
    category = "step-control"


class TruncationLeakError(SolverError):
    category = "truncation-leak"


class NormUnderflowError(SolverError):
    category = "norm-underflow"


class DimensionCapError(SolverError):
    category = "dimension-cap"


@dataclass(frozen=True)
class PropagatorConfig:
    """Numerical settings shared by all engines.

    Parameters
    ----------
    max_step : float
        Largest explicit integration step in seconds.
    rtol, atol : float
        Per-macro-step error targets of the step-doubling controller.
    max_phase_advance : float
        Largest phase (rad) any oscillatory term may advance in one step.
    min_step : float
        Step size below which step control gives up.
    trajectories : int
        Number of Monte-Carlo wave-function trajectories.
    seed : int
        Master seed; trajectory ``k`` uses the ``k``-th spawned child.
    leak_threshold : float
        Guard-level population above which a run is aborted.
    frame_reduction : bool
        Try to move each segment into a frame where it is time independent
        and use exact exponentials there.
    dense_dim_cap : int
        Largest (per-factor) dimension accepted by the dense master-equation solver.
    block_cap : int
        Largest connected block diagonalised densely; bigger blocks use a
        Krylov-type action.
    jump_time_rtol : float
        Relative (to the segment) accuracy of MCWF jump times.
    workers : int
        Processes used for trajectories.
    """

    max_step: float = 1e-8
    rtol: float = 1e-10
    atol: float = 1e-12
    max_phase_advance: float = 0.25
    min_step: float = 1e-16
    trajectories: int = 500
    seed: int = 0
    leak_threshold: float = 1e-2
    frame_reduction: bool = True
    dense_dim_cap: int = 400
    block_cap: int = 600
    jump_time_rtol: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        for name in ("max_step", "rtol", "atol", "max_phase_advance", "min_step", "jump_time_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass
class SimResult:
    """Outcome of a simulation run.

    ``state`` is the final pure state (unitary), density matrix (dense
    master equation, or the trajectory average for small systems) or
    ``None`` when it is too large to materialise.  ``stderr`` is the
    standard error of the fidelity estimate (zero for deterministic
    engines).
    """

    engine: str
    fidelity: float | None = None
    stderr: float = 0.0
    state: StateVector | DensityMatrix | None = None
    times: list[float] = field(default_factory=list)
    trace_history: list[float] = field(default_factory=list)
    guard_history: list[float] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    n_trajectories: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_guard(self) -> float:
        return self.guard_history[-1] if self.guard_history else 0.0
