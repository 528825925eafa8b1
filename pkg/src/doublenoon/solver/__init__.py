"""Time-propagation engines and the fidelity functional."""

from .config import (
    DimensionCapError,
    NormUnderflowError,
    PropagatorConfig,
    SimResult,
    SolverError,
    StepControlError,
    TruncationLeakError,
)
from .engines import fidelity, lindblad_solve, mcwf_solve, propagate_unitary
from .protocol import ENGINES, protocol_space, run_protocol

__all__ = [
    "PropagatorConfig",
    "SimResult",
    "SolverError",
    "StepControlError",
    "TruncationLeakError",
    "NormUnderflowError",
    "DimensionCapError",
    "propagate_unitary",
    "lindblad_solve",
    "mcwf_solve",
    "fidelity",
    "run_protocol",
    "protocol_space",
    "ENGINES",
]
