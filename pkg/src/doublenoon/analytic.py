"""Closed-form effective dynamics and the ideal state ladder of the protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .device import DeviceParams, lambda_eff
from .hilbert import HilbertSpace, StateVector

__all__ = [
    "EffectiveParams",
    "effective_evolution",
    "excited_phase",
    "LadderState",
    "ideal_ladder",
    "ladder_to_state",
    "StepDurations",
    "step_durations",
    "operation_time",
    "phase_error",
]

Ket = tuple[str, str, int, int, int, int]  # (q_L, q_R, n1, n2, n3, n4)


@dataclass(frozen=True)
class EffectiveParams:
    """Parameters of the large-detuning effective Hamiltonian.

    Attributes
    ----------
    lam : float
        Two-photon coupling ``(g1 g2 / 2)(1/delta1 + 1/delta2)``.
    varphi : float
        Stark-shift mismatch ``g1^2/delta1 - g2^2/delta2``.
    detuning_mismatch : float
        ``delta1 - delta2``.
    stark_ef : float
        ``g2^2/delta2``; fixes the absolute level shifts so that propagators
        can be expressed outside the interaction picture of ``H0``.
    """

    lam: float
    varphi: float = 0.0
    detuning_mismatch: float = 0.0
    stark_ef: float | None = None

    @classmethod
    def from_device(cls, params: DeviceParams) -> "EffectiveParams":
        s1 = params.g1 ** 2 / params.delta1
        s2 = params.g2 ** 2 / params.delta2
        return cls(lambda_eff(params), s1 - s2, params.delta1 - params.delta2, s2)

    @property
    def stark_ge(self) -> float:
        return self.varphi + self._stark_ef

    @property
    def _stark_ef(self) -> float:
        return self.lam if self.stark_ef is None else self.stark_ef

    def matched(self, tol: float = 0.0) -> bool:
        scale = max(abs(self.lam), 1.0)
        return abs(self.varphi) <= tol * scale and abs(self.detuning_mismatch) <= tol * scale


def _check_nt(n: int, t: float) -> None:
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")


def effective_evolution(n: int, t: float, p: EffectiveParams, rtol: float = 1e-12) -> np.ndarray:
    """Propagator on ``span{|f,n,n>, |g,n+1,n+1>}`` (in that order).

    Matched parameters use the closed form
    ``e^{i(n+1)lam t} [[cos, i sin], [i sin, cos]]((n+1) lam t)``.
    Otherwise the interaction-picture 2x2 equation is integrated numerically
    and the ``H0`` level shifts are restored.
    """
    _check_nt(n, t)
    m = n + 1
    if p.matched():
        th = m * p.lam * t
        c, s = math.cos(th), math.sin(th)
        return np.exp(1j * th) * np.array([[c, 1j * s], [1j * s, c]])
    if t == 0:
        return np.eye(2, dtype=np.complex128)
    e_f = -p._stark_ef * m
    e_g = -p.stark_ge * m
    coupling = -m * p.lam
    w = p.detuning_mismatch + p.varphi * m  # (d1 - d2) + phi (n+1)

    def rhs(s, y):
        y = y.reshape(2, 2)
        off = coupling * np.exp(-1j * w * s)
        h = np.array([[0.0, np.conj(off)], [off, 0.0]])
        return (-1j * h @ y).ravel()

    scale = max(abs(coupling), abs(w), 1.0)
    sol = solve_ivp(
        rhs, (0.0, t), np.eye(2, dtype=np.complex128).ravel(),
        method="DOP853", rtol=rtol, atol=rtol * 1e-2,
        max_step=0.5 / scale if abs(w) * t > 1 else np.inf,
    )
    u_int = sol.y[:, -1].reshape(2, 2)
    return np.diag(np.exp(-1j * np.array([e_f, e_g]) * t)) @ u_int


def excited_phase(t: float, p: EffectiveParams) -> complex:
    """Phase acquired by ``|e,0,0>``: ``e^{-i (g1^2/delta1) t}`` (``e^{-i lam t}`` when matched)."""
    _check_nt(0, t)
    return complex(np.exp(-1j * p.stark_ge * t))


# --- ideal ladder -------------------------------------------------------------

@dataclass(frozen=True)
class LadderState:
    """Exact intermediate state of the ideal protocol.

    ``amplitudes`` maps kets ``(q_L, q_R, n1, n2, n3, n4)`` to complex
    amplitudes, global phase included.  ``global_phase`` is the common factor
    removed by :meth:`canonical` (chosen so the first ket in sorted order has a
    positive real amplitude); ``step_phase`` is the common phase picked up in
    this step alone.
    """

    label: str
    amplitudes: dict = field(hash=False)
    global_phase: complex = 1.0
    step_phase: complex = 1.0

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def canonical(self) -> dict:
        return {k: a / self.global_phase for k, a in self.amplitudes.items()}

    def overlap(self, other: "LadderState") -> complex:
        return sum(np.conj(a) * other.amplitudes.get(k, 0.0) for k, a in self.amplitudes.items())

    def max_photons(self) -> int:
        return max(max(k[2:]) for k in self.amplitudes)


def _clean(amps: dict, tol: float = 1e-14) -> dict:
    return {k: a for k, a in sorted(amps.items()) if abs(a) > tol}


def _apply_qutrit_map(amps: dict, mapping) -> dict:
    """Apply the same single-qutrit unitary (dict of level -> list of (level, amp)) to both qutrits."""
    out: dict = {}
    for ket, a in amps.items():
        for ql, al in mapping[ket[0]]:
            for qr, ar in mapping[ket[1]]:
                k = (ql, qr) + ket[2:]
                out[k] = out.get(k, 0.0) + a * al * ar
    return _clean(out)


_GF_PULSE = {"g": [("f", 1.0)], "e": [("e", 1.0)], "f": [("g", -1.0)]}
_GE_PULSE = {"g": [("e", -1.0)], "e": [("g", 1.0)], "f": [("f", 1.0)]}


def _side_interaction(q: str, n1: int, n2: int, t: float, p: EffectiveParams):
    """Matched effective evolution of one side's ket; list of (ket, amp)."""
    if q == "e" and n1 == 0 and n2 == 0:
        return [(("e", 0, 0), excited_phase(t, p))]
    if q == "g" and n1 == 0 and n2 == 0:
        return [(("g", 0, 0), 1.0)]
    if q == "f" and n1 == n2:
        u = effective_evolution(n1, t, p)
        return [(("f", n1, n1), u[0, 0]), (("g", n1 + 1, n1 + 1), u[1, 0])]
    if q == "g" and n1 == n2:
        u = effective_evolution(n1 - 1, t, p)
        return [(("f", n1 - 1, n1 - 1), u[0, 1]), (("g", n1, n1), u[1, 1])]
    raise ValueError(f"ket {(q, n1, n2)} is outside the protocol's reachable set")


def _apply_interaction(amps: dict, t: float, p: EffectiveParams) -> dict:
    out: dict = {}
    for (ql, qr, n1, n2, n3, n4), a in amps.items():
        for (kl, al) in _side_interaction(ql, n1, n2, t, p):
            for (kr, ar) in _side_interaction(qr, n3, n4, t, p):
                k = (kl[0], kr[0], kl[1], kl[2], kr[1], kr[2])
                out[k] = out.get(k, 0.0) + a * al * ar
    return _clean(out)


def _phase_of(amps: dict) -> complex:
    first = next(iter(amps.values()))
    return first / abs(first)


def ideal_ladder(N: int, params: DeviceParams | None = None) -> list[LadderState]:
    """Exact state sequence of the ideal protocol for target photon number ``N``.

    Entries: Bell state with empty cavities, after the first g-f pulse, after
    each interaction ``t_j`` for ``j < N`` (each followed by its g-f pulse
    entry), after the g-e pulse, and the final double NOON state.  Matched
    couplings are assumed; only ``lam`` enters, and any positive value gives the
    same canonical states.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    p = EffectiveParams(lambda_eff(params)) if params is not None else EffectiveParams(1.0)
    s = 1 / math.sqrt(2)
    amps = {("e", "g", 0, 0, 0, 0): s, ("g", "e", 0, 0, 0, 0): s}
    out = [LadderState("bell", amps, 1.0, 1.0)]

    def push(label, new):
        prev = out[-1]
        gp = _phase_of(new)
        out.append(LadderState(label, new, gp, gp / prev.global_phase))

    push("gf-pulse-1", _apply_qutrit_map(amps, _GF_PULSE))
    for j in range(1, N):
        push(f"interact-{j}", _apply_interaction(out[-1].amplitudes, math.pi / (2 * j * p.lam), p))
        push(f"gf-pulse-{j + 1}", _apply_qutrit_map(out[-1].amplitudes, _GF_PULSE))
    push("ge-pulse", _apply_qutrit_map(out[-1].amplitudes, _GE_PULSE))
    push(f"interact-{N}", _apply_interaction(out[-1].amplitudes, math.pi / (2 * N * p.lam), p))
    return out


_QUTRIT_INDEX = {"g": 0, "e": 1, "f": 2}
_KET_LABELS = ("qutrit-L", "qutrit-R", "cav1", "cav2", "cav3", "cav4")


def ladder_to_state(state: LadderState, space: HilbertSpace, canonical: bool = True) -> StateVector:
    """Embed a ladder entry into a six-subsystem space."""
    vec = np.zeros(space.total_dim, dtype=np.complex128)
    amps = state.canonical() if canonical else state.amplitudes
    positions = [space.position(lab) for lab in _KET_LABELS]
    for ket, a in amps.items():
        occ = [0] * len(space.dims)
        for pos, v in zip(positions, ket):
            occ[pos] = _QUTRIT_INDEX[v] if isinstance(v, str) else v
        if any(o >= d for o, d in zip(occ, space.dims)):
            raise ValueError(f"ket {ket} does not fit in {space.describe()}")
        vec[space.index(occ)] += a
    return StateVector(space, vec)


# --- timing -------------------------------------------------------------------

@dataclass(frozen=True)
class StepDurations:
    """Durations of every protocol ingredient, in seconds."""

    N: int
    bell: float | None
    gf_pulse: float
    ge_pulse: float
    interactions: tuple[float, ...]
    gap: float
    n_gaps: int = 4

    def total(self, include_bell: bool = True, include_gaps: bool = True) -> float:
        if include_bell and self.bell is None:
            raise ValueError("Bell-preparation time needs mu to be set")
        t = math.fsum(self.interactions) + self.N * self.gf_pulse + self.ge_pulse
        if include_bell:
            t += self.bell
        if include_gaps:
            t += self.n_gaps * self.gap
        return t


def step_durations(N: int, params: DeviceParams) -> StepDurations:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    lam = lambda_eff(params)
    if lam <= 0:
        raise ValueError("lambda is zero; interaction times are undefined")
    if params.omega_gf <= 0 or params.omega_ge_rabi <= 0:
        raise ValueError("pulse Rabi frequencies must be > 0")
    bell = None if not params.mu else math.pi / (2 * math.sqrt(2) * params.mu)
    inter = tuple(math.pi / (2 * j * lam) for j in range(1, N + 1))
    return StepDurations(
        N, bell, math.pi / (2 * params.omega_gf), math.pi / (2 * params.omega_ge_rabi), inter, params.t_d
    )


def operation_time(N: int, params: DeviceParams) -> float:
    """Closed-form total operation time including Bell preparation and four gaps."""
    if params.mu is None or params.mu <= 0:
        raise ValueError("mu must be set to a positive value")
    lam = lambda_eff(params)
    harmonic = math.fsum(1.0 / j for j in range(1, N + 1))
    return (
        math.pi / (2 * math.sqrt(2) * params.mu)
        + math.pi / (2 * lam) * harmonic
        + N * math.pi / (2 * params.omega_gf)
        + math.pi / (2 * params.omega_ge_rabi)
        + 4 * params.t_d
    )


def phase_error(N: int, kind: str = "double") -> float:
    """Heisenberg-limited phase error: ``1/(2N)`` for double NOON, ``1/N`` for NOON."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if kind == "double":
        return 1.0 / (2 * N)
    if kind == "noon":
        return 1.0 / N
    raise ValueError(f"kind must be 'double' or 'noon', got {kind!r}")
