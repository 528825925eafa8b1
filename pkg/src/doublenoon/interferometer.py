"""Four-mode Fock-space interferometer used to read out the double NOON phase.

Modes 1 and 2 carry the left cavity pair and modes 3 and 4 the right pair.
Two 50/50 beam splitters combine 1 with 3 into outputs b, c and 2 with 4 into
outputs a, d.  A coincidence is ``N`` photons in each of a and b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .analytic import phase_error

__all__ = [
    "FourModeState",
    "double_noon_input",
    "phase_shift",
    "beam_splitter",
    "interferometer_output",
    "coincidence_probability",
    "coincidence_closed_form",
    "a_dn_expectation",
    "a_dn_variance",
    "PhaseEstimate",
    "estimate_phase_error",
]

_CONVENTIONS = {
    # column j: where input j goes, rows = (out1, out2)
    "real": np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2),
    "i-phase": np.array([[1, 1j], [1j, 1]], dtype=np.complex128) / math.sqrt(2),
}


@dataclass(frozen=True)
class FourModeState:
    """Amplitudes over occupation tuples of four labelled modes."""

    modes: tuple[str, str, str, str]
    amplitudes: dict

    def __post_init__(self):
        if len(set(self.modes)) != 4:
            raise ValueError(f"need four distinct mode labels, got {self.modes}")

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def photon_numbers(self) -> set[int]:
        return {sum(k) for k in self.amplitudes}

    def amplitude(self, occupation: dict[str, int]) -> complex:
        key = tuple(occupation.get(m, 0) for m in self.modes)
        return complex(self.amplitudes.get(key, 0.0))

    def reorder(self, modes: Iterable[str]) -> "FourModeState":
        modes = tuple(modes)
        perm = [self.modes.index(m) for m in modes]
        return FourModeState(modes, {tuple(k[p] for p in perm): a for k, a in self.amplitudes.items()})


def double_noon_input(N: int) -> FourModeState:
    """``(|N,N,0,0> + |0,0,N,N>)/sqrt(2)`` on modes 1-4."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    s = 1 / math.sqrt(2)
    return FourModeState(("1", "2", "3", "4"), {(N, N, 0, 0): s, (0, 0, N, N): s})


def phase_shift(state: FourModeState, modes: Iterable[str], phi: float) -> FourModeState:
    """Multiply each amplitude by ``e^{i phi n}`` with ``n`` the photons in ``modes``."""
    modes = tuple(modes)
    for m in modes:
        if m not in state.modes:
            raise KeyError(f"unknown mode {m!r}; have {state.modes}")
    pos = [state.modes.index(m) for m in modes]
    return FourModeState(
        state.modes,
        {k: a * np.exp(1j * phi * sum(k[p] for p in pos)) for k, a in state.amplitudes.items()},
    )


def _expand(n1: int, n2: int, U: np.ndarray) -> dict[tuple[int, int], complex]:
    """Output amplitudes of ``|n1, n2>`` through the 2x2 mode transform ``U``."""
    out: dict[tuple[int, int], complex] = {}
    norm_in = math.sqrt(math.factorial(n1) * math.factorial(n2))
    for k in range(n1 + 1):
        c1 = math.comb(n1, k) * U[0, 0] ** k * U[1, 0] ** (n1 - k)
        for l in range(n2 + 1):
            c2 = math.comb(n2, l) * U[0, 1] ** l * U[1, 1] ** (n2 - l)
            m1, m2 = k + l, n1 + n2 - k - l
            amp = c1 * c2 * math.sqrt(math.factorial(m1) * math.factorial(m2)) / norm_in
            out[(m1, m2)] = out.get((m1, m2), 0.0) + amp
    return out


def beam_splitter(state: FourModeState, inputs: tuple[str, str], outputs: tuple[str, str],
                  convention: str = "real") -> FourModeState:
    """50/50 beam splitter taking modes ``inputs`` to ``outputs``.

    With the default ``"real"`` convention the creation operators map as
    ``A_in1^+ -> (A_out1^+ + A_out2^+)/sqrt(2)`` and
    ``A_in2^+ -> (A_out1^+ - A_out2^+)/sqrt(2)``.
    """
    if len(set(inputs)) != 2 or len(set(outputs)) != 2:
        raise ValueError("beam splitter needs two distinct input and two distinct output modes")
    try:
        U = _CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"unknown convention {convention!r}") from None
    for m in inputs:
        if m not in state.modes:
            raise KeyError(f"unknown mode {m!r}; have {state.modes}")
    others = [m for m in state.modes if m not in inputs]
    clash = set(outputs) & set(others)
    if clash:
        raise ValueError(f"output modes {sorted(clash)} overlap untouched modes")
    i1, i2 = (state.modes.index(m) for m in inputs)
    modes = list(state.modes)
    modes[i1], modes[i2] = outputs
    out: dict = {}
    for key, a in state.amplitudes.items():
        for (m1, m2), c in _expand(key[i1], key[i2], U).items():
            new = list(key)
            new[i1], new[i2] = m1, m2
            new = tuple(new)
            out[new] = out.get(new, 0.0) + a * c
    return FourModeState(tuple(modes), {k: v for k, v in out.items() if abs(v) > 1e-300})


def interferometer_output(N: int, phi: float) -> FourModeState:
    """Full output state for the double NOON input with modes 3, 4 phase-shifted by ``phi``."""
    st = phase_shift(double_noon_input(N), ("3", "4"), phi)
    st = beam_splitter(st, ("1", "3"), ("b", "c"))
    st = beam_splitter(st, ("2", "4"), ("a", "d"))
    return st.reorder(("a", "b", "c", "d"))


def coincidence_probability(N: int, phi: float) -> float:
    """Probability of ``N`` photons in each of a and b (none in c, d)."""
    return abs(interferometer_output(N, phi).amplitude({"a": N, "b": N})) ** 2


def coincidence_closed_form(N: int, phi: float) -> float:
    """``2^{1-2N} [1 + cos(2 N phi)] / 2``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return 2.0 ** (1 - 2 * N) * (1 + math.cos(2 * N * phi)) / 2


def a_dn_expectation(N: int, phi: float) -> float:
    """``<A_DN> = [1 + cos(2 N phi)] / 2``."""
    return (1 + math.cos(2 * N * phi)) / 2


def a_dn_variance(N: int, phi: float) -> float:
    """``(Delta A_DN)^2 = sin^2(2 N phi) / 4``."""
    return math.sin(2 * N * phi) ** 2 / 4


class PhaseEstimate(NamedTuple):
    empirical: float
    analytic: float
    phi_hat: float
    mean_outcome: float


def estimate_phase_error(N: int, phi: float, shots: int, seed: int = 0,
                         min_slope: float = 0.05) -> PhaseEstimate:
    """Monte-Carlo estimate of the phase uncertainty from ``shots`` samples.

    Binary outcomes are drawn with probability ``<A_DN>``; the sample spread
    is propagated through the fringe slope ``|d<A_DN>/dphi| = N |sin 2N phi|``.
    The inverted phase ``phi_hat`` assumes the first fringe (``0 <= 2N phi <= pi``).
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    slope = N * abs(math.sin(2 * N * phi))
    if slope < min_slope * N:
        raise ValueError(
            f"phi={phi} sits at a fringe extremum (|sin 2N phi| < {min_slope}); the inversion is ill conditioned"
        )
    rng = np.random.default_rng(seed)
    outcomes = rng.random(shots) < a_dn_expectation(N, phi)
    p_hat = float(outcomes.mean())
    empirical = math.sqrt(p_hat * (1 - p_hat)) / slope
    phi_hat = math.acos(min(1.0, max(-1.0, 2 * p_hat - 1))) / (2 * N)
    return PhaseEstimate(empirical, phase_error(N), phi_hat, p_hat)
