import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from doublenoon.device import GHZ, MHZ, DeviceParams
from doublenoon.hamiltonian import (
    HamiltonianSpec,
    bell_prep_interaction,
    crosstalk,
    dispersive_interaction,
    drive_pulse,
    effective_interaction,
    modified_hamiltonians,
    static_frame,
)
from doublenoon.hilbert import basis_state, commutator
from doublenoon.solver import PropagatorConfig
from doublenoon.solver.evolve import Evolver
from doublenoon.solver.protocol import bell_space, protocol_space, side_spaces

XTALK = DeviceParams.noiseless(g12=19 * MHZ, g34=19 * MHZ)


def left(d=3):
    return side_spaces(d)["left"]


def reference_solve(spec: HamiltonianSpec, psi0, t1):
    """Direct integration of the reference-picture Hamiltonian."""

    def rhs(t, y):
        return -1j * (spec.reference_at(t).matrix @ y)

    sol = solve_ivp(rhs, (0, t1), psi0.astype(complex), method="DOP853", rtol=1e-12, atol=1e-14,
                    max_step=1e-11)
    return sol.y[:, -1]


@pytest.mark.parametrize("phase", [1, 2, 3])
def test_frame_equivalence(phase):
    space = left(3)
    spec = modified_hamiltonians(XTALK, space, phase, side="left")
    psi0 = basis_state(space, {"qutrit-L": "f", "cav1": 1}).data
    t1 = 1.5e-9
    want = reference_solve(spec, psi0, t1)
    got = Evolver(spec, (), "state", PropagatorConfig()).evolve(psi0[:, None], 0.0, t1)[:, 0]
    assert np.abs(got - want).max() < 1e-8


@pytest.mark.parametrize("phase", [1, 2, 3])
@given(t=st.floats(0, 1e-6))
def test_hermitian(phase, t):
    spec = modified_hamiltonians(XTALK, left(3), phase, side="left")
    assert spec.at(t).is_hermitian(1e-6)
    assert spec.reference_at(t).is_hermitian(1e-6)


@given(t=st.floats(0, 1e-7))
def test_to_frame_preserves_physics(t):
    spec = dispersive_interaction(XTALK, left(3), "left") + crosstalk(XTALK, left(3), "left")
    other = spec.to_frame(None)
    diff = spec.reference_at(t).matrix - other.reference_at(t).matrix
    assert abs(diff).max() < 1e-6 * XTALK.delta1


def test_static_frame_reduces_pulses_with_crosstalk():
    for phase in (2, 3):
        spec = modified_hamiltonians(XTALK, left(3), phase, side="left")
        assert not spec.is_static
        red = static_frame(spec)
        assert red is not None and red.is_static
        for t in (0.0, 3.3e-10, 1.7e-9):
            diff = red.reference_at(t).matrix - spec.reference_at(t).matrix
            assert abs(diff).max() < 1e-6 * XTALK.delta1


def test_crosstalk_residual_frequency():
    spec = crosstalk(XTALK, left(3), "left")
    (_, w), = spec.oscillatory
    assert w == pytest.approx(2.5 * GHZ, rel=1e-12)


def test_sides_commute():
    space = protocol_space(2)
    hl = modified_hamiltonians(XTALK, space, 2, side="left").at(1e-9)
    hr = modified_hamiltonians(XTALK, space, 2, side="right").at(1e-9)
    assert np.abs(commutator(hl, hr).toarray()).max() < 1e-6


@pytest.mark.parametrize("transition,src,dst", [("gf", "g", "f"), ("gf", "f", "g"), ("ge", "e", "g"), ("ge", "g", "e")])
def test_pulse_mapping(transition, src, dst):
    p = DeviceParams.noiseless()
    space = left(2)
    spec = drive_pulse(p, space, transition, side="left")
    omega = p.omega_gf if transition == "gf" else p.omega_ge_rabi
    psi = basis_state(space, {"qutrit-L": src}).data[:, None]
    out = Evolver(spec).evolve(psi, 0.0, math.pi / (2 * omega))[:, 0]
    assert abs(np.vdot(basis_state(space, {"qutrit-L": dst}).data, out)) == pytest.approx(1.0, abs=1e-12)


def test_pulse_phase_conventions():
    """g-f pulse: |g> -> |f>, |f> -> -|g>; g-e pulse: |e> -> |g>."""
    p = DeviceParams.noiseless()
    space = left(2)
    ket = {x: basis_state(space, {"qutrit-L": x}).data for x in "gef"}
    gf = Evolver(drive_pulse(p, space, "gf", side="left")).evolve(
        np.stack([ket["g"], ket["f"]], 1), 0.0, math.pi / (2 * p.omega_gf))
    assert np.vdot(ket["f"], gf[:, 0]) == pytest.approx(1.0, abs=1e-12)
    assert np.vdot(ket["g"], gf[:, 1]) == pytest.approx(-1.0, abs=1e-12)
    ge = Evolver(drive_pulse(p, space, "ge", side="left")).evolve(
        ket["e"][:, None], 0.0, math.pi / (2 * p.omega_ge_rabi))
    assert np.vdot(ket["g"], ge[:, 0]) == pytest.approx(1.0, abs=1e-12)


def test_effective_is_static_when_matched():
    assert effective_interaction(DeviceParams(), left(3), "left").is_static
    mism = DeviceParams(delta1=1.001 * GHZ)
    (_, w), = effective_interaction(mism, left(3), "left").oscillatory
    assert w == pytest.approx(1 * MHZ, rel=1e-9)


def test_bell_interaction_requires_mu():
    with pytest.raises(ValueError):
        bell_prep_interaction(DeviceParams(), bell_space())
    with pytest.raises(KeyError):
        bell_prep_interaction(DeviceParams(mu=MHZ), left(3))
    spec = bell_prep_interaction(DeviceParams(mu=MHZ), bell_space())
    assert spec.static.is_hermitian()


def test_invalid_phase_index():
    with pytest.raises(ValueError):
        modified_hamiltonians(DeviceParams(), left(2), 4)
    with pytest.raises(ValueError):
        drive_pulse(DeviceParams(), left(2), "ef")


def test_spec_arithmetic():
    a = dispersive_interaction(XTALK, left(3), "left")
    b = drive_pulse(XTALK, left(3), "gf", side="left")
    diff = (a + b) - a
    for t in (0.0, 1e-9):
        assert np.abs((diff.reference_at(t).matrix - b.reference_at(t).matrix).toarray()).max() < 1e-3


def test_describe_lists_entries():
    text = drive_pulse(DeviceParams(), left(2), "gf", side="left").describe()
    assert text.startswith("# space")
