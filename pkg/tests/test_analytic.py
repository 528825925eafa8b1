import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doublenoon.analytic import (
    EffectiveParams,
    effective_evolution,
    excited_phase,
    ideal_ladder,
    operation_time,
    phase_error,
    step_durations,
)
from doublenoon.device import GHZ, MHZ, DeviceParams, lambda_eff
from doublenoon.hamiltonian import effective_interaction
from doublenoon.hilbert import basis_state
from doublenoon.solver.evolve import Evolver
from doublenoon.solver.protocol import side_spaces

ns = st.integers(0, 6)
times = st.floats(0, 20)


@given(ns, times)
def test_unitary(n, t):
    u = effective_evolution(n, t, EffectiveParams(1.0))
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)


@given(ns, times)
def test_periodic(n, t):
    p = EffectiveParams(1.0)
    period = math.pi / (n + 1)
    assert np.allclose(effective_evolution(n, t + period, p), effective_evolution(n, t, p), atol=1e-10)


@given(ns)
def test_full_transfer(n):
    u = effective_evolution(n, math.pi / (2 * (n + 1)), EffectiveParams(1.0))
    assert abs(u[1, 0]) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_closed_form_matches_effective_hamiltonian(n):
    p = DeviceParams()
    space = side_spaces(n + 3)["left"]
    spec = effective_interaction(p, space, "left")
    f = basis_state(space, {"qutrit-L": "f", "cav1": n, "cav2": n}).data
    g = basis_state(space, {"qutrit-L": "g", "cav1": n + 1, "cav2": n + 1}).data
    t = 0.37 / lambda_eff(p)
    out = Evolver(spec).evolve(f[:, None], 0.0, t)[:, 0]
    u = effective_evolution(n, t, EffectiveParams.from_device(p))
    assert np.vdot(f, out) == pytest.approx(u[0, 0], abs=1e-9)
    assert np.vdot(g, out) == pytest.approx(u[1, 0], abs=1e-9)


@pytest.mark.parametrize("n", [0, 1, 3])
def test_mismatch_converges_to_closed_form(n):
    lam = 1.0
    t = 0.5 / ((n + 1) * lam)
    ref = effective_evolution(n, t, EffectiveParams(lam, 0.0, 0.0, lam))
    errs = []
    for eps in (1e-2, 1e-4, 1e-6):
        u = effective_evolution(n, t, EffectiveParams(lam, 0.0, eps * lam, lam))
        errs.append(np.abs(u - ref).max())
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-5


def test_mismatched_effective_matches_hamiltonian():
    p = DeviceParams(delta1=1.0004 * GHZ)
    space = side_spaces(4)["left"]
    spec = effective_interaction(p, space, "left")
    f = basis_state(space, {"qutrit-L": "f", "cav1": 1, "cav2": 1}).data
    g = basis_state(space, {"qutrit-L": "g", "cav1": 2, "cav2": 2}).data
    t = 0.4 / lambda_eff(p)
    out = Evolver(spec).evolve(f[:, None], 0.0, t)[:, 0]
    u = effective_evolution(1, t, EffectiveParams.from_device(p))
    assert np.vdot(f, out) == pytest.approx(u[0, 0], abs=1e-7)
    assert np.vdot(g, out) == pytest.approx(u[1, 0], abs=1e-7)


def test_excited_phase_matched():
    p = EffectiveParams(2.0)
    assert excited_phase(0.3, p) == pytest.approx(np.exp(-1j * 0.6))


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8])
def test_ladder(N):
    ladder = ideal_ladder(N)
    assert len(ladder) == 2 * N + 2
    for st_ in ladder:
        assert st_.norm() == pytest.approx(1.0, abs=1e-12)
    final = ladder[-1].canonical()
    assert set(final) == {("g", "g", N, N, 0, 0), ("g", "g", 0, 0, N, N)}
    for a in final.values():
        assert a == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert ladder[-1].max_photons() == N
    assert abs(ladder[-1].step_phase + 1) < 1e-12


def test_ladder_independent_of_lambda():
    a = ideal_ladder(3)
    b = ideal_ladder(3, DeviceParams(g1=5 * MHZ))
    for x, y in zip(a, b):
        assert abs(x.overlap(y)) == pytest.approx(1.0, abs=1e-12)


def test_timing_closed_form():
    p = DeviceParams(mu=10 * MHZ)
    for N in range(1, 11):
        d = step_durations(N, p)
        assert d.total() == pytest.approx(operation_time(N, p), rel=1e-14)
    with pytest.raises(ValueError):
        operation_time(2, DeviceParams())


def test_phase_error():
    for N in range(1, 10):
        assert phase_error(N) == 1 / (2 * N)
        assert phase_error(N, "noon") == 1 / N
    with pytest.raises(ValueError):
        phase_error(0)
