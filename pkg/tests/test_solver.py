import math
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doublenoon import kernels
from doublenoon.analytic import ideal_ladder, ladder_to_state
from doublenoon.device import MHZ, US, DeviceParams, build_noise
from doublenoon.hamiltonian import HamiltonianSpec, modified_hamiltonians, zero_hamiltonian
from doublenoon.hilbert import Operator, basis_state, build_space, qutrit_projector, qutrit_transition
from doublenoon.schedule import compile_schedule
from doublenoon.solver import (
    DimensionCapError,
    PropagatorConfig,
    TruncationLeakError,
    lindblad_solve,
    mcwf_solve,
    propagate_unitary,
    run_protocol,
)
from doublenoon.solver.evolve import Evolver
from doublenoon.solver.factored import trajectory_seeds
from doublenoon.solver.protocol import _segment_spec, protocol_space, side_spaces

Q = build_space([("qutrit-L", 3)])
XTALK = DeviceParams.noiseless(g12=19 * MHZ, g34=19 * MHZ)


def excited():
    return basis_state(Q, {"qutrit-L": "e"})


@given(gamma=st.floats(1e4, 1e7), t=st.floats(0, 5e-6))
def test_lindblad_decay_closed_form(gamma, t):
    jump = [(gamma, qutrit_transition(Q, "qutrit-L", "e", "g"))]
    res = lindblad_solve(zero_hamiltonian(Q), jump, excited(), t)
    pe = res.state.expect(qutrit_projector(Q, "qutrit-L", "e")).real
    assert abs(pe - math.exp(-gamma * t)) < 1e-6


def test_mcwf_decay_within_3_sigma():
    gamma, t = 1e6, 1e-6
    jump = [(gamma, qutrit_transition(Q, "qutrit-L", "e", "g"))]
    pe_op = qutrit_projector(Q, "qutrit-L", "e")
    res = mcwf_solve(zero_hamiltonian(Q), jump, excited(), t, PropagatorConfig(trajectories=2000, seed=3),
                     observables={"pe": pe_op})
    mean, se = res.diagnostics["observables"]["pe"]
    assert abs(mean - math.exp(-1)) < 3 * se


def test_dephasing_coherence_decay():
    gphi, t = 2e5, 3e-6
    psi = (basis_state(Q, {"qutrit-L": "g"}) + excited()).normalized()
    res = lindblad_solve(zero_hamiltonian(Q), [(gphi, qutrit_projector(Q, "qutrit-L", "e"))], psi, t)
    assert abs(res.state.data[0, 1]) == pytest.approx(0.5 * math.exp(-gphi * t / 2), abs=1e-9)
    assert res.state.data[1, 1].real == pytest.approx(0.5, abs=1e-12)


def _drive(omega=2 * math.pi * 1e6):
    op = omega * qutrit_transition(Q, "qutrit-L", "g", "e")
    return HamiltonianSpec(op + op.dag())


def test_empty_noise_equals_unitary():
    psi0 = basis_state(Q, {"qutrit-L": "g"})
    t = 0.3e-6
    pure = propagate_unitary(_drive(), psi0, t)
    rho = lindblad_solve(_drive(), [], psi0, t).state
    assert np.abs(rho.data - np.outer(pure.data, pure.data.conj())).max() < 1e-10
    mc = mcwf_solve(_drive(), [], psi0, t, PropagatorConfig(trajectories=3), target=pure)
    assert mc.fidelity == pytest.approx(1.0, abs=1e-10)
    assert mc.diagnostics["mean_jumps"] == 0


def test_zero_rate_channels_are_dropped():
    psi0 = basis_state(Q, {"qutrit-L": "g"})
    pure = propagate_unitary(_drive(), psi0, 1e-7)
    jumps = [(0.0, qutrit_transition(Q, "qutrit-L", "e", "g"))]
    mc = mcwf_solve(_drive(), jumps, psi0, 1e-7, PropagatorConfig(trajectories=5), target=pure)
    assert mc.fidelity == pytest.approx(1.0, abs=1e-10)


@given(t1=st.floats(1e-8, 1e-6), t2=st.floats(1e-8, 1e-6))
def test_semigroup(t1, t2):
    jumps = build_noise(DeviceParams(), Q)
    psi0 = basis_state(Q, {"qutrit-L": "f"})
    both = lindblad_solve(_drive(), jumps, psi0, t1 + t2).state.data
    first = lindblad_solve(_drive(), jumps, psi0, t1).state
    second = lindblad_solve(_drive(), jumps, first, t2, t0=t1).state.data
    assert np.abs(both - second).max() < 1e-9


def test_density_checks_recorded():
    jumps = build_noise(DeviceParams(), Q)
    res = lindblad_solve(_drive(), jumps, basis_state(Q, {"qutrit-L": "f"}), 2e-6, times=[5e-7, 1e-6, 2e-6])
    assert len(res.diagnostics["checks"]) == 3
    for c in res.diagnostics["checks"]:
        assert abs(c["trace"] - 1) < 1e-10
        assert c["hermiticity"] < 1e-12
        assert c["min_eigenvalue"] > -1e-10


def test_dense_cap():
    big = side_spaces(8)["left"]
    with pytest.raises(DimensionCapError):
        lindblad_solve(zero_hamiltonian(big), [], basis_state(big, {}), 1e-9, PropagatorConfig(dense_dim_cap=50))


def test_truncation_leak_detected():
    sp_ = build_space([("qutrit-L", 3), ("cav1", 2)])
    op = 1e7 * (qutrit_transition(sp_, "qutrit-L", "e", "g") @ Operator(sp_, _adag(sp_)))
    spec = HamiltonianSpec(op + op.dag())
    with pytest.raises(TruncationLeakError):
        propagate_unitary(spec, basis_state(sp_, {"qutrit-L": "e"}), math.pi / 2e7)


def _adag(sp_):
    from doublenoon.hilbert import mode_annihilation
    return mode_annihilation(sp_, "cav1").dag().matrix


@pytest.mark.parametrize("phase", [2, 3])
def test_stepping_matches_exact(phase):
    space = side_spaces(3)["left"]
    spec = modified_hamiltonians(XTALK, space, phase, side="left")
    psi = basis_state(space, {"qutrit-L": "f", "cav1": 1, "cav2": 1}).data[:, None]
    exact = Evolver(spec, cfg=PropagatorConfig()).evolve(psi, 0.0, 2e-9)
    stepped_ev = Evolver(spec, cfg=PropagatorConfig(frame_reduction=False))
    assert stepped_ev.time_dependent
    stepped = stepped_ev.evolve(psi, 0.0, 2e-9)
    assert np.abs(exact - stepped).max() < 1e-8


@pytest.mark.skipif(len(kernels.BACKENDS) < 2, reason="compiled kernel not built")
def test_kernel_backends_agree():
    space = side_spaces(3)["left"]
    spec = modified_hamiltonians(XTALK, space, 2, side="left")
    psi = basis_state(space, {"qutrit-L": "g"}).data[:, None]
    cfg = PropagatorConfig(frame_reduction=False)
    a = Evolver(spec, cfg=cfg, backend="cython").evolve(psi, 0.0, 1e-9)
    b = Evolver(spec, cfg=cfg, backend="python").evolve(psi, 0.0, 1e-9)
    assert np.abs(a - b).max() < 1e-12


def _joint_segments(schedule, space):
    out = []
    for seg in schedule:
        out.append((_segment_spec(seg.kind, schedule.params, space, "both", "full", False), seg.duration,
                    seg.noise_active))
    return out


def test_factored_unitary_matches_joint():
    p = DeviceParams.noiseless(g12=19 * MHZ, g34=19 * MHZ)
    sched = compile_schedule(1, p, include_gaps=True)
    d = 3
    space = protocol_space(d)
    psi = ladder_to_state(ideal_ladder(1)[0], space)
    t = 0.0
    for spec, dur, _ in _joint_segments(sched, space):
        psi = propagate_unitary(spec, psi, dur, t0=t)
        t += dur
    res = run_protocol(sched, engine="unitary", cavity_dim=d)
    assert abs(res.state.overlap(psi)) == pytest.approx(1.0, abs=1e-9)
    target = ladder_to_state(ideal_ladder(1)[-1], space)
    assert res.fidelity == pytest.approx(abs(target.overlap(psi)), abs=1e-9)


def test_factored_lindblad_matches_joint():
    p = DeviceParams()
    sched = compile_schedule(1, p, include_gaps=True)
    d = 2
    space = protocol_space(d)
    cfg = PropagatorConfig(leak_threshold=1.0, dense_dim_cap=200)
    noise = build_noise(p, space)
    rho = ladder_to_state(ideal_ladder(1)[0], space).to_density()
    t = 0.0
    for spec, dur, active in _joint_segments(sched, space):
        rho = lindblad_solve(spec, noise if active else [], rho, dur, cfg, t0=t).state
        t += dur
    target = ladder_to_state(ideal_ladder(1)[-1], space)
    joint_f = math.sqrt(abs(rho.expect(Operator(space, np.outer(target.data, target.data.conj())))))
    res = run_protocol(sched, engine="lindblad", cfg=cfg, cavity_dim=d)
    assert res.fidelity == pytest.approx(joint_f, abs=1e-9)
    assert np.abs(res.state.data - rho.data).max() < 1e-9


def test_mcwf_agrees_with_lindblad_on_protocol():
    sched = compile_schedule(1, DeviceParams())
    lind = run_protocol(sched, engine="lindblad")
    mc = run_protocol(sched, engine="mcwf", cfg=PropagatorConfig(trajectories=1000, seed=11))
    assert abs(mc.fidelity - lind.fidelity) < 3 * mc.stderr


def test_worker_count_does_not_change_results():
    sched = compile_schedule(2, DeviceParams())
    a = run_protocol(sched, engine="mcwf", cfg=PropagatorConfig(trajectories=40, seed=5, workers=1))
    b = run_protocol(sched, engine="mcwf", cfg=PropagatorConfig(trajectories=40, seed=5, workers=3))
    assert a.fidelity == b.fidelity and a.stderr == b.stderr
    assert a.seeds == b.seeds


def test_seeds_stable_prefix():
    assert trajectory_seeds(9, 10)[:5] != trajectory_seeds(10, 5)
    assert len(set(trajectory_seeds(0, 1000))) == 1000


def test_effective_engine_exact():
    for N in (1, 2, 3):
        res = run_protocol(compile_schedule(N, DeviceParams.noiseless()), engine="effective")
        assert abs(res.fidelity - 1) < 1e-10


def test_full_unitary_noiseless_high_fidelity():
    res = run_protocol(compile_schedule(2, DeviceParams.noiseless()), engine="unitary")
    assert res.fidelity > 0.99
    assert res.final_guard < 1e-3


def test_lindblad_protocol_checks():
    res = run_protocol(compile_schedule(1, DeviceParams(), include_gaps=True), engine="lindblad")
    for c in res.diagnostics["checks"]:
        assert abs(c["trace"] - 1) < 1e-6
        assert c["hermiticity"] < 1e-8
        assert c["min_eigenvalue"] > -1e-6


def test_bell_stage_in_protocol():
    p = DeviceParams.noiseless(mu=2 * math.pi * 10e6)
    res = run_protocol(compile_schedule(1, p, include_bell=True), engine="unitary")
    assert res.fidelity > 0.99


def test_unknown_engine():
    with pytest.raises(ValueError):
        run_protocol(compile_schedule(1, DeviceParams()), engine="magic")
    with pytest.raises(ValueError):
        run_protocol(compile_schedule(2, DeviceParams()), engine="unitary", cavity_dim=2)
    with pytest.raises(DimensionCapError):
        run_protocol(compile_schedule(2, DeviceParams()), engine="lindblad", cfg=PropagatorConfig(dense_dim_cap=10))


def test_noise_budget_at_n4():
    """Stated rates give F~0.70 at N=4; the same rates read per cycle (divided by 2 pi) give F~0.94."""
    from dataclasses import fields

    from doublenoon.device import QutritRates

    base = DeviceParams()
    cfg = PropagatorConfig(trajectories=300, seed=0)
    stated = run_protocol(compile_schedule(4, base), engine="mcwf", cfg=cfg)
    assert 0.65 < stated.fidelity < 0.76
    scale = 1 / (2 * math.pi)
    rates = QutritRates(**{f.name: getattr(base.rates_L, f.name) * scale for f in fields(QutritRates)})
    per_cycle = DeviceParams(kappa=tuple(k * scale for k in base.kappa), rates_L=rates, rates_R=rates)
    res = run_protocol(compile_schedule(4, per_cycle), engine="mcwf", cfg=cfg)
    assert abs(res.fidelity - 0.941) < 0.03
