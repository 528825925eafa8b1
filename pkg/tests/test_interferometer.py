import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doublenoon.interferometer import (
    FourModeState,
    a_dn_expectation,
    a_dn_variance,
    beam_splitter,
    coincidence_closed_form,
    coincidence_probability,
    double_noon_input,
    estimate_phase_error,
    interferometer_output,
    phase_shift,
)

phis = st.floats(-math.pi, math.pi, allow_nan=False)


def test_hong_ou_mandel():
    st_ = FourModeState(("1", "2", "3", "4"), {(1, 0, 1, 0): 1.0})
    out = beam_splitter(st_, ("1", "3"), ("b", "c"))
    assert out.amplitude({"b": 1, "c": 1}) == pytest.approx(0.0, abs=1e-15)
    assert abs(out.amplitude({"b": 2})) ** 2 == pytest.approx(0.5)
    assert abs(out.amplitude({"c": 2})) ** 2 == pytest.approx(0.5)


@pytest.mark.parametrize("convention", ["real", "i-phase"])
def test_hom_both_conventions(convention):
    st_ = FourModeState(("1", "2", "3", "4"), {(1, 0, 1, 0): 1.0})
    out = beam_splitter(st_, ("1", "3"), ("b", "c"), convention)
    assert out.amplitude({"b": 1, "c": 1}) == pytest.approx(0.0, abs=1e-15)


@given(st.integers(1, 4), phis)
def test_norm_and_photon_number(N, phi):
    out = interferometer_output(N, phi)
    assert out.norm() == pytest.approx(1.0, abs=1e-12)
    assert out.photon_numbers() == {2 * N}


@given(st.integers(1, 4), phis)
def test_closed_form(N, phi):
    assert coincidence_probability(N, phi) == pytest.approx(coincidence_closed_form(N, phi), abs=1e-12)


@given(st.integers(1, 5), phis)
def test_fringe_moments(N, phi):
    m = a_dn_expectation(N, phi)
    assert a_dn_variance(N, phi) == pytest.approx(m * (1 - m), abs=1e-14)


def test_phase_shift_only_touches_selected_modes():
    st_ = phase_shift(double_noon_input(2), ("3", "4"), 0.3)
    assert st_.amplitude({"1": 2, "2": 2}) == pytest.approx(1 / math.sqrt(2))
    assert st_.amplitude({"3": 2, "4": 2}) == pytest.approx(np.exp(1.2j) / math.sqrt(2))


def test_phase_estimate():
    est = estimate_phase_error(2, math.pi / 8, 200000, seed=1)
    assert est.analytic == 0.25
    assert est.empirical == pytest.approx(0.25, rel=0.02)
    assert est.phi_hat == pytest.approx(math.pi / 8, abs=0.01)
    with pytest.raises(ValueError):
        estimate_phase_error(2, 0.0, 100)


def test_errors():
    with pytest.raises(ValueError):
        double_noon_input(0)
    with pytest.raises(KeyError):
        phase_shift(double_noon_input(1), ("x",), 0.1)
    with pytest.raises(ValueError):
        beam_splitter(double_noon_input(1), ("1", "3"), ("2", "c"))
    with pytest.raises(ValueError):
        beam_splitter(double_noon_input(1), ("1", "3"), ("b", "c"), "bogus")
