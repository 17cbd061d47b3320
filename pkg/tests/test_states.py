import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from su11 import states
from su11.formulary import closed_form
from su11.optics import PAGain
from su11.states import XS, YS, XI, YI

from conftest import random_state


def test_vacuum_moments():
    v = states.vacuum()
    assert np.array_equal(v.mean, np.zeros(4))
    assert np.array_equal(v.cov, np.eye(4))
    assert v.is_physical()
    assert v.variance(YS) == 1.0


def test_coherent_mean_uses_factor_two():
    c = states.coherent(3.0)
    assert np.allclose(c.mean, [6, 0, 0, 0])
    assert np.array_equal(c.cov, np.eye(4))
    assert np.allclose(states.coherent(3j).mean, [0, 6, 0, 0])
    assert states.coherent(0, 0).allclose(states.vacuum())
    assert c.alpha_s == 3.0


def test_squeezed_signal_variances():
    s = states.squeezed_signal(0.0, 0.5, "Y")
    assert s.variance(YS) == pytest.approx(np.exp(-1.0), rel=1e-14)
    assert s.variance(XS) == pytest.approx(np.e, rel=1e-14)
    x = states.squeezed_signal(0.0, 0.5, "X")
    assert x.variance(XS) == pytest.approx(np.exp(-1.0), rel=1e-14)
    assert states.squeezed_signal(2.0, 0.0).allclose(states.coherent(2.0))


def test_squeezed_signal_in_balanced_dark_formula():
    s = states.squeezed_signal(3.0, 0.5)
    pa = PAGain.from_gain(2.0)
    value = closed_form("sp-dark-balanced", s, pa, pa)
    assert value == pytest.approx(np.exp(-0.5) / 24.0, rel=1e-12)
    assert value == pytest.approx(0.02527, abs=5e-6)


@given(hst.floats(0.0, 5.0))
def test_squeezing_saturates_uncertainty(R):
    s = states.squeezed_signal(1.0 + 0.5j, R)
    assert s.variance(XS) * s.variance(YS) == pytest.approx(1.0, abs=1e-12)
    assert s.is_physical()
    assert s.is_separable_moments()


@given(hst.floats(0.0, 2.0), hst.complex_numbers(max_magnitude=5), hst.complex_numbers(max_magnitude=5))
def test_two_mode_squeezed_is_physical_and_correlated(r, a, b):
    s = states.two_mode_squeezed(r, a, b)
    assert s.is_physical()
    assert s.covariance(YS, YI) == pytest.approx(-np.sinh(2 * r))
    assert s.is_separable_moments() == (r == 0)


def test_constructors_are_symmetric_with_nonnegative_diagonal():
    for s in (states.vacuum(), states.coherent(1 + 2j, 0.5), states.squeezed_signal(1, 0.3),
              states.two_mode_squeezed(0.4)):
        assert np.array_equal(s.cov, s.cov.T)
        assert np.all(np.diag(s.cov) >= 0)
        assert s.gaussian


def test_from_moments_symmetrizes_small_asymmetry():
    cov = np.eye(4)
    cov[YS, YI] = 0.5 + 1e-8
    cov[YI, YS] = 0.5
    s = states.from_moments(np.zeros(4), cov)
    assert np.array_equal(s.cov, s.cov.T)
    assert s.covariance(YS, YI) == pytest.approx(0.5 + 5e-9)
    assert not s.gaussian


def test_from_moments_rejects_bad_input():
    cov = np.eye(4)
    cov[0, 1] = np.nan
    with pytest.raises(states.NonFiniteError):
        states.from_moments(np.zeros(4), cov)
    with pytest.raises(states.NonFiniteError):
        states.from_moments([0, np.inf, 0, 0], np.eye(4))
    cov = np.eye(4)
    cov[0, 1] = 1e-3
    with pytest.raises(states.AsymmetryTooLargeError):
        states.from_moments(np.zeros(4), cov)


def test_arbitrary_moments_are_accepted_but_flagged_unphysical():
    s = states.from_moments(np.zeros(4), 0.5 * np.eye(4))
    assert not s.is_physical()
    with pytest.raises(states.UnphysicalStateError):
        states.gaussian_state(np.zeros(4), 0.5 * np.eye(4))


def test_text_round_trip(rng):
    s = random_state(rng)
    back = states.MomentState.from_text(s.to_text())
    assert back.allclose(s, atol=0)
    assert back.gaussian
    plain = states.MomentState.from_text("mean = [1, 2, 3, 4]\ncov = [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]\n")
    assert np.allclose(plain.mean, [1, 2, 3, 4]) and not plain.gaussian


def test_phase_rotation_moves_amplitude():
    s = states.coherent(2.0).phase_rotated(np.pi / 2)
    assert s.alpha_s == pytest.approx(2j)
    assert s.gaussian
