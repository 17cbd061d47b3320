import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from su11 import engine, states
from su11.engine import MeasurementScheme
from su11.optics import (InterferometerConfig, LossBudget, PAGain, Sign, Topology,
                         build_symplectic, compose_full, compose_full_lossy, compose_truncated,
                         full_config, is_symplectic, joint_coeffs, pa_coeffs, transfer_coeffs,
                         truncated_config)

from conftest import random_state

G2_ = PAGain.from_gain(2.0)
SQ3 = np.sqrt(3.0)


def test_pa_coeffs():
    assert pa_coeffs(PAGain(0.0)) == (1.0, 0.0)
    G, g = pa_coeffs(PAGain.from_gain(2.0))
    assert G == pytest.approx(2.0) and g == pytest.approx(SQ3, rel=1e-14)
    assert PAGain.from_gain(5.0).g == pytest.approx(2 * np.sqrt(6), rel=1e-14)
    with pytest.raises(ValueError):
        PAGain(-0.1)
    with pytest.raises(ValueError):
        PAGain.from_gain(0.5)


@given(hst.floats(0.0, 3.0))
def test_gain_identity(r):
    G, g = pa_coeffs(PAGain(r))
    assert G * G - g * g == pytest.approx(1.0, rel=1e-12)
    assert G >= 1.0 and g >= 0.0


def test_loss_budget_validation():
    with pytest.raises(ValueError):
        LossBudget(L_s=1.0)
    with pytest.raises(ValueError):
        LossBudget(l_i=-0.1)
    with pytest.raises(ValueError):
        LossBudget(L_i=np.nan)
    assert LossBudget().lossless and LossBudget(l_s=0.1).has_external


def test_compose_full_balanced_examples():
    tc = compose_full(G2_, G2_, np.pi)
    assert tc.A == pytest.approx(-1.0, abs=1e-12) and abs(tc.B) < 1e-12
    assert tc.C == pytest.approx(1.0, abs=1e-12) and abs(tc.D) < 1e-12
    tc = compose_full(G2_, G2_, 0.0)
    assert tc.A == pytest.approx(7.0) and tc.B == pytest.approx(4 * SQ3)
    assert abs(tc.A) ** 2 - abs(tc.B) ** 2 == pytest.approx(1.0, abs=1e-10)
    assert len(tc.Ap) == len(tc.Bp) == 0


def test_unbalanced_approximation_improves_with_gain():
    errors = []
    for G2 in (5.0, 10.0, 20.0, 40.0):
        tc = compose_full(G2_, PAGain.from_gain(G2), np.pi)
        approx = G2 * (2.0 - SQ3)
        errors.append(abs(abs(tc.A) / approx - 1.0))
        if G2 == 5.0:
            # |G1 G2 - g1 g2| = 10 - 2 sqrt(18) = 1.51472
            assert abs(tc.A) == pytest.approx(10 - SQ3 * 2 * np.sqrt(6), rel=1e-12)
            assert abs(tc.A) == pytest.approx(1.51472, abs=1e-5)
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_compose_truncated():
    tc = compose_truncated(G2_, 0.0)
    assert np.allclose([tc.A, tc.B, tc.C, tc.D], [2, SQ3, 2, SQ3])
    phi = 1.234
    tc = compose_truncated(PAGain(0.0), phi)
    assert tc.A == pytest.approx(np.exp(1j * phi)) and tc.B == 0
    # at the dark fringe the added photocurrents carry (G+g)^2, the subtracted (G-g)^2
    plus = joint_coeffs(compose_truncated(G2_, np.pi), Sign.PLUS)
    minus = joint_coeffs(compose_truncated(G2_, np.pi), Sign.MINUS)
    assert abs(plus.E) ** 2 == pytest.approx((2 + SQ3) ** 2)
    assert abs(plus.E) ** 2 == pytest.approx(13.928, abs=1e-3)
    assert abs(minus.E) ** 2 == pytest.approx((2 - SQ3) ** 2)
    assert abs(minus.E) == pytest.approx(abs(minus.F))


@settings(max_examples=300, deadline=None)
@given(hst.floats(0, 3), hst.floats(0, 3), hst.floats(0, 2 * np.pi, exclude_max=True))
def test_lossless_invariants(r1, r2, phi):
    tc = compose_full(PAGain(r1), PAGain(r2), phi)
    scale = abs(tc.A) ** 2
    assert abs(abs(tc.A) ** 2 - abs(tc.B) ** 2 - 1.0) <= 1e-10 * scale
    assert abs(abs(tc.C) ** 2 - abs(tc.D) ** 2 - 1.0) <= 1e-10 * scale
    assert abs(tc.A) == pytest.approx(abs(tc.C), rel=1e-12)
    assert abs(tc.B) == pytest.approx(abs(tc.D), rel=1e-12, abs=1e-12)
    if abs(tc.A) > 1e-6:
        diff = np.angle(np.exp(1j * (tc.kappa_C - tc.kappa_A + phi)))
        assert abs(diff) < 1e-9
    if abs(tc.B) > 1e-6:
        diff = np.angle(np.exp(1j * (tc.kappa_D - tc.kappa_B + phi)))
        assert abs(diff) < 1e-9


def test_lossy_coefficients():
    cfg = full_config(2.0, 2.0, np.pi, L_s=0.2, L_i=0.2)
    tc = compose_full_lossy(cfg)
    ideal = compose_full(G2_, G2_, np.pi)
    assert tc.A == pytest.approx(np.sqrt(0.8) * ideal.A)
    assert tc.B == pytest.approx(np.sqrt(0.8) * ideal.B, abs=1e-12)
    assert abs(tc.A) == pytest.approx(np.sqrt(0.8))
    assert abs(tc.Ap[0]) == pytest.approx(2 * np.sqrt(0.2))
    assert abs(tc.Bp[0]) == pytest.approx(SQ3 * np.sqrt(0.2))
    zero = compose_full_lossy(full_config(2.0, 3.0, 0.4))
    ref = compose_full(G2_, PAGain.from_gain(3.0), 0.4)
    assert np.allclose([zero.A, zero.B, zero.C, zero.D], [ref.A, ref.B, ref.C, ref.D])


def test_joint_coefficient_examples():
    jc = joint_coeffs(compose_full(G2_, G2_, np.pi), Sign.MINUS)
    assert abs(jc.E) == pytest.approx(1.0) and abs(jc.F) == pytest.approx(1.0)
    jc = joint_coeffs(compose_full(G2_, G2_, 0.0), Sign.PLUS)
    assert abs(jc.E) == pytest.approx((2 - SQ3) ** 2, rel=1e-10)
    assert abs(jc.E) == pytest.approx(0.0718, abs=1e-4)
    for r1, r2 in ((0.3, 1.2), (1.0, 0.5), (2.0, 2.5)):
        G1, g1 = pa_coeffs(PAGain(r1))
        G2, g2 = pa_coeffs(PAGain(r2))
        tc = compose_full(PAGain(r1), PAGain(r2), np.pi)
        for sign, target in ((Sign.PLUS, ((G1 + g1) * (G2 - g2)) ** 2),
                             (Sign.MINUS, ((G1 - g1) * (G2 + g2)) ** 2)):
            jc = joint_coeffs(tc, sign)
            assert abs(jc.E) ** 2 == pytest.approx(target, rel=1e-12)
            assert abs(jc.F) ** 2 == pytest.approx(target, rel=1e-12)


def test_symplectic_examples():
    S, n = build_symplectic(InterferometerConfig(Topology.FULL, PAGain(), PAGain(), 0.0))
    assert n == 0 and np.allclose(S, np.eye(4))
    S, _ = build_symplectic(full_config(2.0, phi0=np.pi))
    assert np.allclose(S[1], [0, -1, 0, 0], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(hst.floats(0, 3), hst.floats(0, 3), hst.floats(0, 2 * np.pi),
       hst.lists(hst.floats(0, 0.95), min_size=4, max_size=4))
def test_symplectic_form_preserved(r1, r2, phi, losses):
    cfg = InterferometerConfig(Topology.FULL, PAGain(r1), PAGain(r2), phi)
    S, _ = build_symplectic(cfg)
    scale = max(1.0, np.max(np.abs(S)) ** 2)
    assert is_symplectic(S, tol=1e-10 * scale)
    lossy = cfg.with_losses(L_s=losses[0], L_i=losses[1], l_s=losses[2], l_i=losses[3])
    S, n = build_symplectic(lossy)
    assert S.shape == (4 + 2 * n, 4 + 2 * n)
    assert is_symplectic(S, tol=1e-10 * max(1.0, np.max(np.abs(S)) ** 2))


def test_truncated_ignores_internal_losses():
    cfg = InterferometerConfig(Topology.TRUNCATED, G2_, PAGain(1.0), 0.3, LossBudget(0.5, 0.5))
    ref = truncated_config(2.0, 0.3)
    a, b = transfer_coeffs(cfg), transfer_coeffs(ref)
    assert np.allclose([a.A, a.B, a.C, a.D], [b.A, b.B, b.C, b.D])
    assert build_symplectic(cfg)[1] == 0


def test_vacuum_output_variance_matches_coefficients(rng):
    for _ in range(20):
        cfg = InterferometerConfig(
            Topology.FULL, PAGain(rng.uniform(0, 1.5)), PAGain(rng.uniform(0, 1.5)),
            rng.uniform(0, 2 * np.pi), LossBudget(*rng.uniform(0, 0.9, 4)))
        tc = transfer_coeffs(cfg)
        S, _ = build_symplectic(cfg)
        diag = np.diag(S @ S.T)[:4]
        sig = abs(tc.A) ** 2 + abs(tc.B) ** 2 + tc.signal_port_noise
        idl = abs(tc.C) ** 2 + abs(tc.D) ** 2 + tc.idler_port_noise
        assert diag[1] == pytest.approx(sig, rel=1e-10)
        assert diag[3] == pytest.approx(idl, rel=1e-10)


@pytest.mark.parametrize("port", ["signal", "idler", "joint-plus", "joint-minus"])
def test_coefficient_and_symplectic_paths_agree(rng, port):
    for _ in range(25):
        state = random_state(rng)
        topo = Topology.FULL if rng.random() < 0.7 else Topology.TRUNCATED
        cfg = InterferometerConfig(topo, PAGain(rng.uniform(0, 1.5)), PAGain(rng.uniform(0, 1.5)),
                                   rng.uniform(0, 2 * np.pi), LossBudget(*rng.uniform(0, 0.6, 4)))
        scheme = MeasurementScheme(port, rng.uniform(-np.pi, np.pi))
        mean, var = engine.observable_stats(state, cfg, scheme)
        cmean, cvar, cslope = engine.coefficient_stats(state, cfg, scheme)
        slope = engine.signal_derivative(state, cfg, scheme)
        scale = np.sqrt(var) + abs(mean)
        assert cmean == pytest.approx(mean, abs=1e-10 * scale)
        assert cvar == pytest.approx(var, rel=1e-10)
        assert cslope == pytest.approx(slope, abs=1e-10 * max(1.0, abs(slope)))
