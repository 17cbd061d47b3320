"""General moment-propagation engine for phase sensitivity.

Propagates input moments through any interferometer configuration, projects
onto the measured observable, and evaluates the linearized sensitivity
delta_phi = std(O) / |d<O>/dphi| at any bias phase.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .optics import (Sign, Topology, build_symplectic, build_symplectic_dphi, joint_coeffs,
                     pa_coeffs, transfer_coeffs, transfer_coeffs_dphi)
from .states import XI, XS, MomentState

FRINGE_TOL = 1e-9
FD_STEP = 1e-5
PHASE_TOL = 1e-8


class Port(str, Enum):
    SIGNAL = "signal"
    IDLER = "idler"
    JOINT_PLUS = "joint-plus"
    JOINT_MINUS = "joint-minus"

    @property
    def weights(self):
        """Photocurrent weights (w_s, w_i): the observable is w_s Y_s + w_i Y_i."""
        return {Port.SIGNAL: (1.0, 0.0), Port.IDLER: (0.0, 1.0),
                Port.JOINT_PLUS: (1.0, 1.0), Port.JOINT_MINUS: (1.0, -1.0)}[self]

    @property
    def sign(self):
        """Joint combination sign, or None for single-port detection."""
        return {Port.JOINT_PLUS: Sign.PLUS, Port.JOINT_MINUS: Sign.MINUS}.get(self)


class NoFiniteMinimumError(RuntimeError):
    """Raised by `optimize_phase` when every grid point has infinite sensitivity."""


@dataclass(frozen=True)
class MeasurementScheme:
    """Detected observable: a port choice and the local-oscillator angle theta.

    Each detector measures Y(theta) = cos(theta) Y + sin(theta) X of its output
    mode; joint schemes apply the same theta to both ports.
    """

    port: Port = Port.SIGNAL
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "port", Port(self.port))
        if not np.isfinite(self.theta):
            raise ValueError("theta must be finite")


@dataclass(frozen=True)
class SensitivityReport:
    """Sensitivity at one bias phase plus the noise/signal decomposition.

    Attributes:
        phi: Bias phase.
        delta_phi: noise_std / |signal_derivative|, or inf when the slope vanishes.
        signal_derivative: d<O>/dphi.
        noise_std: Standard deviation of O.
        noise_ratio_to_input: var(O) over the variance of the same
            combination of input quadratures.
        signal_gain: |signal_derivative| / |G1 <X_s> + g1 <X_i>|, NaN when
            the denominator vanishes.
        infinite: True when the slope is exactly zero.
        mean: <O>.
    """

    phi: float
    delta_phi: float
    signal_derivative: float
    noise_std: float
    noise_ratio_to_input: float
    signal_gain: float
    infinite: bool
    mean: float


def fringe_of(phi, tol=FRINGE_TOL):
    """Classify a bias phase as "dark" (odd multiple of pi), "bright" (even) or "generic"."""
    k = np.round(phi / np.pi)
    if abs(phi - k * np.pi) >= tol:
        return "generic"
    return "bright" if int(k) % 2 == 0 else "dark"


def observable_weights(scheme):
    """Output-quadrature weights of the observable over (X_s, Y_s, X_i, Y_i)."""
    ws, wi = scheme.port.weights
    c, s = np.cos(scheme.theta), np.sin(scheme.theta)
    return np.array([ws * s, ws * c, wi * s, wi * c])


def _phi(config, phi):
    return config.phi0 if phi is None else float(phi)


def _extended(state, n_anc):
    n = 4 + 2 * n_anc
    mean = np.zeros(n)
    mean[:4] = state.mean
    cov = np.eye(n)
    cov[:4, :4] = state.cov
    return mean, cov


def output_moments(state, config, phi=None):
    """Output moments of the two detected modes; ancillas enter as vacuum."""
    S, n_anc = build_symplectic(config, _phi(config, phi))
    mean, cov = _extended(state, n_anc)
    rows = S[:4]
    return MomentState(rows @ mean, rows @ cov @ rows.T, label=f"out({state.label})",
                       gaussian=state.gaussian)


def observable_stats(state, config, scheme, phi=None):
    """Mean and variance of the scheme's observable at bias phase phi."""
    out = output_moments(state, config, phi)
    return out.quadrature_stats(observable_weights(scheme))


def signal_derivative(state, config, scheme, phi=None, method="analytic", step=FD_STEP):
    """Phase slope d<O>/dphi.

    Args:
        method: "analytic" uses the exact derivative of the transfer matrix;
            "fd" takes a central difference of the observable mean.
        step: Finite-difference step in radians.
    """
    phi = _phi(config, phi)
    w = observable_weights(scheme)
    if method == "fd":
        up, _ = observable_stats(state, config, scheme, phi + step)
        down, _ = observable_stats(state, config, scheme, phi - step)
        return (up - down) / (2.0 * step)
    if method != "analytic":
        raise ValueError(f"unknown derivative method {method!r}")
    dS = build_symplectic_dphi(config, phi)
    mean, _ = _extended(state, (dS.shape[0] - 4) // 2)
    return float(w @ (dS[:4] @ mean))


# --- complex-coefficient path ----------------------------------------------

def _rotated(state, mode_index, psi):
    """Weights of Y(psi) = cos(psi) Y + sin(psi) X for the mode starting at mode_index."""
    w = np.zeros(4)
    w[mode_index] = np.sin(psi)
    w[mode_index + 1] = np.cos(psi)
    return w


def _pair_stats(state, a, psi_a, b, psi_b, port_noise):
    """Statistics of a Y_s(psi_a) + b Y_i(psi_b) + vacuum ports."""
    ws = _rotated(state, XS, psi_a)
    wi = _rotated(state, XI, psi_b)
    mean = a * (ws @ state.mean) + b * (wi @ state.mean)
    var = (a * a * (ws @ state.cov @ ws) + b * b * (wi @ state.cov @ wi)
           + 2.0 * a * b * (ws @ state.cov @ wi) + port_noise)
    return float(mean), float(var)


def _coefficient_mean_var(state, tc, scheme):
    theta = scheme.theta
    port = scheme.port
    if port is Port.SIGNAL:
        # Y_s_out(theta) = |A| Y_s(theta + k_A) - |B| Y_i(-theta - k_B)
        return _pair_stats(state, abs(tc.A), theta + tc.kappa_A,
                           -abs(tc.B), -theta - tc.kappa_B, tc.signal_port_noise)
    if port is Port.IDLER:
        # Y_i_out(theta) = |C| Y_i(theta + k_C) - |D| Y_s(-theta - k_D)
        return _pair_stats(state, -abs(tc.D), -theta - tc.kappa_D,
                           abs(tc.C), theta + tc.kappa_C, tc.idler_port_noise)
    jc = joint_coeffs(tc, port.sign, theta)
    # Y_+/- = |E| Y_s(k_E) +/- |F| Y_i(k_F)
    pm = 1.0 if port is Port.JOINT_PLUS else -1.0
    return _pair_stats(state, abs(jc.E), np.angle(jc.E), pm * abs(jc.F), np.angle(jc.F),
                       jc.port_noise)


def coefficient_stats(state, config, scheme, phi=None):
    """Mean, variance and slope from the complex mode coefficients.

    An independent route to `observable_stats` and `signal_derivative`: the
    output quadrature is written as |A| Y_s(theta + kappa_A) - |B| Y_i(...)
    (or the E, F form for joint detection) and its moments are read off the
    input covariance directly.

    Returns:
        (mean, variance, slope)
    """
    phi = _phi(config, phi)
    tc = transfer_coeffs(config, phi)
    mean, var = _coefficient_mean_var(state, tc, scheme)
    # The mean is linear in the coefficients, so the slope follows from dA..dD.
    dtc = transfer_coeffs_dphi(config, phi)
    slope, _ = _coefficient_mean_var(state, dtc, scheme)
    return mean, var, slope


# --- sensitivity -------------------------------------------------------------

def _input_reference_variance(state, scheme):
    """Variance of the input quadrature combination matching the scheme."""
    ws, wi = scheme.port.weights
    if scheme.port.sign is not None:
        ws, wi = 1.0, 1.0
    c, s = np.cos(scheme.theta), np.sin(scheme.theta)
    w = np.array([ws * s, ws * c, wi * s, wi * c])
    return float(w @ state.cov @ w)


def _pa1_signal(state, config):
    G1, g1 = pa_coeffs(config.pa1)
    return abs(G1 * state.mean[XS] + g1 * state.mean[XI])


def _report(state, config, scheme, phi, mean, var, deriv):
    var = max(var, 0.0)
    std = float(np.sqrt(var))
    infinite = deriv == 0.0
    delta = np.inf if infinite else std / abs(deriv)
    ref = _input_reference_variance(state, scheme)
    ratio = var / ref if ref > 0 else np.nan
    base = _pa1_signal(state, config)
    gain = abs(deriv) / base if base > 0 else np.nan
    return SensitivityReport(float(phi), float(delta), float(deriv), std, float(ratio),
                             float(gain), bool(infinite), float(mean))


def sensitivity(state, config, scheme, phi=None):
    """Sensitivity report at bias phase phi (defaults to config.phi0)."""
    phi = _phi(config, phi)
    mean, var = observable_stats(state, config, scheme, phi)
    deriv = signal_derivative(state, config, scheme, phi)
    return _report(state, config, scheme, phi, mean, var, deriv)


def delta_phi(state, config, scheme, phi=None):
    """Shorthand for sensitivity(...).delta_phi."""
    return sensitivity(state, config, scheme, phi).delta_phi


def grid_delta_phi(state, config, scheme, phi=None, L_s=None, L_i=None, l_s=None, l_i=None,
                   threads=1, backend=None):
    """Sensitivity over a broadcast grid of phases and losses using the fast kernel.

    Unspecified grid axes take their value from `config`. Points with an exactly
    vanishing slope are returned as inf.

    Returns:
        Array of delta_phi with the broadcast shape of the inputs.
    """
    losses = config.effective_losses
    grid = dict(phi=config.phi0 if phi is None else phi,
                L_s=losses.L_s if L_s is None else L_s,
                L_i=losses.L_i if L_i is None else L_i,
                l_s=losses.l_s if l_s is None else l_s,
                l_i=losses.l_i if l_i is None else l_i)
    for name in ("L_s", "L_i", "l_s", "l_i"):
        v = np.asarray(grid[name], dtype=float)
        if np.any(v < 0) or np.any(v >= 1) or not np.all(np.isfinite(v)):
            raise ValueError(f"loss {name} must lie in [0, 1)")
    if config.topology is Topology.TRUNCATED:
        grid["L_s"] = grid["L_i"] = 0.0
    G1, g1 = pa_coeffs(config.pa1)
    G2, g2 = pa_coeffs(config.pa2)
    ws, wi = scheme.port.weights
    topo = 0 if config.topology is Topology.FULL else 1
    _, var, slope = kernels.grid_stats(state.mean, state.cov, topo, G1, g1, G2, g2, ws, wi,
                                       scheme.theta, threads=threads, backend=backend, **grid)
    std = np.sqrt(np.maximum(var, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(slope == 0.0, np.inf, std / np.abs(slope))
    return out


def optimize_phase(state, config, scheme, grid_points=512, tol=PHASE_TOL, backend=None):
    """Minimize delta_phi over the bias phase.

    A uniform grid on [0, 2 pi) locates the best cell, then a bounded Brent
    search (golden-section steps with parabolic acceleration) refines phi to
    `tol`.

    Returns:
        (phi_star in [0, 2 pi), SensitivityReport at phi_star)

    Raises:
        NoFiniteMinimumError: If every grid point has infinite sensitivity.
    """
    if grid_points < 16:
        raise ValueError("grid_points must be at least 16")
    h = 2.0 * np.pi / grid_points
    phis = np.arange(grid_points) * h
    values = grid_delta_phi(state, config, scheme, phi=phis, backend=backend)
    finite = np.isfinite(values)
    if not finite.any():
        raise NoFiniteMinimumError("sensitivity is infinite at every grid phase")
    k = int(np.argmin(np.where(finite, values, np.inf)))

    def objective(p):
        value = float(grid_delta_phi(state, config, scheme, phi=np.array([p]), backend=backend)[0])
        return value if np.isfinite(value) else 1e300

    res = minimize_scalar(objective, bounds=(phis[k] - h, phis[k] + h), method="bounded",
                          options={"xatol": tol})
    phi_star = float(res.x) if res.fun <= values[k] else float(phis[k])
    phi_star = float(np.mod(phi_star, 2.0 * np.pi))
    return phi_star, sensitivity(state, config, scheme, phi_star)
