"""Linear optics of full and truncated SU(1,1) interferometers.

Two equivalent descriptions are built here:

* complex mode coefficients, a_s_out = A a_s + B a_i^dagger + ports and
  a_i_out = C a_i + D a_s^dagger + ports, with the vacuum ports of the loss
  beam splitters kept explicitly;
* a real symplectic matrix acting on (X_s, Y_s, X_i, Y_i, ancilla quadratures).

Element order follows the physical layout: PA1, phase shift on the signal arm,
internal loss, PA2, external loss. The truncated device is PA1, phase, loss.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .states import omega


class Topology(str, Enum):
    FULL = "full"
    TRUNCATED = "truncated"


class Sign(str, Enum):
    """Photocurrent combination of a joint measurement.

    PLUS measures Y_+ = Y_s + Y_i and uses E = A - D*, the upper sign of the
    E = A -/+ D* ladder. MINUS measures Y_- = Y_s - Y_i with E = A + D*.
    """

    PLUS = "plus"
    MINUS = "minus"

    @property
    def upper(self):
        """+1 for the upper sign of a -/+ or +/- pair (PLUS), -1 otherwise."""
        return 1.0 if self is Sign.PLUS else -1.0


@dataclass(frozen=True)
class PAGain:
    """Parametric amplifier with squeezing parameter r; G = cosh r, g = sinh r."""

    r: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise ValueError(f"squeezing parameter must be finite and >= 0, got {self.r}")

    @classmethod
    def from_gain(cls, G):
        if not np.isfinite(G) or G < 1.0:
            raise ValueError(f"amplitude gain G must be >= 1, got {G}")
        return cls(float(np.arccosh(G)))

    @property
    def G(self):
        return float(np.cosh(self.r))

    @property
    def g(self):
        return float(np.sinh(self.r))


def pa_coeffs(pa):
    """Return the Bogoliubov pair (G, g) = (cosh r, sinh r)."""
    return pa.G, pa.g


@dataclass(frozen=True)
class LossBudget:
    """Intensity losses: internal (L_s, L_i) between the PAs, external (l_s, l_i) before detection."""

    L_s: float = 0.0
    L_i: float = 0.0
    l_s: float = 0.0
    l_i: float = 0.0

    def __post_init__(self):
        for name in ("L_s", "L_i", "l_s", "l_i"):
            v = getattr(self, name)
            if not np.isfinite(v) or not 0.0 <= v < 1.0:
                raise ValueError(f"loss {name} must lie in [0, 1), got {v}")

    @property
    def has_internal(self):
        return self.L_s > 0 or self.L_i > 0

    @property
    def has_external(self):
        return self.l_s > 0 or self.l_i > 0

    @property
    def lossless(self):
        return not (self.has_internal or self.has_external)


@dataclass(frozen=True)
class InterferometerConfig:
    """Device description. Truncated devices ignore pa2 and the internal losses."""

    topology: Topology = Topology.FULL
    pa1: PAGain = field(default_factory=PAGain)
    pa2: PAGain = field(default_factory=PAGain)
    phi0: float = np.pi
    losses: LossBudget = field(default_factory=LossBudget)

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        if not np.isfinite(self.phi0):
            raise ValueError("bias phase must be finite")

    def with_phase(self, phi):
        return replace(self, phi0=float(phi))

    def with_losses(self, **losses):
        return replace(self, losses=replace(self.losses, **losses))

    @property
    def effective_losses(self):
        """Losses that actually act: internal ones are dropped for truncated devices."""
        if self.topology is Topology.TRUNCATED:
            return replace(self.losses, L_s=0.0, L_i=0.0)
        return self.losses


def full_config(G1, G2=None, phi0=np.pi, L_s=0.0, L_i=0.0, l_s=0.0, l_i=0.0):
    """Full interferometer from amplitude gains; G2 defaults to G1 (balanced)."""
    G2 = G1 if G2 is None else G2
    return InterferometerConfig(Topology.FULL, PAGain.from_gain(G1), PAGain.from_gain(G2),
                                phi0, LossBudget(L_s, L_i, l_s, l_i))


def truncated_config(G, phi0=np.pi, l_s=0.0, l_i=0.0):
    return InterferometerConfig(Topology.TRUNCATED, PAGain.from_gain(G), PAGain(),
                                phi0, LossBudget(0.0, 0.0, l_s, l_i))


@dataclass(frozen=True, eq=False)
class TransferCoeffs:
    """Mode coefficients of the interferometer output.

    Ancillas are the vacuum ports of the loss beam splitters. Signal-type
    ancillas (from L_s, then l_s) enter a_s_out as b (coefficients Ap) and
    a_i_out as b^dagger (Dp). Idler-type ancillas (from L_i, then l_i) enter
    a_s_out as b^dagger (Bp) and a_i_out as b (Cp). Only active losses get an
    entry.
    """

    A: complex
    B: complex
    C: complex
    D: complex
    Ap: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    Dp: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    Bp: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    Cp: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        for name in ("Ap", "Dp", "Bp", "Cp"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex).ravel())

    @property
    def kappa_A(self):
        return float(np.angle(self.A))

    @property
    def kappa_B(self):
        return float(np.angle(self.B))

    @property
    def kappa_C(self):
        return float(np.angle(self.C))

    @property
    def kappa_D(self):
        return float(np.angle(self.D))

    @property
    def signal_port_noise(self):
        """Vacuum noise added to a signal-port quadrature: sum |A'|^2 + |B'|^2."""
        return float(np.sum(np.abs(self.Ap) ** 2) + np.sum(np.abs(self.Bp) ** 2))

    @property
    def idler_port_noise(self):
        return float(np.sum(np.abs(self.Cp) ** 2) + np.sum(np.abs(self.Dp) ** 2))


@dataclass(frozen=True, eq=False)
class JointCoeffs:
    """Coefficients of Y_+/- = 2 Im(E a_s) +/- 2 Im(F a_i) + port terms."""

    E: complex
    F: complex
    Ep: np.ndarray
    Fp: np.ndarray
    sign: Sign

    @property
    def port_noise(self):
        return float(np.sum(np.abs(self.Ep) ** 2) + np.sum(np.abs(self.Fp) ** 2))


def _transmissions(losses):
    t = {k: np.sqrt(1.0 - getattr(losses, k)) for k in ("L_s", "L_i", "l_s", "l_i")}
    r = {k: np.sqrt(getattr(losses, k)) for k in ("L_s", "L_i", "l_s", "l_i")}
    return t, r


def compose_full(pa1, pa2, phi):
    """Lossless full interferometer coefficients."""
    return compose_full_lossy(InterferometerConfig(Topology.FULL, pa1, pa2, phi))


def compose_truncated(pa1, phi):
    """Lossless truncated interferometer: A = G e^{i phi}, B = g e^{i phi}, C = G, D = g."""
    return compose_truncated_lossy(InterferometerConfig(Topology.TRUNCATED, pa1, PAGain(), phi))


def compose_full_lossy(config, phi=None):
    """Full interferometer with internal and external losses.

    Internal loss gives A_L = G1 G2 sqrt(1-L_s) e^{i phi} + g1 g2 sqrt(1-L_i)
    with ports A'_L = G2 sqrt(L_s), B'_L = g2 sqrt(L_i), C'_L = G2 sqrt(L_i),
    D'_L = g2 sqrt(L_s). External loss then scales the signal row by
    sqrt(1-l_s), the idler row by sqrt(1-l_i), and adds ports sqrt(l_s), sqrt(l_i).
    """
    phi = config.phi0 if phi is None else phi
    G1, g1 = pa_coeffs(config.pa1)
    G2, g2 = pa_coeffs(config.pa2)
    losses = config.losses
    t, r = _transmissions(losses)
    e = np.exp(1j * phi)
    A = (G1 * G2 * t["L_s"] * e + g1 * g2 * t["L_i"]) * t["l_s"]
    B = (G2 * g1 * t["L_s"] * e + G1 * g2 * t["L_i"]) * t["l_s"]
    C = (G1 * G2 * t["L_i"] + g1 * g2 * t["L_s"] * np.conj(e)) * t["l_i"]
    D = (G2 * g1 * t["L_i"] + G1 * g2 * t["L_s"] * np.conj(e)) * t["l_i"]
    Ap, Dp, Bp, Cp = [], [], [], []
    if losses.L_s > 0:
        Ap.append(G2 * r["L_s"] * t["l_s"])
        Dp.append(g2 * r["L_s"] * t["l_i"])
    if losses.l_s > 0:
        Ap.append(r["l_s"])
        Dp.append(0.0)
    if losses.L_i > 0:
        Bp.append(g2 * r["L_i"] * t["l_s"])
        Cp.append(G2 * r["L_i"] * t["l_i"])
    if losses.l_i > 0:
        Bp.append(0.0)
        Cp.append(r["l_i"])
    return TransferCoeffs(A, B, C, D, Ap, Dp, Bp, Cp)


def compose_truncated_lossy(config, phi=None):
    """Truncated interferometer with pre-detection losses l_s, l_i."""
    phi = config.phi0 if phi is None else phi
    G, g = pa_coeffs(config.pa1)
    losses = config.effective_losses
    t, r = _transmissions(losses)
    e = np.exp(1j * phi)
    Ap = [r["l_s"]] if losses.l_s > 0 else []
    Cp = [r["l_i"]] if losses.l_i > 0 else []
    return TransferCoeffs(G * e * t["l_s"], g * e * t["l_s"], G * t["l_i"], g * t["l_i"],
                          Ap, [0.0] * len(Ap), [0.0] * len(Cp), Cp)


def transfer_coeffs(config, phi=None):
    """Coefficients for any configuration."""
    if config.topology is Topology.TRUNCATED:
        return compose_truncated_lossy(config, phi)
    return compose_full_lossy(config, phi)


def transfer_coeffs_dphi(config, phi=None):
    """Phase derivatives dA/dphi, ..., dD/dphi. Port couplings do not depend on phi."""
    phi = config.phi0 if phi is None else phi
    t, _ = _transmissions(config.effective_losses)
    e = np.exp(1j * phi)
    G1, g1 = pa_coeffs(config.pa1)
    if config.topology is Topology.TRUNCATED:
        return TransferCoeffs(1j * G1 * e * t["l_s"], 1j * g1 * e * t["l_s"], 0.0, 0.0)
    G2, g2 = pa_coeffs(config.pa2)
    dA = 1j * G1 * G2 * t["L_s"] * e * t["l_s"]
    dB = 1j * G2 * g1 * t["L_s"] * e * t["l_s"]
    dC = -1j * g1 * g2 * t["L_s"] * np.conj(e) * t["l_i"]
    dD = -1j * G1 * g2 * t["L_s"] * np.conj(e) * t["l_i"]
    return TransferCoeffs(dA, dB, dC, dD)


def joint_coeffs(tc, sign, theta=0.0):
    """Joint-detection coefficients E = A -/+ D*, F = C -/+ B* (upper sign: PLUS).

    A nonzero local-oscillator angle theta rotates every output coefficient by
    e^{i theta} before combining, so E = e^{i theta} A -/+ e^{-i theta} D*.
    """
    sign = Sign(sign)
    s = sign.upper
    rot = np.exp(1j * theta)
    E = rot * tc.A - s * np.conj(rot * tc.D)
    F = rot * tc.C - s * np.conj(rot * tc.B)
    Ep = rot * tc.Ap - s * np.conj(rot * tc.Dp)
    Fp = rot * tc.Cp - s * np.conj(rot * tc.Bp)
    return JointCoeffs(complex(E), complex(F), Ep, Fp, sign)


# --- symplectic description -------------------------------------------------

def _ancilla_layout(config):
    """Ordered (loss name, mode index) pairs for every active loss."""
    losses = config.effective_losses
    order = (("L_s", 0), ("L_i", 1), ("l_s", 0), ("l_i", 1))
    return [(name, mode) for name, mode in order if getattr(losses, name) > 0]


def _pa_matrix(n, G, g):
    S = np.eye(n)
    S[:4, :4] = [[G, 0, g, 0],
                 [0, G, 0, -g],
                 [g, 0, G, 0],
                 [0, -g, 0, G]]
    return S


def _phase_matrix(n, phi, derivative=False):
    c, s = np.cos(phi), np.sin(phi)
    if derivative:
        S = np.zeros((n, n))
        S[:2, :2] = [[-s, -c], [c, -s]]
    else:
        S = np.eye(n)
        S[:2, :2] = [[c, -s], [s, c]]
    return S


def _loss_matrix(n, mode, anc, L):
    """Beam splitter mixing a mode with a vacuum ancilla; an orthogonal 4x4 block."""
    t, r = np.sqrt(1.0 - L), np.sqrt(L)
    S = np.eye(n)
    m = 2 * mode
    a = 4 + 2 * anc
    for q in range(2):
        S[m + q, m + q] = t
        S[m + q, a + q] = r
        S[a + q, m + q] = -r
        S[a + q, a + q] = t
    return S


def _stages(config, phi):
    """Matrices before and after the phase shift, in the extended space."""
    layout = _ancilla_layout(config)
    n = 4 + 2 * len(layout)
    losses = config.effective_losses
    G1, g1 = pa_coeffs(config.pa1)
    pre = _pa_matrix(n, G1, g1)
    post = np.eye(n)
    internal = [(k, name, mode) for k, (name, mode) in enumerate(layout) if name.startswith("L")]
    external = [(k, name, mode) for k, (name, mode) in enumerate(layout) if name.startswith("l")]
    for k, name, mode in internal:
        post = _loss_matrix(n, mode, k, getattr(losses, name)) @ post
    if config.topology is Topology.FULL:
        G2, g2 = pa_coeffs(config.pa2)
        post = _pa_matrix(n, G2, g2) @ post
    for k, name, mode in external:
        post = _loss_matrix(n, mode, k, getattr(losses, name)) @ post
    return pre, post, n


def build_symplectic(config, phi=None):
    """Real symplectic matrix on the loss-extended quadrature vector.

    Returns:
        (S, n_anc): S has shape (4 + 2 n_anc, 4 + 2 n_anc); rows 0..3 give the
        output (X_s, Y_s, X_i, Y_i) and the ancillas start in vacuum.
    """
    phi = config.phi0 if phi is None else phi
    pre, post, n = _stages(config, phi)
    S = post @ _phase_matrix(n, phi) @ pre
    return S, (n - 4) // 2


def build_symplectic_dphi(config, phi=None):
    """Exact derivative dS/dphi of `build_symplectic`."""
    phi = config.phi0 if phi is None else phi
    pre, post, n = _stages(config, phi)
    return post @ _phase_matrix(n, phi, derivative=True) @ pre


def is_symplectic(S, tol=1e-10):
    n_modes = S.shape[0] // 2
    Om = omega(n_modes)
    return bool(np.max(np.abs(S.T @ Om @ S - Om)) <= tol)
