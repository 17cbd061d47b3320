"""Closed-form phase sensitivities of SU(1,1) interferometers.

Every expression is evaluated literally from the input moments: means
<X_s>, <X_i>, variances V_s = var(Y_s), V_i = var(Y_i) and the cross
covariance c = cov(Y_s, Y_i). Gains enter as G = cosh r, g = sinh r.

Sign ladders follow one rule: `sign` PLUS takes the upper sign of every
-/+ or +/- pair and corresponds to the summed photocurrent Y_+. Unbalanced
expressions are G2 >> G1 asymptotics and are labeled as such.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .optics import InterferometerConfig, LossBudget, PAGain, Sign, Topology, pa_coeffs
from .states import XI, XS, YI, YS

FRINGE_TOL = 1e-9
SYMMETRY_TOL = 1e-12


class FringeMismatchError(ValueError):
    """Raised when a fringe-specific formula is evaluated at another bias phase."""


class FormId(str, Enum):
    # lossless full interferometer
    SP_DARK_GENERAL = "sp-dark-general"
    SP_DARK_BALANCED = "sp-dark-balanced"
    SP_DARK_UNBALANCED = "sp-dark-unbalanced"
    IDLER_DARK = "idler-dark"
    JOINT_GENERAL = "joint-general"
    JOINT_DARK = "joint-dark"
    JOINT_BRIGHT = "joint-bright"
    # internal loss
    SP_INTERNAL_GENERAL = "sp-internal-general"
    SP_INTERNAL_BALANCED = "sp-internal-balanced"
    SP_INTERNAL_UNBALANCED = "sp-internal-unbalanced"
    IDLER_INTERNAL = "idler-internal"
    JOINT_INTERNAL_GENERAL = "joint-internal-general"
    JOINT_INTERNAL_DARK = "joint-internal-dark"
    JOINT_INTERNAL_BRIGHT = "joint-internal-bright"
    # external loss
    SP_EXTERNAL_GENERAL = "sp-external-general"
    SP_EXTERNAL_BALANCED = "sp-external-balanced"
    SP_EXTERNAL_UNBALANCED = "sp-external-unbalanced"
    IDLER_EXTERNAL = "idler-external"
    JOINT_EXTERNAL_GENERAL = "joint-external-general"
    JOINT_EXTERNAL_DARK = "joint-external-dark"
    JOINT_EXTERNAL_BRIGHT = "joint-external-bright"
    # truncated interferometer
    TRUNC_GENERAL = "trunc-general"
    TRUNC_DARK = "trunc-dark"
    TRUNC_BRIGHT = "trunc-bright"
    TRUNC_LOSSY_GENERAL = "trunc-lossy-general"
    TRUNC_LOSSY_DARK = "trunc-lossy-dark"
    TRUNC_LOSSY_BRIGHT = "trunc-lossy-bright"
    # coherent input |alpha, 0>
    COHERENT_SP_ANYPHASE = "coherent-sp-anyphase"
    COHERENT_JOINT_ANYPHASE = "coherent-joint-anyphase"
    COHERENT_SP_BALANCED_MIN = "coherent-sp-balanced-min"
    COHERENT_JOINT_MIN = "coherent-joint-min"
    COHERENT_SP_INTERNAL_MIN = "coherent-sp-internal-min"
    COHERENT_JOINT_INTERNAL_MIN = "coherent-joint-internal-min"
    COHERENT_EXT_SP_BALANCED = "coherent-ext-sp-balanced"
    COHERENT_EXT_SP_UNBALANCED = "coherent-ext-sp-unbalanced"
    COHERENT_EXT_SP_UNBALANCED_ALT = "coherent-ext-sp-unbalanced-alt"
    COHERENT_EXT_JMINUS_DARK = "coherent-ext-jminus-dark"
    COHERENT_EXT_JPLUS_BRIGHT = "coherent-ext-jplus-bright"
    MZI_BASELINE = "mzi-baseline"


@dataclass(frozen=True)
class FormInfo:
    """Metadata of a closed form.

    Attributes:
        fringe: "dark", "bright", "fringe" (dark or bright), "any" or None
            (no bias phase argument).
        loss: "none", "internal" or "external"; the budget must match.
        topology: Device the formula describes.
        port: "signal", "idler" or "joint"; joint forms need a sign.
        asymptotic: True for G2 >> G1 approximations.
        balanced: True when the formula assumes G1 = G2.
        symmetric: True when the formula assumes equal losses in both arms.
        coherent: True for the |alpha, 0> family.
    """

    fringe: object
    loss: str = "none"
    topology: Topology = Topology.FULL
    port: str = "signal"
    asymptotic: bool = False
    balanced: bool = False
    symmetric: bool = False
    coherent: bool = False


_F = FormId
REGISTRY = {
    _F.SP_DARK_GENERAL: FormInfo("dark"),
    _F.SP_DARK_BALANCED: FormInfo("dark", balanced=True),
    _F.SP_DARK_UNBALANCED: FormInfo("dark", asymptotic=True),
    _F.IDLER_DARK: FormInfo("dark", port="idler"),
    _F.JOINT_GENERAL: FormInfo("fringe", port="joint"),
    _F.JOINT_DARK: FormInfo("dark", port="joint"),
    _F.JOINT_BRIGHT: FormInfo("bright", port="joint"),
    _F.SP_INTERNAL_GENERAL: FormInfo("dark", "internal"),
    _F.SP_INTERNAL_BALANCED: FormInfo("dark", "internal", balanced=True, symmetric=True),
    _F.SP_INTERNAL_UNBALANCED: FormInfo("dark", "internal", asymptotic=True, symmetric=True),
    _F.IDLER_INTERNAL: FormInfo("dark", "internal", port="idler"),
    _F.JOINT_INTERNAL_GENERAL: FormInfo("fringe", "internal", port="joint"),
    _F.JOINT_INTERNAL_DARK: FormInfo("dark", "internal", port="joint", symmetric=True),
    _F.JOINT_INTERNAL_BRIGHT: FormInfo("bright", "internal", port="joint", symmetric=True),
    _F.SP_EXTERNAL_GENERAL: FormInfo("dark", "external"),
    _F.SP_EXTERNAL_BALANCED: FormInfo("dark", "external", balanced=True),
    _F.SP_EXTERNAL_UNBALANCED: FormInfo("dark", "external", asymptotic=True),
    _F.IDLER_EXTERNAL: FormInfo("dark", "external", port="idler"),
    _F.JOINT_EXTERNAL_GENERAL: FormInfo("fringe", "external", port="joint"),
    _F.JOINT_EXTERNAL_DARK: FormInfo("dark", "external", port="joint", symmetric=True),
    _F.JOINT_EXTERNAL_BRIGHT: FormInfo("bright", "external", port="joint", symmetric=True),
    _F.TRUNC_GENERAL: FormInfo("fringe", topology=Topology.TRUNCATED, port="joint"),
    _F.TRUNC_DARK: FormInfo("dark", topology=Topology.TRUNCATED, port="joint"),
    _F.TRUNC_BRIGHT: FormInfo("bright", topology=Topology.TRUNCATED, port="joint"),
    _F.TRUNC_LOSSY_GENERAL: FormInfo("fringe", "external", Topology.TRUNCATED, "joint"),
    _F.TRUNC_LOSSY_DARK: FormInfo("dark", "external", Topology.TRUNCATED, "joint", symmetric=True),
    _F.TRUNC_LOSSY_BRIGHT: FormInfo("bright", "external", Topology.TRUNCATED, "joint",
                                    symmetric=True),
    _F.COHERENT_SP_ANYPHASE: FormInfo("any", coherent=True),
    _F.COHERENT_JOINT_ANYPHASE: FormInfo("any", topology=Topology.TRUNCATED, port="joint",
                                         coherent=True),
    _F.COHERENT_SP_BALANCED_MIN: FormInfo(None, balanced=True, coherent=True),
    _F.COHERENT_JOINT_MIN: FormInfo(None, port="joint", coherent=True),
    _F.COHERENT_SP_INTERNAL_MIN: FormInfo(None, "internal", balanced=True, symmetric=True,
                                          coherent=True),
    _F.COHERENT_JOINT_INTERNAL_MIN: FormInfo(None, "internal", port="joint", symmetric=True,
                                             coherent=True),
    _F.COHERENT_EXT_SP_BALANCED: FormInfo(None, "external", balanced=True, coherent=True),
    _F.COHERENT_EXT_SP_UNBALANCED: FormInfo(None, "external", asymptotic=True, coherent=True),
    _F.COHERENT_EXT_SP_UNBALANCED_ALT: FormInfo(None, "external", asymptotic=True,
                                                coherent=True),
    _F.COHERENT_EXT_JMINUS_DARK: FormInfo(None, "external", port="joint", balanced=True,
                                          symmetric=True, coherent=True),
    _F.COHERENT_EXT_JPLUS_BRIGHT: FormInfo(None, "external", port="joint", balanced=True,
                                           symmetric=True, coherent=True),
    _F.MZI_BASELINE: FormInfo(None, coherent=True),
}

# Joint rows of the coherent external-loss table fix their own sign and fringe.
_FIXED_SIGN = {_F.COHERENT_EXT_JMINUS_DARK: (Sign.MINUS, np.pi),
               _F.COHERENT_EXT_JPLUS_BRIGHT: (Sign.PLUS, 0.0),
               _F.COHERENT_JOINT_MIN: (Sign.MINUS, np.pi),
               _F.COHERENT_JOINT_INTERNAL_MIN: (Sign.MINUS, np.pi)}


class EtaContext(str, Enum):
    """Loss contexts with an additive correction factor eta."""

    INTERNAL_BALANCED = "internal-balanced"
    INTERNAL_UNBALANCED = "internal-unbalanced"
    INTERNAL_JOINT_DARK = "internal-joint-dark"
    INTERNAL_JOINT_BRIGHT = "internal-joint-bright"
    EXTERNAL_SP_BALANCED = "external-sp-balanced"
    EXTERNAL_SP_UNBALANCED = "external-sp-unbalanced"
    EXTERNAL_JOINT_DARK = "external-joint-dark"
    EXTERNAL_JOINT_BRIGHT = "external-joint-bright"
    TRUNC_DARK = "trunc-dark"
    TRUNC_BRIGHT = "trunc-bright"


# context -> (lossless form, lossy form)
ETA_FORMS = {
    EtaContext.INTERNAL_BALANCED: (_F.SP_DARK_BALANCED, _F.SP_INTERNAL_BALANCED),
    EtaContext.INTERNAL_UNBALANCED: (_F.SP_DARK_UNBALANCED, _F.SP_INTERNAL_UNBALANCED),
    EtaContext.INTERNAL_JOINT_DARK: (_F.JOINT_DARK, _F.JOINT_INTERNAL_DARK),
    EtaContext.INTERNAL_JOINT_BRIGHT: (_F.JOINT_BRIGHT, _F.JOINT_INTERNAL_BRIGHT),
    EtaContext.EXTERNAL_SP_BALANCED: (_F.SP_DARK_BALANCED, _F.SP_EXTERNAL_BALANCED),
    EtaContext.EXTERNAL_SP_UNBALANCED: (_F.SP_DARK_UNBALANCED, _F.SP_EXTERNAL_UNBALANCED),
    EtaContext.EXTERNAL_JOINT_DARK: (_F.JOINT_DARK, _F.JOINT_EXTERNAL_DARK),
    EtaContext.EXTERNAL_JOINT_BRIGHT: (_F.JOINT_BRIGHT, _F.JOINT_EXTERNAL_BRIGHT),
    EtaContext.TRUNC_DARK: (_F.TRUNC_DARK, _F.TRUNC_LOSSY_DARK),
    EtaContext.TRUNC_BRIGHT: (_F.TRUNC_BRIGHT, _F.TRUNC_LOSSY_BRIGHT),
}


@dataclass(frozen=True)
class EtaCorrection:
    value: float
    context: EtaContext


@dataclass(frozen=True)
class _Inputs:
    G1: float
    g1: float
    G2: float
    g2: float
    losses: LossBudget
    phi: float
    e: float            # cos(phi); +/-1 at a fringe
    s: float            # +1 for PLUS, -1 for MINUS, 0 for single-port forms
    Vs: float
    Vi: float
    c: float
    S: float            # |G1 <X_s> + g1 <X_i>|
    alpha: float        # |alpha| of the signal input


# --- literal coefficient values at a fringe --------------------------------

def _full_at(p, e, t_Ls=1.0, t_Li=1.0, t_ls=1.0, t_li=1.0):
    """Real A, B, C, D of the full interferometer at e = cos(phi) = +/-1."""
    G1, g1, G2, g2 = p.G1, p.g1, p.G2, p.g2
    A = (G1 * G2 * t_Ls * e + g1 * g2 * t_Li) * t_ls
    B = (G2 * g1 * t_Ls * e + G1 * g2 * t_Li) * t_ls
    C = (G1 * G2 * t_Li + g1 * g2 * t_Ls * e) * t_li
    D = (G2 * g1 * t_Li + G1 * g2 * t_Ls * e) * t_li
    return A, B, C, D


def _trunc_at(p, e, t_ls=1.0, t_li=1.0):
    return p.G1 * e * t_ls, p.g1 * e * t_ls, p.G1 * t_li, p.g1 * t_li


def _joint(A, B, C, D, s):
    """E = A -/+ D*, F = C -/+ B* for real fringe coefficients."""
    return A - s * D, C - s * B


def _quad(a, b, p):
    """a^2 V_s + b^2 V_i + 2|a||b| c."""
    return a * a * p.Vs + b * b * p.Vi + 2.0 * abs(a) * abs(b) * p.c


def _vsum(p):
    return p.Vs + p.Vi + 2.0 * p.c


def _t(x):
    return np.sqrt(1.0 - x)


# --- eta ------------------------------------------------------------------

def _eta_value(context, p):
    L = p.losses
    G1, g1, G2, g2, s = p.G1, p.g1, p.G2, p.g2, p.s
    ctx = EtaContext(context)
    if ctx is EtaContext.INTERNAL_BALANCED:
        return L.L_s / (1 - L.L_s) * (G1 ** 2 + g1 ** 2)
    if ctx is EtaContext.INTERNAL_UNBALANCED:
        return 2 * L.L_s / (1 - L.L_s) * (G1 + g1) ** 2
    if ctx is EtaContext.INTERNAL_JOINT_DARK:
        return 2 * L.L_s / (1 - L.L_s) * (G1 - s * g1) ** 2
    if ctx is EtaContext.INTERNAL_JOINT_BRIGHT:
        return 2 * L.L_s / (1 - L.L_s) * (G1 + s * g1) ** 2
    if ctx is EtaContext.EXTERNAL_SP_BALANCED:
        return L.l_s / (1 - L.l_s)
    if ctx is EtaContext.EXTERNAL_SP_UNBALANCED:
        return L.l_s / (1 - L.l_s) * ((G1 + g1) / G2) ** 2
    if ctx is EtaContext.EXTERNAL_JOINT_DARK:
        return 2 * L.l_s / (1 - L.l_s) * ((G2 + s * g2) / (G1 + s * g1)) ** 2
    if ctx is EtaContext.EXTERNAL_JOINT_BRIGHT:
        return 2 * L.l_s / (1 - L.l_s) * ((G2 + s * g2) / (G1 - s * g1)) ** 2
    if ctx is EtaContext.TRUNC_DARK:
        return 2 * L.l_s / (1 - L.l_s) * (G1 - s * g1) ** 2
    return 2 * L.l_s / (1 - L.l_s) * (G1 + s * g1) ** 2


# --- closed forms as (numerator^2, denominator) ---------------------------

def _sp_dark_general(p):
    A, B, _, _ = _full_at(p, -1.0)
    return _quad(A, B, p), p.G2 * p.S


def _sp_dark_balanced(p):
    return p.Vs, p.G1 * p.S


def _sp_dark_unbalanced(p):
    return _vsum(p), (p.G1 + p.g1) * p.S


def _idler_dark(p):
    _, _, C, D = _full_at(p, -1.0)
    return _quad(D, C, p), p.g2 * p.S


def _joint_general(p):
    E, F = _joint(*_full_at(p, p.e), p.s)
    return _quad(E, F, p), (p.G2 - p.s * p.g2) * p.S


def _joint_dark(p):
    return _vsum(p), (p.G1 - p.s * p.g1) * p.S


def _joint_bright(p):
    return _vsum(p), (p.G1 + p.s * p.g1) * p.S


def _internal_t(p):
    return _t(p.losses.L_s), _t(p.losses.L_i)


def _sp_internal_general(p):
    L = p.losses
    A, B, _, _ = _full_at(p, -1.0, *_internal_t(p))
    ports = p.G2 ** 2 * L.L_s + p.g2 ** 2 * L.L_i      # |A'_L|^2 + |B'_L|^2
    return _quad(A, B, p) + ports, _t(L.L_s) * p.G2 * p.S


def _sp_internal_balanced(p):
    return p.Vs + _eta_value(EtaContext.INTERNAL_BALANCED, p), p.G1 * p.S


def _sp_internal_unbalanced(p):
    return _vsum(p) + _eta_value(EtaContext.INTERNAL_UNBALANCED, p), (p.G1 + p.g1) * p.S


def _idler_internal(p):
    L = p.losses
    _, _, C, D = _full_at(p, -1.0, *_internal_t(p))
    ports = p.G2 ** 2 * L.L_i + p.g2 ** 2 * L.L_s      # |C'_L|^2 + |D'_L|^2
    return _quad(D, C, p) + ports, _t(L.L_s) * p.g2 * p.S


def _joint_internal_general(p):
    L = p.losses
    E, F = _joint(*_full_at(p, p.e, *_internal_t(p)), p.s)
    k = p.G2 - p.s * p.g2
    ports = k ** 2 * (L.L_s + L.L_i)                   # |E'_L|^2 + |F'_L|^2
    return _quad(E, F, p) + ports, _t(L.L_s) * k * p.S


def _joint_internal_dark(p):
    return _vsum(p) + _eta_value(EtaContext.INTERNAL_JOINT_DARK, p), (p.G1 - p.s * p.g1) * p.S


def _joint_internal_bright(p):
    return _vsum(p) + _eta_value(EtaContext.INTERNAL_JOINT_BRIGHT, p), (p.G1 + p.s * p.g1) * p.S


def _sp_external_general(p):
    L = p.losses
    A, B, _, _ = _full_at(p, -1.0, t_ls=_t(L.l_s))
    return _quad(A, B, p) + L.l_s, _t(L.l_s) * p.G2 * p.S


def _sp_external_balanced(p):
    return p.Vs + _eta_value(EtaContext.EXTERNAL_SP_BALANCED, p), p.G1 * p.S


def _sp_external_unbalanced(p):
    return _vsum(p) + _eta_value(EtaContext.EXTERNAL_SP_UNBALANCED, p), (p.G1 + p.g1) * p.S


def _idler_external(p):
    L = p.losses
    _, _, C, D = _full_at(p, -1.0, t_li=_t(L.l_i))
    return _quad(D, C, p) + L.l_i, _t(L.l_i) * p.g2 * p.S


def _joint_external_general(p):
    L = p.losses
    A, B, C, D = _full_at(p, p.e, t_ls=_t(L.l_s), t_li=_t(L.l_i))
    E, F = _joint(A, B, C, D, p.s)
    den = (_t(L.l_s) * p.G2 - p.s * _t(L.l_i) * p.g2) * p.S
    return _quad(E, F, p) + L.l_s + L.l_i, den


def _joint_external_dark(p):
    return _vsum(p) + _eta_value(EtaContext.EXTERNAL_JOINT_DARK, p), (p.G1 - p.s * p.g1) * p.S


def _joint_external_bright(p):
    return (_vsum(p) + _eta_value(EtaContext.EXTERNAL_JOINT_BRIGHT, p),
            (p.G1 + p.s * p.g1) * p.S)


def _trunc_general(p):
    E, F = _joint(*_trunc_at(p, p.e), p.s)
    return _quad(E, F, p), p.S


def _trunc_dark(p):
    return _vsum(p), (p.G1 - p.s * p.g1) * p.S


def _trunc_bright(p):
    return _vsum(p), (p.G1 + p.s * p.g1) * p.S


def _trunc_lossy_general(p):
    L = p.losses
    E, F = _joint(*_trunc_at(p, p.e, _t(L.l_s), _t(L.l_i)), p.s)
    return _quad(E, F, p) + L.l_s + L.l_i, _t(L.l_s) * p.S


def _trunc_lossy_dark(p):
    return _vsum(p) + _eta_value(EtaContext.TRUNC_DARK, p), (p.G1 - p.s * p.g1) * p.S


def _trunc_lossy_bright(p):
    return _vsum(p) + _eta_value(EtaContext.TRUNC_BRIGHT, p), (p.G1 + p.s * p.g1) * p.S


def _coherent_sp_anyphase(p):
    G1, g1, G2, g2, cphi = p.G1, p.g1, p.G2, p.g2, p.e
    num2 = (G1 ** 2 + g1 ** 2) * (G2 ** 2 + g2 ** 2) + 4 * G1 * G2 * g1 * g2 * cphi
    return num2, 2 * G1 * G2 * abs(cphi) * p.alpha


def _coherent_joint_anyphase(p):
    G1, g1, cphi = p.G1, p.g1, p.e
    return G1 ** 2 - 2 * p.s * G1 * g1 * cphi + g1 ** 2, np.sqrt(2) * G1 * abs(cphi) * p.alpha


def _joint_min_den(p):
    return np.sqrt(2) * p.G1 * (p.G1 + p.g1) * p.alpha


def _coherent_sp_balanced_min(p):
    return 1.0, 2 * p.G1 ** 2 * p.alpha


def _coherent_joint_min(p):
    return 1.0, _joint_min_den(p)


def _coherent_sp_internal_min(p):
    L = p.losses.L_s
    return 1 + L / (1 - L) * (p.G1 ** 2 + p.g1 ** 2), 2 * p.G1 ** 2 * p.alpha


def _coherent_joint_internal_min(p):
    L = p.losses.L_s
    return 1 + L / (1 - L) * (p.G1 + p.g1) ** 2, _joint_min_den(p)


def _coherent_ext_sp_balanced(p):
    l = p.losses.l_s
    return 1 + l / (1 - l), 2 * p.G1 ** 2 * p.alpha


def _coherent_ext_sp_unbalanced(p):
    l = p.losses.l_s
    return 1 + l / (2 * (1 - l)) * ((p.G1 + p.g1) / p.G2) ** 2, _joint_min_den(p)


def _coherent_ext_sp_unbalanced_alt(p):
    l = p.losses.l_s
    return 1 + l / (1 - l) * ((p.G1 + p.g1) / p.G2) ** 2, _joint_min_den(p)


def _coherent_ext_jminus_dark(p):
    l = p.losses.l_s
    return 1 + l / (1 - l), _joint_min_den(p)


def _coherent_ext_jplus_bright(p):
    l = p.losses.l_s
    return 1 + l / (1 - l) * (p.G1 + p.g1) ** 4, _joint_min_den(p)


def _mzi_baseline(p):
    return 1.0, p.alpha


_FORMS = {
    _F.SP_DARK_GENERAL: _sp_dark_general,
    _F.SP_DARK_BALANCED: _sp_dark_balanced,
    _F.SP_DARK_UNBALANCED: _sp_dark_unbalanced,
    _F.IDLER_DARK: _idler_dark,
    _F.JOINT_GENERAL: _joint_general,
    _F.JOINT_DARK: _joint_dark,
    _F.JOINT_BRIGHT: _joint_bright,
    _F.SP_INTERNAL_GENERAL: _sp_internal_general,
    _F.SP_INTERNAL_BALANCED: _sp_internal_balanced,
    _F.SP_INTERNAL_UNBALANCED: _sp_internal_unbalanced,
    _F.IDLER_INTERNAL: _idler_internal,
    _F.JOINT_INTERNAL_GENERAL: _joint_internal_general,
    _F.JOINT_INTERNAL_DARK: _joint_internal_dark,
    _F.JOINT_INTERNAL_BRIGHT: _joint_internal_bright,
    _F.SP_EXTERNAL_GENERAL: _sp_external_general,
    _F.SP_EXTERNAL_BALANCED: _sp_external_balanced,
    _F.SP_EXTERNAL_UNBALANCED: _sp_external_unbalanced,
    _F.IDLER_EXTERNAL: _idler_external,
    _F.JOINT_EXTERNAL_GENERAL: _joint_external_general,
    _F.JOINT_EXTERNAL_DARK: _joint_external_dark,
    _F.JOINT_EXTERNAL_BRIGHT: _joint_external_bright,
    _F.TRUNC_GENERAL: _trunc_general,
    _F.TRUNC_DARK: _trunc_dark,
    _F.TRUNC_BRIGHT: _trunc_bright,
    _F.TRUNC_LOSSY_GENERAL: _trunc_lossy_general,
    _F.TRUNC_LOSSY_DARK: _trunc_lossy_dark,
    _F.TRUNC_LOSSY_BRIGHT: _trunc_lossy_bright,
    _F.COHERENT_SP_ANYPHASE: _coherent_sp_anyphase,
    _F.COHERENT_JOINT_ANYPHASE: _coherent_joint_anyphase,
    _F.COHERENT_SP_BALANCED_MIN: _coherent_sp_balanced_min,
    _F.COHERENT_JOINT_MIN: _coherent_joint_min,
    _F.COHERENT_SP_INTERNAL_MIN: _coherent_sp_internal_min,
    _F.COHERENT_JOINT_INTERNAL_MIN: _coherent_joint_internal_min,
    _F.COHERENT_EXT_SP_BALANCED: _coherent_ext_sp_balanced,
    _F.COHERENT_EXT_SP_UNBALANCED: _coherent_ext_sp_unbalanced,
    _F.COHERENT_EXT_SP_UNBALANCED_ALT: _coherent_ext_sp_unbalanced_alt,
    _F.COHERENT_EXT_JMINUS_DARK: _coherent_ext_jminus_dark,
    _F.COHERENT_EXT_JPLUS_BRIGHT: _coherent_ext_jplus_bright,
    _F.MZI_BASELINE: _mzi_baseline,
}


# --- validation and evaluation --------------------------------------------

def fringe_of(phi, tol=FRINGE_TOL):
    """"dark" for odd multiples of pi, "bright" for even ones, else "generic"."""
    k = np.round(phi / np.pi)
    if abs(phi - k * np.pi) >= tol:
        return "generic"
    return "bright" if int(k) % 2 == 0 else "dark"


def _default_phi(info):
    return 0.0 if info.fringe == "bright" else np.pi


def _check_losses(form_id, info, losses):
    if info.loss != "internal" and losses.has_internal:
        raise ValueError(f"{form_id.value} does not model internal loss")
    if info.loss != "external" and losses.has_external:
        raise ValueError(f"{form_id.value} does not model external loss")
    if info.symmetric:
        a, b = (losses.L_s, losses.L_i) if info.loss == "internal" else (losses.l_s, losses.l_i)
        if abs(a - b) > SYMMETRY_TOL:
            raise ValueError(f"{form_id.value} assumes equal losses in both arms, got {a} and {b}")


def _coherent_alpha(form_id, state):
    """|alpha| of a |alpha, 0> input; rejects other states."""
    if not (np.allclose(state.cov, np.eye(4), atol=1e-12, rtol=0)
            and abs(state.mean[XI]) <= 1e-12 and abs(state.mean[YI]) <= 1e-12):
        raise ValueError(f"{form_id.value} requires a coherent signal and vacuum idler")
    return abs(state.alpha_s)


def _inputs(form_id, state, pa1, pa2, losses, phi, sign):
    form_id = FormId(form_id)
    info = REGISTRY[form_id]
    pa2 = PAGain() if pa2 is None else pa2
    losses = LossBudget() if losses is None else losses
    _check_losses(form_id, info, losses)
    G1, g1 = pa_coeffs(pa1)
    G2, g2 = pa_coeffs(pa2)
    if info.balanced and abs(pa1.r - pa2.r) > SYMMETRY_TOL:
        raise ValueError(f"{form_id.value} assumes equal gains G1 = G2")
    if form_id in _FIXED_SIGN:
        sign, phi = _FIXED_SIGN[form_id]
    if info.port == "joint":
        if sign is None:
            raise ValueError(f"{form_id.value} needs an explicit sign")
        s = Sign(sign).upper
    else:
        s = 0.0
    if phi is None:
        phi = _default_phi(info)
    phi = float(phi)
    where = fringe_of(phi)
    if info.fringe in ("dark", "bright") and where != info.fringe:
        raise FringeMismatchError(f"{form_id.value} holds at the {info.fringe} fringe, "
                                  f"got phi = {phi!r} ({where})")
    if info.fringe == "fringe" and where == "generic":
        raise FringeMismatchError(f"{form_id.value} holds at a dark or bright fringe, got {phi!r}")
    e = np.cos(phi) if info.fringe == "any" else (1.0 if where == "bright" else -1.0)
    if info.coherent:
        alpha = _coherent_alpha(form_id, state)
        return _Inputs(G1, g1, G2, g2, losses, phi, e, s, 1.0, 1.0, 0.0, 0.0, alpha)
    m = state.mean
    return _Inputs(G1, g1, G2, g2, losses, phi, e, s,
                   state.variance(YS), state.variance(YI), state.covariance(YS, YI),
                   abs(G1 * m[XS] + g1 * m[XI]), abs(state.alpha_s))


def _ratio(num2, den):
    if den == 0:
        return np.inf
    return float(np.sqrt(num2) / abs(den))


def closed_form_parts(form_id, state, pa1, pa2=None, losses=None, phi=None, sign=None):
    """(numerator^2, denominator) of a closed form, so that delta_phi = sqrt(num2)/den."""
    p = _inputs(form_id, state, pa1, pa2, losses, phi, sign)
    return _FORMS[FormId(form_id)](p)


def closed_form(form_id, state, pa1, pa2=None, losses=None, phi=None, sign=None):
    """Evaluate a closed-form sensitivity literally.

    Args:
        form_id: A `FormId` or its string name.
        state: Input moments; coherent-family forms need |alpha, 0>.
        pa1, pa2: Amplifier gains (pa2 is ignored by truncated forms).
        losses: Loss budget; its type must match the form.
        phi: Bias phase. Defaults to the form's fringe.
        sign: Joint combination sign; required by joint forms.

    Returns:
        delta_phi, or inf when the phase signal vanishes.

    Raises:
        FringeMismatchError: If phi is not at the fringe the form assumes.
        ValueError: If gains, losses, sign or state do not fit the form.
    """
    return _ratio(*closed_form_parts(form_id, state, pa1, pa2, losses, phi, sign))


def eta(context, pa1, pa2=None, losses=None, sign=None):
    """Correction factor eta of a loss context.

    Symmetric contexts read the signal-arm loss (L_s or l_s); joint and
    truncated contexts need a sign.
    """
    context = EtaContext(context)
    lossless_id, _ = ETA_FORMS[context]
    needs_sign = REGISTRY[lossless_id].port == "joint"
    if needs_sign and sign is None:
        raise ValueError(f"eta context {context.value} needs a sign")
    pa2 = PAGain() if pa2 is None else pa2
    G1, g1 = pa_coeffs(pa1)
    G2, g2 = pa_coeffs(pa2)
    s = Sign(sign).upper if needs_sign else 0.0
    p = _Inputs(G1, g1, G2, g2, LossBudget() if losses is None else losses,
                0.0, 0.0, s, 0.0, 0.0, 0.0, 0.0, 0.0)
    return EtaCorrection(float(_eta_value(context, p)), context)


def closed_form_with_eta(form_id, eta_value, state, pa1, pa2=None, phi=None, sign=None):
    """A lossless closed form with eta added under the square root of its numerator."""
    num2, den = closed_form_parts(form_id, state, pa1, pa2, None, phi, sign)
    return _ratio(num2 + eta_value, den)


def covariance_term_sign(form_id, pa1, pa2=None, losses=None, phi=None, sign=None):
    """True sign of the cross-covariance term relative to the literal +2|a||b|c.

    General-moment forms write the cross term as +2|a||b| cov(Y_s, Y_i). The
    exact output quadrature is a Y_s + b Y_i with real signed a, b at a
    fringe, so the literal form is exact only when a b >= 0. Returns +1 in
    that case and -1 otherwise; separable inputs are unaffected either way.
    """
    form_id = FormId(form_id)
    info = REGISTRY[form_id]
    pa2 = PAGain() if pa2 is None else pa2
    losses = LossBudget() if losses is None else losses
    G1, g1 = pa_coeffs(pa1)
    G2, g2 = pa_coeffs(pa2)
    phi = _default_phi(info) if phi is None else phi
    e = 1.0 if fringe_of(phi) == "bright" else -1.0
    s = Sign(sign).upper if info.port == "joint" else 0.0
    p = _Inputs(G1, g1, G2, g2, losses, phi, e, s, 0.0, 0.0, 0.0, 0.0, 0.0)
    t = dict(t_ls=_t(losses.l_s), t_li=_t(losses.l_i))
    if info.topology is Topology.TRUNCATED:
        A, B, C, D = _trunc_at(p, e, **t)
    else:
        A, B, C, D = _full_at(p, e, _t(losses.L_s), _t(losses.L_i), **t)
    if info.port == "signal":
        prod = -A * B          # Y_s_out = A Y_s - B Y_i
    elif info.port == "idler":
        prod = -C * D          # Y_i_out = C Y_i - D Y_s
    else:
        E, F = _joint(A, B, C, D, s)
        prod = s * E * F       # Y_+/- = E Y_s +/- F Y_i
    return 1 if prod >= 0 else -1


def asymptotic_tolerance(pa1, pa2):
    """Relative tolerance for comparing a G2 >> G1 formula with the exact value.

    The exact coefficients differ from their limits by a relative amount of at
    most rho = G1 (G1 + g1) / (G2 (G2 + g2)); twice that bounds the error of
    the square-root form.
    """
    G1, g1 = pa_coeffs(pa1)
    G2, g2 = pa_coeffs(pa2)
    return 2.0 * G1 * (G1 + g1) / (G2 * (G2 + g2))


def operating_point(form_id, pa1, pa2=None, losses=None, phi=None, sign=None, alpha=None):
    """Engine configuration that a closed form describes.

    Returns:
        (InterferometerConfig, port name, theta, phi), or None for the MZI baseline.
        The port name is one of "signal", "idler", "joint-plus", "joint-minus".
    """
    form_id = FormId(form_id)
    if form_id is FormId.MZI_BASELINE:
        return None
    info = REGISTRY[form_id]
    pa2 = PAGain() if pa2 is None else pa2
    losses = LossBudget() if losses is None else losses
    if form_id in _FIXED_SIGN:
        sign, phi = _FIXED_SIGN[form_id]
    if phi is None:
        phi = _default_phi(info)
    if info.port == "joint":
        port = "joint-plus" if Sign(sign) is Sign.PLUS else "joint-minus"
    else:
        port = info.port
    # The coherent family assumes a real amplitude; a complex one is matched by
    # rotating the local oscillator against its phase.
    theta = -float(np.angle(alpha)) if (info.coherent and alpha is not None) else 0.0
    config = InterferometerConfig(info.topology, pa1,
                                  pa2 if info.topology is Topology.FULL else PAGain(),
                                  float(phi), losses)
    return config, port, theta, float(phi)


_MECHANISM_FORMS = (_F.SP_DARK_BALANCED, _F.JOINT_DARK, _F.JOINT_BRIGHT,
                    _F.TRUNC_DARK, _F.TRUNC_BRIGHT)


def mechanism_table(form_id, pa1, pa2=None, sign=None):
    """Noise and signal factors behind a lossless fringe-point sensitivity.

    noise_factor is the output variance divided by the variance of the matching
    input combination (Y_s for single-port, Y_s + Y_i for joint); signal_factor
    is the phase slope divided by |G1 <X_s> + g1 <X_i>|.
    """
    form_id = FormId(form_id)
    if form_id not in _MECHANISM_FORMS:
        raise ValueError(f"{form_id.value} has no single noise factor; use one of "
                         f"{[f.value for f in _MECHANISM_FORMS]}")
    info = REGISTRY[form_id]
    pa2 = PAGain() if pa2 is None else pa2
    G1, g1 = pa_coeffs(pa1)
    G2, g2 = pa_coeffs(pa2)
    if info.balanced and abs(pa1.r - pa2.r) > SYMMETRY_TOL:
        raise ValueError(f"{form_id.value} assumes equal gains G1 = G2")
    e = 1.0 if info.fringe == "bright" else -1.0
    s = Sign(sign).upper if info.port == "joint" else 0.0
    p = _Inputs(G1, g1, G2, g2, LossBudget(), 0.0, e, s, 0.0, 0.0, 0.0, 0.0, 0.0)
    if form_id is _F.SP_DARK_BALANCED:
        A, _, _, _ = _full_at(p, e)
        return A * A, G2
    if info.topology is Topology.TRUNCATED:
        E, _ = _joint(*_trunc_at(p, e), s)
        return E * E, 1.0
    E, _ = _joint(*_full_at(p, e), s)
    return E * E, abs(G2 - s * g2)
