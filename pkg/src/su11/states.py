"""Two-mode quadrature moment states.

Quadratures follow X = a + a^dagger and Y = -i(a - a^dagger), so the vacuum
variance is 1 and [X, Y] = 2i. The quadrature vector is ordered
R = (X_s, Y_s, X_i, Y_i). To convert to the hbar = 1 convention (vacuum
variance 1/2) divide means by sqrt(2) and covariances by 2.
"""

from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

XS, YS, XI, YI = 0, 1, 2, 3
QUADRATURES = ("X_s", "Y_s", "X_i", "Y_i")

ASYMMETRY_TOL = 1e-6
PHYSICALITY_TOL = 1e-9


class NonFiniteError(ValueError):
    """Raised when a mean or covariance entry is NaN or infinite."""


class AsymmetryTooLargeError(ValueError):
    """Raised when a covariance matrix is too far from symmetric."""


class UnphysicalStateError(ValueError):
    """Raised when a state tagged as Gaussian violates the uncertainty principle."""


def omega(n_modes=2):
    """Commutator matrix with [R_j, R_k] = i * omega_jk.

    Each mode contributes the block [[0, 2], [-2, 0]].
    """
    block = np.array([[0.0, 2.0], [-2.0, 0.0]])
    return np.kron(np.eye(n_modes), block)


@dataclass(frozen=True, eq=False)
class MomentState:
    """First and second quadrature moments of a two-mode state.

    Attributes:
        mean: Length-4 vector (<X_s>, <Y_s>, <X_i>, <Y_i>).
        cov: Symmetrized 4x4 covariance, sigma_jk = <{R_j, R_k}>/2 - <R_j><R_k>.
        label: Free-text provenance tag.
        gaussian: True when the moments describe a Gaussian state, which the
            Monte Carlo sampler requires.
    """

    mean: np.ndarray
    cov: np.ndarray
    label: str = ""
    gaussian: bool = False

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        cov = np.array(self.cov, dtype=float).reshape(4, 4)
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def alpha_s(self):
        """Complex signal amplitude <a_s> = (<X_s> + i<Y_s>)/2."""
        return complex(self.mean[XS], self.mean[YS]) / 2.0

    @property
    def alpha_i(self):
        """Complex idler amplitude <a_i>."""
        return complex(self.mean[XI], self.mean[YI]) / 2.0

    def variance(self, k):
        return float(self.cov[k, k])

    def covariance(self, j, k):
        return float(self.cov[j, k])

    def quadrature_stats(self, weights):
        """Mean and variance of the linear combination weights . R."""
        w = np.asarray(weights, dtype=float)
        return float(w @ self.mean), float(w @ self.cov @ w)

    def is_physical(self, tol=PHYSICALITY_TOL):
        """Check the uncertainty relation cov + i*omega/2 >= 0.

        The factor 1/2 makes the vacuum (cov = I) saturate the bound in this
        normalization.
        """
        eig = np.linalg.eigvalsh(self.cov + 0.5j * omega())
        return bool(eig.min() >= -tol)

    def is_separable_moments(self, tol=0.0):
        """True when every signal-idler cross covariance vanishes."""
        return bool(np.all(np.abs(self.cov[:2, 2:]) <= tol))

    def phase_rotated(self, delta_s, delta_i=0.0):
        """Apply a -> exp(i delta) a independently to each mode."""
        rot = np.zeros((4, 4))
        for k, d in ((0, delta_s), (2, delta_i)):
            c, s = np.cos(d), np.sin(d)
            rot[k:k + 2, k:k + 2] = [[c, -s], [s, c]]
        return MomentState(rot @ self.mean, rot @ self.cov @ rot.T,
                           label=self.label, gaussian=self.gaussian)

    def allclose(self, other, atol=1e-12):
        return bool(np.allclose(self.mean, other.mean, atol=atol, rtol=0)
                    and np.allclose(self.cov, other.cov, atol=atol, rtol=0))

    def to_text(self):
        """Serialize as the `mean = [...]` / `cov = [[...]]` text block."""
        fmt = lambda v: repr(float(v))
        mean = ", ".join(fmt(v) for v in self.mean)
        rows = ",\n       ".join("[" + ", ".join(fmt(v) for v in row) + "]" for row in self.cov)
        lines = [f"mean = [{mean}]", f"cov = [{rows}]"]
        if self.gaussian:
            lines.append("gaussian = true")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, label=""):
        """Parse a state block produced by `to_text`."""
        data = tomllib.loads(text)
        if "mean" not in data or "cov" not in data:
            raise ValueError("state block needs both 'mean' and 'cov'")
        return state_from_mapping(data, label=label)


def state_from_mapping(data, label=""):
    """Build a state from a parsed mapping with `mean`, `cov` and `gaussian` keys."""
    gaussian = bool(data.get("gaussian", False))
    if gaussian:
        return gaussian_state(data["mean"], data["cov"], label=label)
    return from_moments(data["mean"], data["cov"], label=label)


def _check_moments(mean, cov):
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if mean.shape != (4,) or cov.shape != (4, 4):
        raise ValueError(f"expected mean of shape (4,) and cov of shape (4, 4), "
                         f"got {mean.shape} and {cov.shape}")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise NonFiniteError("moments contain NaN or infinite entries")
    asym = np.max(np.abs(cov - cov.T))
    if asym > ASYMMETRY_TOL:
        raise AsymmetryTooLargeError(f"covariance asymmetry {asym:.3g} exceeds {ASYMMETRY_TOL}")
    return mean, cov


def from_moments(mean, cov, label="moments"):
    """Wrap arbitrary moments. Physicality is not enforced."""
    mean, cov = _check_moments(mean, cov)
    return MomentState(mean, cov, label=label, gaussian=False)


def gaussian_state(mean, cov, label="gaussian"):
    """Wrap moments of a Gaussian state; they must satisfy the uncertainty relation."""
    mean, cov = _check_moments(mean, cov)
    state = MomentState(mean, cov, label=label, gaussian=True)
    if not state.is_physical():
        raise UnphysicalStateError("covariance violates the uncertainty relation")
    return state


def vacuum():
    return MomentState(np.zeros(4), np.eye(4), label="vacuum", gaussian=True)


def coherent(alpha_s, alpha_i=0.0):
    """Coherent state |alpha_s> x |alpha_i>; <X> = 2 Re(alpha)."""
    a_s, a_i = complex(alpha_s), complex(alpha_i)
    mean = 2.0 * np.array([a_s.real, a_s.imag, a_i.real, a_i.imag])
    return MomentState(mean, np.eye(4), label=f"coherent({alpha_s}, {alpha_i})", gaussian=True)


def squeezed_signal(alpha_s, R, squeeze_axis="Y"):
    """Displaced squeezed signal mode with a vacuum idler.

    Args:
        alpha_s: Complex signal displacement.
        R: Squeezing factor, R >= 0.
        squeeze_axis: "Y" gives var(Y_s) = exp(-2R); "X" squeezes X_s instead.
    """
    if R < 0:
        raise ValueError("squeezing factor must be non-negative")
    axis = squeeze_axis.upper()
    if axis not in ("X", "Y"):
        raise ValueError("squeeze_axis must be 'X' or 'Y'")
    cov = np.eye(4)
    small, large = np.exp(-2.0 * R), np.exp(2.0 * R)
    cov[XS, XS], cov[YS, YS] = (large, small) if axis == "Y" else (small, large)
    a_s = complex(alpha_s)
    mean = np.array([2.0 * a_s.real, 2.0 * a_s.imag, 0.0, 0.0])
    return MomentState(mean, cov, label=f"squeezed({alpha_s}, R={R}, {axis})", gaussian=True)


def two_mode_squeezed(r, alpha_s=0.0, alpha_i=0.0):
    """Displaced two-mode squeezed vacuum, the output of a PA fed with vacuum.

    Its Y_s-Y_i covariance is -sinh(2r), so it is a correlated test state.
    """
    if r < 0:
        raise ValueError("squeezing parameter must be non-negative")
    ch, sh = np.cosh(2.0 * r), np.sinh(2.0 * r)
    cov = np.diag([ch, ch, ch, ch])
    cov[XS, XI] = cov[XI, XS] = sh
    cov[YS, YI] = cov[YI, YS] = -sh
    a_s, a_i = complex(alpha_s), complex(alpha_i)
    mean = 2.0 * np.array([a_s.real, a_s.imag, a_i.real, a_i.imag])
    return MomentState(mean, cov, label=f"two-mode-squeezed(r={r})", gaussian=True)
