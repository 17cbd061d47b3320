"""Monte Carlo homodyne records for Gaussian inputs.

Records are drawn from the Gaussian law of the two detected quadratures
(Y_s(theta), Y_i(theta)) at the interferometer output, then combined into the
scheme's photocurrent. Every batch has its own stream derived from
(seed, batch index) with numpy's PCG64, so results do not depend on the order
or thread in which batches are generated.
"""

from dataclasses import dataclass

import numpy as np

from .engine import output_moments

DEFAULT_FD_STEP = 1e-2
MIN_SAMPLES = 1000
DEGENERATE_RATIO = 1e-3
DEGENERATE_SIGMAS = 5.0

# batch indices of the three records behind one sensitivity estimate
BATCH_CENTER, BATCH_PLUS, BATCH_MINUS = 0, 1, 2


class NotGaussianRepresentableError(ValueError):
    """Raised for states that carry no Gaussian tag or violate the uncertainty relation."""


@dataclass(frozen=True)
class SampleSpec:
    """Sampling parameters.

    Attributes:
        n_samples: Records per batch, at least 1000.
        seed: Unsigned 64-bit seed.
        fd_step: Phase step h of the two-point slope estimate, in radians.
    """

    n_samples: int = 100_000
    seed: int = 0
    fd_step: float = DEFAULT_FD_STEP

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < MIN_SAMPLES:
            raise ValueError(f"n_samples must be an integer >= {MIN_SAMPLES}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not (np.isfinite(self.fd_step) and self.fd_step > 0):
            raise ValueError("fd_step must be positive")


@dataclass(frozen=True)
class MCEstimate:
    """Empirical sensitivity.

    Attributes:
        delta_phi: sample_std / |slope|, inf when the slope is degenerate.
        slope: (mean(phi + h) - mean(phi - h)) / (2 h).
        slope_stderr: Statistical standard error of the slope.
        sample_std: Standard deviation of the record at phi.
        sample_mean: Mean of the record at phi.
        n: Records per batch.
        seed: Seed used.
        degenerate: True when |slope| < 1e-3 sample_std, or when the slope is
            within 5 standard errors of zero and so not resolved at all.
    """

    delta_phi: float
    slope: float
    slope_stderr: float
    sample_std: float
    sample_mean: float
    n: int
    seed: int
    degenerate: bool


def rng_for(seed, batch):
    """Independent PCG64 generator for one (seed, batch) pair."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(batch)])))


def _require_gaussian(state):
    if not state.gaussian:
        raise NotGaussianRepresentableError(
            "state has no Gaussian tag; build it with a named constructor or gaussian_state()")
    if not state.is_physical():
        raise NotGaussianRepresentableError("state violates the uncertainty relation")


def _factor(cov):
    """Lower-triangular factor of a PSD matrix, tolerating exact singularity."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


def sample_records(state, config, scheme, phi, spec, batch=0):
    """Draw photocurrent records of the scheme's observable.

    Returns:
        1-D array of n_samples records.
    """
    _require_gaussian(state)
    out = output_moments(state, config, phi)
    c, s = np.cos(scheme.theta), np.sin(scheme.theta)
    # rows project (X_s, Y_s, X_i, Y_i) onto (Y_s(theta), Y_i(theta))
    P = np.array([[s, c, 0.0, 0.0], [0.0, 0.0, s, c]])
    mu = P @ out.mean
    cov = P @ out.cov @ P.T
    z = rng_for(spec.seed, batch).standard_normal((int(spec.n_samples), 2))
    pair = mu + z @ _factor(cov).T
    ws, wi = scheme.port.weights
    return ws * pair[:, 0] + wi * pair[:, 1]


def sample_observable(state, config, scheme, phi, spec, batch=0):
    """Sample mean and unbiased sample variance of the observable.

    Raises:
        NotGaussianRepresentableError: For untagged or unphysical states.
    """
    rec = sample_records(state, config, scheme, phi, spec, batch)
    return float(rec.mean()), float(rec.var(ddof=1))


def estimate_sensitivity(state, config, scheme, phi, spec):
    """Estimate delta_phi from three independent batches at phi and phi +/- h."""
    h = spec.fd_step
    n = int(spec.n_samples)
    rec = sample_records(state, config, scheme, phi, spec, BATCH_CENTER)
    up = sample_records(state, config, scheme, phi + h, spec, BATCH_PLUS)
    down = sample_records(state, config, scheme, phi - h, spec, BATCH_MINUS)
    slope = float((up.mean() - down.mean()) / (2.0 * h))
    stderr = float(np.sqrt((up.var(ddof=1) + down.var(ddof=1)) / n) / (2.0 * h))
    std = float(rec.std(ddof=1))
    degenerate = abs(slope) < max(DEGENERATE_RATIO * std, DEGENERATE_SIGMAS * stderr)
    delta = np.inf if degenerate else std / abs(slope)
    return MCEstimate(float(delta), slope, stderr, std, float(rec.mean()), n,
                      int(spec.seed), bool(degenerate))


def variance_bound(n, sigmas=5.0):
    """Relative tolerance sigmas * sqrt(2 / n) of the sample-variance estimator."""
    return sigmas * np.sqrt(2.0 / n)
