"""Backend selection for the grid kernel.

The compiled Cython module is used when it was built; otherwise, or when the
environment variable SU11_KERNEL=python is set, the numpy implementation is
used. Both produce the same numbers to rounding.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled


def _default_backend():
    forced = os.environ.get("SU11_KERNEL", "").strip().lower()
    if forced:
        if forced not in BACKENDS:
            raise ImportError(f"SU11_KERNEL={forced!r} is not available; have {sorted(BACKENDS)}")
        return forced
    return "compiled" if "compiled" in BACKENDS else "python"


BACKEND = _default_backend()

MIN_CHUNK = 2048


def grid_stats(mean, cov, topology, G1, g1, G2, g2, ws, wi, theta,
               phi, L_s=0.0, L_i=0.0, l_s=0.0, l_i=0.0, threads=1, backend=None):
    """Observable mean, variance and phase slope over a broadcast grid.

    Args:
        mean, cov: Input moments.
        topology: 0 full, 1 truncated.
        G1, g1, G2, g2: Amplifier coefficients.
        ws, wi: Photocurrent weights (1, 0) signal, (0, 1) idler, (1, +/-1) joint.
        theta: Local-oscillator angle.
        phi, L_s, L_i, l_s, l_i: Scalars or arrays, broadcast together.
        threads: Worker threads; results do not depend on this value.
        backend: "compiled" or "python"; defaults to `BACKEND`.

    Returns:
        (obs_mean, obs_var, slope) arrays with the broadcast shape.
    """
    module = BACKENDS[backend or BACKEND]
    grids = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (phi, L_s, L_i, l_s, l_i)))
    shape = grids[0].shape
    flat = [np.ascontiguousarray(g.ravel()) for g in grids]
    n = flat[0].size
    outs = [np.empty(n) for _ in range(3)]
    mu = np.ascontiguousarray(mean, dtype=float)
    sig = np.ascontiguousarray(cov, dtype=float)
    consts = (mu, sig, int(topology), float(G1), float(g1), float(G2), float(g2),
              float(ws), float(wi), float(theta))

    def run(sl):
        module.stats_into(*consts, *(f[sl] for f in flat), *(o[sl] for o in outs))

    threads = max(1, int(threads or 1))
    if threads == 1 or n < 2 * MIN_CHUNK:
        run(slice(0, n))
    else:
        bounds = np.linspace(0, n, min(threads * 4, n // MIN_CHUNK) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]))
    return tuple(o.reshape(shape) for o in outs)
