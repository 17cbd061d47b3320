"""Vectorized numpy implementation of the grid kernel.

Mirrors `_kernels.pyx` exactly; used when the compiled module is missing or
when SU11_KERNEL=python is set.
"""

import numpy as np


def _rows(ws, wi, rot, a, b, c, d):
    """Observable row over (X_s, Y_s, X_i, Y_i) for coefficients A, B, C, D.

    Signal output contributes 2 Im(e^{i theta}(A a_s + B a_i^dagger)); idler
    output contributes 2 Im(e^{i theta}(C a_i + D a_s^dagger)).
    """
    ra, rb, rc, rd = rot * a, rot * b, rot * c, rot * d
    return (ws * ra.imag + wi * rd.imag,
            ws * ra.real - wi * rd.real,
            ws * rb.imag + wi * rc.imag,
            -ws * rb.real + wi * rc.real)


def stats_into(mean, cov, topology, G1, g1, G2, g2, ws, wi, theta,
               phi, L_s, L_i, l_s, l_i, out_mean, out_var, out_deriv):
    """Fill observable mean, variance and d(mean)/d(phi) for each grid point.

    Args:
        mean, cov: Input moments (length 4 and 4x4).
        topology: 0 for the full interferometer, 1 for the truncated one.
        G1, g1, G2, g2: Amplifier coefficients (G2, g2 unused when truncated).
        ws, wi: Weights of the signal and idler photocurrents.
        theta: Local-oscillator angle.
        phi, L_s, L_i, l_s, l_i: Equal-length 1-D grids.
        out_mean, out_var, out_deriv: Output arrays, written in place.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    t_Ls, t_Li = np.sqrt(1.0 - L_s), np.sqrt(1.0 - L_i)
    t_ls, t_li = np.sqrt(1.0 - l_s), np.sqrt(1.0 - l_i)
    r_ls, r_li = np.sqrt(l_s), np.sqrt(l_i)
    e = np.exp(1j * phi)
    ec = np.conj(e)
    rot = np.exp(1j * theta)
    zero = np.zeros_like(phi)
    if topology == 0:
        r_Ls, r_Li = np.sqrt(L_s), np.sqrt(L_i)
        A = (G1 * G2 * t_Ls * e + g1 * g2 * t_Li) * t_ls
        B = (G2 * g1 * t_Ls * e + G1 * g2 * t_Li) * t_ls
        C = (G1 * G2 * t_Li + g1 * g2 * t_Ls * ec) * t_li
        D = (G2 * g1 * t_Li + G1 * g2 * t_Ls * ec) * t_li
        dA = 1j * G1 * G2 * t_Ls * e * t_ls
        dB = 1j * G2 * g1 * t_Ls * e * t_ls
        dC = -1j * g1 * g2 * t_Ls * ec * t_li
        dD = -1j * G1 * g2 * t_Ls * ec * t_li
        # (signal coefficient, idler coefficient) of each vacuum port
        sig_ports = [(G2 * r_Ls * t_ls, g2 * r_Ls * t_li), (r_ls, zero)]
        idl_ports = [(g2 * r_Li * t_ls, G2 * r_Li * t_li), (zero, r_li)]
    else:
        A = G1 * e * t_ls
        B = g1 * e * t_ls
        C = G1 * t_li + 0j
        D = g1 * t_li + 0j
        dA, dB = 1j * A, 1j * B
        dC = dD = np.zeros_like(e)
        sig_ports = [(r_ls, zero)]
        idl_ports = [(zero, r_li)]

    W = np.stack(_rows(ws, wi, rot, A, B, C, D), axis=-1)
    dW = np.stack(_rows(ws, wi, rot, dA, dB, dC, dD), axis=-1)
    port_var = np.zeros_like(phi)
    for a, d in sig_ports:
        x = ws * (rot * a).imag + wi * (rot * d).imag
        y = ws * (rot * a).real - wi * (rot * d).real
        port_var += x * x + y * y
    for b, c in idl_ports:
        x = ws * (rot * b).imag + wi * (rot * c).imag
        y = -ws * (rot * b).real + wi * (rot * c).real
        port_var += x * x + y * y
    out_mean[:] = W @ mean
    out_var[:] = np.einsum("nj,jk,nk->n", W, cov, W) + port_var
    out_deriv[:] = dW @ mean
