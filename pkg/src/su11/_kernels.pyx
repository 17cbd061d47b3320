# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid kernel: observable statistics over many operating points.

Same contract as `_kernels_py.stats_into`. The loop body releases the GIL so
chunks of a grid can run on several threads.
"""

from libc.math cimport sqrt, cos, sin


cdef inline void _accumulate(double ws, double wi, double complex rot,
                             double complex a, double complex b,
                             double complex c, double complex d,
                             double* w) noexcept nogil:
    cdef double complex ra = rot * a
    cdef double complex rb = rot * b
    cdef double complex rc = rot * c
    cdef double complex rd = rot * d
    w[0] = ws * ra.imag + wi * rd.imag
    w[1] = ws * ra.real - wi * rd.real
    w[2] = ws * rb.imag + wi * rc.imag
    w[3] = -ws * rb.real + wi * rc.real


cdef inline double _port(double ws, double wi, double complex rot,
                         double complex sig, double complex idl, bint sig_is_mode) noexcept nogil:
    # sig_is_mode: the signal output sees the ancilla as b (signal-type port);
    # otherwise it sees b^dagger (idler-type port).
    cdef double complex rs = rot * sig
    cdef double complex ri = rot * idl
    cdef double x, y
    if sig_is_mode:
        x = ws * rs.imag + wi * ri.imag
        y = ws * rs.real - wi * ri.real
    else:
        x = ws * rs.imag + wi * ri.imag
        y = -ws * rs.real + wi * ri.real
    return x * x + y * y


def stats_into(const double[::1] mean, const double[:, ::1] cov, int topology,
               double G1, double g1, double G2, double g2,
               double ws, double wi, double theta,
               const double[::1] phi, const double[::1] L_s, const double[::1] L_i,
               const double[::1] l_s, const double[::1] l_i,
               double[::1] out_mean, double[::1] out_var, double[::1] out_deriv):
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t k, j, m
    cdef double w[4]
    cdef double dw[4]
    cdef double t_Ls, t_Li, t_ls, t_li, r_Ls, r_Li, r_ls, r_li
    cdef double complex e, ec, A, B, C, D, dA, dB, dC, dD
    cdef double complex I = 1j
    cdef double complex rot = cos(theta) + I * sin(theta)
    cdef double acc, var, pv
    with nogil:
        for k in range(n):
            t_Ls = sqrt(1.0 - L_s[k])
            t_Li = sqrt(1.0 - L_i[k])
            t_ls = sqrt(1.0 - l_s[k])
            t_li = sqrt(1.0 - l_i[k])
            r_ls = sqrt(l_s[k])
            r_li = sqrt(l_i[k])
            e = cos(phi[k]) + I * sin(phi[k])
            ec = e.conjugate()
            pv = 0.0
            if topology == 0:
                r_Ls = sqrt(L_s[k])
                r_Li = sqrt(L_i[k])
                A = (G1 * G2 * t_Ls * e + g1 * g2 * t_Li) * t_ls
                B = (G2 * g1 * t_Ls * e + G1 * g2 * t_Li) * t_ls
                C = (G1 * G2 * t_Li + g1 * g2 * t_Ls * ec) * t_li
                D = (G2 * g1 * t_Li + G1 * g2 * t_Ls * ec) * t_li
                dA = I * G1 * G2 * t_Ls * e * t_ls
                dB = I * G2 * g1 * t_Ls * e * t_ls
                dC = -I * g1 * g2 * t_Ls * ec * t_li
                dD = -I * G1 * g2 * t_Ls * ec * t_li
                pv += _port(ws, wi, rot, G2 * r_Ls * t_ls, g2 * r_Ls * t_li, True)
                pv += _port(ws, wi, rot, g2 * r_Li * t_ls, G2 * r_Li * t_li, False)
            else:
                A = G1 * e * t_ls
                B = g1 * e * t_ls
                C = G1 * t_li
                D = g1 * t_li
                dA = I * A
                dB = I * B
                dC = 0.0
                dD = 0.0
            pv += _port(ws, wi, rot, r_ls, 0.0, True)
            pv += _port(ws, wi, rot, 0.0, r_li, False)
            _accumulate(ws, wi, rot, A, B, C, D, w)
            _accumulate(ws, wi, rot, dA, dB, dC, dD, dw)
            acc = 0.0
            var = 0.0
            for j in range(4):
                acc += w[j] * mean[j]
                for m in range(4):
                    var += w[j] * cov[j, m] * w[m]
            out_mean[k] = acc
            out_var[k] = var + pv
            acc = 0.0
            for j in range(4):
                acc += dw[j] * mean[j]
            out_deriv[k] = acc
