# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner-KL loops; see _kernels_py for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, expm1, lgamma, M_PI, exp

cnp.import_array()


def poisson_negbin_kl(const double[::1] p, const double[::1] logp,
                      const double[::1] shape, double rate):
    """KL(truth || NB(shape, rate/(rate+1))) for each shape; truth given on 0..ymax."""
    cdef Py_ssize_t n = shape.shape[0], ny = p.shape[0], k, y
    cdef double a, lq, acc, lr = log(rate / (rate + 1.0)), l1 = log(rate + 1.0)
    out = np.empty(n)
    cdef double[::1] o = out
    for k in range(n):
        a = shape[k]
        lq = a * lr
        acc = 0.0
        for y in range(ny):
            if p[y] > 0.0:
                acc += p[y] * (logp[y] - lq)
            lq += log(y + a) - log(y + 1.0) - l1
        o[k] = acc
    return out


def negbin_betanegbin_kl(const double[::1] p, const double[::1] logp, double r,
                         const double[::1] a, const double[::1] b):
    """KL(truth || beta-negative-binomial(r, a, b)) for each (a, b)."""
    cdef Py_ssize_t n = a.shape[0], ny = p.shape[0], k, y
    cdef double ak, bk, lq, acc
    out = np.empty(n)
    cdef double[::1] o = out
    for k in range(n):
        ak = a[k]
        bk = b[k]
        lq = (lgamma(ak) + lgamma(bk + r) - lgamma(ak + bk + r)) - (lgamma(ak) + lgamma(bk) - lgamma(ak + bk))
        acc = 0.0
        for y in range(ny):
            if p[y] > 0.0:
                acc += p[y] * (logp[y] - lq)
            lq += log(y + r) - log(y + 1.0) + log(ak + y) - log(ak + bk + r + y)
        o[k] = acc
    return out


def normal_student_kl(double mu, double v, const double[::1] m, const double[::1] s2,
                      const double[::1] nu, const double[::1] t, double h):
    """KL(N(mu, v) || t_nu(m, s2)); E log(1 + Z^2/c) by the Frullani integral on nodes t."""
    cdef Py_ssize_t n = m.shape[0], nt = t.shape[0], k, j
    cdef double e, c, d2, nk, logc, tj
    out = np.empty(n)
    cdef double[::1] o = out
    wt = np.exp(-np.asarray(t))
    cdef double[::1] w = wt
    for k in range(n):
        nk = nu[k]
        c = nk * s2[k]
        d2 = (mu - m[k]) * (mu - m[k])
        e = 0.0
        for j in range(nt):
            tj = t[j]
            e -= w[j] * expm1(-0.5 * log1p(2.0 * tj * v / c) - tj * d2 / (c + 2.0 * tj * v))
        e *= h
        logc = lgamma(0.5 * (nk + 1.0)) - lgamma(0.5 * nk) - 0.5 * log(nk * M_PI * s2[k])
        o[k] = -0.5 * log(2.0 * M_PI * exp(1.0) * v) - logc + 0.5 * (nk + 1.0) * e
    return out


def mean_log1p_quadform(const double[:, ::1] lam, const double[::1] t, double h):
    """E log(1 + sum_i lam_i z_i^2) for standard normal z, one row of lam per case."""
    cdef Py_ssize_t n = lam.shape[0], p = lam.shape[1], nt = t.shape[0], k, j, i
    cdef double e, tj, lm
    out = np.empty(n)
    cdef double[::1] o = out
    wt = np.exp(-np.asarray(t))
    cdef double[::1] w = wt
    for k in range(n):
        e = 0.0
        for j in range(nt):
            tj = t[j]
            lm = 0.0
            for i in range(p):
                lm -= 0.5 * log1p(2.0 * tj * lam[k, i])
            e -= w[j] * expm1(lm)
        o[k] = e * h
    return out
