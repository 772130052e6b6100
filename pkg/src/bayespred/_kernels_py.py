"""NumPy versions of the compiled kernels, used when the extension is unavailable."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln, gammaln

_CHUNK = 2048


def poisson_negbin_kl(p, logp, shape, rate):
    p = np.asarray(p)
    logp = np.asarray(logp)
    shape = np.asarray(shape, dtype=float)
    y = np.arange(p.size, dtype=float)
    mask = p > 0
    out = np.empty(shape.size)
    for lo in range(0, shape.size, _CHUNK):
        a = shape[lo : lo + _CHUNK, None]
        lq = (
            gammaln(y + a)
            - gammaln(y + 1)
            - gammaln(a)
            + a * math.log(rate / (rate + 1.0))
            - y * math.log(rate + 1.0)
        )
        out[lo : lo + _CHUNK] = np.sum(np.where(mask, p * (logp - lq), 0.0), axis=1)
    return out


def negbin_betanegbin_kl(p, logp, r, a, b):
    p = np.asarray(p)
    logp = np.asarray(logp)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    y = np.arange(p.size, dtype=float)
    mask = p > 0
    out = np.empty(a.size)
    for lo in range(0, a.size, _CHUNK):
        ak = a[lo : lo + _CHUNK, None]
        bk = b[lo : lo + _CHUNK, None]
        lq = gammaln(y + r) - gammaln(y + 1) - gammaln(r) + betaln(ak + y, bk + r) - betaln(ak, bk)
        out[lo : lo + _CHUNK] = np.sum(np.where(mask, p * (logp - lq), 0.0), axis=1)
    return out


def normal_student_kl(mu, v, m, s2, nu, t, h):
    m = np.asarray(m, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    nu = np.asarray(nu, dtype=float)
    t = np.asarray(t)
    out = np.empty(m.size)
    for lo in range(0, m.size, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        c = (nu[sl] * s2[sl])[:, None]
        d2 = ((mu - m[sl]) ** 2)[:, None]
        lm = -0.5 * np.log1p(2.0 * t * v / c) - t * d2 / (c + 2.0 * t * v)
        e = -h * np.sum(np.exp(-t) * np.expm1(lm), axis=1)
        logc = gammaln(0.5 * (nu[sl] + 1)) - gammaln(0.5 * nu[sl]) - 0.5 * np.log(nu[sl] * np.pi * s2[sl])
        out[sl] = -0.5 * math.log(2 * math.pi * math.e * v) - logc + 0.5 * (nu[sl] + 1) * e
    return out


def mean_log1p_quadform(lam, t, h):
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t)
    out = np.empty(lam.shape[0])
    for lo in range(0, lam.shape[0], _CHUNK):
        L = lam[lo : lo + _CHUNK]
        lm = -0.5 * np.sum(np.log1p(2.0 * t[None, :, None] * L[:, None, :]), axis=2)
        out[lo : lo + _CHUNK] = -h * np.sum(np.exp(-t) * np.expm1(lm), axis=1)
    return out
