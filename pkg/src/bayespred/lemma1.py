"""Closed-form per-observation tensors for the zero-mean normal scale family.

Parameters are the covariance entries ``V[i, i']`` with ``i <= i'``; a
derivative in an off-diagonal entry moves both ``V[i, i']`` and
``V[i', i]``.  Writing ``W = V^-1``:

* ``lemma1_second`` is ``E[l_ab] = -(W_ir W_i'r' + W_ir' W_i'r) / 2^{[i=i'] + [r=r']}``;
* ``lemma1_third`` is the third moment of the scores ``E[l_a l_b l_c]``,
  eight products of three ``W`` entries over ``2^{#diagonal pairs}``;
* ``lemma1_fourth`` is the fourth joint cumulant of the scores, the 48
  connected products of four ``W`` entries;
* ``lemma1_inverse_information`` is ``V_ir V_i'r' + V_ir' V_i'r``.

Each score is a centred quadratic form ``x' A x - tr(A V)`` with Gaussian
``x``, and the products of ``W`` entries are the Wick pairings of those
forms in which no factor joins the two indices of one pair.  With three
pairs every such pairing is a single cycle; with four pairs the pairings
that split into two 2-cycles are the products of Fisher entries, so
keeping only the connected ones gives the cumulant rather than the
moment.

:func:`closed_form_cumulants` evaluates every partition tensor exactly
from the cumulants of Gaussian quadratic forms, which supplies the mixed
tensors (``L_{ij,k}``, ``L_{ij,kl}``, ...) that the lemma does not list.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .cumulants import PARTITIONS, CumulantTensors, _finish
from .families import MvnScale, sym_index
from .rng import block_rngs


def _pairs(p: int) -> list[tuple[int, int]]:
    return list(sym_index(p))


def _diag_count(*pairs) -> int:
    return sum(1 for i, j in pairs if i == j)


# ---------------------------------------------------------------------------
# Wick pairings


def _matchings(points: list) -> list[list[tuple]]:
    if not points:
        return [[]]
    first, rest = points[0], points[1:]
    out = []
    for k, other in enumerate(rest):
        if other[0] == first[0]:
            continue
        for tail in _matchings(rest[:k] + rest[k + 1 :]):
            out.append([(first, other)] + tail)
    return out


def wick_terms(k: int, connected_only: bool = True) -> list[list[tuple]]:
    """Pairings of the ``2k`` indices of ``k`` pairs into ``W`` factors.

    Each half-index is ``(pair, side)``.  No factor may join both sides of
    one pair.  For ``k = 4`` and ``connected_only`` the pairings kept are
    those in which every two factors together touch at least three pairs.
    """
    points = [(q, s) for q in range(k) for s in (0, 1)]
    terms = _matchings(points)
    if connected_only and k >= 4:
        kept = []
        for t in terms:
            ok = True
            for e, f in itertools.combinations(t, 2):
                if len({e[0][0], e[1][0], f[0][0], f[1][0]}) < 3:
                    ok = False
                    break
            if ok:
                kept.append(t)
        terms = kept
    return terms


def _wick_tensor(W: np.ndarray, k: int) -> np.ndarray:
    pairs = _pairs(W.shape[0])
    m = len(pairs)
    terms = wick_terms(k)
    out = np.zeros((m,) * k)
    for idx in itertools.product(range(m), repeat=k):
        chosen = [pairs[a] for a in idx]
        total = 0.0
        for t in terms:
            prod = 1.0
            for (qa, sa), (qb, sb) in t:
                prod *= W[chosen[qa][sa], chosen[qb][sb]]
            total += prod
        out[idx] = total / 2 ** _diag_count(*chosen)
    return out


# ---------------------------------------------------------------------------
# Lemma 1


def lemma1_second(W, printed: bool = False) -> np.ndarray:
    """``E[l_ab]``; ``printed`` reproduces the misprinted ``W_i'r W_i'r`` second product."""
    W = np.asarray(W, dtype=float)
    pairs = _pairs(W.shape[0])
    m = len(pairs)
    out = np.empty((m, m))
    for a, (i, i2) in enumerate(pairs):
        for b, (r, r2) in enumerate(pairs):
            second = W[i2, r] * W[i2, r] if printed else W[i, r2] * W[i2, r]
            out[a, b] = -(W[i, r] * W[i2, r2] + second) / 2 ** _diag_count((i, i2), (r, r2))
    return out


def lemma1_third_printed(W) -> np.ndarray:
    """The eight products exactly as listed in the lemma."""
    W = np.asarray(W, dtype=float)
    pairs = _pairs(W.shape[0])
    m = len(pairs)
    out = np.empty((m, m, m))
    for a, (i, i2) in enumerate(pairs):
        for b, (r, r2) in enumerate(pairs):
            for c, (j, j2) in enumerate(pairs):
                s = (
                    W[i2, j] * W[r2, i] * W[j2, r]
                    + W[i, j] * W[r2, i2] * W[j2, r]
                    + W[i2, r] * W[j2, i] * W[r2, j]
                    + W[i, r] * W[j2, i2] * W[r2, j]
                    + W[i2, j] * W[r, i] * W[j2, r2]
                    + W[i2, r2] * W[j2, i] * W[r, j]
                    + W[i2, j2] * W[r2, i] * W[j, r]
                    + W[i2, r] * W[j, i] * W[r2, j2]
                )
                out[a, b, c] = s / 2 ** _diag_count((i, i2), (r, r2), (j, j2))
    return out


def lemma1_third(W) -> np.ndarray:
    """``E[l_a l_b l_c]`` from the eight Wick pairings of three pairs."""
    return _wick_tensor(np.asarray(W, dtype=float), 3)


def lemma1_fourth(W) -> np.ndarray:
    """Fourth joint cumulant of the scores from the 48 connected pairings."""
    return _wick_tensor(np.asarray(W, dtype=float), 4)


def lemma1_inverse_information(V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    pairs = _pairs(V.shape[0])
    m = len(pairs)
    out = np.empty((m, m))
    for a, (i, i2) in enumerate(pairs):
        for b, (r, r2) in enumerate(pairs):
            out[a, b] = V[i, r] * V[i2, r2] + V[i, r2] * V[i2, r]
    return out


@dataclass(frozen=True)
class Lemma1Tensors:
    V: np.ndarray
    second: np.ndarray
    third: np.ndarray
    fourth: np.ndarray
    inverse: np.ndarray

    @property
    def fisher(self) -> np.ndarray:
        return -self.second


def lemma1_tensors(V) -> Lemma1Tensors:
    V = np.asarray(V, dtype=float)
    W = np.linalg.inv(V)
    return Lemma1Tensors(V, lemma1_second(W), lemma1_third(W), lemma1_fourth(W), lemma1_inverse_information(V))


# ---------------------------------------------------------------------------
# exact partition tensors from Gaussian quadratic forms


def _basis(p: int) -> list[np.ndarray]:
    out = []
    for i, j in sym_index(p):
        E = np.zeros((p, p))
        E[i, j] = E[j, i] = 1.0
        out.append(E)
    return out


def _derivative_form(W, E, idx):
    """(M, c) with ``l_idx = x' M x + c``."""
    k = len(idx)
    M = np.zeros_like(W)
    tr = 0.0
    for perm in itertools.permutations(idx):
        P = W
        for a in perm:
            P = P @ E[a] @ W
        M += P
        tr += np.trace(P @ np.linalg.inv(W))
    sign = (-1) ** k
    return -0.5 * sign * M, 0.5 * sign / k * tr


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]
        yield [[first]] + part


def _joint_cumulant(forms, V):
    """Joint cumulant of ``x' M x + c`` over the listed forms, x ~ N(0, V)."""
    if len(forms) == 1:
        M, c = forms[0]
        return float(np.trace(M @ V)) + c
    first, rest = forms[0], forms[1:]
    total = 0.0
    for order in itertools.permutations(range(len(rest))):
        P = first[0] @ V
        for k in order:
            P = P @ rest[k][0] @ V
        total += np.trace(P)
    return 2 ** (len(forms) - 1) * total


def _moment(forms, V):
    total = 0.0
    for part in _set_partitions(list(range(len(forms)))):
        prod = 1.0
        for block in part:
            prod *= _joint_cumulant([forms[b] for b in block], V)
        total += prod
    return total


def closed_form_cumulants(V) -> CumulantTensors:
    """All partition tensors of the normal scale family at ``V``, exactly."""
    V = np.asarray(V, dtype=float)
    p = V.shape[0]
    W = np.linalg.inv(V)
    E = _basis(p)
    m = len(E)
    cache: dict[tuple[int, ...], tuple] = {}

    def form(idx):
        key = tuple(sorted(idx))
        if key not in cache:
            cache[key] = _derivative_form(W, E, key)
        return cache[key]

    tensors = {}
    for part in PARTITIONS:
        order = sum(part)
        T = np.empty((m,) * order)
        for idx in itertools.product(range(m), repeat=order):
            groups, pos = [], 0
            for g in part:
                groups.append(idx[pos : pos + g])
                pos += g
            T[idx] = _moment([form(g) for g in groups], V)
        tensors[part] = T
    fam = MvnScale(p)
    return _finish(tensors, None, "closed-form", fam.from_matrix(V), m)


def lemma1_consistency(V) -> dict:
    """Largest gaps between the lemma's formulas and the exact partition tensors."""
    lt = lemma1_tensors(V)
    ct = closed_form_cumulants(V)
    F = ct.tensors[(1, 1)]
    four = ct.tensors[(1, 1, 1, 1)] - (
        np.einsum("ab,cd->abcd", F, F) + np.einsum("ac,bd->abcd", F, F) + np.einsum("ad,bc->abcd", F, F)
    )
    W = np.linalg.inv(np.asarray(V, dtype=float))
    return {
        "second": float(np.max(np.abs(lt.second - ct.tensors[(2,)]))),
        "second_printed": float(np.max(np.abs(lemma1_second(W, printed=True) - ct.tensors[(2,)]))),
        "third": float(np.max(np.abs(lt.third - ct.tensors[(1, 1, 1)]))),
        "third_printed": float(np.max(np.abs(lemma1_third_printed(W) - ct.tensors[(1, 1, 1)]))),
        "fourth": float(np.max(np.abs(lt.fourth - four))),
        "inverse": float(np.max(np.abs(lt.inverse - ct.fisher_inv))),
        "third_derivative_vs_third": float(np.max(np.abs(lt.third - ct.tensors[(3,)]))),
    }


def eq21_alpha(V) -> float:
    """Alpha solving the minimum-risk condition written for the normal scale family.

    ``(alpha - 1) L^-1 L^-1 L^-1 T_ijs T_rkt = L^-1 L^-1 (K_irjs + F_ir F_js - F_rs F_ij)
    + L^-1 L^-1 L^-1 T_rsk T_ijt`` with ``T`` the score third moment, ``K``
    the score fourth cumulant and ``F`` the Fisher information, inverse
    factors paired ``(i r)(j s)(k t)``.  Reported for comparison with the
    stationary point of the fitted quadratic.
    """
    lt = lemma1_tensors(V)
    inv, T, K, F = lt.inverse, lt.third, lt.fourth, lt.fisher
    lhs = np.einsum("ir,js,kt,ijs,rkt->", inv, inv, inv, T, T)
    rhs = np.einsum("ir,js,irjs->", inv, inv, K)
    rhs += np.einsum("ir,js,ir,js->", inv, inv, F, F) - np.einsum("ir,js,rs,ij->", inv, inv, F, F)
    rhs += np.einsum("ir,js,kt,rsk,ijt->", inv, inv, inv, T, T)
    return float(1.0 + rhs / lhs)


# ---------------------------------------------------------------------------
# Monte Carlo check


@dataclass(frozen=True)
class Lemma1MCReport:
    reps: int
    seed: int
    max_z: dict
    estimates: dict
    std_errors: dict
    analytic: dict

    def passed(self, z: float = 4.0) -> bool:
        return all(v < z for v in self.max_z.values())


def lemma1_mc(V, reps: int = 1_000_000, seed: int = 0, block: int = 100_000) -> Lemma1MCReport:
    """Entry-wise Monte Carlo estimates of the lemma's tensors with standard errors.

    The fourth cumulant is estimated per draw as
    ``l_a l_b l_c l_d - (F_ab F_cd + F_ac F_bd + F_ad F_bc)`` with the
    exact Fisher information, which is unbiased because the scores have
    mean zero.
    """
    V = np.asarray(V, dtype=float)
    fam = MvnScale(V.shape[0])
    theta = fam.from_matrix(V)
    lt = lemma1_tensors(V)
    F = lt.fisher
    disc = np.einsum("ab,cd->abcd", F, F) + np.einsum("ac,bd->abcd", F, F) + np.einsum("ad,bc->abcd", F, F)
    names = ("second", "third", "fourth")
    sums = {k: 0.0 for k in names}
    sq = {k: 0.0 for k in names}
    done = 0
    for rng, count in block_rngs(seed, reps, block):
        x = fam.sample(theta, rng, count)
        d = fam.derivatives(x, theta)
        s = d.d1
        vals = {
            "second": d.d2,
            "third": np.einsum("na,nb,nc->nabc", s, s, s),
            "fourth": np.einsum("na,nb,nc,nd->nabcd", s, s, s, s) - disc,
        }
        for k in names:
            sums[k] = sums[k] + vals[k].sum(axis=0)
            sq[k] = sq[k] + (vals[k] ** 2).sum(axis=0)
        done += count
    analytic = {"second": lt.second, "third": lt.third, "fourth": lt.fourth}
    est, se, z = {}, {}, {}
    for k in names:
        mean = sums[k] / done
        var = np.maximum(sq[k] / done - mean**2, 0.0) * done / (done - 1)
        err = np.sqrt(var / done)
        est[k], se[k] = mean, err
        gap = np.abs(mean - analytic[k])
        # entries that vanish identically have zero spread
        z[k] = float(np.max(np.where(err > 0, gap / np.where(err > 0, err, 1.0), np.where(gap > 1e-12, math.inf, 0.0))))
    return Lemma1MCReport(int(done), int(seed), z, est, se, analytic)
