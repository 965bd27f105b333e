"""Linearised estimation error and its variance.

To first order ``theta_i - theta*_i`` equals ``J_i = (1/d) sum_l J_il`` where
``J_il`` is the (mean-zero) contribution of comparison ``l``.  This module
evaluates the contributions at any score vector together with the variance
and studentisation quantities derived from them.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .data import ComparisonDataset
from .errors import NumericError, ParameterError, UnsupportedConfigurationError
from .spectral import SpectralFit, WeightScheme

__all__ = [
    "JContributions",
    "VarianceReport",
    "j_contributions",
    "iter_j_contributions",
    "var_J_fixed",
    "sigma_km",
    "sigma_matrix",
    "omitted_covariance",
    "var_J_pl_random",
]


@dataclass(frozen=True)
class JContributions:
    """Sparse ``n x |D|`` matrix of contributions ``J_il`` plus ``tau_i``."""

    J: sp.csr_matrix
    tau: np.ndarray
    d: float

    def totals(self) -> np.ndarray:
        """``J_i = (1/d) sum_l J_il`` for every item."""
        return np.asarray(self.J.sum(axis=1)).ravel() / self.d


@dataclass(frozen=True)
class VarianceReport:
    var_J: np.ndarray
    rho: np.ndarray
    scheme: WeightScheme
    theta: np.ndarray


def _set_sums(ds: ComparisonDataset, e: np.ndarray) -> np.ndarray:
    return np.bincount(ds.comparison_ids, weights=e[ds.members],
                       minlength=ds.n_comparisons)


def _check_theta(ds, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (ds.n_items,):
        raise ParameterError(f"theta must have length {ds.n_items}")
    return theta


def _tau_inverse(ds, e, S, f, d) -> np.ndarray:
    lid = ds.comparison_ids
    ei = e[ds.members]
    w = (1.0 - ei / S[lid]) * ei / f[lid]
    tau_inv = np.bincount(ds.members, weights=w, minlength=ds.n_items) / d
    if np.any(tau_inv <= 0):
        bad = int(np.flatnonzero(tau_inv <= 0)[0])
        raise NumericError(f"item {bad} is never compared; tau is undefined")
    return tau_inv


def _entry_values(ds, e, S, f, tau, start=0, stop=None):
    """``J_il`` for the member entries of comparisons ``start..stop-1``."""
    stop = ds.n_comparisons if stop is None else stop
    lo, hi = ds.offsets[start], ds.offsets[stop]
    items = ds.members[lo:hi]
    lid = ds.comparison_ids[lo:hi]
    ei = e[items]
    won = items == ds.winners[lid]
    vals = np.where(won, S[lid] - ei, -ei) / f[lid]
    return items, lid, vals * tau[items]


def j_contributions(ds: ComparisonDataset, theta, scheme: WeightScheme,
                    d: float) -> JContributions:
    """Contributions ``J_il(theta)`` of every comparison to every item.

    ``J_il = tau_i / f(A_l) * [1(c_l = i) sum_{u in A_l, u != i} e^theta_u
    - e^theta_i 1(c_l != i)]`` for ``i in A_l`` and zero otherwise.
    """
    theta = _check_theta(ds, theta)
    if d <= 0:
        raise ParameterError("d must be positive")
    e = np.exp(theta)
    S = _set_sums(ds, e)
    f = scheme.weights(ds)
    tau = 1.0 / _tau_inverse(ds, e, S, f, d)
    items, lid, vals = _entry_values(ds, e, S, f, tau)
    J = sp.csr_matrix((vals, (items, lid)), shape=(ds.n_items, ds.n_comparisons))
    return JContributions(J=J, tau=tau, d=float(d))


def iter_j_contributions(ds: ComparisonDataset, theta, scheme: WeightScheme,
                         d: float, chunk: int = 4096
                         ) -> Iterator[tuple[int, int, sp.csr_matrix]]:
    """Stream the contribution matrix in column blocks ``(start, stop, J[:, start:stop])``."""
    theta = _check_theta(ds, theta)
    e = np.exp(theta)
    S = _set_sums(ds, e)
    f = scheme.weights(ds)
    tau = 1.0 / _tau_inverse(ds, e, S, f, d)
    for start in range(0, ds.n_comparisons, chunk):
        stop = min(start + chunk, ds.n_comparisons)
        items, lid, vals = _entry_values(ds, e, S, f, tau, start, stop)
        block = sp.csr_matrix((vals, (items, lid - start)),
                              shape=(ds.n_items, stop - start))
        yield start, stop, block


def var_J_fixed(ds: ComparisonDataset, theta, scheme: WeightScheme,
                d: float | None = None) -> VarianceReport:
    """Conditional variance of ``J_i`` given the choice sets.

    ``d`` cancels out and is accepted only for symmetry with the other
    routines.  ``rho_i = var_J_i ** -0.5`` is the per-item normaliser.
    """
    theta = _check_theta(ds, theta)
    e = np.exp(theta)
    S = _set_sums(ds, e)
    f = scheme.weights(ds)
    lid = ds.comparison_ids
    ei = e[ds.members]
    rest = S[lid] - ei
    fl = f[lid]
    num = np.bincount(ds.members, weights=rest * ei / fl**2, minlength=ds.n_items)
    den = np.bincount(ds.members, weights=(rest / S[lid]) * ei / fl,
                      minlength=ds.n_items)
    if np.any(den <= 0):
        bad = int(np.flatnonzero(den <= 0)[0])
        raise NumericError(f"item {bad} is never compared; variance undefined")
    var = num / den**2
    return VarianceReport(var_J=var, rho=1.0 / np.sqrt(var), scheme=scheme,
                          theta=theta)


def sigma_matrix(ds: ComparisonDataset, fit: SpectralFit) -> np.ndarray:
    """All ``sigma_km = sqrt(var_k + var_m)`` at the fitted scores.

    The covariance between ``J_k`` and ``J_m`` is deliberately left out; see
    :func:`omitted_covariance` for its size.  The diagonal is NaN.
    """
    v = var_J_fixed(ds, fit.theta, fit.scheme).var_J
    s = np.sqrt(v[:, None] + v[None, :])
    np.fill_diagonal(s, np.nan)
    return s


def sigma_km(ds: ComparisonDataset, fit: SpectralFit, k: int, m: int) -> float:
    """Studentisation scale for the difference of items ``k`` and ``m``."""
    if k == m:
        raise ParameterError("sigma_km needs two distinct items")
    v = var_J_fixed(ds, fit.theta, fit.scheme).var_J
    s = float(np.sqrt(v[k] + v[m]))
    if not s > 0:
        raise NumericError(f"sigma_{k}{m} is not positive")
    return s


def omitted_covariance(ds: ComparisonDataset, theta, scheme: WeightScheme,
                       d: float, k: int, m: int) -> float:
    """Plug-in ``Cov(J_k, J_m)``, the term dropped from ``sigma_km``.

    For a comparison containing both items ``E[J_kl J_ml] = -tau_k tau_m
    e^theta_k e^theta_m / f(A_l)^2``; the total is of order ``n_ddagger /
    n_dagger^2``.
    """
    theta = _check_theta(ds, theta)
    e = np.exp(theta)
    S = _set_sums(ds, e)
    f = scheme.weights(ds)
    tau = 1.0 / _tau_inverse(ds, e, S, f, d)
    inc = ds.incidence()
    both = np.asarray(inc[:, k].multiply(inc[:, m]).todense()).ravel() > 0
    return float(-tau[k] * tau[m] * e[k] * e[m] * np.sum(1.0 / f[both] ** 2) / d**2)


def var_J_pl_random(config, edges, theta, scheme: WeightScheme,
                    d: float) -> VarianceReport:
    """Variance of ``J_i`` for 3-way Plackett-Luce rankings on a random graph.

    Each row of ``edges`` is a compared triple, ranked ``config.L`` times and
    multi-level broken.  Conditioning is on the triples, not on the broken
    comparisons.  Only ``M = 3`` has a closed form.
    """
    M = getattr(config, "M", 3)
    L = getattr(config, "L", 1)
    if M != 3:
        raise UnsupportedConfigurationError(
            f"closed-form random-graph variance needs M = 3, got M = {M}")
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[0]
    e = np.exp(theta)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    tau_inv = np.zeros(n)
    num = np.zeros(n)
    for tri in edges:
        S3 = e[tri].sum()
        f3 = scheme.set_weight(tri)
        for i in tri:
            j, k = (u for u in tri if u != i)
            fij = scheme.set_weight((i, j))
            fik = scheme.set_weight((i, k))
            ejk = e[j] * e[k]
            tau_inv[i] += e[i] * (ejk / (S3 * (e[i] + e[j]) * fij)
                                  + ejk / (S3 * (e[i] + e[k]) * fik)
                                  + (e[j] + e[k]) / (S3 * f3))
            num[i] += e[i] * ((e[j] + e[k]) / f3**2
                              + ejk / S3 * (1.0 / fik**2 + 1.0 / fij**2))
    tau_inv *= L / d
    if np.any(tau_inv <= 0):
        bad = int(np.flatnonzero(tau_inv <= 0)[0])
        raise NumericError(f"item {bad} belongs to no sampled triple")
    tau = 1.0 / tau_inv
    var = L * tau**2 / d**2 * num
    return VarianceReport(var_J=var, rho=1.0 / np.sqrt(var), scheme=scheme,
                          theta=theta)


def expected_pl_transition(edges, theta, scheme: WeightScheme, L: int,
                           d: float) -> np.ndarray:
    """``E[P_ij]`` for multi-level broken PL rankings, by enumerating orderings.

    Independent of the closed forms above; used to cross-check them.
    """
    from itertools import permutations

    theta = np.asarray(theta, dtype=float)
    n = theta.shape[0]
    e = np.exp(theta)
    W = np.zeros((n, n))
    for tup in np.asarray(edges, dtype=np.int64):
        tup = [int(t) for t in tup]
        for order in permutations(tup):
            prob, rest = 1.0, list(order)
            for t in range(len(order) - 1):
                prob *= e[order[t]] / e[rest].sum()
                rest = rest[1:]
            for t in range(len(order) - 1):
                A = order[t:]
                fA = scheme.set_weight(A)
                for loser in A[1:]:
                    W[loser, order[t]] += L * prob / fA
    P = W / d
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def pair_combinations(n: int, M: int) -> np.ndarray:
    """All ``M``-subsets of ``range(n)`` as an array, lexicographic order."""
    return np.array(list(combinations(range(n), M)), dtype=np.int64).reshape(-1, M)
