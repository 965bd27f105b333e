"""Gaussian multiplier bootstrap for studentised maximum statistics.

Each draw reweights the per-comparison contributions ``J_il`` with i.i.d.
standard normal multipliers.  Draw ``b`` always uses the generator seeded by
``(seed, b)``, so results do not depend on how draws are split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .data import ComparisonDataset
from .errors import NumericError, ParameterError
from .spectral import SpectralFit
from .variance import j_contributions, var_J_fixed

__all__ = [
    "BootstrapSpec",
    "BootstrapResult",
    "BootstrapScores",
    "bootstrap_scores",
    "run_bootstrap",
    "quantile",
    "order_statistic_quantile",
    "studentized_max",
    "pair_sigma",
]

_SIDES = {"two_sided": "two_sided", "two": "two_sided",
          "one_sided": "one_sided", "one": "one_sided"}
_GROUPINGS = ("per_comparison", "per_hyperedge")
_ENGINES = ("multiplier", "gaussian")
_CHUNK = 64


@dataclass(frozen=True)
class BootstrapSpec:
    """Settings for one bootstrap run.

    Attributes:
        items: The item set ``M`` over which the maximum is taken.
        side: ``"two_sided"`` uses absolute differences, ``"one_sided"`` the
            signed maximum.
        B: Number of draws, at least 100.
        seed: Master seed; draw ``b`` uses ``default_rng([seed, b])``.
        grouping: ``"per_comparison"`` draws one multiplier per comparison.
            ``"per_hyperedge"`` draws one per group of the dataset, so all
            breakings of one full ranking share a multiplier.
        engine: ``"multiplier"`` forms ``J @ omega`` literally.
            ``"gaussian"`` samples the same conditional normal law through an
            ``n x n`` factor of ``J J^T``, which is much cheaper when the
            number of comparisons is large.  The draws differ numerically but
            not in distribution.
    """

    items: tuple[int, ...]
    side: str = "two_sided"
    B: int = 500
    seed: int = 0
    grouping: str = "per_comparison"
    engine: str = "multiplier"

    def __post_init__(self):
        items = tuple(int(i) for i in np.atleast_1d(np.asarray(self.items, dtype=np.int64)))
        if not items:
            raise ParameterError("item set M must be nonempty")
        if min(items) < 0:
            raise ParameterError("item indices must be nonnegative")
        object.__setattr__(self, "items", tuple(sorted(set(items))))
        side = _SIDES.get(str(self.side))
        if side is None:
            raise ParameterError(f"side must be two_sided or one_sided, got {self.side!r}")
        object.__setattr__(self, "side", side)
        if int(self.B) < 100:
            raise ParameterError(f"B must be at least 100, got {self.B}")
        object.__setattr__(self, "B", int(self.B))
        if self.grouping not in _GROUPINGS:
            raise ParameterError(f"unknown grouping {self.grouping!r}")
        if self.engine not in _ENGINES:
            raise ParameterError(f"unknown engine {self.engine!r}")

    @property
    def two_sided(self) -> bool:
        return self.side == "two_sided"


@dataclass(frozen=True)
class BootstrapScores:
    """Bootstrap replicates of the linearised score errors.

    ``Y[:, b] = (1/d) sum_l J_l(theta) omega_lb`` for every item, plus the
    pairwise studentisation matrix ``sigma`` (NaN on the diagonal).  Any item
    set can be evaluated against the same multipliers.
    """

    Y: np.ndarray
    sigma: np.ndarray
    B: int
    seed: int
    grouping: str
    engine: str

    def statistic(self, items, two_sided: bool = True) -> np.ndarray:
        return studentized_max(self.Y, self.sigma, items, two_sided)


@dataclass(frozen=True)
class BootstrapResult:
    draws: np.ndarray
    spec: BootstrapSpec
    sigma: np.ndarray = field(repr=False)

    def quantile(self, alpha: float) -> float:
        return quantile(self, alpha)


def pair_sigma(var_J: np.ndarray) -> np.ndarray:
    """``sqrt(var_k + var_m)`` for all pairs, NaN on the diagonal."""
    s = np.sqrt(var_J[:, None] + var_J[None, :])
    np.fill_diagonal(s, np.nan)
    return s


def studentized_max(values: np.ndarray, sigma: np.ndarray, items,
                    two_sided: bool = True) -> np.ndarray:
    """``max_{m in M} max_{k != m} (v_k - v_m) / sigma_km`` per column of ``values``.

    Args:
        values: ``n`` or ``n x B`` array.
        sigma: ``n x n`` pairwise scales.
        items: The item set ``M``.
        two_sided: Take absolute values before maximising.

    Returns:
        Array of length ``B`` (a scalar array for 1-d input).
    """
    v = np.asarray(values, dtype=float)
    one_d = v.ndim == 1
    if one_d:
        v = v[:, None]
    n = v.shape[0]
    out = np.full(v.shape[1], -np.inf)
    for m in items:
        diff = (v - v[m]) / sigma[:, m][:, None]
        diff = np.delete(diff, m, axis=0)
        if two_sided:
            diff = np.abs(diff)
        np.maximum(out, diff.max(axis=0) if n > 1 else -np.inf, out=out)
    return out[0] if one_d else out


def _group_matrix(ds: ComparisonDataset, J: sp.csr_matrix) -> sp.csr_matrix:
    """Sum the columns of ``J`` within each group of comparisons."""
    G = sp.csr_matrix((np.ones(ds.n_comparisons), (np.arange(ds.n_comparisons), ds.groups)),
                      shape=(ds.n_comparisons, ds.n_groups))
    Jg = (J @ G).tocsr()
    Jg.sort_indices()
    return Jg


def _normals(seed: int, b: int, size: int) -> np.ndarray:
    return np.random.default_rng([int(seed), int(b)]).standard_normal(size)


def _multiplier_draws(Jg: sp.csr_matrix, d: float, B: int, seed: int,
                      workers: int) -> np.ndarray:
    n, q = Jg.shape
    Y = np.empty((n, B))

    def run(start: int) -> None:
        stop = min(start + _CHUNK, B)
        W = np.empty((q, stop - start))
        for b in range(start, stop):
            W[:, b - start] = _normals(seed, b, q)
        Y[:, start:stop] = (Jg @ W) / d

    starts = range(0, B, _CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return Y


def _gaussian_draws(Jg: sp.csr_matrix, d: float, B: int, seed: int) -> np.ndarray:
    C = np.asarray((Jg @ Jg.T).todense()) / d**2
    lam, V = np.linalg.eigh((C + C.T) / 2)
    F = V * np.sqrt(np.clip(lam, 0.0, None))
    n = C.shape[0]
    Z = np.empty((n, B))
    for b in range(B):
        Z[:, b] = _normals(seed, b, n)
    return F @ Z


def bootstrap_scores(ds: ComparisonDataset, fit: SpectralFit, B: int = 500,
                     seed: int = 0, grouping: str = "per_comparison",
                     engine: str = "multiplier", workers: int = 1) -> BootstrapScores:
    """Draw ``B`` bootstrap replicates of the linearised errors of all items.

    Contributions and ``sigma_km`` are evaluated at ``fit.theta`` with the
    weights and ``d`` of the fit.  For grouped draws the studentisation keeps
    the per-comparison variance so that singleton groups reproduce the
    ungrouped run exactly.
    """
    if grouping not in _GROUPINGS:
        raise ParameterError(f"unknown grouping {grouping!r}")
    if engine not in _ENGINES:
        raise ParameterError(f"unknown engine {engine!r}")
    if fit.n_items != ds.n_items:
        raise ParameterError("fit and dataset disagree on the number of items")
    contrib = j_contributions(ds, fit.theta, fit.scheme, fit.d)
    J = contrib.J
    J.sort_indices()
    Jg = _group_matrix(ds, J) if grouping == "per_hyperedge" else J
    var = var_J_fixed(ds, fit.theta, fit.scheme).var_J
    sigma = pair_sigma(var)
    if engine == "gaussian":
        Y = _gaussian_draws(Jg, fit.d, B, seed)
    else:
        Y = _multiplier_draws(Jg, fit.d, B, seed, max(1, int(workers)))
    return BootstrapScores(Y=Y, sigma=sigma, B=B, seed=seed, grouping=grouping,
                           engine=engine)


def run_bootstrap(ds: ComparisonDataset, fit: SpectralFit, spec: BootstrapSpec,
                  workers: int = 1) -> BootstrapResult:
    """Bootstrap distribution of ``G_M`` (two-sided) or its signed version.

    Raises:
        ParameterError: ``M`` is empty or refers to unknown items.
        NumericError: Some ``sigma_km`` with ``m`` in ``M`` is not positive.
    """
    if not spec.items:
        raise ParameterError("item set M must be nonempty")
    if max(spec.items) >= ds.n_items:
        raise ParameterError(f"item {max(spec.items)} is out of range")
    scores = bootstrap_scores(ds, fit, spec.B, spec.seed, spec.grouping,
                              spec.engine, workers)
    cols = scores.sigma[:, list(spec.items)]
    off = ~np.isnan(cols)
    if not np.all(cols[off] > 0):
        raise NumericError("a studentisation scale sigma_km is zero")
    draws = scores.statistic(spec.items, spec.two_sided)
    draws.setflags(write=False)
    return BootstrapResult(draws=draws, spec=spec, sigma=scores.sigma)


def order_statistic_quantile(draws, alpha: float) -> float:
    """The ``ceil((1 - alpha) B)``-th smallest draw."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    x = np.sort(np.asarray(draws, dtype=float))
    B = x.shape[0]
    if B == 0:
        raise ParameterError("no bootstrap draws")
    # rounding guards against (1 - alpha) * B landing just above an integer
    k = math.ceil(round((1.0 - alpha) * B, 9))
    k = min(max(k, 1), B)
    return float(x[k - 1])


def quantile(result: BootstrapResult, alpha: float) -> float:
    """Conservative empirical quantile ``Q_{1-alpha}`` of the bootstrap draws."""
    return order_statistic_quantile(result.draws, alpha)
