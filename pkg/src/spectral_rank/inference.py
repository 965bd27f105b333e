"""Rank confidence intervals, top-K tests, screening sets and two-sample tests.

Simultaneous intervals for score differences ``theta_k - theta_m`` are turned
into rank intervals by counting the items that are confidently above or below
item ``m``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .bootstrap import (BootstrapSpec, order_statistic_quantile, run_bootstrap,
                        studentized_max)
from .data import ComparisonDataset
from .errors import ParameterError
from .spectral import SpectralFit, fit as spectral_fit

__all__ = [
    "RankInterval",
    "TestDecision",
    "intervals_from_threshold",
    "point_ranks",
    "rank_cis",
    "test_top_k",
    "screen_top_k",
    "two_sample_item_test",
    "two_sample_topk_test",
    "intervals_to_csv",
    "intervals_to_json",
    "INTERVAL_COLUMNS",
]

INTERVAL_COLUMNS = ("item", "theta", "rank", "lower", "upper", "alpha", "side")


@dataclass(frozen=True)
class RankInterval:
    item: int
    lower: int
    upper: int
    alpha: float
    side: str
    theta: float = float("nan")
    rank: int = 0
    critical_value: float = float("nan")

    def __post_init__(self):
        if not 1 <= self.lower <= self.upper:
            raise ParameterError(f"invalid rank interval [{self.lower}, {self.upper}]")
        if self.side not in ("two_sided", "left_sided"):
            raise ParameterError(f"unknown interval side {self.side!r}")

    def contains(self, r: int) -> bool:
        return self.lower <= r <= self.upper

    @property
    def length(self) -> int:
        return self.upper - self.lower


@dataclass(frozen=True)
class TestDecision:
    reject: bool
    alpha: float
    details: dict = field(default_factory=dict)


def point_ranks(theta) -> np.ndarray:
    """1-based ranks by decreasing score; ties go to the smaller index."""
    theta = np.asarray(theta, dtype=float)
    order = np.lexsort((np.arange(theta.shape[0]), -theta))
    r = np.empty(theta.shape[0], dtype=np.int64)
    r[order] = np.arange(1, theta.shape[0] + 1)
    return r


def intervals_from_threshold(theta, sigma, items, Q: float, alpha: float,
                             side: str = "two_sided") -> list[RankInterval]:
    """Count confidently separated items for every ``m`` in ``items``.

    ``lower = 1 + #{k != m : theta_k - theta_m > sigma_km Q}`` and, for
    two-sided intervals, ``upper = n - #{k != m : theta_k - theta_m <
    -sigma_km Q}``.  Left-sided intervals have ``upper = n``.
    """
    theta = np.asarray(theta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    n = theta.shape[0]
    ranks = point_ranks(theta)
    out = []
    for m in items:
        diff = np.delete(theta - theta[m], m)
        thr = np.delete(sigma[:, m], m) * Q
        lower = 1 + int(np.sum(diff > thr))
        upper = n - int(np.sum(diff < -thr)) if side == "two_sided" else n
        out.append(RankInterval(item=int(m), lower=lower, upper=upper,
                                alpha=float(alpha), side=side,
                                theta=float(theta[m]), rank=int(ranks[m]),
                                critical_value=float(Q)))
    return out


def _spec_for(items, spec: BootstrapSpec | None, side: str) -> BootstrapSpec:
    if spec is None:
        return BootstrapSpec(items=tuple(items), side=side)
    return replace(spec, items=tuple(items), side=side)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")


def rank_cis(ds: ComparisonDataset, fit: SpectralFit, items, alpha: float = 0.05,
             spec: BootstrapSpec | None = None, *, side: str = "two_sided",
             workers: int = 1) -> list[RankInterval]:
    """Simultaneous rank confidence intervals for the items in ``items``.

    ``side="two_sided"`` gives ``[R_L, R_U]``; ``side="one_sided"`` gives
    left-sided intervals ``[R_L, n]`` calibrated by the signed statistic.  The
    seed, ``B``, grouping and engine come from ``spec`` when given.
    """
    _check_alpha(alpha)
    items = [int(i) for i in items]
    bside = "one_sided" if side in ("one_sided", "left_sided", "one") else "two_sided"
    res = run_bootstrap(ds, fit, _spec_for(items, spec, bside), workers=workers)
    Q = order_statistic_quantile(res.draws, alpha)
    iside = "two_sided" if bside == "two_sided" else "left_sided"
    return intervals_from_threshold(fit.theta, res.sigma, items, Q, alpha, iside)


def test_top_k(ds: ComparisonDataset, fit: SpectralFit, m: int, K: int,
               alpha: float = 0.05, spec: BootstrapSpec | None = None, *,
               theta_star=None, workers: int = 1) -> TestDecision:
    """Test ``H0: rank(m) <= K`` against ``rank(m) > K``.

    Rejects when the left-sided lower bound for item ``m`` exceeds ``K``.
    With ``theta_star`` the report also says whether the one-sided
    score-difference statistic exceeded its critical value.
    """
    _check_alpha(alpha)
    n = ds.n_items
    if not 1 <= K <= n:
        raise ParameterError(f"K must lie in [1, {n}], got {K}")
    res = run_bootstrap(ds, fit, _spec_for([m], spec, "one_sided"), workers=workers)
    Q = order_statistic_quantile(res.draws, alpha)
    (ci,) = intervals_from_threshold(fit.theta, res.sigma, [m], Q, alpha, "left_sided")
    details = {"interval": ci, "critical_value": Q, "K": K, "item": m}
    if theta_star is not None:
        err = fit.theta - np.asarray(theta_star, dtype=float)
        T = float(studentized_max(err, res.sigma, [m], two_sided=False))
        details["score_statistic"] = T
        details["score_exceedance"] = bool(T > Q)
    return TestDecision(reject=ci.lower > K, alpha=alpha, details=details)


def screen_top_k(ds: ComparisonDataset, fit: SpectralFit, K: int,
                 alpha: float = 0.05, spec: BootstrapSpec | None = None, *,
                 workers: int = 1) -> tuple[int, ...]:
    """Sure-screening set ``{m : R_L(m) <= K}`` from uniform left-sided intervals."""
    n = ds.n_items
    if not 1 <= K <= n:
        raise ParameterError(f"K must lie in [1, {n}], got {K}")
    cis = rank_cis(ds, fit, range(n), alpha, spec, side="one_sided", workers=workers)
    return tuple(ci.item for ci in cis if ci.lower <= K)


def _check_universe(ds1: ComparisonDataset, ds2: ComparisonDataset) -> None:
    if ds1.n_items != ds2.n_items:
        raise ParameterError(
            f"samples cover different item universes ({ds1.n_items} vs {ds2.n_items})")
    if ds1.labels is not None and ds2.labels is not None \
            and list(ds1.labels) != list(ds2.labels):
        raise ParameterError("samples use different item labels")


def _fits(ds1, ds2, scheme, fit1, fit2):
    f1 = fit1 if fit1 is not None else spectral_fit(ds1, scheme)
    f2 = fit2 if fit2 is not None else spectral_fit(ds2, scheme)
    return f1, f2


def two_sample_item_test(ds1: ComparisonDataset, ds2: ComparisonDataset, m: int,
                         alpha: float = 0.05, spec: BootstrapSpec | None = None, *,
                         scheme="vanilla", fit1: SpectralFit | None = None,
                         fit2: SpectralFit | None = None,
                         workers: int = 1) -> TestDecision:
    """Test whether item ``m`` has the same rank in two independent samples.

    Each sample gets a two-sided interval at level ``1 - alpha/2``; the test
    rejects when the intervals are disjoint.  Both samples use the same
    bootstrap settings, so swapping them gives the same decision.
    """
    _check_alpha(alpha)
    _check_universe(ds1, ds2)
    f1, f2 = _fits(ds1, ds2, scheme, fit1, fit2)
    (c1,) = rank_cis(ds1, f1, [m], alpha / 2, spec, workers=workers)
    (c2,) = rank_cis(ds2, f2, [m], alpha / 2, spec, workers=workers)
    disjoint = c1.upper < c2.lower or c2.upper < c1.lower
    return TestDecision(reject=disjoint, alpha=alpha,
                        details={"interval1": c1, "interval2": c2, "item": m})


def two_sample_topk_test(ds1: ComparisonDataset, ds2: ComparisonDataset, K: int,
                         alpha: float = 0.05, spec: BootstrapSpec | None = None, *,
                         scheme="vanilla", fit1: SpectralFit | None = None,
                         fit2: SpectralFit | None = None,
                         workers: int = 1) -> TestDecision:
    """Test whether two samples share the same top-``K`` set.

    Screening sets are built at level ``1 - alpha/2`` each; the test rejects
    when they have fewer than ``K`` items in common.
    """
    _check_alpha(alpha)
    _check_universe(ds1, ds2)
    f1, f2 = _fits(ds1, ds2, scheme, fit1, fit2)
    s1 = screen_top_k(ds1, f1, K, alpha / 2, spec, workers=workers)
    s2 = screen_top_k(ds2, f2, K, alpha / 2, spec, workers=workers)
    common = sorted(set(s1) & set(s2))
    return TestDecision(reject=len(common) < K, alpha=alpha,
                        details={"set1": s1, "set2": s2, "intersection": tuple(common),
                                 "K": K})


def _row(ci: RankInterval, labels=None) -> dict:
    item = labels[ci.item] if labels is not None else ci.item
    return {"item": item, "theta": ci.theta, "rank": ci.rank, "lower": ci.lower,
            "upper": ci.upper, "alpha": ci.alpha, "side": ci.side}


def intervals_to_csv(intervals, labels=None) -> str:
    """CSV with columns item, theta, rank, lower, upper, alpha, side."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=INTERVAL_COLUMNS, lineterminator="\n")
    w.writeheader()
    for ci in intervals:
        row = _row(ci, labels)
        row["theta"] = repr(float(row["theta"]))
        w.writerow(row)
    return buf.getvalue()


def intervals_to_json(intervals, labels=None) -> str:
    return json.dumps([_row(ci, labels) for ci in intervals], indent=2)


def interval_as_dict(ci: RankInterval) -> dict:
    return asdict(ci)
