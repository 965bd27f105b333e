"""Synthetic data, the Plackett-Luce MLE baseline and the Monte Carlo harness.

Two designs are provided.  The fixed heterogeneous design draws choice sets
of size 2 to 5 from nested top strata of the items, with one Luce winner per
set.  The random-graph design keeps each ``M``-subset with probability ``p``
and ranks every kept subset ``L`` times under the PL model.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .bootstrap import bootstrap_scores, order_statistic_quantile, studentized_max
from .data import ComparisonDataset, check_rankability
from .errors import (FitError, GenerationError, NumericError, ParameterError,
                     SpectralRankError)
from .inference import intervals_from_threshold
from .spectral import WeightScheme, fit as spectral_fit

__all__ = [
    "theta_grid",
    "FixedGraphConfig",
    "PLConfig",
    "MCReport",
    "gen_fixed_heterogeneous",
    "gen_pl_random",
    "pl_log_likelihood",
    "pl_gradient",
    "mle_choice",
    "mle_pl",
    "MLEResult",
    "SCENARIOS",
    "monte_carlo_run",
    "load_scenario_config",
]


def theta_grid(n: int = 50, low: float = -2.0, high: float = 2.0) -> np.ndarray:
    """Evenly spaced scores, largest first, so item ``i`` has true rank ``i + 1``."""
    return np.linspace(high, low, n)


@dataclass(frozen=True)
class FixedGraphConfig:
    """Fixed heterogeneous comparison design.

    ``strata`` lists ``(fraction of comparisons, top fraction of items)``
    pairs.  Items are ordered by decreasing ``design_theta`` (``theta_star``
    when not given), ties by index.  Winners always follow ``theta_star``.
    """

    n: int = 50
    total_comparisons: int = 12000
    theta_star: np.ndarray | None = None
    seed: int = 0
    size_menu: tuple[int, ...] = (2, 3, 4, 5)
    strata: tuple[tuple[float, float], ...] = ((0.2, 0.2), (0.2, 0.5), (0.6, 1.0))
    design_theta: np.ndarray | None = None

    def __post_init__(self):
        if self.theta_star is None:
            object.__setattr__(self, "theta_star", theta_grid(self.n))
        for name in ("theta_star", "design_theta"):
            v = getattr(self, name)
            if v is None:
                continue
            th = np.asarray(v, dtype=float)
            if th.shape != (self.n,) or not np.all(np.isfinite(th)):
                raise ParameterError(f"{name} must be a finite vector of length {self.n}")
            object.__setattr__(self, name, th)
        if abs(sum(f for f, _ in self.strata) - 1.0) > 1e-12:
            raise ParameterError("stratum fractions must sum to 1")
        if self.total_comparisons < 1:
            raise ParameterError("total_comparisons must be positive")
        if min(self.size_menu) < 2:
            raise ParameterError("choice sets need at least two items")


@dataclass(frozen=True)
class PLConfig:
    """Plackett-Luce model on an Erdos-Renyi hypergraph of ``M``-subsets."""

    n: int = 50
    M: int = 3
    p: float = 0.05
    L: int = 10
    theta_star: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.theta_star is None:
            object.__setattr__(self, "theta_star", theta_grid(self.n))
        th = np.asarray(self.theta_star, dtype=float)
        if th.shape != (self.n,) or not np.all(np.isfinite(th)):
            raise ParameterError(f"theta_star must be a finite vector of length {self.n}")
        object.__setattr__(self, "theta_star", th)
        if not 0.0 < self.p <= 1.0:
            raise ParameterError(f"p must lie in (0, 1], got {self.p}")
        if self.L < 1:
            raise ParameterError("L must be at least 1")
        if not 2 <= self.M <= self.n:
            raise ParameterError(f"M must lie in [2, n], got {self.M}")


def _stratum_counts(total: int, fractions) -> list[int]:
    counts = [int(math.floor(total * f)) for f in fractions[:-1]]
    counts.append(total - sum(counts))
    return counts


def _luce_winners(theta, sets, mask, rng) -> np.ndarray:
    """Gumbel-max draw of one winner per row of ``sets`` (valid where ``mask``)."""
    keys = theta[sets] + rng.gumbel(size=sets.shape)
    keys[~mask] = -np.inf
    return sets[np.arange(sets.shape[0]), keys.argmax(axis=1)]


def gen_fixed_heterogeneous(cfg: FixedGraphConfig) -> ComparisonDataset:
    """Draw a dataset from the fixed heterogeneous design.

    Raises:
        GenerationError: A drawn set size exceeds its stratum.
    """
    rng = np.random.default_rng(cfg.seed)
    design = cfg.theta_star if cfg.design_theta is None else cfg.design_theta
    order = np.lexsort((np.arange(cfg.n), -design))
    menu = np.asarray(cfg.size_menu, dtype=np.int64)
    counts = _stratum_counts(cfg.total_comparisons, [f for f, _ in cfg.strata])
    members, sizes, winners = [], [], []
    for (_, top), cnt in zip(cfg.strata, counts):
        if cnt == 0:
            continue
        pool = order[: max(1, int(round(top * cfg.n)))]
        size = menu[rng.integers(0, menu.shape[0], size=cnt)]
        if size.max() > pool.shape[0]:
            raise GenerationError(
                f"stratum of {pool.shape[0]} items cannot hold a set of size {size.max()}")
        smax = int(size.max())
        # random permutation of the pool per comparison, keep the first |A|
        picks = pool[np.argsort(rng.random((cnt, pool.shape[0])), axis=1)[:, :smax]]
        mask = np.arange(smax)[None, :] < size[:, None]
        winners.append(_luce_winners(cfg.theta_star, picks, mask, rng))
        members.append(picks[mask])
        sizes.append(size)
    sizes = np.concatenate(sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return ComparisonDataset(cfg.n, np.concatenate(members), offsets,
                             np.concatenate(winners))


def gen_pl_random(cfg: PLConfig) -> tuple[np.ndarray, np.ndarray]:
    """Sample the hypergraph and ``L`` PL full rankings per kept subset.

    Returns:
        ``(edges, rankings)``: ``edges`` is ``N x M`` (kept subsets in
        lexicographic order); ``rankings`` is ``N L x M``, best item first,
        the ``L`` rankings of edge ``q`` occupying rows ``q L .. q L + L - 1``.
        Pass ``rankings`` to :meth:`ComparisonDataset.from_rankings` for
        multi-level breaking.

    Raises:
        GenerationError: No subset was kept.
    """
    rng = np.random.default_rng(cfg.seed)
    expected_degree = math.comb(cfg.n - 1, cfg.M - 1) * cfg.p
    if expected_degree < math.log(cfg.n):
        warnings.warn(f"expected item degree {expected_degree:.2f} is below log(n); "
                      "the comparison graph may be disconnected", RuntimeWarning,
                      stacklevel=2)
    n_sub = math.comb(cfg.n, cfg.M)
    keep = rng.random(n_sub) < cfg.p
    if not keep.any():
        raise GenerationError(f"no {cfg.M}-subset was sampled with p={cfg.p}; increase p")
    idx = np.flatnonzero(keep)
    all_sub = np.fromiter((c for combo in combinations(range(cfg.n), cfg.M) for c in combo),
                          dtype=np.int64, count=n_sub * cfg.M).reshape(n_sub, cfg.M)
    edges = all_sub[idx]
    tup = np.repeat(edges, cfg.L, axis=0)
    keys = cfg.theta_star[tup] + rng.gumbel(size=tup.shape)
    order = np.argsort(-keys, axis=1, kind="stable")
    rankings = np.take_along_axis(tup, order, axis=1)
    return edges, rankings


# ---------------------------------------------------------------------------
# maximum likelihood baseline


def _choice_probs(ds: ComparisonDataset, theta: np.ndarray):
    lid = ds.comparison_ids
    e = np.exp(theta - theta.max())
    ei = e[ds.members]
    S = np.bincount(lid, weights=ei, minlength=ds.n_comparisons)
    return ei / S[lid], S, e


def pl_log_likelihood(ds: ComparisonDataset, theta) -> float:
    """``sum_l theta_{c_l} - log sum_{u in A_l} exp(theta_u)``."""
    theta = np.asarray(theta, dtype=float)
    _, S, _ = _choice_probs(ds, theta)
    return float(theta[ds.winners].sum() - (np.log(S) + theta.max()).sum())


def pl_gradient(ds: ComparisonDataset, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    p, _, _ = _choice_probs(ds, theta)
    n = ds.n_items
    return (np.bincount(ds.winners, minlength=n)
            - np.bincount(ds.members, weights=p, minlength=n))


def _neg_hessian(ds: ComparisonDataset, p: np.ndarray) -> np.ndarray:
    n = ds.n_items
    Pm = sp.csr_matrix((p, (ds.comparison_ids, ds.members)),
                       shape=(ds.n_comparisons, n))
    H = -np.asarray((Pm.T @ Pm).todense())
    H[np.diag_indices(n)] += np.bincount(ds.members, weights=p, minlength=n)
    return H


@dataclass(frozen=True)
class MLEResult:
    theta: np.ndarray
    iterations: int
    grad_norm: float
    log_likelihood: float


def mle_choice(ds: ComparisonDataset, tol: float = 1e-8, max_iter: int = 100_000,
               method: str = "gradient", theta0=None, check: bool = True) -> MLEResult:
    """Maximise the Luce choice likelihood over mean-zero scores.

    On multi-level broken rankings this is the PL likelihood.

    Args:
        ds: Choice data.
        tol: Stop once the gradient sup-norm is at most ``tol``.
        max_iter: Iteration cap.
        method: ``"gradient"`` (gradient ascent, the default) or ``"newton"``
            (damped Newton, far fewer iterations).  Both backtrack on the
            log-likelihood and reach the same optimum.
        theta0: Starting point, zeros by default.
        check: Refuse data whose win graph is not strongly connected.

    Raises:
        FitError: The data are not rankable, so the maximum is not attained.
        NumericError: No convergence within ``max_iter`` iterations.
    """
    if method not in ("newton", "gradient"):
        raise ParameterError(f"unknown method {method!r}")
    if check:
        diag = check_rankability(ds)
        if diag.flags:
            raise FitError("MLE does not exist: " + "; ".join(diag.flags))
    n = ds.n_items
    theta = np.zeros(n) if theta0 is None else np.asarray(theta0, dtype=float) - np.mean(theta0)
    ll = pl_log_likelihood(ds, theta)
    # the Hessian's spectral norm is at most half the largest item count
    step = 2.0 / max(1.0, float(np.bincount(ds.members, minlength=n).max()))
    g = pl_gradient(ds, theta)
    for it in range(1, max_iter + 1):
        gnorm = float(np.abs(g).max())
        if gnorm <= tol:
            return MLEResult(theta, it - 1, gnorm, ll)
        if method == "newton":
            p, _, _ = _choice_probs(ds, theta)
            H = _neg_hessian(ds, p) + np.full((n, n), 1.0 / n)
            direction = np.linalg.solve(H, g)
            t = 1.0
        else:
            direction = g
            t = step
        slope = float(g @ direction)
        # near the optimum likelihood gains drop below float resolution
        slack = 1e-12 * max(1.0, abs(ll))
        while True:
            cand = theta + t * direction
            cand -= cand.mean()
            cll = pl_log_likelihood(ds, cand)
            if cll >= ll + 1e-4 * t * slope - slack:
                break
            t *= 0.5
            if t < 1e-14:
                raise NumericError("MLE line search failed; the likelihood may be unbounded")
        theta, ll = cand, cll
        g = pl_gradient(ds, theta)
    gnorm = float(np.abs(g).max())
    if gnorm <= tol:
        return MLEResult(theta, max_iter, gnorm, ll)
    raise NumericError(f"MLE did not converge in {max_iter} iterations "
                       f"(gradient sup-norm {gnorm:.3e})")


def mle_pl(rankings, n: int, tol: float = 1e-8, method: str = "gradient") -> np.ndarray:
    """PL maximum likelihood estimate from full rankings (best first)."""
    ds = ComparisonDataset.from_rankings(rankings, n_items=n)
    return mle_choice(ds, tol=tol, method=method).theta


# ---------------------------------------------------------------------------
# Monte Carlo harness


@dataclass
class MCReport:
    """Aggregated Monte Carlo output for one scenario."""

    scenario: str
    title: str
    columns: list[str]
    rows: list[dict]
    reps: int
    failures: int
    seed: int
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# scenario={self.scenario}: {self.title}\n")
        buf.write(f"# reps={self.reps} failures={self.failures} seed={self.seed}\n")
        w = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n",
                           extrasaction="ignore")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: (_fmt(v)) for k, v in row.items()})
        return buf.getvalue()

    def select(self, **where) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in where.items())]

    def one(self, **where) -> dict:
        hits = self.select(**where)
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {where}")
        return hits[0]


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def _prop(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    p = float(x.mean())
    return p, math.sqrt(p * (1 - p) / x.size)


def _mean(x) -> tuple[float, float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float("nan"), float("nan"), float("nan")
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return float(x.mean()), sd, sd / math.sqrt(x.size)


def _as_tuple(v, cast=float):
    if isinstance(v, str):
        v = [s for s in v.replace(";", ",").split(",") if s.strip()]
    if np.isscalar(v):
        v = [v]
    return tuple(cast(x) for x in v)


def _scheme(name, theta_star):
    if name == "oracle":
        return WeightScheme.scores(theta_star)
    return name


def _fixed_data(params, theta, seed, design=None):
    cfg = FixedGraphConfig(n=params["n"], total_comparisons=params["D"],
                           theta_star=theta, seed=seed, design_theta=design)
    return gen_fixed_heterogeneous(cfg)


def _rep_seeds(rep_seed: np.random.SeedSequence, k: int) -> list[int]:
    return [int(s) for s in rep_seed.generate_state(k, dtype=np.uint32)]


def _boot(ds, fit, params, seed):
    return bootstrap_scores(ds, fit, B=params["B"], seed=seed,
                            engine=params["engine"])


# --- per-replication kernels; each returns plain data -----------------------

def _rep_T1(params, rep_seed):
    data_seed, boot_seed = _rep_seeds(rep_seed, 2)
    theta = theta_grid(params["n"])
    ds = _fixed_data(params, theta, data_seed)
    true_rank = np.arange(1, params["n"] + 1)
    out = {}
    for sch in params["schemes"]:
        f = spectral_fit(ds, _scheme(sch, theta))
        bs = _boot(ds, f, params, boot_seed)
        err = f.theta - theta
        for m1 in params["items"]:
            m = m1 - 1
            Q = order_statistic_quantile(bs.statistic([m], True), params["alpha"])
            T = float(studentized_max(err, bs.sigma, [m], True))
            (ci,) = intervals_from_threshold(f.theta, bs.sigma, [m], Q, params["alpha"])
            out[(sch, m1)] = (T <= Q, ci.contains(true_rank[m]), ci.upper - ci.lower)
    return out


def _agg_T1(params, results):
    rows = []
    for sch in params["schemes"]:
        for m1 in params["items"]:
            vals = [r[(sch, m1)] for r in results]
            ec_t, se_t = _prop([v[0] for v in vals])
            ec_r, se_r = _prop([v[1] for v in vals])
            ln, sd, se_l = _mean([v[2] for v in vals])
            rows.append({"scheme": sch, "D": params["D"], "item": m1,
                         "EC_theta": ec_t, "EC_theta_se": se_t,
                         "EC_r": ec_r, "EC_r_se": se_r,
                         "length": ln, "length_se": se_l})
    return rows


def _rep_T2(params, rep_seed):
    data_seed, boot_seed = _rep_seeds(rep_seed, 2)
    theta = theta_grid(params["n"])
    ds = _fixed_data(params, theta, data_seed)
    K = params["K"]
    out = {}
    for sch in params["schemes"]:
        f = spectral_fit(ds, _scheme(sch, theta))
        bs = _boot(ds, f, params, boot_seed)
        err = f.theta - theta
        for m1 in params["ms"]:
            m = m1 - 1
            Q = order_statistic_quantile(bs.statistic([m], False), params["alpha"])
            (ci,) = intervals_from_threshold(f.theta, bs.sigma, [m], Q, params["alpha"],
                                             "left_sided")
            T = float(studentized_max(err, bs.sigma, [m], False))
            out[(sch, m1)] = (ci.lower > K, T > Q)
    return out


def _agg_T2(params, results):
    rows = []
    K = params["K"]
    theta = theta_grid(params["n"])
    for sch in params["schemes"]:
        for m1 in params["ms"]:
            vals = [r[(sch, m1)] for r in results]
            rate, se = _prop([v[0] for v in vals])
            null = m1 <= K
            ssize, sse = _prop([v[1] for v in vals]) if null else (float("nan"),) * 2
            rows.append({"scheme": sch, "D": params["D"], "m": m1, "null": null,
                         "gap": float(theta[m1 - 1] - theta[K - 1]),
                         "reject_rate": rate, "reject_se": se,
                         "score_size": ssize, "score_size_se": sse})
    return rows


def _rep_T3(params, rep_seed):
    data_seed, boot_seed = _rep_seeds(rep_seed, 2)
    theta = theta_grid(params["n"])
    n = params["n"]
    ds = _fixed_data(params, theta, data_seed)
    out = {}
    allm = list(range(n))
    for sch in params["schemes"]:
        f = spectral_fit(ds, _scheme(sch, theta))
        bs = _boot(ds, f, params, boot_seed)
        Q = order_statistic_quantile(bs.statistic(allm, False), params["alpha"])
        T = float(studentized_max(f.theta - theta, bs.sigma, allm, False))
        cis = intervals_from_threshold(f.theta, bs.sigma, allm, Q, params["alpha"],
                                       "left_sided")
        lower = np.array([c.lower for c in cis])
        per_k = {}
        for K in params["Ks"]:
            chosen = set(np.flatnonzero(lower <= K))
            per_k[K] = (set(range(K)) <= chosen, len(chosen))
        out[sch] = (T <= Q, per_k)
    return out


def _agg_T3(params, results):
    rows = []
    for sch in params["schemes"]:
        ec_t, se_t = _prop([r[sch][0] for r in results])
        row = {"scheme": sch, "D": params["D"], "EC_theta": ec_t, "EC_theta_se": se_t}
        for K in params["Ks"]:
            row[f"EC_r_K{K}"] = _prop([r[sch][1][K][0] for r in results])[0]
        for K in params["Ks"]:
            mean, _, se = _mean([r[sch][1][K][1] for r in results])
            row[f"size_K{K}"] = mean
            row[f"size_K{K}_se"] = se
        rows.append(row)
    return rows


def _swap(theta, a, b):
    t = theta.copy()
    t[list(a)], t[list(b)] = theta[list(b)], theta[list(a)]
    return t


def two_sample_theta(kind: str, case: str, n: int = 50) -> np.ndarray:
    """Second-sample scores for the two-sample designs.

    ``case`` is ``"null"`` or ``"alter<i>"``.  For the item design, case ``i``
    swaps the score of item 10 with that of item ``10 + 3i`` (1-based).  For
    the top-K design, case ``i`` swaps the ``i + 2`` items ``9 - i .. 10``
    with items ``20 .. 21 + i``.
    """
    theta = theta_grid(n)
    if case == "null":
        return theta
    if not case.startswith("alter"):
        raise ParameterError(f"unknown two-sample case {case!r}")
    i = int(case[5:])
    if kind == "item":
        return _swap(theta, [9], [9 + 3 * i])
    a = list(range(9 - i - 1, 10))
    b = list(range(19, 19 + len(a)))
    return _swap(theta, a, b)


def _rep_two(params, rep_seed, kind):
    seeds = _rep_seeds(rep_seed, 2 + 2 * len(params["cases"]))
    theta1 = theta_grid(params["n"])
    ds1 = _fixed_data(params, theta1, seeds[0])
    a2 = params["alpha"] / 2
    out = {}
    for sch in params["schemes"]:
        f1 = spectral_fit(ds1, _scheme(sch, theta1))
        bs1 = _boot(ds1, f1, params, seeds[1])
        first = _two_summary(kind, params, f1, bs1, a2)
        for c, case in enumerate(params["cases"]):
            theta2 = two_sample_theta(kind, case, params["n"])
            # by default both samples stratify items by the first sample's
            # order, so only the choice outcomes see the swapped scores
            design = theta1 if params["strata_order"] == "first" else None
            ds2 = _fixed_data(params, theta2, seeds[2 + 2 * c], design)
            f2 = spectral_fit(ds2, _scheme(sch, theta2))
            # the second sample reuses the first sample's bootstrap seed so
            # the test stays symmetric in the two samples
            bs2 = _boot(ds2, f2, params, seeds[1])
            second = _two_summary(kind, params, f2, bs2, a2)
            if kind == "item":
                (l1, u1), (l2, u2) = first, second
                out[(sch, case)] = u1 < l2 or u2 < l1
            else:
                out[(sch, case)] = len(first & second) < params["K"]
    return out


def _two_summary(kind, params, f, bs, alpha):
    if kind == "item":
        m = params["item"] - 1
        Q = order_statistic_quantile(bs.statistic([m], True), alpha)
        (ci,) = intervals_from_threshold(f.theta, bs.sigma, [m], Q, alpha)
        return ci.lower, ci.upper
    allm = list(range(f.n_items))
    Q = order_statistic_quantile(bs.statistic(allm, False), alpha)
    cis = intervals_from_threshold(f.theta, bs.sigma, allm, Q, alpha, "left_sided")
    return {c.item for c in cis if c.lower <= params["K"]}


def _rep_T_two1(params, rep_seed):
    return _rep_two(params, rep_seed, "item")


def _rep_T_two2(params, rep_seed):
    return _rep_two(params, rep_seed, "topk")


def _agg_two(params, results):
    rows = []
    for sch in params["schemes"]:
        for case in params["cases"]:
            rate, se = _prop([r[(sch, case)] for r in results])
            rows.append({"scheme": sch, "D": params["D"], "case": case,
                         "reject_rate": rate, "reject_se": se})
    return rows


_PL_ESTIMATORS = ("vanilla", "oracle", "two_step", "mle")


def _rep_pl(params, rep_seed):
    theta = theta_grid(params["n"])
    out = {}
    for p, s in zip(params["ps"], _rep_seeds(rep_seed, len(params["ps"]))):
        cfg = PLConfig(n=params["n"], M=params["M"], p=p, L=params["L"],
                       theta_star=theta, seed=s)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            _, rankings = gen_pl_random(cfg)
        ds = ComparisonDataset.from_rankings(rankings, n_items=params["n"])
        est = {
            "vanilla": spectral_fit(ds, "vanilla").theta,
            "oracle": spectral_fit(ds, "oracle", theta).theta,
            "two_step": spectral_fit(ds, "two_step").theta,
            "mle": mle_choice(ds, method="newton", check=False).theta,
        }
        out[p] = est
    return out


def _agg_T5(params, results):
    theta = theta_grid(params["n"])
    rows = []
    for p in params["ps"]:
        for name in _PL_ESTIMATORS + ("two_step-mle",):
            if name == "two_step-mle":
                diffs = [r[p]["two_step"] - r[p]["mle"] for r in results]
            else:
                diffs = [r[p][name] - theta for r in results]
            l2 = [float(np.linalg.norm(x)) for x in diffs]
            li = [float(np.abs(x).max()) for x in diffs]
            m2, sd2, _ = _mean(l2)
            mi, sdi, _ = _mean(li)
            rows.append({"p": p, "estimator": name, "l2": m2, "l2_sd": sd2,
                         "linf": mi, "linf_sd": sdi})
    return rows


def _agg_T9(params, results):
    rows = []
    for p in params["ps"]:
        for name in _PL_ESTIMATORS:
            est = np.array([r[p][name] for r in results])
            sd = est.std(axis=0, ddof=1)
            row = {"p": p, "estimator": name}
            for i1 in params["items"]:
                row[f"sd_item{i1}"] = float(sd[i1 - 1])
            rows.append(row)
    return rows


def _rep_PPplot(params, rep_seed):
    data_seed, boot_seed = _rep_seeds(rep_seed, 2)
    theta = theta_grid(params["n"])
    ds = _fixed_data(params, theta, data_seed)
    M = [m - 1 for m in params["items"]]
    out = {}
    for sch in params["schemes"]:
        f = spectral_fit(ds, _scheme(sch, theta))
        bs = _boot(ds, f, params, boot_seed)
        G = bs.statistic(M, True)
        T = float(studentized_max(f.theta - theta, bs.sigma, M, True))
        out[sch] = [T > order_statistic_quantile(G, a) for a in params["alphas"]]
    return out


def _agg_PPplot(params, results):
    rows = []
    for sch in params["schemes"]:
        for j, a in enumerate(params["alphas"]):
            rate, se = _prop([r[sch][j] for r in results])
            rows.append({"scheme": sch, "D": params["D"], "alpha": a,
                         "exceedance": rate, "exceedance_se": se,
                         "deviation": rate - a})
    return rows


_FIXED_BASE = {"n": 50, "reps": 500, "B": 500, "alpha": 0.05,
               "schemes": ("vanilla",), "engine": "multiplier"}

SCENARIOS = {
    "T1": dict(title="two-sided rank intervals for single items",
               defaults={**_FIXED_BASE, "D": 12000, "items": (8, 20, 30)},
               rep=_rep_T1, agg=_agg_T1,
               columns=["scheme", "D", "item", "EC_theta", "EC_theta_se", "EC_r",
                        "EC_r_se", "length", "length_se"]),
    "T2": dict(title="one-sided top-K test sizes and powers",
               defaults={**_FIXED_BASE, "D": 12000, "K": 5, "ms": tuple(range(3, 11))},
               rep=_rep_T2, agg=_agg_T2,
               columns=["scheme", "D", "m", "null", "gap", "reject_rate", "reject_se",
                        "score_size", "score_size_se"]),
    "T3": dict(title="top-K sure-screening sets",
               defaults={**_FIXED_BASE, "D": 12000, "Ks": (3, 5, 10)},
               rep=_rep_T3, agg=_agg_T3, columns=None),
    "T_two1": dict(title="two-sample test for the rank of one item",
                   defaults={**_FIXED_BASE, "D": 12000, "item": 10, "strata_order": "first",
                             "cases": ("null", "alter1", "alter2", "alter3", "alter4")},
                   rep=_rep_T_two1, agg=_agg_two,
                   columns=["scheme", "D", "case", "reject_rate", "reject_se"]),
    "T_two2": dict(title="two-sample test for top-K sets",
                   defaults={**_FIXED_BASE, "D": 12000, "K": 10, "strata_order": "first",
                             "cases": ("null", "alter1", "alter2", "alter3", "alter4")},
                   rep=_rep_T_two2, agg=_agg_two,
                   columns=["scheme", "D", "case", "reject_rate", "reject_se"]),
    "T5": dict(title="estimation error of spectral estimators and the MLE",
               defaults={"n": 50, "M": 3, "L": 10, "reps": 500,
                         "ps": (0.02, 0.05, 0.08, 0.11, 0.14)},
               rep=_rep_pl, agg=_agg_T5,
               columns=["p", "estimator", "l2", "l2_sd", "linf", "linf_sd"]),
    "T9": dict(title="per-item Monte Carlo standard deviations",
               defaults={"n": 50, "M": 3, "L": 10, "reps": 500,
                         "ps": (0.02, 0.05, 0.08), "items": (1, 2, 3, 4, 5)},
               rep=_rep_pl, agg=_agg_T9, columns=None),
    "PPplot": dict(title="bootstrap calibration of the max statistic",
                   defaults={**_FIXED_BASE, "D": 24000, "reps": 2000,
                             "items": (8, 20, 30),
                             "alphas": tuple(round(0.05 * k, 2) for k in range(1, 13))},
                   rep=_rep_PPplot, agg=_agg_PPplot,
                   columns=["scheme", "D", "alpha", "exceedance", "exceedance_se",
                            "deviation"]),
}

_TUPLE_KEYS = {"items": int, "ms": int, "Ks": int, "schemes": str, "cases": str,
               "ps": float, "alphas": float}
_INT_KEYS = {"n", "reps", "B", "D", "K", "M", "L", "item"}


def _normalise(params: dict) -> dict:
    out = dict(params)
    for k, v in params.items():
        if k in _TUPLE_KEYS:
            out[k] = _as_tuple(v, _TUPLE_KEYS[k])
        elif k in _INT_KEYS:
            out[k] = int(v)
        elif k == "alpha":
            out[k] = float(v)
    if "p" in out:
        out["ps"] = _as_tuple(out.pop("p"), float)
    if "scheme" in out:
        out["schemes"] = _as_tuple(out.pop("scheme"), str)
    if "schemes" in out:
        out["schemes"] = tuple("vanilla" if s in ("size", "vanilla") else s
                               for s in out["schemes"])
        bad = set(out["schemes"]) - {"vanilla", "oracle", "constant", "two_step"}
        if bad:
            raise ParameterError(f"unknown scheme(s) {sorted(bad)}")
    if out.get("strata_order", "first") not in ("first", "own"):
        raise ParameterError("strata_order must be 'first' or 'own'")
    if out.get("reps", 1) < 1:
        raise ParameterError("reps must be positive")
    return out


def _run_rep(args):
    name, params, rep_seed = args
    try:
        return SCENARIOS[name]["rep"](params, rep_seed)
    except SpectralRankError as exc:
        return exc


def monte_carlo_run(scenario: str, overrides: dict | None = None, seed: int = 0,
                    workers: int = 1, progress=None) -> MCReport:
    """Run one scenario's replication loop and aggregate the results.

    Args:
        scenario: One of ``T1, T2, T3, T_two1, T_two2, T5, T9, PPplot``.
        overrides: Parameter overrides, e.g. ``{"D": 24000, "reps": 200,
            "schemes": "vanilla,oracle"}``.
        seed: Master seed.  Replication ``r`` uses the ``r``-th child of
            ``SeedSequence(seed)``, so output does not depend on ``workers``.
        workers: Number of worker processes.
        progress: Optional callable ``progress(done, total)``.

    Replications that raise a package error are counted in ``failures`` and
    left out of the aggregates.  In ``T_two1`` and ``T_two2`` the second
    sample draws its choice sets from the first sample's item strata
    (``strata_order="first"``); ``"own"`` re-sorts the strata by the swapped
    scores instead.
    """
    if scenario not in SCENARIOS:
        raise ParameterError(f"unknown scenario {scenario!r}; choose from "
                             f"{', '.join(SCENARIOS)}")
    spec = SCENARIOS[scenario]
    params = _normalise({**spec["defaults"], **(overrides or {})})
    reps = params["reps"]
    children = np.random.SeedSequence(int(seed)).spawn(reps)
    jobs = [(scenario, params, c) for c in children]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, r in enumerate(pool.map(_run_rep, jobs, chunksize=4)):
                results.append(r)
                if progress:
                    progress(i + 1, reps)
    else:
        for i, job in enumerate(jobs):
            results.append(_run_rep(job))
            if progress:
                progress(i + 1, reps)
    ok = [r for r in results if not isinstance(r, Exception)]
    failures = reps - len(ok)
    rows = spec["agg"](params, ok) if ok else []
    columns = spec["columns"] or (list(rows[0].keys()) if rows else [])
    return MCReport(scenario=scenario, title=spec["title"], columns=columns, rows=rows,
                    reps=len(ok), failures=failures, seed=int(seed), config=params)


def load_scenario_config(source) -> dict:
    """Read ``key=value`` lines (``#`` comments allowed) into an override dict.

    A ``scenario`` key, if present, is returned under that name; list values
    are comma-separated.
    """
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out
