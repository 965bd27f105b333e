"""Spectral estimation of preference scores from multiway comparisons.

Every comparison in which item ``i`` loses to ``j`` moves ``1 / (d f(A_l))`` of
transition probability from ``i`` to ``j``.  The stationary distribution of the
resulting chain estimates ``exp(theta*)`` up to scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ComparisonDataset, check_rankability
from .errors import FitError, NumericError, ParameterError

__all__ = [
    "WeightScheme",
    "TransitionMatrix",
    "SpectralFit",
    "PowerIterationResult",
    "build_transition",
    "population_transition",
    "power_iteration",
    "stationary_distribution",
    "estimate_theta",
    "fit",
]


@dataclass(frozen=True, eq=False)
class WeightScheme:
    """Weighting function ``f(A)`` used in the transition matrix.

    ``constant`` gives ``f = 1``, ``size`` gives ``f = |A|`` and ``scores``
    gives ``f = sum_{u in A} exp(theta_u)`` for a supplied score vector.
    """

    kind: str
    theta: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "size", "scores"):
            raise ParameterError(f"unknown weight scheme {self.kind!r}")
        if self.kind == "scores":
            if self.theta is None:
                raise ParameterError("score weights need a theta vector")
            th = np.array(self.theta, dtype=float)
            if th.ndim != 1 or not np.all(np.isfinite(th)):
                raise ParameterError("score weights need a finite 1-d theta")
            th.setflags(write=False)
            object.__setattr__(self, "theta", th)

    @classmethod
    def constant(cls) -> "WeightScheme":
        return cls("constant")

    @classmethod
    def set_size(cls) -> "WeightScheme":
        return cls("size")

    @classmethod
    def scores(cls, theta) -> "WeightScheme":
        return cls("scores", theta)

    def weights(self, ds: ComparisonDataset) -> np.ndarray:
        """``f(A_l)`` for every comparison of ``ds``."""
        if self.kind == "constant":
            return np.ones(ds.n_comparisons)
        if self.kind == "size":
            return ds.sizes.astype(float)
        if self.theta.shape[0] != ds.n_items:
            raise ParameterError(
                f"theta has length {self.theta.shape[0]}, dataset has "
                f"{ds.n_items} items")
        e = np.exp(self.theta)
        return np.bincount(ds.comparison_ids, weights=e[ds.members],
                           minlength=ds.n_comparisons)

    def set_weight(self, items) -> float:
        """``f(A)`` for an arbitrary set of item indices."""
        items = list(items)
        if self.kind == "constant":
            return 1.0
        if self.kind == "size":
            return float(len(items))
        return float(np.exp(self.theta[items]).sum())

    def __repr__(self) -> str:
        return f"WeightScheme({self.kind!r})"


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic transition matrix with its normaliser ``d``.

    ``off_mass[i]`` is ``d`` times the off-diagonal row sum, i.e. the weighted
    number of losses of item ``i``.
    """

    P: np.ndarray
    d: float
    off_mass: np.ndarray


@dataclass(frozen=True)
class SpectralFit:
    pi_hat: np.ndarray
    theta: np.ndarray
    scheme: WeightScheme
    d: float
    iterations: int
    residual: float
    initial: "SpectralFit | None" = field(default=None, repr=False)

    @property
    def n_items(self) -> int:
        return int(self.theta.shape[0])

    def ranks(self) -> np.ndarray:
        """Point ranks (1 = best) from ``theta``; ties go to the smaller index."""
        order = np.lexsort((np.arange(self.n_items), -self.theta))
        r = np.empty(self.n_items, dtype=np.int64)
        r[order] = np.arange(1, self.n_items + 1)
        return r


@dataclass(frozen=True)
class PowerIterationResult:
    pi: np.ndarray
    iterations: int
    residual: float
    history: list[float] | None = None


def _loss_mass(ds: ComparisonDataset, f: np.ndarray) -> np.ndarray:
    """Matrix ``W`` with ``W[i, j] = sum_l 1(i, j in A_l, c_l = j) / f(A_l)``."""
    n = ds.n_items
    lid = ds.comparison_ids
    win = ds.winners[lid]
    mask = ds.members != win
    flat = ds.members[mask] * n + win[mask]
    W = np.bincount(flat, weights=1.0 / f[lid[mask]], minlength=n * n)
    return W.reshape(n, n)


def _assemble(W: np.ndarray, d: float | None) -> TransitionMatrix:
    off = W.sum(axis=1)
    if d is None:
        d = 2.0 * float(off.max())
        if d <= 0:
            raise FitError("no item ever loses a comparison")
    else:
        d = float(d)
        if not np.isfinite(d) or d <= 0:
            raise ParameterError(f"d must be positive, got {d}")
        if np.any(off > d * (1.0 + 1e-12)):
            raise ParameterError(
                f"d={d} leaves a negative diagonal; need d >= {off.max()}")
    P = W / d
    np.fill_diagonal(P, 0.0)
    P[np.diag_indices_from(P)] = 1.0 - P.sum(axis=1)
    return TransitionMatrix(P=P, d=d, off_mass=off)


def _require_rankable(ds: ComparisonDataset) -> None:
    diag = check_rankability(ds)
    if diag.flags:
        raise FitError("data not rankable: " + "; ".join(diag.flags))


def build_transition(ds: ComparisonDataset, scheme: WeightScheme | None = None,
                     d: float | None = None, *, check: bool = True
                     ) -> TransitionMatrix:
    """Comparison-induced transition matrix.

    The default ``d`` is twice the largest weighted loss count, which keeps
    every diagonal entry at least 1/2.
    """
    if check:
        _require_rankable(ds)
    scheme = scheme or WeightScheme.set_size()
    f = scheme.weights(ds)
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise ParameterError("weights f(A_l) must be finite and positive")
    return _assemble(_loss_mass(ds, f), d)


def population_transition(ds: ComparisonDataset, theta_star,
                          scheme: WeightScheme | None = None,
                          d: float | None = None) -> TransitionMatrix:
    """Expected transition matrix given the choice sets and true scores."""
    scheme = scheme or WeightScheme.set_size()
    theta_star = np.asarray(theta_star, dtype=float)
    f = scheme.weights(ds)
    n = ds.n_items
    lid = ds.comparison_ids
    e = np.exp(theta_star)
    S = np.bincount(lid, weights=e[ds.members], minlength=ds.n_comparisons)
    # W[i, j] = sum_l 1(i, j in A_l) e_j / (S_l f_l), pairs within each set
    inc_w = ds.incidence().multiply(1.0 / (S * f)[:, None]).tocsr()
    W = np.asarray((ds.incidence().T @ inc_w).todense()) * e[None, :]
    np.fill_diagonal(W, 0.0)
    return _assemble(W, d)


def power_iteration(P: np.ndarray, tol: float = 1e-10, max_iter: int = 10000,
                    record: bool = False) -> PowerIterationResult:
    """Left power iteration from the uniform vector with L1 renormalisation.

    Stops once ``||pi P - pi||_1 <= tol``.
    """
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    history = [] if record else None
    res = np.inf
    diff = np.empty(n)
    total = np.add.reduce
    for it in range(1, max_iter + 1):
        nxt = pi.dot(P)
        np.subtract(nxt, pi, out=diff)
        np.abs(diff, out=diff)
        res = float(total(diff))
        if record:
            history.append(res)
        nxt /= total(nxt)
        pi = nxt
        if res <= tol:
            return PowerIterationResult(pi, it, res, history)
    raise NumericError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(residual {res:.3e})")


def stationary_distribution(T: TransitionMatrix | np.ndarray, tol: float = 1e-10,
                            max_iter: int = 10000) -> np.ndarray:
    P = T.P if isinstance(T, TransitionMatrix) else np.asarray(T, dtype=float)
    return power_iteration(P, tol=tol, max_iter=max_iter).pi


def estimate_theta(pi_hat) -> np.ndarray:
    """Centred log scores ``log pi_i - mean_k log pi_k``."""
    pi_hat = np.asarray(pi_hat, dtype=float)
    if np.any(~(pi_hat > 1e-300)):
        bad = int(np.flatnonzero(~(pi_hat > 1e-300))[0])
        raise NumericError(f"stationary mass of item {bad} is not positive "
                           f"({pi_hat[bad]!r}); check rankability")
    lp = np.log(pi_hat)
    return lp - lp.mean()


_ALIASES = {
    "constant": "constant",
    "vanilla": "size",
    "size": "size",
    "oracle": "oracle",
    "two_step": "two_step",
    "two-step": "two_step",
}


def _resolve(scheme, theta, n) -> WeightScheme | str:
    if isinstance(scheme, WeightScheme):
        return scheme
    key = _ALIASES.get(str(scheme).lower())
    if key is None:
        raise ParameterError(f"unknown scheme {scheme!r}")
    if key == "constant":
        return WeightScheme.constant()
    if key == "size":
        return WeightScheme.set_size()
    if key == "oracle":
        if theta is None:
            raise ParameterError("oracle weights need theta")
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (n,):
            raise ParameterError(f"oracle theta must have length {n}")
        return WeightScheme.scores(theta)
    return key


def _fit_once(ds, scheme, d, tol, max_iter) -> SpectralFit:
    T = build_transition(ds, scheme, d, check=False)
    res = power_iteration(T.P, tol=tol, max_iter=max_iter)
    pi = res.pi / res.pi.sum()
    return SpectralFit(pi_hat=pi, theta=estimate_theta(pi), scheme=scheme,
                       d=T.d, iterations=res.iterations, residual=res.residual)


def fit(ds: ComparisonDataset, scheme="two_step", theta=None, *,
        d: float | None = None, tol: float = 1e-10, max_iter: int = 10000,
        check: bool = True) -> SpectralFit:
    """Spectral estimate of the scores.

    Args:
        ds: Comparison data.
        scheme: ``"constant"`` (f = 1), ``"vanilla"``/``"size"`` (f = |A|),
            ``"oracle"`` (f = sum of exp(theta) over the set, ``theta``
            required), ``"two_step"`` (vanilla fit, then refit with weights
            from the first-stage scores) or a :class:`WeightScheme`.
        theta: Score vector for oracle weights.
        d: Override for the transition normaliser.
        check: Verify rankability first and raise :class:`FitError` if not.
    """
    if check:
        _require_rankable(ds)
    sch = _resolve(scheme, theta, ds.n_items)
    if sch == "two_step":
        first = _fit_once(ds, WeightScheme.set_size(), d, tol, max_iter)
        second = _fit_once(ds, WeightScheme.scores(first.theta), d, tol, max_iter)
        return SpectralFit(second.pi_hat, second.theta, second.scheme, second.d,
                           second.iterations, second.residual, initial=first)
    return _fit_once(ds, sch, d, tol, max_iter)
