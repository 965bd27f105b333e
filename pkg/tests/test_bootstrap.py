import numpy as np
import pytest
from hypothesis import given, strategies as st

from spectral_rank import (BootstrapSpec, ComparisonDataset, ParameterError, PLConfig,
                           bootstrap_scores, fit, gen_pl_random, j_contributions,
                           quantile, run_bootstrap, var_J_fixed)
from spectral_rank.bootstrap import BootstrapResult, order_statistic_quantile, studentized_max


def brute_statistic(Y, sigma, items, two_sided):
    n, B = Y.shape
    out = np.full(B, -np.inf)
    for b in range(B):
        for m in items:
            for k in range(n):
                if k == m:
                    continue
                v = (Y[k, b] - Y[m, b]) / sigma[k, m]
                out[b] = max(out[b], abs(v) if two_sided else v)
    return out


@pytest.fixture(scope="module")
def design():
    from conftest import small_fixed_design
    ds = small_fixed_design(seed=3, D=2500)
    return ds, fit(ds, "two_step")


class TestSpec:
    def test_validation(self):
        with pytest.raises(ParameterError):
            BootstrapSpec(items=())
        with pytest.raises(ParameterError):
            BootstrapSpec(items=(1,), B=99)
        with pytest.raises(ParameterError):
            BootstrapSpec(items=(1,), side="left")
        with pytest.raises(ParameterError):
            BootstrapSpec(items=(1,), grouping="bogus")
        with pytest.raises(ParameterError):
            BootstrapSpec(items=(1,), engine="bogus")

    def test_defaults_and_aliases(self):
        s = BootstrapSpec(items=[3, 1, 3], side="one")
        assert s.items == (1, 3) and s.side == "one_sided" and s.B == 500
        assert BootstrapSpec(items=4).two_sided

    def test_items_out_of_range(self, design):
        ds, f = design
        with pytest.raises(ParameterError):
            run_bootstrap(ds, f, BootstrapSpec(items=(ds.n_items,)))


class TestQuantile:
    def draws(self, x):
        return BootstrapResult(np.asarray(x, float), BootstrapSpec(items=(0,)), np.ones((1, 1)))

    def test_examples(self):
        r = self.draws(np.arange(1, 101)[::-1])
        assert quantile(r, 0.05) == 95
        assert quantile(r, 0.5) == 50
        assert r.quantile(0.01) == 99
        z = self.draws(np.zeros(200))
        assert all(quantile(z, a) == 0 for a in (0.01, 0.3, 0.9))

    def test_alpha_range(self):
        for a in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ParameterError):
                order_statistic_quantile(np.arange(10), a)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=300),
           st.floats(0.001, 0.999), st.floats(0.001, 0.999))
    def test_monotone_in_alpha(self, x, a1, a2):
        lo, hi = sorted((a1, a2))
        assert order_statistic_quantile(x, hi) <= order_statistic_quantile(x, lo)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=300), st.floats(0.001, 0.999))
    def test_is_conservative_order_statistic(self, x, a):
        q = order_statistic_quantile(x, a)
        assert q in x
        assert np.mean(np.asarray(x) <= q) >= 1 - a - 1e-9


class TestDraws:
    def test_matches_dense_oracle(self, design):
        ds, f = design
        B, seed = 120, 9
        J = j_contributions(ds, f.theta, f.scheme, f.d).J.toarray()
        W = np.column_stack([np.random.default_rng([seed, b]).standard_normal(ds.n_comparisons)
                             for b in range(B)])
        Y = J @ W / f.d
        var = var_J_fixed(ds, f.theta, f.scheme).var_J
        sigma = np.sqrt(var[:, None] + var[None, :])
        for side in ("two_sided", "one_sided"):
            res = run_bootstrap(ds, f, BootstrapSpec(items=(2, 11), side=side, B=B, seed=seed))
            ref = brute_statistic(Y, sigma, (2, 11), side == "two_sided")
            np.testing.assert_allclose(res.draws, ref, rtol=1e-10)

    def test_deterministic_across_runs_and_workers(self, design):
        ds, f = design
        spec = BootstrapSpec(items=(0, 5, 9), B=300, seed=123)
        a = run_bootstrap(ds, f, spec).draws
        b = run_bootstrap(ds, f, spec).draws
        c = run_bootstrap(ds, f, spec, workers=8).draws
        assert a.tobytes() == b.tobytes() == c.tobytes()
        d = run_bootstrap(ds, f, BootstrapSpec(items=(0, 5, 9), B=300, seed=124)).draws
        assert not np.array_equal(a, d)

    def test_prefix_stable_in_B(self, design):
        ds, f = design
        a = run_bootstrap(ds, f, BootstrapSpec(items=(1,), B=100, seed=4)).draws
        b = run_bootstrap(ds, f, BootstrapSpec(items=(1,), B=250, seed=4)).draws
        np.testing.assert_array_equal(a, b[:100])

    def test_sided_and_monotone_in_items(self, design):
        ds, f = design
        sc = bootstrap_scores(ds, f, B=200, seed=2)
        two = sc.statistic([4], True)
        one = sc.statistic([4], False)
        assert np.all(two >= one) and np.all(two >= 0)
        big = sc.statistic([4, 7, 12], True)
        assert np.all(big >= two)
        assert np.all(sc.statistic([4, 7, 12], False) >= one)
        allm = sc.statistic(range(ds.n_items), False)
        assert np.all(allm >= 0)

    def test_singleton_groups_identical(self, design):
        ds, f = design
        a = run_bootstrap(ds, f, BootstrapSpec(items=(3,), B=150, seed=1))
        b = run_bootstrap(ds, f, BootstrapSpec(items=(3,), B=150, seed=1,
                                               grouping="per_hyperedge"))
        assert a.draws.tobytes() == b.draws.tobytes()

    def test_grouped_draws_share_multiplier(self):
        cfg = PLConfig(n=12, p=0.6, L=2, seed=3)
        _, R = gen_pl_random(cfg)
        ds = ComparisonDataset.from_rankings(R, n_items=12)
        f = fit(ds, "vanilla")
        B, seed = 100, 8
        sc = bootstrap_scores(ds, f, B=B, seed=seed, grouping="per_hyperedge")
        J = j_contributions(ds, f.theta, f.scheme, f.d).J.toarray()
        W = np.column_stack([np.random.default_rng([seed, b]).standard_normal(ds.n_groups)
                             for b in range(B)])
        np.testing.assert_allclose(sc.Y, J @ W[ds.groups] / f.d, rtol=1e-10, atol=1e-14)

    def test_gaussian_engine_covariance(self, design):
        ds, f = design
        J = j_contributions(ds, f.theta, f.scheme, f.d).J
        C = (J @ J.T).toarray() / f.d ** 2
        for engine in ("multiplier", "gaussian"):
            Y = bootstrap_scores(ds, f, B=4000, seed=5, engine=engine).Y
            emp = Y @ Y.T / Y.shape[1]
            # entrywise Monte Carlo error of a second moment is about sqrt(2/B) C_ii
            scale = np.sqrt(np.outer(np.diag(C), np.diag(C)))
            assert np.abs(emp - C).max() / scale.max() < 5 * np.sqrt(2 / 4000)

    def test_zero_contributions_give_zero_draws(self):
        Y = np.zeros((3, 200))
        s = np.ones((3, 3))
        d = studentized_max(Y, s, [0, 1, 2])
        assert np.all(d == 0)
        assert order_statistic_quantile(d, 0.05) == 0

    def test_scalar_input(self):
        v = np.array([0.0, 1.0, -2.0])
        s = np.full((3, 3), 2.0)
        assert studentized_max(v, s, [0]) == pytest.approx(1.0)
        assert studentized_max(v, s, [0], two_sided=False) == pytest.approx(0.5)

    @given(st.floats(0.1, 10.0))
    def test_rescaling_sigma_rescales_draws(self, c):
        rng = np.random.default_rng(0)
        Y = rng.normal(size=(6, 50))
        s = rng.uniform(0.5, 2, size=(6, 6))
        s = s + s.T
        np.testing.assert_allclose(studentized_max(Y, s * c, [1, 2]),
                                   studentized_max(Y, s, [1, 2]) / c, rtol=1e-12)
