import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpsearch.data import synthesize
from fpsearch.errors import FitError, ParameterError
from fpsearch.exact import build_bitbound
from fpsearch.model import (
    GaussianFit,
    adaptive_trapezoid,
    empirical_pruned_fraction,
    expected_speedup,
    fit_gaussian,
    mean_pruned_fraction,
    model_table,
    pruned_fraction,
)

scipy_stats = pytest.importorskip("scipy.stats")
scipy_integrate = pytest.importorskip("scipy.integrate")

FIT = GaussianFit(47.5, 12.2)
CUTOFFS = [0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95]


def quad_retained(mu, sigma, sc):
    norm = scipy_stats.norm(mu, sigma)

    def integrand(c):
        return (norm.cdf(c / sc) - norm.cdf(c * sc)) * norm.pdf(c)

    value, _ = scipy_integrate.quad(integrand, mu - 10 * sigma, mu + 10 * sigma,
                                    epsabs=1e-13, epsrel=1e-12, limit=200)
    return value


class TestFit:
    def test_two_point_example(self):
        fit = fit_gaussian([40, 60])
        assert (fit.mu, fit.sigma) == (50.0, 10.0)

    def test_population_std(self):
        xs = [1, 2, 3, 4, 10]
        fit = fit_gaussian(xs)
        assert fit.sigma == pytest.approx(float(np.std(xs)))

    @pytest.mark.parametrize("xs", [[], [5], [7, 7, 7]])
    def test_degenerate(self, xs):
        with pytest.raises(FitError):
            fit_gaussian(xs)

    def test_pdf_cdf(self):
        n = scipy_stats.norm(47.5, 12.2)
        for x in (0, 30, 47.5, 80):
            assert FIT.pdf(x) == pytest.approx(n.pdf(x), rel=1e-12)
            assert FIT.cdf(x) == pytest.approx(n.cdf(x), rel=1e-12, abs=1e-15)


class TestPrunedFraction:
    @given(st.floats(1, 120), st.floats(0.05, 1.0))
    def test_matches_normal_cdf(self, c, sc):
        n = scipy_stats.norm(47.5, 12.2)
        expect = 1 - (n.cdf(c / sc) - n.cdf(c * sc))
        assert pruned_fraction(FIT, c, sc) == pytest.approx(expect, abs=1e-12)

    def test_cutoff_one_prunes_everything(self):
        assert pruned_fraction(FIT, 50, 1.0) == 1.0

    @given(st.floats(1, 120), st.floats(0.05, 0.9), st.floats(0.01, 0.09))
    def test_monotone_in_cutoff(self, c, sc, step):
        assert pruned_fraction(FIT, c, sc) <= pruned_fraction(FIT, c, sc + step) + 1e-15

    @pytest.mark.parametrize("bad", [0.0, -0.5, 1.5])
    def test_bad_cutoff(self, bad):
        with pytest.raises(ParameterError):
            pruned_fraction(FIT, 50, bad)


class TestIntegration:
    def test_trapezoid_on_known_integrals(self):
        assert adaptive_trapezoid(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-7)
        assert adaptive_trapezoid(lambda x: x * x, 0, 3) == pytest.approx(9.0, abs=1e-7)

    @pytest.mark.parametrize("sc", CUTOFFS)
    def test_mean_pruned_matches_quadrature(self, sc):
        expect = 1 - quad_retained(47.5, 12.2, sc)
        assert mean_pruned_fraction(FIT, sc) == pytest.approx(expect, abs=1e-6)

    @pytest.mark.parametrize("sc", CUTOFFS)
    def test_speedup_is_reciprocal_of_kept(self, sc):
        assert expected_speedup(FIT, sc) == pytest.approx(1 / quad_retained(47.5, 12.2, sc), rel=1e-5)

    def test_speedup_increases_with_cutoff(self):
        s = [expected_speedup(FIT, sc) for sc in CUTOFFS]
        assert s == sorted(s) and s[0] >= 1.0

    def test_table(self):
        rows = model_table(FIT, [0.8, 0.95])
        assert [r[0] for r in rows] == [0.8, 0.95]
        for sc, r, s in rows:
            assert s == pytest.approx(1 / (1 - r))


class TestEmpirical:
    def test_counts_and_fingerprints_agree(self):
        db = synthesize(2000, seed=4)
        idx = build_bitbound(db)
        by_fp = empirical_pruned_fraction(idx, db[:50], 0.7)
        by_count = empirical_pruned_fraction(idx, [fp.bit_count for fp in db[:50]], 0.7)
        assert by_fp == by_count

    def test_model_tracks_synthetic_database(self):
        db = synthesize(20_000, seed=5)
        idx = build_bitbound(db)
        fit = fit_gaussian(fp.bit_count for fp in db)
        queries = db[::40]
        for sc in (0.5, 0.8, 0.95):
            assert abs(empirical_pruned_fraction(idx, queries, sc) - mean_pruned_fraction(fit, sc)) < 0.03

    def test_empty(self):
        with pytest.raises(ParameterError):
            empirical_pruned_fraction(build_bitbound([]), [10], 0.5)
