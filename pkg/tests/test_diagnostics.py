import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.signal import lfilter

from polywalk.diagnostics import (
    Histogram2D,
    diagnose,
    ess,
    hist2d,
    l1_error,
    marginal_ess,
    min_marginal_ess,
    relative_performance,
    rhat_max,
    split_rhat,
)


def ar1(rho, n, rng, mean=0.0):
    e = rng.standard_normal(n)
    # start from stationarity
    e[0] /= math.sqrt(1 - rho**2)
    return mean + lfilter([1.0], [1.0, -rho], e)


class Rec:
    def __init__(self, problem_id, sampler, min_ess):
        self.problem_id, self.sampler, self.min_ess = problem_id, sampler, min_ess


class TestESS:
    def test_iid(self, rng):
        n = 100_000
        assert 0.9 <= ess(rng.standard_normal(n)) / n <= 1.1

    @pytest.mark.parametrize("rho", [0.3, 0.5, 0.9])
    def test_ar1(self, rho, rng):
        n = 100_000
        expected = (1 - rho) / (1 + rho)
        assert ess(ar1(rho, n, rng)) / n == pytest.approx(expected, rel=0.1)

    def test_constant(self):
        assert ess(np.full(100, 0.3)) == 1.0
        assert ess(np.full(100, 0.3), return_flag=True) == (1.0, True)

    def test_bounds(self, rng):
        x = rng.standard_normal(50)
        assert 1.0 <= ess(x) <= 50

    def test_errors(self):
        with pytest.raises(ValueError):
            ess([1.0, 2.0])
        with pytest.raises(ValueError):
            ess(np.ones((10, 2)))
        with pytest.raises(ValueError):
            ess([1.0] * 9 + [math.nan])

    @settings(max_examples=30)
    @given(st.floats(-100, 100).filter(lambda a: abs(a) > 1e-3), st.floats(-100, 100),
           st.integers(0, 2**31))
    def test_affine_invariance(self, a, b, seed):
        x = ar1(0.6, 2000, np.random.default_rng(seed))
        assert abs(ess(a * x + b) - ess(x)) <= 1e-8 * ess(x)


class TestMarginalESS:
    def test_iid_columns(self, rng):
        n = 20_000
        assert 0.9 * n <= min_marginal_ess(rng.standard_normal((n, 3))) <= 1.1 * n

    def test_sticky_column(self, rng):
        X = rng.standard_normal((500, 3))
        X[:, 1] = 0.7
        assert min_marginal_ess(X) == 1.0

    def test_permutation(self, rng):
        X = np.column_stack([ar1(r, 3000, rng) for r in (0.2, 0.8, 0.5)])
        assert min_marginal_ess(X) == min_marginal_ess(X[:, [2, 0, 1]])

    def test_min_le_columns(self, rng):
        X = np.column_stack([ar1(r, 3000, rng) for r in (0.2, 0.8, 0.5)])
        m = min_marginal_ess(X)
        assert all(m <= ess(X[:, j]) for j in range(3))

    def test_sum_over_chains(self, rng):
        a, b = rng.standard_normal((400, 2)), rng.standard_normal((400, 2))
        assert np.allclose(marginal_ess([a, b]), marginal_ess(a) + marginal_ess(b))

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            marginal_ess([np.zeros((10, 2)), np.zeros((10, 3))])


class TestRhat:
    def test_iid(self, rng):
        chains = [rng.standard_normal((20_000, 2)) for _ in range(4)]
        assert np.all(np.abs(split_rhat(chains) - 1.0) <= 0.01)

    def test_constant_chains(self):
        chains = [np.zeros((100, 1)), np.ones((100, 1))]
        assert split_rhat(chains)[0] == math.inf

    def test_separated_ar1(self, rng):
        chains = [ar1(0.9, 5000, rng, 0.0)[:, None], ar1(0.9, 5000, rng, 5.0)[:, None]]
        assert rhat_max(chains) > 1.1

    def test_shrinks_with_length(self, rng):
        vals = []
        for n in (1_000, 10_000, 100_000):
            chains = [ar1(0.95, n, rng)[:, None] for _ in range(4)]
            vals.append(rhat_max(chains) - 1)
        # monotone approach to 1 within noise
        assert vals[2] < vals[0] and vals[2] < 0.005

    def test_odd_length_drops_middle(self, rng):
        chains = [rng.standard_normal((101, 1)) for _ in range(2)]
        trimmed = [np.delete(c, 50, axis=0) for c in chains]
        assert np.allclose(split_rhat(chains), split_rhat(trimmed))

    def test_errors(self, rng):
        with pytest.raises(ValueError):
            split_rhat([rng.standard_normal((100, 2))])
        with pytest.raises(ValueError):
            split_rhat([np.zeros((3, 1)), np.zeros((3, 1))])


def random_hist(rng, bins=(4, 5)):
    return Histogram2D((0, 1), (0, 1), rng.integers(0, 20, bins).astype(float) + 0.01)


class TestHistogram:
    def test_single_sample(self):
        h = hist2d(np.array([[0.33, 0.71]]))
        assert h.mass[3, 7] == 1.0 and h.mass.sum() == 1.0

    def test_uniform_grid(self, rng):
        n = 200_000
        h = hist2d(rng.random((n, 2)), bins=(20, 20))
        p = 1 / 400
        sigma = math.sqrt(n * p * (1 - p))
        assert np.max(np.abs(h.counts - n * p)) <= 3 * sigma * 1.5

    def test_mass_sums_to_one(self, rng):
        h = hist2d(rng.random((1000, 3)), dims=(0, 2))
        assert h.mass.sum() == pytest.approx(1.0, abs=1e-12)
        assert h.dims == (0, 2)

    def test_edges(self):
        h = hist2d(np.array([[1.0, 1.0], [0.0, 0.0]]), bins=(4, 4))
        assert h.counts[3, 3] == 1 and h.counts[0, 0] == 1 and h.n_clamped == 0

    def test_clamping(self, caplog):
        h = hist2d(np.array([[1.5, 0.5], [-0.1, 0.5], [0.5, 0.5]]), bins=(2, 2))
        assert h.n_clamped == 2
        assert h.counts[1, 1] == 2 and h.counts[0, 1] == 1
        assert "clamped" in caplog.text

    def test_streaming_matches_batch(self, rng):
        X = rng.random((5000, 2))
        h = Histogram2D.empty((7, 3))
        for chunk in np.array_split(X, 9):
            h.add(chunk)
        assert np.array_equal(h.counts, hist2d(X, bins=(7, 3)).counts)

    def test_chains_pooled(self, rng):
        a, b = rng.random((300, 2)), rng.random((200, 2))
        assert np.array_equal(hist2d([a, b]).counts, hist2d(np.vstack([a, b])).counts)

    def test_json_round_trip(self, rng):
        h = hist2d(rng.random((100, 2)))
        assert np.array_equal(Histogram2D.from_json(h.to_json()).counts, h.counts)

    def test_merge(self, rng):
        a, b = hist2d(rng.random((50, 2))), hist2d(rng.random((70, 2)))
        assert a.merge(b).total == 120
        with pytest.raises(ValueError):
            a.merge(hist2d(rng.random((5, 2)), bins=(3, 3)))

    def test_validation(self, rng):
        with pytest.raises(ValueError):
            hist2d(rng.random((5, 2)), ranges=((1, 0), (0, 1)))
        with pytest.raises(ValueError):
            hist2d(rng.random((5, 2)), dims=(1, 1))
        with pytest.raises(ValueError):
            Histogram2D((0, 1), (0, 1), -np.ones((2, 2)))
        with pytest.raises(ValueError):
            Histogram2D.empty().mass


class TestL1:
    def test_identical(self, rng):
        h = random_hist(rng)
        assert l1_error(h, h) == 0.0

    def test_disjoint(self):
        a = Histogram2D((0, 1), (0, 1), [[1.0, 0.0], [0.0, 0.0]])
        b = Histogram2D((0, 1), (0, 1), [[0.0, 0.0], [0.0, 3.0]])
        assert l1_error(a, b) == 2.0

    def test_scale_free(self, rng):
        a, b = random_hist(rng), random_hist(rng)
        a2 = Histogram2D(a.x_range, a.y_range, 7 * a.counts)
        assert l1_error(a2, b) == pytest.approx(l1_error(a, b), abs=1e-14)

    @settings(max_examples=50)
    @given(st.integers(0, 2**31))
    def test_metric_axioms(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = random_hist(rng), random_hist(rng), random_hist(rng)
        assert l1_error(a, b) == pytest.approx(l1_error(b, a), abs=1e-15)
        assert l1_error(a, c) <= l1_error(a, b) + l1_error(b, c) + 1e-12
        assert 0.0 <= l1_error(a, b) <= 2.0

    def test_grid_mismatch(self, rng):
        with pytest.raises(ValueError):
            l1_error(random_hist(rng, (4, 5)), random_hist(rng, (5, 4)))


class TestRelativePerformance:
    def test_single_sampler(self):
        (r,) = relative_performance([Rec("p", "hr", 30.0)])
        assert r.rel_perf == 1.0

    def test_two_samplers(self):
        out = relative_performance([Rec("p", "a", 40.0), Rec("p", "a", 60.0), Rec("p", "b", 100.0)])
        by = {r.sampler: r for r in out}
        assert by["a"].rel_perf == 0.5 and by["b"].rel_perf == 1.0
        assert by["a"].n_runs == 2

    def test_per_problem(self):
        out = relative_performance([Rec("p", "a", 10.0), Rec("q", "a", 1.0), Rec("q", "b", 4.0)])
        assert [(r.problem_id, r.sampler, r.rel_perf) for r in out] == [
            ("p", "a", 1.0), ("q", "a", 0.25), ("q", "b", 1.0)]

    def test_empty(self):
        with pytest.raises(ValueError):
            relative_performance([])


def test_diagnose(rng):
    chains = [rng.random((500, 2)) for _ in range(4)]
    ref = hist2d(rng.random((100_000, 2)))
    rep = diagnose(chains, ref, wall_time=2.0, acceptance_rate=0.5, degenerate_events=3)
    assert rep["min_ess_per_sec"] == pytest.approx(rep["min_ess"] / 2.0)
    assert rep["l1"] < 0.3 and rep["rhat_max"] < 1.05
    assert rep["degenerate_events"] == 3
    assert diagnose(chains[:1])["rhat_max"] is None
