import math

import numpy as np
import pytest
from scipy import integrate, stats

from comroot import (AdaptiveConfig, DensityParams, Domain, ExclusionSaturated, RatioAccumulator,
                     UniformStrategy, adaptive_run, get_builtin, initial_state, log_g, uniform_run)
from comroot.samplers import (gaussian_draw, gaussian_log_density, gaussian_next, update_sigma,
                              window_sigma, worker_rngs)


def cell_fractions(domain, bins=10, fine=1000):
    """Fraction of the accessible area in each grid cell, by midpoint quadrature."""
    u = (np.arange(fine) + 0.5) / fine
    X, Y = np.meshgrid(u, u, indexing="ij")
    ok = domain.contains_many(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(fine, fine)
    per = fine // bins
    area = ok.reshape(bins, per, bins, per).sum(axis=(1, 3)).astype(float)
    return area / area.sum()


# -- uniform --------------------------------------------------------------------

def test_uniform_seeded_replay():
    d = Domain.unit_cube(1)
    a = [UniformStrategy(d, 42).next() for _ in range(1)]
    s1, s2 = UniformStrategy(d, 42), UniformStrategy(d, 42)
    xs1 = [s1.next()[0][0] for _ in range(50)]
    xs2 = [s2.next()[0][0] for _ in range(50)]
    assert xs1 == xs2
    assert a[0][1] == 0.0
    assert xs1 != [UniformStrategy(d, 43).next()[0][0] for _ in range(1)] * 50


def test_uniform_degenerate_coordinate():
    d = Domain([0.0, 0.25], [1.0, 0.25])
    pts, _ = UniformStrategy(d, 1).draw(1000)
    assert np.all(pts[:, 1] == 0.25)


def test_uniform_with_exclusion_chi_square():
    d = Domain.unit_cube(2).with_exclusion([0.5, 0.5], 0.2)
    pts, logp = UniformStrategy(d, 7).draw(10**5)
    assert np.all(logp == 0.0)
    assert np.all(d.contains_many(pts))
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=10, range=[[0, 1], [0, 1]])
    frac = cell_fractions(d)
    expected = 10**5 * frac
    sd = np.sqrt(10**5 * frac * (1 - frac))
    live = expected > 0
    assert np.all(counts[~live] == 0)
    # each cell lies outside 3 sd with prob 0.0027; over ~96 cells the count of
    # such cells is Binomial(96, 0.0027), and more than 3 has prob ~3e-4
    beyond = np.abs(counts[live] - expected[live]) > 3 * sd[live]
    assert beyond.sum() <= 3
    chi = stats.chisquare(counts[live], expected[live] * counts.sum() / expected[live].sum())
    assert chi.pvalue > 0.01


def test_uniform_saturation():
    d = Domain.unit_cube(1).with_exclusion([0.5], 1.0)
    with pytest.raises(ExclusionSaturated):
        UniformStrategy(d, 0).draw(1)


# -- Gaussian proposal --------------------------------------------------------------

def test_flat_gaussian_is_uniform():
    d = Domain.unit_cube(1)
    st = initial_state(d)
    pts, _ = gaussian_draw(st, d, np.random.default_rng(3), 10**5)
    counts, _ = np.histogram(pts[:, 0], bins=20, range=(0, 1))
    assert stats.chisquare(counts).pvalue > 0.01


def test_narrow_gaussian_concentrates():
    d = Domain.unit_cube(1)
    st = initial_state(d)
    st.mean, st.sigma = np.array([0.6]), np.array([0.01])
    pts, _ = gaussian_draw(st, d, np.random.default_rng(4), 10**4)
    assert np.mean((pts[:, 0] >= 0.55) & (pts[:, 0] <= 0.65)) >= 0.99


def test_log_density_at_mean():
    mean, sigma = np.array([0.3, 0.7]), np.array([0.1, 2.0])
    expected = -np.sum(np.log(sigma * math.sqrt(math.pi)))
    assert gaussian_log_density(mean, mean, sigma) == pytest.approx(expected, rel=1e-15)
    # normalised: integrates to one in 1-D
    x = np.linspace(-5, 5, 200001)
    dens = np.exp(gaussian_log_density(x[:, None], np.array([0.0]), np.array([0.5])))
    assert integrate.trapezoid(dens, x) == pytest.approx(1.0, rel=1e-9)


def test_gaussian_next_respects_domain_and_exclusions():
    d = Domain.unit_cube(2).with_exclusion([0.5, 0.5], 0.3)
    st = initial_state(d)
    rng = np.random.default_rng(0)
    for mean, sigma in [([0.5, 0.5], [0.4, 0.4]), ([0.05, 0.95], [0.05, 0.05]), ([0.9, 0.1], [10, 10])]:
        st.mean, st.sigma = np.array(mean, float), np.array(sigma, float)
        for _ in range(200):
            x, logp = gaussian_next(st, d, rng)
            assert d.contains(x)
            assert math.isfinite(logp)


def test_gaussian_saturation():
    d = Domain.unit_cube(1).with_exclusion([0.5], 0.2)
    st = initial_state(d)
    st.mean, st.sigma = np.array([0.5]), np.array([1e-6])
    with pytest.raises(ExclusionSaturated):
        gaussian_draw(st, d, np.random.default_rng(0), 1)


# -- sigma update -------------------------------------------------------------------

def _state(history, window):
    st = initial_state(Domain.unit_cube(1), window=window)
    st.history.extend(np.array([h]) for h in history)
    return st


def test_update_sigma_full_window():
    st = update_sigma(_state([0.0, 1.0, 2.0], 2))
    assert st.sigma[0] == 1.0
    assert st.mean[0] == 2.0


def test_update_sigma_constant_history_hits_floor():
    st = update_sigma(_state([0.4] * 6, 5))
    assert st.sigma[0] == st.sigma_floor[0] == 1e-12


def test_update_sigma_partial_window():
    assert update_sigma(_state([0.0, 0.5], 10)).sigma[0] == 0.5


def test_window_keeps_last_pairs_only():
    st = _state([100.0, 0.0, 1.0, 2.0], 2)  # 100 falls out of the ring buffer
    assert list(h[0] for h in st.history) == [0.0, 1.0, 2.0]
    assert update_sigma(st).sigma[0] == 1.0


def test_window_sigma_needs_two():
    with pytest.raises(ValueError):
        window_sigma([np.array([0.0])], 1e-12)


# -- adaptive loop ---------------------------------------------------------------------

def test_adaptive_abs_1d_beats_uniform_oracle():
    problem = get_builtin("abs_1d")
    slow = uniform_run(problem.field, problem.domain, DensityParams(1, 0.0), 10**5, rng=7)
    assert abs(slow.estimate[0] - 0.6) < 1e-3
    fast = adaptive_run(problem.field, problem.domain, DensityParams(1, 1e-8), budget=10**4, rng=7,
                        config=AdaptiveConfig(update_every=5, window=10))
    assert abs(fast.estimate[0] - 0.6) <= 1e-6
    assert abs(fast.estimate[0] - 0.6) < abs(slow.estimate[0] - 0.6)
    assert fast.samples <= 10**4


def test_adaptive_sphere_5d_majority_of_seeds():
    problem = get_builtin("sphere_5d")
    ok = 0
    for seed in range(5):
        run = adaptive_run(problem.field, problem.domain, DensityParams(5, 1e-8), budget=10**5,
                           rng=seed, config=AdaptiveConfig(window=50))
        ok += problem.root_error(run.estimate) <= 1e-3
    assert ok >= 3


def test_budget_below_update_every():
    problem = get_builtin("abs_1d")
    with pytest.raises(ValueError, match="budget"):
        adaptive_run(problem.field, problem.domain, DensityParams(1, 1e-8), budget=0, rng=0)


def test_adaptive_requires_positive_eta():
    problem = get_builtin("abs_1d")
    with pytest.raises(ValueError):
        adaptive_run(problem.field, problem.domain, DensityParams(1, 0.0), budget=100, rng=0)


def test_trace_invariants():
    problem = get_builtin("osc_1d")
    cfg = AdaptiveConfig(window=10)
    st = initial_state(problem.domain, window=10)
    run = adaptive_run(problem.field, problem.domain, DensityParams(1, 1e-8), state=st,
                       budget=2000, rng=3, config=cfg)
    samples = [r.samples for r in run.rows]
    assert samples == list(range(5, 5 * len(samples) + 1, 5))
    for r in run.rows:
        assert np.all(r.sigma >= st.sigma_floor)
        assert problem.domain.contains(r.estimate)
    # after the last update the proposal is centred on the latest estimate
    np.testing.assert_array_equal(st.mean, run.rows[-1].estimate)
    # flat until the window is full
    assert all(r.sigma[0] == 10.0 for r in run.rows[:10])


def test_adaptive_seeded_determinism():
    problem = get_builtin("kink_1d")
    p = DensityParams(2, 1e-8)
    a = adaptive_run(problem.field, problem.domain, p, budget=3000, rng=21)
    b = adaptive_run(problem.field, problem.domain, p, budget=3000, rng=21)
    assert len(a.rows) == len(b.rows)
    for ra, rb in zip(a.rows, b.rows):
        assert ra.samples == rb.samples
        np.testing.assert_array_equal(ra.estimate, rb.estimate)
        np.testing.assert_array_equal(ra.sigma, rb.sigma)


def test_flat_adaptive_indistinguishable_from_uniform():
    d = Domain.unit_cube(1)
    pts_g, _ = gaussian_draw(initial_state(d), d, np.random.default_rng(8), 10**5)
    pts_u, _ = UniformStrategy(d, 8).draw(10**5)
    cg, _ = np.histogram(pts_g[:, 0], bins=20, range=(0, 1))
    cu, _ = np.histogram(pts_u[:, 0], bins=20, range=(0, 1))
    table = np.stack([cg, cu])
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_adaptive_with_exclusion_finds_other_root():
    problem = get_builtin("two_roots_1d")
    domain = problem.domain.with_exclusion([0.3], 0.1)
    hits = 0
    for seed in range(10):
        run = adaptive_run(problem.field, domain, DensityParams(1, 1e-8), budget=10**4, rng=seed,
                           config=AdaptiveConfig(window=40))
        hits += abs(run.estimate[0] - 0.8) < 1e-4
    assert hits >= 9


# -- workers -----------------------------------------------------------------------------

def test_uniform_workers_merge_matches_sequential():
    problem = get_builtin("sphere_2d")
    p = DensityParams(2, 0.0)
    budget, workers = 20000, 3
    run = uniform_run(problem.field, problem.domain, p, budget, rng=99, workers=workers,
                      checkpoint_every=budget)
    # replay the same per-worker streams into one accumulator
    rngs = worker_rngs(99, workers)
    seq = RatioAccumulator(2)
    for rng, idx in zip(rngs, np.array_split(np.arange(budget), workers)):
        pts, _ = UniformStrategy(problem.domain, rng).draw(len(idx))
        seq.consume_batch(pts, log_g(problem.field.eval_many(pts), p))
    np.testing.assert_allclose(run.estimate, seq.estimate(), rtol=1e-12)


def test_workers_deterministic():
    problem = get_builtin("abs_1d")
    p = DensityParams(1, 1e-8)
    a = adaptive_run(problem.field, problem.domain, p, budget=2000, rng=4, workers=2)
    b = adaptive_run(problem.field, problem.domain, p, budget=2000, rng=4, workers=2)
    np.testing.assert_array_equal(a.estimate, b.estimate)
    assert abs(a.estimate[0] - 0.6) < 1e-4
