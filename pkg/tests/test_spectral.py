import math

import numpy as np
import pytest
from scipy.integrate import quad

from jumpfield.errors import AsymmetricInput, GridMismatch, GridTooSmall, \
    SeriesNotConverged
from jumpfield.kernel import bump_kernel, gaussian_kernel
from jumpfield.spectral import GridField, SemigroupOperator, SpectralGrid, \
    apply_semigroup, chi_bound_check, discrete_symbol, evolve_correlation2, \
    evolve_intensity, noncontraction_demo, quadratic_form, series_semigroup


def narrow_bump(grid):
    return grid.sample(lambda p: np.exp(-4.0 * (p[:, 0] - 1.0) ** 2))


def smooth_random_field(grid, rng):
    v = rng.normal(size=grid.points)
    return grid.field(np.convolve(v, np.ones(64) / 64.0, mode="same"))


def test_identity_at_time_zero(gauss, grid40):
    f = narrow_bump(grid40)
    out = SemigroupOperator(gauss, grid40, 0.0).apply(f)
    assert np.array_equal(out.values, f.values) or \
        np.abs(out.values - f.values).max() < 1e-15


def test_markov_constant_exact(gauss, grid40):
    one = grid40.field(np.ones(grid40.shape()))
    for t in (0.5, 1.0, 2.0):
        out = SemigroupOperator(gauss, grid40, t).apply(one)
        assert np.abs(out.values - 1.0).max() < 1e-13


def test_series_matches_multiplier(gauss, grid40):
    f = narrow_bump(grid40)
    for t in (0.5, 1.0, 2.0):
        spectral = SemigroupOperator(gauss, grid40, t).apply(f)
        series = series_semigroup(gauss, t, f)
        assert np.abs(spectral.values - series.values).max() < 1e-8


def test_series_term_budget(gauss, grid40):
    f = narrow_bump(grid40)
    with pytest.raises(SeriesNotConverged):
        series_semigroup(gauss, 2.0, f, n_terms=3)


def test_series_preserves_constants(gauss, grid40):
    one = grid40.field(np.ones(grid40.shape()))
    out = series_semigroup(gauss, 1.0, one)
    assert np.abs(out.values - 1.0).max() < 1e-12


def test_semigroup_property(gauss, grid40, rng):
    op_half = SemigroupOperator(gauss, grid40, 0.5)
    op_one = SemigroupOperator(gauss, grid40, 1.0)
    for _ in range(20):
        f = smooth_random_field(grid40, rng)
        two_step = op_half.apply(op_half.apply(f))
        assert np.abs(two_step.values - op_one.apply(f).values).max() < 1e-9


def test_contraction_norms(gauss, grid40, rng):
    op = SemigroupOperator(gauss, grid40, 1.0)
    for _ in range(20):
        f = smooth_random_field(grid40, rng)
        out = op.apply(f)
        assert out.norm_l1() <= f.norm_l1() * (1.0 + 1e-12)
        assert out.norm_sup() <= f.norm_sup() * (1.0 + 1e-12)


def test_symbol_nonpositive_on_lattice(gauss, bump_kern, grid40):
    for kern in (gauss, bump_kern):
        sym = discrete_symbol(kern, grid40)
        re = sym.real
        assert re.flat[0] == 0.0
        assert np.all(re.ravel()[1:] < 0.0)


def test_duality_identity(gauss, grid40, rng):
    for _ in range(100):
        f = smooth_random_field(grid40, rng)
        z = grid40.field(1.0 + np.abs(smooth_random_field(grid40, rng).values))
        t = float(rng.uniform(0.2, 2.0))
        lhs = SemigroupOperator(gauss, grid40, t).apply(f).inner(z)
        rhs = f.inner(evolve_intensity(gauss, t, z))
        assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), 1.0)


def test_constant_intensity_fixed_point(gauss, grid40):
    z = grid40.field(np.full(grid40.shape(), 1.7))
    zt = evolve_intensity(gauss, 1.0, z)
    assert np.abs(zt.values - 1.7).max() < 1e-12


def test_evolved_intensity_stays_positive(gauss, grid40):
    z = grid40.sample(lambda p: np.where(p[:, 0] >= 0.0, 3.0, 1.0))
    zt = evolve_intensity(gauss, 1.0, z)
    assert zt.values.min() > -1e-8


def test_self_adjoint_for_even_kernel(gauss, grid40, rng):
    op = SemigroupOperator(gauss, grid40, 1.0)
    for _ in range(10):
        f = smooth_random_field(grid40, rng)
        g = smooth_random_field(grid40, rng)
        assert abs(op.apply(f).inner(g) - f.inner(op.apply(g))) < 1e-9


def test_grid_mismatch_rejected(gauss, grid40, grid10):
    op = SemigroupOperator(gauss, grid40, 1.0)
    f = grid10.field(np.ones(grid10.shape()))
    with pytest.raises(GridMismatch):
        apply_semigroup(op, f)


def test_kernel_must_fit_box(gauss):
    small = SpectralGrid(1, 4.0, 8)
    with pytest.raises(GridTooSmall):
        SemigroupOperator(gauss, small, 1.0)


def test_correlation2_product_factorizes(gauss, grid10):
    z = grid10.sample(lambda p: 1.0 + (p[:, 0] >= 0.0) * 2.0)
    k2 = GridField(grid10, np.outer(z.values, z.values))
    out = evolve_correlation2(gauss, 1.0, k2)
    zt = evolve_intensity(gauss, 1.0, z)
    assert np.abs(out.values - np.outer(zt.values, zt.values)).max() < 1e-10


def test_correlation2_identity_at_zero(gauss, grid10):
    z = grid10.sample(lambda p: 1.0 + np.exp(-p[:, 0] ** 2))
    k2 = GridField(grid10, np.outer(z.values, z.values))
    out = evolve_correlation2(gauss, 0.0, k2)
    assert np.abs(out.values - k2.values).max() < 1e-12


def test_correlation2_rank_two_linearity(gauss, grid10):
    z = grid10.sample(lambda p: 1.0 + np.exp(-p[:, 0] ** 2))
    g = grid10.sample(lambda p: np.exp(-2.0 * (p[:, 0] - 1.0) ** 2))
    k2 = GridField(grid10, np.outer(z.values, z.values)
                   + np.outer(g.values, g.values))
    out = evolve_correlation2(gauss, 1.0, k2)
    zt = evolve_intensity(gauss, 1.0, z)
    gt = evolve_intensity(gauss, 1.0, g)
    expect = np.outer(zt.values, zt.values) + np.outer(gt.values, gt.values)
    assert np.abs(out.values - expect).max() < 1e-10


def test_correlation2_rejects_asymmetric(gauss, grid10):
    vals = np.outer(np.ones(grid10.points),
                    np.arange(grid10.points, dtype=float))
    with pytest.raises(AsymmetricInput):
        evolve_correlation2(gauss, 1.0, GridField(grid10, vals))


def test_chi_bound_gaussian_and_bump(gauss, bump_kern):
    c_gauss, ok = chi_bound_check(gauss)
    assert ok
    c_bump, ok = chi_bound_check(bump_kern)
    assert ok
    assert c_bump < c_gauss


def test_quadratic_form_zero_phi(gauss):
    val = quadratic_form(gauss, lambda x: np.zeros_like(x),
                         lambda x: np.ones_like(x), radius=8.0)
    assert val == 0.0


def test_noncontraction_value_against_independent_quadrature():
    """Value check only; the sign assertion lives in the acceptance suite."""
    res = noncontraction_demo()
    a_phi = lambda x: np.exp(-x * x / 2.0) / math.sqrt(2.0) - np.exp(-x * x)
    phi = lambda x: np.exp(-x * x) / math.sqrt(math.pi)
    z = lambda x: 1.0 + np.exp(-x * x + 4.0 * x)
    oracle = quad(lambda x: phi(x) * a_phi(x) * z(x), -30, 30, limit=200)[0]
    oracle_flat = quad(lambda x: phi(x) * a_phi(x), -30, 30, limit=200)[0]
    assert abs(res["value"] - oracle) < 1e-8
    assert abs(res["value_flat"] - oracle_flat) < 1e-8
    assert res["value_flat"] <= 0.0
