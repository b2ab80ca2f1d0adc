import math

import numpy as np
import pytest

from jumpfield.asymptotics import constant_intensity, step_intensity
from jumpfield.errors import EmptyEnsemble, FOutOfRange, \
    ScaledSupportExceedsWindow, SupportExceedsWindow
from jumpfield.observables import bogoliubov_functional, \
    catalog_test_functions, empirical_field, estimate_correlations, \
    jackknife_mean, laplace_functional, poisson_bogoliubov_reference, \
    poisson_laplace_reference, scaled_empirical_field, smooth_bump
from jumpfield.quadrature import geometric_edges, integrate_panels_1d
from jumpfield.sampler import Configuration, JumpSampler, TorusBox, \
    evolve_configuration, sample_poisson


def phi_integral(phi):
    edges = geometric_edges(phi.support_radius + 1e-9, center=phi.center)
    val, _ = integrate_panels_1d(lambda x: phi.evaluate(x[:, None]), edges,
                                 rtol=1e-10)
    return val


def make_ensemble(z, box, rng, n, sampler=None, t=0.0):
    out = []
    for _ in range(n):
        cfg = sample_poisson(z, box, rng)
        if t > 0.0:
            cfg = evolve_configuration(cfg, sampler, t, rng)
        out.append(cfg)
    return out


def test_empirical_field_edge_cases(grid10):
    box = TorusBox(1, 10.0)
    phi = smooth_bump(radius=2.0)
    assert empirical_field(Configuration(box, np.zeros((0, 1))), phi) == 0.0
    single = Configuration(box, np.array([[0.7]]))
    assert empirical_field(single, phi) == pytest.approx(
        float(phi.evaluate(np.array([[0.7]]))[0]))
    wide = smooth_bump(radius=8.0)
    with pytest.raises(SupportExceedsWindow):
        empirical_field(single, wide)


def test_campbell_means(rng):
    box = TorusBox(1, 10.0)
    z = constant_intensity(1.0)
    configs = make_ensemble(z, box, rng, 2000)
    for phi in catalog_test_functions():
        if phi.support_radius + abs(phi.center) >= 5.0:
            continue
        vals = [empirical_field(c, phi) for c in configs]
        est, se = jackknife_mean(vals)
        assert abs(est - phi_integral(phi)) <= 3.0 * se


def test_scaled_field_matches_unscaled_at_one(rng):
    box = TorusBox(1, 10.0)
    cfg = sample_poisson(constant_intensity(2.0), box, rng)
    phi = smooth_bump(radius=2.0)
    assert scaled_empirical_field(cfg, phi, 1.0) == pytest.approx(
        empirical_field(cfg, phi))
    assert scaled_empirical_field(
        Configuration(box, np.zeros((0, 1))), phi, 1.0) == 0.0


def test_scaled_field_campbell(rng):
    phi = smooth_bump(radius=2.0)
    z = step_intensity(1.0, 2.0)
    for eps in (1.0, 0.5):
        box = TorusBox(1, 10.0 / eps)
        vals = []
        for _ in range(2000):
            cfg = sample_poisson(
                type("Z", (), {"sup_bound": 2.0,
                               "evaluate": staticmethod(
                                   lambda p, e=eps: z.evaluate(p * e))}),
                box, rng)
            vals.append(scaled_empirical_field(cfg, phi, eps))
        est, se = jackknife_mean(vals)
        edges = geometric_edges(2.0, breakpoints=(0.0,))
        want, _ = integrate_panels_1d(
            lambda x: phi.evaluate(x[:, None])
            * z.evaluate(x[:, None]), edges, rtol=1e-9)
        assert abs(est - want) <= 3.0 * se


def test_scaled_field_support_guard(rng):
    box = TorusBox(1, 10.0)
    cfg = sample_poisson(constant_intensity(1.0), box, rng)
    phi = smooth_bump(radius=2.0)
    with pytest.raises(ScaledSupportExceedsWindow):
        scaled_empirical_field(cfg, phi, 0.25)


def test_laplace_functional_trivial(rng):
    box = TorusBox(1, 10.0)
    configs = make_ensemble(constant_intensity(1.0), box, rng, 50)
    zero = smooth_bump(radius=2.0, height=0.0)
    est = laplace_functional(configs, zero)
    assert est.value == 1.0 and est.stderr == 0.0


def test_laplace_functional_poisson_reference(gauss, grid10, rng):
    box = TorusBox(1, 10.0)
    z = step_intensity(1.0, 3.0)
    phi = smooth_bump(radius=2.0, height=-0.8)
    sampler = JumpSampler(gauss)
    for t in (0.0, 1.0):
        configs = make_ensemble(z, box, rng, 3000, sampler, t)
        est = laplace_functional(configs, phi)
        ref = poisson_laplace_reference(gauss, grid10, t, z, phi)
        assert est.agrees(ref), (t, est, ref)


def test_bogoliubov_functional(gauss, grid10, rng):
    box = TorusBox(1, 10.0)
    z = constant_intensity(1.5)
    f = smooth_bump(radius=2.0, height=-0.5)
    sampler = JumpSampler(gauss)
    zero = smooth_bump(radius=2.0, height=0.0)
    configs = make_ensemble(z, box, rng, 50)
    assert bogoliubov_functional(configs, zero).value == 1.0
    for t in (0.0, 1.0):
        configs = make_ensemble(z, box, rng, 3000, sampler, t)
        est = bogoliubov_functional(configs, f)
        ref = poisson_bogoliubov_reference(gauss, grid10, t, z, f)
        assert est.agrees(ref), (t, est, ref)


def test_bogoliubov_range_guard(rng):
    box = TorusBox(1, 10.0)
    configs = [Configuration(box, np.array([[0.0]]))]
    bad = smooth_bump(radius=2.0, height=-1.5)
    with pytest.raises(FOutOfRange):
        bogoliubov_functional(configs * 2, bad)


def test_correlations_poisson_cumulant_vanishes(rng):
    box = TorusBox(1, 10.0)
    configs = make_ensemble(step_intensity(1.0, 3.0), box, rng, 3000)
    est = estimate_correlations(configs, np.linspace(-4.0, 4.0, 9))
    centers = 0.5 * (est.bin_edges[:-1] + est.bin_edges[1:])
    z_ref = np.where(centers >= 0.0, 3.0, 1.0)
    assert np.all(np.abs(est.rho - z_ref) <= 3.0 * est.rho_se)
    assert np.all(np.abs(est.u2) <= 3.0 * est.u2_se + 1e-9)


def test_correlations_factorize_after_evolution(gauss, rng):
    box = TorusBox(1, 10.0)
    sampler = JumpSampler(gauss)
    configs = make_ensemble(step_intensity(1.0, 3.0), box, rng, 3000,
                            sampler, 1.0)
    est = estimate_correlations(configs, np.linspace(-4.0, 4.0, 9))
    k2 = est.u2 + np.multiply.outer(est.rho, est.rho)
    assert np.all(np.abs(k2 - np.multiply.outer(est.rho, est.rho))
                  <= 3.0 * est.u2_se + 1e-9)


def test_correlations_need_replicas():
    box = TorusBox(1, 10.0)
    with pytest.raises(EmptyEnsemble):
        estimate_correlations([Configuration(box, np.zeros((0, 1)))],
                              np.linspace(-4, 4, 5))


def test_stderr_scales_with_replicas(rng):
    box = TorusBox(1, 10.0)
    phi = smooth_bump(radius=2.0)
    configs = make_ensemble(constant_intensity(1.0), box, rng, 4000)
    vals = [empirical_field(c, phi) for c in configs]
    _, se_half = jackknife_mean(vals[:2000])
    _, se_full = jackknife_mean(vals)
    assert 0.5 <= se_full / se_half <= 0.9
