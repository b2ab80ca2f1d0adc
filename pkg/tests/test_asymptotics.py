import math

import numpy as np
import pytest

from jumpfield.asymptotics import arithmetic_mean, asymptotic_equivalence, \
    bump_intensity, constant_intensity, constant_plus_bump, \
    dyadic_blocks_intensity, IntensityProfile, large_time_trajectory, \
    nonequilibrium_laplace_trajectory, power_decay_intensity, sine_intensity, \
    slow_oscillation_profile, step_intensity, step_mean
from jumpfield.errors import NotIntegrableDifference
from jumpfield.gibbs import hard_rods, rho_equi
from jumpfield.observables import smooth_bump
from jumpfield.quadrature import geometric_edges, integrate_panels_1d
from jumpfield.sampler import JumpSampler, TorusBox, evolve_configuration, \
    sample_gibbs_mcmc, sample_poisson
from jumpfield.spectral import SpectralGrid

RATE = math.sqrt(math.pi) * (math.exp(-0.25) - 1.0)


def test_mean_constant():
    _, verdict = arithmetic_mean(constant_intensity(2.0), [1, 2, 4, 8])
    assert verdict.kind == "converged"
    assert verdict.value == pytest.approx(2.0, abs=1e-9)


def test_mean_sine():
    _, verdict = arithmetic_mean(sine_intensity(1.0, 0.5),
                                 [2.0 ** k for k in range(3, 12)])
    assert verdict.kind == "converged"
    assert verdict.value == pytest.approx(1.0, abs=1e-3)


def test_mean_decaying_profiles():
    for z in (bump_intensity(0.5), power_decay_intensity(1.0, 2.5)):
        averages, _ = arithmetic_mean(z, [10.0, 100.0, 1000.0])
        assert averages[-1] < 1e-3


def test_mean_dyadic_envelope():
    averages, verdict = arithmetic_mean(dyadic_blocks_intensity(),
                                        [2.0 ** k for k in range(1, 15)])
    assert verdict.kind == "oscillating"
    lo, hi = verdict.envelope
    assert abs(lo - 1.0 / 3.0) <= 0.02
    assert abs(hi - 2.0 / 3.0) <= 0.02


def test_mean_linearity():
    z1 = sine_intensity(1.0, 0.5)
    z2 = constant_plus_bump(2.0, height=0.5, width=1.0)
    a1, a2 = 0.7, 1.3

    def combined(p):
        return a1 * z1.evaluate(p) + a2 * z2.evaluate(p)

    combo = IntensityProfile(combined, sup_bound=a1 * z1.sup_bound
                             + a2 * z2.sup_bound, name="combo")
    _, verdict = arithmetic_mean(combo, [2.0 ** k for k in range(4, 13)])
    assert verdict.kind == "converged"
    assert verdict.value == pytest.approx(
        a1 * z1.known_mean + a2 * z2.known_mean, abs=2e-3)


def test_step_mean_values():
    assert step_mean(1.0, 3.0) == 2.0
    assert step_mean(2.5, 2.5) == 2.5
    assert step_mean(0.0, 4.0) == 2.0


def test_slow_oscillation_tracks_asymptote():
    _, _, dev = slow_oscillation_profile(
        1.0, [10.0, 100.0, 1000.0, 10000.0, 100000.0])
    assert np.all(np.diff(dev) < 0)
    assert dev[-1] < 1e-3


def test_slow_oscillation_shifts_with_constant():
    radii = [100.0, 1000.0]
    avg1, _, _ = slow_oscillation_profile(1.0, radii)
    avg3, _, _ = slow_oscillation_profile(3.0, radii)
    assert np.allclose(avg3 - avg1, 2.0, atol=1e-9)


def test_trajectory_constant_intensity(gauss, grid10):
    phi = smooth_bump(radius=2.0, center=0.5)
    traj = large_time_trajectory(gauss, constant_intensity(2.0), phi,
                                 [0.0, 1.0, 5.0], grid10)
    assert np.all(traj["deviations"] < 1e-10)


def test_trajectory_sine_mode_decay_rate(gauss):
    grid = SpectralGrid(1, 4.0 * math.pi, 1 << 10)
    phi = smooth_bump(radius=2.0, center=0.5)
    times = [0.0, 5.0, 10.0, 20.0]
    traj = large_time_trajectory(gauss, sine_intensity(1.0, 0.5), phi,
                                 times, grid)
    predicted = traj["deviations"][0] * np.exp(RATE * np.asarray(times))
    rel = np.abs(traj["deviations"] - predicted) / predicted
    assert np.all(rel < 1e-6)
    assert np.all(np.diff(traj["deviations"]) < 0)


def test_trajectory_step_reaches_mean(gauss, grid10):
    phi = smooth_bump(radius=2.0, center=0.5)
    traj = large_time_trajectory(gauss, step_intensity(1.0, 3.0), phi,
                                 [0.0, 10.0, 25.0, 50.0], grid10)
    assert traj["deviations"][-1] < 1e-3
    assert np.all(np.diff(traj["deviations"]) < 0)


def test_equal_means_equal_limits(gauss, grid10):
    """Profiles sharing a mean land on the same pairing at large times."""
    phi = smooth_bump(radius=2.0, center=0.5)
    za = sine_intensity(1.0, 0.5)
    zb = constant_plus_bump(1.0, height=0.5, width=1.0)
    ta = large_time_trajectory(gauss, za, phi, [40.0], grid10)
    tb = large_time_trajectory(gauss, zb, phi, [40.0], grid10)
    resid = max(ta["deviations"][-1], tb["deviations"][-1])
    assert abs(ta["values"][-1] - tb["values"][-1]) <= 2.0 * resid + 1e-12


def test_equivalence_identical_profiles(gauss):
    phi = smooth_bump(radius=2.0, center=0.5)
    z = constant_plus_bump(1.0, height=0.5, width=1.0)
    dev = asymptotic_equivalence(gauss, z, z, phi, [1.0, 5.0])
    assert np.all(dev < 1e-14)


def test_equivalence_drifted_kernel_decays(shifted_gauss):
    phi = smooth_bump(radius=2.0, center=0.5)
    z1 = constant_intensity(1.0)
    z2 = constant_plus_bump(1.0, height=1.0, width=1.0)
    dev = asymptotic_equivalence(shifted_gauss, z1, z2, phi,
                                 [1.0, 10.0, 30.0])
    assert np.all(np.diff(dev) < 0)
    assert dev[-1] < 1e-6


def test_equivalence_symmetric_kernel_diffusive_rate(gauss):
    """Symmetric kernels integrate the bump away like 1/sqrt(t)."""
    phi = smooth_bump(radius=2.0, center=0.5)
    z1 = constant_intensity(1.0)
    z2 = constant_plus_bump(1.0, height=1.0, width=1.0)
    dev = asymptotic_equivalence(gauss, z1, z2, phi, [30.0, 120.0])
    ratio = dev[0] / dev[1]
    assert 1.6 <= ratio <= 2.4


def test_equivalence_guard_nonintegrable(gauss):
    phi = smooth_bump(radius=2.0, center=0.5)
    with pytest.raises(NotIntegrableDifference):
        asymptotic_equivalence(gauss, constant_intensity(1.0),
                               step_intensity(0.5, 1.5), phi, [1.0])


def _expm1_integral(f):
    edges = geometric_edges(f.support_radius + 1e-9, center=f.center)
    val, _ = integrate_panels_1d(
        lambda x: np.expm1(-f.evaluate(x[:, None])), edges, rtol=1e-10)
    return val


def test_nonequilibrium_poisson_step(gauss, rng):
    """Evolved step-Poisson start converges to the mean-intensity Poisson."""
    box = TorusBox(1, 10.0)
    z = step_intensity(1.0, 3.0)
    sampler = JumpSampler(gauss)
    f = smooth_bump(radius=2.0, center=0.5, height=0.6)
    ensembles = {}
    for t in (0.0, 50.0):
        configs = []
        for _ in range(2000):
            cfg = sample_poisson(z, box, rng)
            if t:
                cfg = evolve_configuration(cfg, sampler, t, rng)
            configs.append(cfg)
        ensembles[t] = configs
    rows = nonequilibrium_laplace_trajectory(
        ensembles, f, target_mean=2.0, int_expm1_f=_expm1_integral(f))
    final = rows[-1]
    assert abs(final["estimate"] - final["reference"]) \
        <= 3.0 * final["stderr"]


def test_nonequilibrium_gibbs_hard_rods(gauss, rng):
    """Gibbs start relaxes to the Poisson field of its mean density."""
    box = TorusBox(1, 10.0)
    activity = 0.4
    pot = hard_rods(0.25)
    z = constant_intensity(activity)
    sampler = JumpSampler(gauss)
    f = smooth_bump(radius=2.0, center=0.5, height=0.6)
    base = [sample_gibbs_mcmc(pot, 1.0, z, box, np.random.default_rng(s),
                              sweeps=1500) for s in range(600)]
    horizon = 40.0
    evolved = [evolve_configuration(c, sampler, horizon, rng) for c in base]
    counts0 = np.array([len(c) for c in base])
    counts1 = np.array([len(c) for c in evolved])
    # density trajectory stays flat: the adjoint flow fixes constants
    se = math.hypot(counts0.std() / math.sqrt(600),
                    counts1.std() / math.sqrt(600))
    assert abs(counts0.mean() - counts1.mean()) <= 3.0 * se
    series, budget = rho_equi(activity, 1.0, pot, order=2)
    rows = nonequilibrium_laplace_trajectory(
        {horizon: evolved}, f, target_mean=series,
        int_expm1_f=_expm1_integral(f))
    final = rows[-1]
    slack = 3.0 * final["stderr"] \
        + abs(final["reference"]) * budget * abs(_expm1_integral(f))
    assert abs(final["estimate"] - final["reference"]) <= slack


def test_nonequilibrium_check_wrapper(gauss, rng):
    from jumpfield.asymptotics import nonequilibrium_asymptotic_check
    box = TorusBox(1, 10.0)
    z = constant_intensity(1.5)
    f = smooth_bump(radius=2.0, center=0.5, height=0.6)
    base = [sample_poisson(z, box, rng) for _ in range(1500)]
    rows = nonequilibrium_asymptotic_check(base, gauss, f, [0.5, 2.0],
                                           target_mean=1.5, master_seed=12)
    # stationary start: trajectory is flat at the reference
    for row in rows:
        assert abs(row["estimate"] - row["reference"]) \
            <= 3.0 * row["stderr"]
