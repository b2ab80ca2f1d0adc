"""Scaling regimes: transport, heat, and drift-diffusion limits.

The macroscopic observable is the scaled field eps^d sum phi(eps x) at time
eps^(-kappa) t started from intensity z(eps .).  Its log-Laplace exponent

    int e^{eps^-kappa t A} (e^{eps^d phi(eps .)} - 1)(x) z(eps x) dx

is evaluated spectrally on a microscopic torus whose side grows like 1/eps,
and compared with the limiting pairing int phi rho_t.  Which profile rho_t
applies is decided by the first two moments of the rate: transport by a1 for
kappa = 1, heat by a2 for kappa = 2 with a1 = 0, and drift-diffusion for the
weakly asymmetric recombination p + eps q with kappa = 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, GridTooSmall
from .kernel import JumpKernel, weak_asymmetry
from .observables import EstimateWithError, TestFunction, \
    scaled_empirical_field
from .quadrature import geometric_edges, integrate_panels_1d
from .sampler import EnsembleRun, JumpSampler, TorusBox, \
    evolve_configuration, sample_poisson
from .spectral import SemigroupOperator, SpectralGrid


@dataclass(frozen=True)
class ScalingSpec:
    """Scaling regime: exponent kappa, ladder of eps values, macro time."""

    kappa: int
    eps_ladder: tuple
    t: float
    weak: bool = False

    def __post_init__(self):
        if self.kappa not in (1, 2):
            raise ValueError("kappa must be 1 or 2")
        ladder = tuple(self.eps_ladder)
        if not ladder or any(not 0.0 < e <= 1.0 for e in ladder):
            raise ValueError("eps values must lie in (0, 1]")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("eps ladder must be strictly decreasing")
        if self.weak and self.kappa != 2:
            raise ValueError("weak asymmetry runs with kappa = 2")

    def validate_kernel(self, kernel: JumpKernel):
        a1 = kernel.first_moment
        drift = float(np.linalg.norm(a1))
        if self.weak:
            if drift < 1e-12:
                raise ValueError("weak asymmetry needs an odd part, a1 != 0")
            return
        if self.kappa == 1 and drift < 1e-12:
            raise ValueError("kappa = 1 requires a nonzero first moment")
        if self.kappa == 2 and drift > 1e-9:
            raise ValueError("kappa = 2 without the weak flag requires a1 = 0")


@dataclass
class DensityProfile:
    """Limiting density rho_t with its provenance and ingredients."""

    grid: SpectralGrid
    values: np.ndarray
    tag: str
    ingredients: dict

    def pair(self, phi: TestFunction) -> float:
        phi_field = self.grid.sample(phi.evaluate)
        return float(np.sum(phi_field.values * self.values)) \
            * self.grid.cell_volume

    def mass(self) -> float:
        return float(self.values.sum()) * self.grid.cell_volume


def _heat_multiplier(grid: SpectralGrid, a2, t):
    d = grid.dimension
    freqs = np.meshgrid(*([grid.axis_frequencies] * d), indexing="ij")
    a2 = np.atleast_2d(np.asarray(a2, dtype=float))
    quad = sum(a2[i, j] * freqs[i] * freqs[j]
               for i in range(d) for j in range(d))
    return np.exp(-0.5 * t * quad)


def _drift_phase(grid: SpectralGrid, a1, t):
    d = grid.dimension
    freqs = np.meshgrid(*([grid.axis_frequencies] * d), indexing="ij")
    a1 = np.atleast_1d(np.asarray(a1, dtype=float))
    phase = sum(a1[i] * freqs[i] for i in range(d))
    return np.exp(1j * t * phase)


def reference_transport(rho0, a1, t, grid: SpectralGrid) -> DensityProfile:
    """rho_t(x) = rho0(x + t a1), sampled exactly on the torus grid."""
    a1 = np.atleast_1d(np.asarray(a1, dtype=float))
    evaluate = rho0.evaluate if hasattr(rho0, "evaluate") else rho0
    shift = t * a1

    def shifted(p):
        return evaluate(grid.wrap(np.asarray(p, dtype=float) + shift))

    vals = np.asarray(shifted(grid.nodes()), dtype=float).reshape(grid.shape())
    return DensityProfile(grid, vals, "transport",
                          {"a1": a1.tolist(), "t": t})


def reference_heat(rho0, a2, t, grid: SpectralGrid) -> DensityProfile:
    """Spectral solution of the constant-coefficient heat flow on the torus."""
    evaluate = rho0.evaluate if hasattr(rho0, "evaluate") else rho0
    field = grid.sample(evaluate)
    mult = _heat_multiplier(grid, a2, t)
    vals = np.real(np.fft.ifftn(mult * np.fft.fftn(field.values)))
    return DensityProfile(grid, vals, "heat", {"a2": np.atleast_2d(
        np.asarray(a2, dtype=float)).tolist(), "t": t})


def reference_drift_diffusion(rho0, a1, a2, t,
                              grid: SpectralGrid) -> DensityProfile:
    """Heat flow combined with transport; the profile peak moves to -t a1."""
    evaluate = rho0.evaluate if hasattr(rho0, "evaluate") else rho0
    field = grid.sample(evaluate)
    mult = _heat_multiplier(grid, a2, t) * _drift_phase(grid, a1, t)
    vals = np.real(np.fft.ifftn(mult * np.fft.fftn(field.values)))
    return DensityProfile(grid, vals, "drift-diffusion",
                          {"a1": np.atleast_1d(a1).tolist(),
                           "a2": np.atleast_2d(a2).tolist(), "t": t})


def limit_pairing(kernel: JumpKernel, z, phi: TestFunction, t, kappa,
                  weak=False, macro_grid: SpectralGrid | None = None) -> float:
    """int phi rho_t for the limiting profile selected by the regime."""
    if macro_grid is None:
        macro_grid = SpectralGrid(kernel.dimension, 20.0, 1 << 12)
    if weak:
        split_even = weak_asymmetry(kernel, 0.0)
        a1 = kernel.first_moment
        a2 = split_even.second_moment
        profile = reference_drift_diffusion(z, a1, a2, t, macro_grid)
    elif kappa == 1:
        a1 = kernel.first_moment
        profile = reference_transport(z, a1, t, macro_grid)
    else:
        a2 = kernel.second_moment
        profile = reference_heat(z, a2, t, macro_grid)
    return profile.pair(phi)


_MICRO_POINTS_CAP = 1 << 24


def _micro_grid(dimension, eps, L_macro, dx):
    side = L_macro / eps
    n = 1 << max(3, math.ceil(math.log2(side / dx)))
    if n ** dimension > _MICRO_POINTS_CAP:
        raise GridTooSmall(
            f"rung eps={eps} needs {n}^{dimension} grid points; memory caps "
            f"the ladder (use a coarser dx or a larger eps)")
    return SpectralGrid(dimension, side, n)


class ScaledIntensity:
    """Intensity x -> z(eps x) with the parent's bounds."""

    def __init__(self, z, eps):
        self.parent = z
        self.eps = eps
        self.sup_bound = z.sup_bound

    def evaluate(self, pts):
        return self.parent.evaluate(np.asarray(pts, dtype=float) * self.eps)


def hydro_exponent(kernel: JumpKernel, z, phi: TestFunction, t, eps, kappa,
                   weak=False, L_macro=20.0, dx=1.0 / 64) -> float:
    """Log-Laplace exponent of the scaled field, evaluated spectrally."""
    d = kernel.dimension
    if (abs(phi.center) + phi.support_radius) / eps > 0.45 * L_macro / eps:
        raise GridTooSmall("test-function support does not fit the window")
    kern_eff = weak_asymmetry(kernel, eps) if weak else kernel
    grid = _micro_grid(d, eps, L_macro, dx)
    horizon = t * eps ** (-kappa)
    scaled_phi = phi.scaled(eps)

    def g_fn(p):
        return np.expm1(eps ** d * scaled_phi.evaluate(p))

    g = grid.sample(g_fn)
    evolved = SemigroupOperator(kern_eff, grid, horizon).apply(g)
    z_eps = grid.sample(ScaledIntensity(z, eps).evaluate)
    return evolved.inner(z_eps)


def taylor_remainder_term(kernel: JumpKernel, z, phi: TestFunction, t, eps,
                          kappa, weak=False, L_macro=20.0, dx=1.0 / 64):
    """|int e^{TA}(e^{eps^d phi(eps .)} - 1 - eps^d phi(eps .)) z(eps .)|.

    This is the term the exponent drops on the way to the limit; it must
    stay below eps^d |phi|_1^2 e^(|phi|_1) sup(z) at every rung.
    """
    d = kernel.dimension
    kern_eff = weak_asymmetry(kernel, eps) if weak else kernel
    grid = _micro_grid(d, eps, L_macro, dx)
    horizon = t * eps ** (-kappa)
    scaled_phi = phi.scaled(eps)
    lin = grid.sample(lambda p: eps ** d * scaled_phi.evaluate(p))
    rem = grid.field(np.expm1(lin.values) - lin.values)
    evolved = SemigroupOperator(kern_eff, grid, horizon).apply(rem)
    z_eps = grid.sample(ScaledIntensity(z, eps).evaluate)
    return abs(evolved.inner(z_eps))


def hydro_mc(kernel: JumpKernel, z, phi: TestFunction, t, eps, kappa,
             replicas, master_seed, weak=False, L_macro=20.0,
             max_particle_steps=5e8):
    """Monte-Carlo mean and variance of the scaled empirical field.

    Raises BudgetExceeded when the projected number of jump events
    (replicas x expected count x clock rate x horizon) passes the cap.
    """
    d = kernel.dimension
    kern_eff = weak_asymmetry(kernel, eps) if weak else kernel
    sampler = JumpSampler(kern_eff)
    box = TorusBox(d, L_macro / eps)
    horizon = t * eps ** (-kappa)
    projected = replicas * z.sup_bound * box.volume \
        * sampler.clock_rate * horizon
    if projected > max_particle_steps:
        raise BudgetExceeded(
            f"projected {projected:.3g} jump events exceed the cap "
            f"{max_particle_steps:.3g}")
    z_eps = ScaledIntensity(z, eps)
    values = np.empty(replicas)
    run = EnsembleRun(replicas, master_seed)
    for r, rng in enumerate(run.streams()):
        cfg = sample_poisson(z_eps, box, rng)
        cfg = evolve_configuration(cfg, sampler, horizon, rng)
        values[r] = scaled_empirical_field(cfg, phi, eps, kappa)
    mean = float(values.mean())
    var = float(values.var(ddof=1))
    return EstimateWithError(mean, math.sqrt(var / replicas), replicas), var


def hydro_ladder(kernel: JumpKernel, z, phi: TestFunction, spec: ScalingSpec,
                 L_macro=20.0, dx=1.0 / 64, mc_replicas=0, master_seed=0,
                 macro_grid: SpectralGrid | None = None):
    """Per-rung exponents, references, deviations, and the fitted order.

    Returns (rows, fitted_order); each row carries the rung's eps, spectral
    exponent, limiting pairing, absolute deviation, and optionally the MC
    mean/variance of the scaled field.
    """
    spec.validate_kernel(kernel)
    if macro_grid is None:
        macro_grid = SpectralGrid(kernel.dimension, L_macro, 1 << 12)
    reference = limit_pairing(kernel, z, phi, spec.t, spec.kappa,
                              weak=spec.weak, macro_grid=macro_grid)
    rows = []
    for i, eps in enumerate(spec.eps_ladder):
        exponent = hydro_exponent(kernel, z, phi, spec.t, eps, spec.kappa,
                                  weak=spec.weak, L_macro=L_macro, dx=dx)
        row = {"eps": eps, "exponent": exponent, "reference": reference,
               "deviation": abs(exponent - reference)}
        if mc_replicas:
            est, var = hydro_mc(kernel, z, phi, spec.t, eps, spec.kappa,
                                mc_replicas, master_seed + i, weak=spec.weak,
                                L_macro=L_macro)
            row.update({"mc_mean": est.value, "mc_stderr": est.stderr,
                        "mc_var": var, "mc_replicas": mc_replicas})
        rows.append(row)
    devs = np.array([r["deviation"] for r in rows])
    eps_arr = np.array([r["eps"] for r in rows])
    order = float(np.polyfit(np.log2(eps_arr), np.log2(devs), 1)[0]) \
        if len(rows) >= 2 and np.all(devs > 0) else float("nan")
    return rows, order


def phi_norms(phi: TestFunction):
    """Continuum sup and L1 norms of a compactly supported test function."""
    edges = geometric_edges(phi.support_radius + 1e-9,
                            center=float(phi.center))
    l1, _ = integrate_panels_1d(
        lambda x: np.abs(phi.evaluate(x[:, None])), edges, rtol=1e-10)
    probes = np.linspace(phi.center - phi.support_radius,
                         phi.center + phi.support_radius, 200001)
    sup = float(np.abs(phi.evaluate(probes[:, None])).max())
    return sup, l1


def remainder_inequalities(kernel: JumpKernel, phi: TestFunction,
                           eps_values=(1.0, 0.5, 0.25, 0.125),
                           times=(0.5, 1.0), dx=1.0 / 64):
    """Measured norms of the Taylor remainder fields against their bounds.

    For each eps and t, checks on the grid:
      sup |e^{tA}(e^{eps^d phi(eps .)} - 1)|      <= eps^d sup|phi| e^{sup|phi|}
      L1  of the same field                        <= |phi|_1 e^{|phi|_1}
      L1  of e^{tA}(e^{eps^d phi(eps .)} - 1 - eps^d phi(eps .))
                                                   <= eps^d |phi|_1^2 e^{|phi|_1}
    Returns a list of row dicts with measured values, bounds and a pass flag.
    """
    d = kernel.dimension
    sup_phi, l1_phi = phi_norms(phi)
    rows = []
    for eps in eps_values:
        span = 2.0 * ((abs(phi.center) + phi.support_radius) / eps + 12.0)
        n = 1 << max(3, math.ceil(math.log2(span / dx)))
        grid = SpectralGrid(d, span, n)
        scaled_phi = phi.scaled(eps)

        lin = grid.sample(lambda p: eps ** d * scaled_phi.evaluate(p))
        g = grid.field(np.expm1(lin.values))
        rem = grid.field(g.values - lin.values)
        for t in times:
            op = SemigroupOperator(kernel, grid, t)
            eg = op.apply(g)
            erem = op.apply(rem)
            checks = [
                ("sup", eg.norm_sup(),
                 eps ** d * sup_phi * math.exp(sup_phi)),
                ("l1", eg.norm_l1(), l1_phi * math.exp(l1_phi)),
                ("l1-remainder", erem.norm_l1(),
                 eps ** d * l1_phi ** 2 * math.exp(l1_phi)),
            ]
            for name, measured, bound in checks:
                rows.append({"eps": eps, "t": t, "check": name,
                             "measured": measured, "bound": bound,
                             "pass": measured <= bound})
    return rows
