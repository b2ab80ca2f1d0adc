"""Estimators over configuration ensembles: fields, functionals, correlations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyEnsemble, FOutOfRange, SupportExceedsWindow, \
    ScaledSupportExceedsWindow
from .sampler import Configuration, TorusBox
from .spectral import SemigroupOperator, SpectralGrid


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported test function with declared support radius."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    smooth: bool = True
    center: float = 0.0
    name: str = "custom"

    def evaluate(self, pts):
        pts = np.asarray(pts, dtype=float)
        vals = np.asarray(self.evaluator(pts), dtype=float)
        radii = np.linalg.norm(pts - self.center, axis=-1)
        return np.where(radii < self.support_radius, vals, 0.0)

    def __call__(self, pts):
        return self.evaluate(pts)

    def scaled(self, eps):
        """phi(eps * .), supported on radius support_radius / eps."""
        return TestFunction(
            evaluator=lambda p: self.evaluator(np.asarray(p) * eps),
            support_radius=self.support_radius / eps,
            smooth=self.smooth, center=self.center / eps,
            name=f"{self.name}(eps={eps})")


def smooth_bump(radius=2.0, height=1.0, center=0.0, name=None):
    """C-infinity bump h * exp(-u^2 / (1 - u^2)), u = |x - c| / r."""
    def evaluator(p):
        p = np.asarray(p, dtype=float)
        u2 = np.clip((np.linalg.norm(p - center, axis=-1) / radius) ** 2,
                     0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            vals = height * np.exp(-u2 / np.maximum(1.0 - u2, 1e-300))
        return np.where(u2 >= 1.0, 0.0, vals)

    return TestFunction(evaluator, radius, smooth=True, center=center,
                        name=name or f"bump(r={radius},c={center})")


def cosine_taper(radius=2.5, height=1.0, center=0.0):
    """Smooth cosine-squared taper; C^1 with compact support."""
    def evaluator(p):
        p = np.asarray(p, dtype=float)
        u = np.linalg.norm(p - center, axis=-1) / radius
        return np.where(u < 1.0, height * np.cos(0.5 * np.pi * u) ** 2, 0.0)

    return TestFunction(evaluator, radius, smooth=False, center=center,
                        name=f"cos2(r={radius})")


def catalog_test_functions():
    return [
        smooth_bump(radius=2.0),
        smooth_bump(radius=3.0),
        smooth_bump(radius=2.0, center=0.5),
        smooth_bump(radius=4.0, height=0.5),
        cosine_taper(radius=2.5),
    ]


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    replicas: int

    def agrees(self, other_value, sigmas=3.0, extra_se=0.0):
        return abs(self.value - other_value) <= \
            sigmas * math.hypot(self.stderr, extra_se)


def jackknife_mean(values):
    """Leave-one-out mean and standard error."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise EmptyEnsemble("need at least two replicas")
    total = values.sum()
    loo = (total - values) / (n - 1)
    est = float(values.mean())
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return est, se


def _check_support(cfg: Configuration, phi: TestFunction, radius=None):
    radius = phi.support_radius if radius is None else radius
    outer = abs(phi.center) + radius
    if isinstance(cfg.box, TorusBox):
        if outer > 0.5 * cfg.box.side:
            raise SupportExceedsWindow(
                f"support radius {outer} exceeds half-box {cfg.box.side / 2}")
    else:
        if outer > cfg.box.window:
            raise SupportExceedsWindow(
                f"support radius {outer} exceeds window {cfg.box.window}")


def empirical_field(cfg: Configuration, phi: TestFunction) -> float:
    """Sum of phi over the configuration points."""
    _check_support(cfg, phi)
    if len(cfg) == 0:
        return 0.0
    return float(np.sum(phi.evaluate(cfg.points)))


def scaled_empirical_field(cfg: Configuration, phi: TestFunction, eps,
                           kappa=2) -> float:
    """eps^d sum phi(eps x); the macroscopic observable of one replica."""
    if kappa not in (1, 2):
        raise ValueError("kappa must be 1 or 2")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    d = cfg.box.dimension
    scaled = phi.scaled(eps)
    try:
        _check_support(cfg, scaled)
    except SupportExceedsWindow as exc:
        raise ScaledSupportExceedsWindow(str(exc)) from exc
    if len(cfg) == 0:
        return 0.0
    return float(eps ** d * np.sum(scaled.evaluate(cfg.points)))


def laplace_functional(configs: Sequence[Configuration],
                       phi: TestFunction) -> EstimateWithError:
    """Monte-Carlo mean of exp(<phi, gamma>) with jackknife error."""
    vals = [math.exp(empirical_field(cfg, phi)) for cfg in configs]
    est, se = jackknife_mean(vals)
    return EstimateWithError(est, se, len(vals))


def poisson_laplace_reference(kernel, grid: SpectralGrid, t, z_profile,
                              phi: TestFunction) -> float:
    """exp(int e^{tA}(e^phi - 1) z dx) for a Poisson start, evaluated on the grid."""
    g = grid.sample(lambda p: np.expm1(phi.evaluate(p)))
    evolved = SemigroupOperator(kernel, grid, t).apply(g)
    zf = grid.sample(z_profile.evaluate if hasattr(z_profile, "evaluate")
                     else z_profile)
    return math.exp(evolved.inner(zf))


def bogoliubov_functional(configs: Sequence[Configuration],
                          f: TestFunction) -> EstimateWithError:
    """Monte-Carlo mean of prod_{x in gamma} (1 + f(x)); requires f > -1."""
    vals = []
    for cfg in configs:
        _check_support(cfg, f)
        if len(cfg) == 0:
            vals.append(1.0)
            continue
        fx = f.evaluate(cfg.points)
        if np.any(fx <= -1.0):
            raise FOutOfRange("f must stay strictly above -1")
        vals.append(math.exp(float(np.sum(np.log1p(fx)))))
    est, se = jackknife_mean(vals)
    return EstimateWithError(est, se, len(vals))


def poisson_bogoliubov_reference(kernel, grid: SpectralGrid, t, z_profile,
                                 f: TestFunction) -> float:
    """exp(int (e^{tA} f) z dx): the evolved functional of a Poisson start."""
    g = grid.sample(f.evaluate)
    evolved = SemigroupOperator(kernel, grid, t).apply(g)
    zf = grid.sample(z_profile.evaluate if hasattr(z_profile, "evaluate")
                     else z_profile)
    return math.exp(evolved.inner(zf))


@dataclass
class CorrelationEstimate:
    bin_edges: np.ndarray
    rho: np.ndarray
    rho_se: np.ndarray
    u2: np.ndarray
    u2_se: np.ndarray
    mixing_abs: float
    mixing_signed: float


def estimate_correlations(configs: Sequence[Configuration],
                          bin_edges) -> CorrelationEstimate:
    """Binned first correlation and second factorial cumulant.

    Same-bin pairs are counted as n(n-1) so a Poisson ensemble has vanishing
    cumulant in expectation.  The mixing diagnostic sup_x sum_y |u2| vol is
    reported both with and without absolute value.
    """
    if len(configs) < 2:
        raise EmptyEnsemble("need at least two replicas")
    edges = np.asarray(bin_edges, dtype=float)
    nbins = edges.size - 1
    vol = np.diff(edges)
    counts = np.empty((len(configs), nbins))
    for r, cfg in enumerate(configs):
        pts = cfg.points[:, 0] if cfg.points.size else np.empty(0)
        counts[r] = np.histogram(pts, bins=edges)[0]
    rho_samples = counts / vol
    rho = rho_samples.mean(axis=0)
    rho_se = rho_samples.std(axis=0, ddof=1) / math.sqrt(len(configs))

    pair = np.einsum("rb,rc->rbc", counts, counts)
    diag = np.arange(nbins)
    pair[:, diag, diag] = counts * (counts - 1.0)
    k2_samples = pair / (vol[None, :, None] * vol[None, None, :])
    # leave-one-out cumulant for bias and error control
    n = len(configs)
    u2_loo = np.empty_like(k2_samples)
    sum_k2 = k2_samples.sum(axis=0)
    sum_rho = rho_samples.sum(axis=0)
    for r in range(n):
        k2_r = (sum_k2 - k2_samples[r]) / (n - 1)
        rho_r = (sum_rho - rho_samples[r]) / (n - 1)
        u2_loo[r] = k2_r - np.multiply.outer(rho_r, rho_r)
    u2 = u2_loo.mean(axis=0)
    u2_se = u2_loo.std(axis=0, ddof=1) * math.sqrt(n - 1)
    weighted = u2 * vol[None, :]
    mixing_abs = float(np.abs(weighted).sum(axis=1).max())
    mixing_signed = float(weighted.sum(axis=1).max())
    return CorrelationEstimate(edges, rho, rho_se, u2, u2_se,
                               mixing_abs, mixing_signed)
