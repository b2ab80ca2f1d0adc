"""Particle ensembles: Poisson and Gibbs initial data, independent jump moves.

Every particle carries an exponential clock with rate a0 and jumps by
displacements drawn from a(.)/a0, independently of all others.  Evolving a
configuration therefore reduces to per-particle compound-Poisson draws; the
whole module is conditioned on that product structure.

Reproducibility contract: ensemble drivers derive one independent generator
per replica from a master seed via numpy's SeedSequence.spawn, so identical
master seeds give bit-identical ensembles regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnstablePotential
from .kernel import JumpKernel

_TABLE_SIZE = 1 << 16
_FINE = 1 << 18


@dataclass(frozen=True)
class TorusBox:
    """Periodic box [-side/2, side/2)^d."""

    dimension: int
    side: float

    def wrap(self, pts):
        return (pts + 0.5 * self.side) % self.side - 0.5 * self.side

    @property
    def volume(self):
        return self.side ** self.dimension

    def uniform(self, n, rng):
        return rng.uniform(-0.5 * self.side, 0.5 * self.side,
                           size=(n, self.dimension))


@dataclass(frozen=True)
class WindowBox:
    """Observation window [-window, window]^d inside a halo [-halo, halo]^d.

    Particles are simulated on the halo; any particle leaving the halo is
    dropped and counted, which biases window statistics by at most the
    declared influx error of the halo rule.
    """

    dimension: int
    window: float
    halo: float

    def __post_init__(self):
        if self.halo < self.window:
            raise ValueError("halo must contain the window")

    @property
    def volume(self):
        return (2.0 * self.halo) ** self.dimension

    def uniform(self, n, rng):
        return rng.uniform(-self.halo, self.halo, size=(n, self.dimension))

    def inside(self, pts):
        return np.all(np.abs(pts) <= self.halo, axis=1)


@dataclass
class Configuration:
    """Finite point set in a box; the state of one replica."""

    box: TorusBox | WindowBox
    points: np.ndarray
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(
            -1, self.box.dimension)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("configuration contains non-finite coordinates")

    def __len__(self):
        return self.points.shape[0]

    def count_in(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        inside = np.all((self.points >= lo) & (self.points < hi), axis=1)
        return int(inside.sum())


def halo_width(sampler: "JumpSampler", t, quantile=1.0 - 1e-4, safety=1.5,
               presample=100_000, seed=1234):
    """Halo margin from the pre-pass quantile of one-particle travel."""
    rng = np.random.default_rng(seed)
    pts = np.zeros((presample, sampler.kernel.dimension))
    moved = evolve_points(sampler, pts, t, rng)
    dist = np.linalg.norm(moved, axis=1)
    return float(np.quantile(dist, quantile)) * safety


class JumpSampler:
    """Displacement law a(.)/a0 with O(1) sampling in the jump loop.

    Separable kernels use one inverse-CDF table per axis; radial kernels use
    an inverse-CDF table for the radius plus a uniform direction.  Kernels
    that are neither (e.g. weakly asymmetric recombinations in d >= 2) fall
    back to rejection from a piecewise-constant envelope.
    """

    def __init__(self, kernel: JumpKernel, table_size=_TABLE_SIZE):
        self.kernel = kernel
        self.clock_rate = kernel.a0
        d = kernel.dimension
        self._mode = None
        if d == 1:
            self._axis_tables = [self._build_table(
                lambda x: kernel.evaluate(x[:, None]),
                center=float(kernel.centers[0]), table_size=table_size)]
            self._mode = "product"
        elif kernel._product_factors is not None:
            self._axis_tables = [
                self._build_table(f, center=float(c), table_size=table_size)
                for f, c in zip(kernel._product_factors, kernel.centers)]
            self._mode = "product"
        elif kernel._radial_profile is not None:
            prof = kernel._radial_profile
            self._radius_table = self._build_table(
                lambda r: np.where(r >= 0, r ** (d - 1) * prof(r), 0.0),
                center=0.0, lo=0.0, table_size=table_size)
            self._mode = "radial"
        else:
            self._build_envelope()
            self._mode = "rejection"

    @staticmethod
    def _build_table(density, center=0.0, lo=None, table_size=_TABLE_SIZE):
        # expand until the density mass outside is negligible
        half = 1.0
        for _ in range(40):
            a = center - half if lo is None else max(lo, center - half)
            xs = np.linspace(a, center + half, _FINE)
            pdf = np.maximum(np.asarray(density(xs), dtype=float), 0.0)
            interior = pdf[1:-1].sum()
            edge = pdf[0] + pdf[-1]
            if interior > 0 and edge <= 1e-13 * interior:
                break
            half *= 2.0
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]))])
        cdf /= cdf[-1]
        # drop flat segments (zero-density stretches) so the inverse never
        # maps u into regions outside the support
        keep = np.concatenate([[True], np.diff(cdf) > 0.0])
        u_knots = np.linspace(0.0, 1.0, table_size + 1)
        return np.interp(u_knots, cdf[keep], xs[keep])

    def _build_envelope(self):
        d = self.kernel.dimension
        half = 1.0
        while True:
            from .spectral import mass_outside_box
            if mass_outside_box(self.kernel, half) <= 1e-12 * self.kernel.a0:
                break
            half *= 2.0
            if half > 1e9:
                raise ValueError("no usable envelope box for this kernel")
        cells_per_axis = 64
        edges = np.linspace(-half, half, cells_per_axis + 1)
        probes = np.linspace(0.0, 1.0, 9)[1:-1]
        centers = (edges[:-1, None] + np.diff(edges)[:, None] * probes).ravel()
        mesh = np.meshgrid(*([centers] * d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = self.kernel.evaluate(pts).reshape((centers.size,) * d)
        shape = (cells_per_axis, len(probes)) * d
        per_cell = vals.reshape(shape)
        axes = tuple(2 * i + 1 for i in range(d))
        cellmax = per_cell.max(axis=axes) * 1.5 + 1e-300
        self._env_edges = edges
        self._env_max = cellmax
        weights = cellmax.ravel() * np.diff(edges)[0] ** d
        self._env_cdf = np.cumsum(weights) / weights.sum()

    def sample_displacements(self, n, rng):
        d = self.kernel.dimension
        if n == 0:
            return np.zeros((0, d))
        if self._mode == "product":
            out = np.empty((n, d))
            for i, table in enumerate(self._axis_tables):
                u = rng.random(n)
                idx = u * (table.size - 1)
                lo = np.floor(idx).astype(int)
                frac = idx - lo
                hi = np.minimum(lo + 1, table.size - 1)
                out[:, i] = table[lo] * (1 - frac) + table[hi] * frac
            return out
        if self._mode == "radial":
            table = self._radius_table
            u = rng.random(n)
            idx = u * (table.size - 1)
            lo = np.floor(idx).astype(int)
            frac = idx - lo
            hi = np.minimum(lo + 1, table.size - 1)
            radii = table[lo] * (1 - frac) + table[hi] * frac
            dirs = rng.standard_normal((n, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            return radii[:, None] * dirs
        return self._rejection_sample(n, rng)

    def _rejection_sample(self, n, rng):
        d = self.kernel.dimension
        edges = self._env_edges
        width = edges[1] - edges[0]
        cells = self._env_max.shape[0]
        out = np.empty((n, d))
        got = 0
        while got < n:
            m = max(2 * (n - got), 1024)
            flat = np.searchsorted(self._env_cdf, rng.random(m))
            idx = np.unravel_index(flat, self._env_max.shape)
            pts = np.stack([edges[i] + width * rng.random(m) for i in idx],
                           axis=-1)
            env = self._env_max[idx]
            accept = rng.random(m) * env <= self.kernel.evaluate(pts)
            take = min(int(accept.sum()), n - got)
            out[got:got + take] = pts[accept][:take]
            got += take
        return out


def evolve_points(sampler: JumpSampler, pts, t, rng, box=None):
    """Compound-Poisson move for an (n, d) block of particles."""
    pts = np.asarray(pts, dtype=float)
    n, d = pts.shape
    if t == 0 or n == 0:
        out = pts.copy()
    else:
        counts = rng.poisson(sampler.clock_rate * t, size=n)
        total = int(counts.sum())
        disp = sampler.sample_displacements(total, rng)
        sums = np.zeros((n, d))
        if total:
            starts = np.zeros(n, dtype=int)
            starts[1:] = np.cumsum(counts)[:-1]
            nz = counts > 0
            sums[nz] = np.add.reduceat(disp, starts[nz], axis=0)
        out = pts + sums
    if isinstance(box, TorusBox):
        out = box.wrap(out)
    return out


def evolve_particle(sampler: JumpSampler, x0, t, rng, box=None):
    """Move a single particle for time t; wraps on torus boxes."""
    pt = np.atleast_1d(np.asarray(x0, dtype=float))[None, :]
    return evolve_points(sampler, pt, t, rng, box=box)[0]


def evolve_configuration(cfg: Configuration, sampler: JumpSampler, t,
                         rng) -> Configuration:
    """Evolve every particle independently; drop halo leavers on windows."""
    moved = evolve_points(sampler, cfg.points, t, rng, box=cfg.box)
    flags = dict(cfg.flags)
    if isinstance(cfg.box, WindowBox):
        keep = cfg.box.inside(moved)
        dropped = int((~keep).sum())
        flags["dropped"] = flags.get("dropped", 0) + dropped
        moved = moved[keep]
    return Configuration(cfg.box, moved, flags)


def sample_poisson(z, box, rng, sup=None) -> Configuration:
    """Thinned Poisson configuration with intensity z on the box.

    z is a callable on (n, d) points (an IntensityProfile works); sup must
    dominate z on the box and defaults to z.sup_bound.  A zero-mass
    intensity yields an empty configuration flagged 'zero_mass'.
    """
    evaluate = z.evaluate if hasattr(z, "evaluate") else z
    if sup is None:
        sup = getattr(z, "sup_bound", None)
    if sup is None:
        raise ValueError("pass sup= for a bare callable intensity")
    if sup < 0:
        raise ValueError("intensity bound must be nonnegative")
    mean = sup * box.volume
    if mean == 0.0:
        return Configuration(box, np.zeros((0, box.dimension)),
                             {"zero_mass": True})
    n = rng.poisson(mean)
    pts = box.uniform(n, rng)
    if n:
        vals = np.asarray(evaluate(pts), dtype=float)
        keep = rng.random(n) * sup < vals
        pts = pts[keep]
    cfg = Configuration(box, pts)
    if len(cfg) == 0 and mean < 1e-12:
        cfg.flags["zero_mass"] = True
    return cfg


@dataclass(frozen=True)
class EnsembleRun:
    """Replica schedule: count, master seed, snapshot times."""

    replicas: int
    master_seed: int
    snapshot_times: tuple = ()

    def streams(self):
        seqs = np.random.SeedSequence(self.master_seed).spawn(self.replicas)
        return [np.random.default_rng(s) for s in seqs]


def run_poisson_ensemble(z, box, sampler: JumpSampler, run: EnsembleRun,
                         sup=None):
    """Snapshots of an evolved Poisson ensemble, keyed by snapshot time.

    Each replica evolves incrementally through the sorted snapshot times on
    its own generator stream.
    """
    times = sorted(run.snapshot_times)
    snapshots = {t: [] for t in times}
    for rng in run.streams():
        cfg = sample_poisson(z, box, rng, sup=sup)
        prev = 0.0
        for t in times:
            cfg = evolve_configuration(cfg, sampler, t - prev, rng)
            prev = t
            snapshots[t].append(cfg)
    return snapshots


def sample_gibbs_mcmc(potential, beta, z, box, rng, sweeps=None,
                      move_fractions=(0.4, 0.4, 0.2), move_scale=None,
                      sup=None, return_trace=False):
    """Grand-canonical Metropolis chain targeting the finite-box Gibbs law.

    Moves: birth (uniform location), death (uniform particle), translation
    (Gaussian displacement), mixed 40/40/20.  Free boundary: on a window box
    proposals outside are rejected; on a torus they wrap.  The stationary
    density w.r.t. the unit Poisson process is prod z(x_i) exp(-beta E).

    Raises UnstablePotential if a visited configuration's energy falls below
    -B |eta| for the potential's declared stability constant B.
    """
    evaluate_z = z.evaluate if hasattr(z, "evaluate") else z
    if sup is None:
        sup = getattr(z, "sup_bound", None)
    if sup is None:
        raise ValueError("pass sup= for a bare callable intensity")
    d = box.dimension
    expected = sup * box.volume
    if sweeps is None:
        sweeps = int(200 * max(1.0, expected))
    if move_scale is None:
        move_scale = 0.5 * getattr(potential, "interaction_range", 1.0)

    def pair_energy(x, others):
        if others.shape[0] == 0:
            return 0.0
        diff = x[None, :] - others
        if isinstance(box, TorusBox):
            diff = box.wrap(diff)
        return float(np.sum(potential.evaluate(diff)))

    def boltzmann(delta):
        if beta == 0.0:
            return 1.0
        if delta == np.inf:
            return 0.0
        return math.exp(-beta * delta)

    pts = np.zeros((0, d))
    total_energy = 0.0
    stability_b = getattr(potential, "stability_constant", 0.0)
    vol = box.volume
    trace = []
    p_birth, p_death, _ = move_fractions
    for step in range(sweeps):
        u = rng.random()
        n = pts.shape[0]
        if u < p_birth:
            x = box.uniform(1, rng)[0]
            delta = pair_energy(x, pts)
            zval = float(np.asarray(evaluate_z(x[None, :]))[0])
            ratio = zval * vol / (n + 1) * boltzmann(delta)
            if rng.random() < ratio:
                pts = np.vstack([pts, x[None, :]])
                total_energy += delta
        elif u < p_birth + p_death:
            if n > 0:
                i = rng.integers(n)
                others = np.delete(pts, i, axis=0)
                delta = pair_energy(pts[i], others)
                zval = float(np.asarray(evaluate_z(pts[i][None, :]))[0])
                ratio = n / (zval * vol) * boltzmann(-delta) if zval > 0 \
                    else np.inf
                if rng.random() < ratio:
                    pts = others
                    total_energy -= delta
        else:
            if n > 0:
                i = rng.integers(n)
                prop = pts[i] + move_scale * rng.standard_normal(d)
                if isinstance(box, TorusBox):
                    prop = box.wrap(prop[None, :])[0]
                    ok = True
                else:
                    ok = bool(np.all(np.abs(prop) <= box.halo))
                if ok:
                    others = np.delete(pts, i, axis=0)
                    e_old = pair_energy(pts[i], others)
                    e_new = pair_energy(prop, others)
                    z_old = float(np.asarray(evaluate_z(pts[i][None, :]))[0])
                    z_new = float(np.asarray(evaluate_z(prop[None, :]))[0])
                    if z_old > 0:
                        ratio = (z_new / z_old) * boltzmann(e_new - e_old)
                        if rng.random() < ratio:
                            pts = np.vstack([others, prop[None, :]])
                            total_energy += e_new - e_old
        if return_trace:
            trace.append(pts.shape[0])
        if step % 1024 == 0 and np.isfinite(total_energy):
            if total_energy < -stability_b * pts.shape[0] - 1e-9:
                raise UnstablePotential(
                    f"energy {total_energy:.4g} below stability line")
    cfg = Configuration(box, pts)
    if return_trace:
        cfg.flags["count_trace"] = np.asarray(trace)
        cfg.flags["count_autocorr"] = _integrated_autocorr(np.asarray(trace))
    return cfg


def _integrated_autocorr(trace, max_lag=200):
    x = trace - trace.mean()
    var = float(np.dot(x, x))
    if var == 0.0:
        return 0.0
    tau = 1.0
    for lag in range(1, min(max_lag, len(x) // 2)):
        rho = float(np.dot(x[:-lag], x[lag:])) / var
        if rho <= 0.05:
            break
        tau += 2.0 * rho
    return tau


def one_particle_path(sampler: JumpSampler, x0, horizon, rng):
    """Jump times and positions of one particle on [0, horizon]."""
    n = rng.poisson(sampler.clock_rate * horizon)
    times = np.sort(rng.uniform(0.0, horizon, size=n))
    disp = sampler.sample_displacements(n, rng)
    positions = np.vstack([x0[None, :], x0[None, :] + np.cumsum(disp, axis=0)]) \
        if n else x0[None, :].copy()
    return times, positions


def _path_integral(times, positions, breaks, funcs):
    """Exact integral of the piecewise phi(t, X_t) along a cadlag path."""
    total = 0.0
    events = np.concatenate([[0.0], times])
    for j in range(len(funcs)):
        t0, t1 = breaks[j], breaks[j + 1]
        idx = np.searchsorted(events, t0, side="right") - 1
        t = t0
        while t < t1:
            nxt = events[idx + 1] if idx + 1 < len(events) else np.inf
            seg_end = min(nxt, t1)
            val = float(np.asarray(funcs[j](positions[idx][None, :]))[0])
            total += (seg_end - t) * val
            t = seg_end
            idx += 1
    return total


def path_laplace_mc(z, kernel, breaks, funcs, replicas, master_seed, box,
                    cells=128, inner_samples=400, sup=None):
    """Laplace transform of the path field two ways.

    Route one: full-ensemble Monte Carlo of exp(-int <phi(t,.), X_t> dt).
    Route two: the product formula exp(int (E_x[e^{-int phi(t, X_t) dt}] - 1)
    z(x) dx) with the inner expectation estimated per quadrature cell.
    Returns a dict with both estimates and their standard errors.
    """
    sampler = JumpSampler(kernel)
    horizon = breaks[-1]
    seqs = np.random.SeedSequence(master_seed).spawn(replicas + 1)
    vals = np.empty(replicas)
    for r in range(replicas):
        rng = np.random.default_rng(seqs[r])
        cfg = sample_poisson(z, box, rng, sup=sup)
        total = 0.0
        for x0 in cfg.points:
            times, positions = one_particle_path(sampler, x0, horizon, rng)
            if isinstance(cfg.box, TorusBox):
                positions = cfg.box.wrap(positions)
            total += _path_integral(times, positions, breaks, funcs)
        vals[r] = math.exp(-total)
    est1 = float(vals.mean())
    se1 = float(vals.std(ddof=1) / math.sqrt(replicas))

    rng = np.random.default_rng(seqs[-1])
    evaluate_z = z.evaluate if hasattr(z, "evaluate") else z
    if isinstance(box, TorusBox):
        lo, hi = -0.5 * box.side, 0.5 * box.side
    else:
        lo, hi = -box.halo, box.halo
    edges = np.linspace(lo, hi, cells + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    exponent = 0.0
    var_exp = 0.0
    for xc in centers:
        x0 = np.full(box.dimension, xc)
        zval = float(np.asarray(evaluate_z(x0[None, :]))[0])
        if zval == 0.0:
            continue
        samples = np.empty(inner_samples)
        for m in range(inner_samples):
            times, positions = one_particle_path(sampler, x0, horizon, rng)
            if isinstance(box, TorusBox):
                positions = box.wrap(positions)
            samples[m] = math.exp(
                -_path_integral(times, positions, breaks, funcs))
        cell_weight = zval * width ** box.dimension
        exponent += cell_weight * (samples.mean() - 1.0)
        var_exp += (cell_weight ** 2) * samples.var(ddof=1) / inner_samples
    est2 = math.exp(exponent)
    se2 = est2 * math.sqrt(var_exp)
    return {"ensemble": (est1, se1), "product_formula": (est2, se2)}
