"""Jump-rate kernels and the scalar/vector/matrix quantities derived from them.

A kernel is a nonnegative integrable rate density on R^d with a declared
power-law tail bound tail_constant / (1 + |y|)^alpha, alpha > 2d.  The total
mass, first-moment vector and second-moment matrix drive everything else:
the spectral multiplier, the jump sampler's clock rate and displacement law,
and the transport/diffusion coefficients of the scaling limits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import MomentDiverges, NegativeKernel, NonIntegrable
from .quadrature import as_points, expanding_integral, integrate_panels_1d, \
    geometric_edges

_SPHERE_SURFACE = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


def _tail_bound(constant, alpha, d, power=0):
    """Bound on int_{|y|>R} |y|^power * C (1+|y|)^-alpha dy, or None."""
    if alpha - power <= d:
        return None
    surf = _SPHERE_SURFACE[d]

    def bound(radius):
        return surf * constant * (1.0 + radius) ** (d + power - alpha) \
            / (alpha - d - power)

    return bound


class JumpKernel:
    """Immutable jump-rate function with cached mass and moments.

    Use :func:`build_kernel` or the catalog constructors; the constructor
    validates nonnegativity and the declared tail bound on probe points and
    computes the total mass eagerly.  Moments are computed at build time too
    when they converge; accessing a divergent moment raises MomentDiverges.
    """

    def __init__(self, dimension, evaluator, alpha, tail_constant, *,
                 name="custom", params=None, product_factors=None,
                 radial_profile=None, centers=None, support_radius=None):
        if dimension not in (1, 2, 3):
            raise ValueError("kernels support d in {1, 2, 3}")
        if alpha <= 2 * dimension:
            raise ValueError(f"alpha must exceed 2d = {2 * dimension}")
        if tail_constant <= 0:
            raise ValueError("tail constant must be positive")
        self.dimension = int(dimension)
        self.alpha = float(alpha)
        self.tail_constant = float(tail_constant)
        self.name = name
        self.params = dict(params or {})
        self._evaluator = evaluator
        self._product_factors = product_factors
        self._radial_profile = radial_profile
        self.centers = np.zeros(dimension) if centers is None \
            else np.asarray(centers, dtype=float)
        self.support_radius = support_radius
        self._validate_probes()
        self.a0 = self._compute_mass()
        self._a1, self._a1_err = self._try(self._compute_first_moment)
        self._a2, self._a2_err = self._try(self._compute_second_moment)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, points):
        pts = as_points(points, self.dimension)
        vals = np.asarray(self._evaluator(pts), dtype=float)
        return vals.reshape(pts.shape[0])

    def __call__(self, points):
        return self.evaluate(points)

    @property
    def first_moment(self):
        if self._a1_err is not None:
            raise self._a1_err
        return self._a1

    @property
    def second_moment(self):
        if self._a2_err is not None:
            raise self._a2_err
        return self._a2

    def is_even(self, probes=512, seed=7):
        rng = np.random.default_rng(seed)
        pts = rng.normal(scale=3.0, size=(probes, self.dimension))
        return bool(np.allclose(self.evaluate(pts), self.evaluate(-pts),
                                rtol=1e-9, atol=1e-12))

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def _try(fn):
        try:
            return fn(), None
        except MomentDiverges as exc:
            return None, exc

    def _validate_probes(self):
        d = self.dimension
        radii = np.concatenate([np.linspace(0.0, 4.0, 201),
                                np.geomspace(4.0, 1e4, 120)])
        rng = np.random.default_rng(11)
        dirs = rng.standard_normal((64, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, d)
        vals = self.evaluate(pts)
        if np.any(vals < 0.0):
            worst = pts[int(np.argmin(vals))]
            raise NegativeKernel(f"rate negative at {worst}")
        bound = self.tail_constant / (1.0 + np.linalg.norm(pts, axis=1)) \
            ** self.alpha
        if np.any(vals > bound * (1.0 + 1e-9) + 1e-300):
            worst = pts[int(np.argmax(vals - bound))]
            raise NonIntegrable(f"declared tail bound violated at {worst}")

    def _axis_integral(self, weight_power, axis):
        """1d integral of x^p * f_axis(x) for product kernels."""
        f = self._product_factors[axis]

        def g(x):
            return x ** weight_power * np.asarray(f(x), dtype=float)

        edges = geometric_edges(1 << 14, breakpoints=(self.centers[axis],))
        val, _ = integrate_panels_1d(g, edges, rtol=1e-11)
        return val

    def _radial_integral(self, extra_power):
        """int_0^inf r^(d-1+extra) g(r) dr for radial kernels."""
        g = self._radial_profile
        p = self.dimension - 1 + extra_power

        def h(r):
            return np.abs(r) ** p * np.asarray(g(np.abs(r)), dtype=float)

        radius = self.support_radius or (1 << 10)
        edges = geometric_edges(radius)
        edges = edges[edges >= 0.0]
        if edges[0] > 0.0:
            edges = np.concatenate([[0.0], edges])
        val, _ = integrate_panels_1d(h, edges, rtol=1e-11)
        if self.support_radius is None:
            # Cauchy check on dyadic extensions of the radial range
            r = float(edges[-1])
            for _ in range(44):
                ext, _ = integrate_panels_1d(h, np.array([r, 2 * r]),
                                             rtol=1e-9)
                if abs(ext) <= 1e-11 * max(abs(val), 1e-300):
                    break
                val += ext
                r *= 2.0
            else:
                raise MomentDiverges(
                    f"radial moment power {extra_power} not Cauchy")
        return val

    def _compute_mass(self):
        d = self.dimension
        if self._product_factors is not None:
            mass = float(np.prod([self._axis_integral(0, i)
                                  for i in range(d)]))
        elif self._radial_profile is not None:
            mass = _SPHERE_SURFACE[d] * self._radial_integral(0)
        else:
            mass = expanding_integral(
                self.evaluate, d, rtol=1e-10,
                tail_bound=_tail_bound(self.tail_constant, self.alpha, d),
                centers=self.centers, diverges=NonIntegrable)
        if mass <= 1e-12:
            raise NonIntegrable("degenerate kernel: total mass is zero")
        return mass

    def _compute_first_moment(self):
        d = self.dimension
        if self._radial_profile is not None:
            return np.zeros(d)
        if self._product_factors is not None:
            m0 = [self._axis_integral(0, i) for i in range(d)]
            m1 = [self._axis_integral(1, i) for i in range(d)]
            total = float(np.prod(m0))
            return np.array([m1[i] / m0[i] * total for i in range(d)])
        out = np.empty(d)
        tail = _tail_bound(self.tail_constant, self.alpha, d, power=1)
        for i in range(d):
            out[i] = expanding_integral(
                lambda p, i=i: p[:, i] * self.evaluate(p), d, rtol=1e-10,
                tail_bound=tail, centers=self.centers,
                diverges=MomentDiverges)
        return out

    def _compute_second_moment(self):
        d = self.dimension
        if self._radial_profile is not None:
            second = _SPHERE_SURFACE[d] * self._radial_integral(2)
            if self.support_radius is None and self.alpha <= d + 2:
                raise MomentDiverges("second moment diverges for this tail")
            return np.eye(d) * (second / d)
        if self._product_factors is not None:
            m0 = [self._axis_integral(0, i) for i in range(d)]
            m1 = [self._axis_integral(1, i) for i in range(d)]
            m2 = [self._axis_integral(2, i) for i in range(d)]
            total = float(np.prod(m0))
            out = np.empty((d, d))
            for i in range(d):
                for j in range(d):
                    if i == j:
                        out[i, i] = m2[i] / m0[i] * total
                    else:
                        out[i, j] = m1[i] * m1[j] / (m0[i] * m0[j]) * total
            return out
        tail = _tail_bound(self.tail_constant, self.alpha, d, power=2)
        out = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                val = expanding_integral(
                    lambda p, i=i, j=j: p[:, i] * p[:, j] * self.evaluate(p),
                    d, rtol=1e-10, tail_bound=tail, centers=self.centers,
                    diverges=MomentDiverges)
                out[i, j] = out[j, i] = val
        return out


@dataclass(frozen=True)
class ParitySplit:
    """Even/odd decomposition a = p + q with the epsilon-scaled recombination."""

    parent: JumpKernel
    even: JumpKernel
    odd: Callable[[np.ndarray], np.ndarray]

    def scaled(self, eps):
        """Kernel p + eps*q; equals the parent at eps = 1."""
        return weak_asymmetry(self.parent, eps)


# -- module-level operations -------------------------------------------------


def total_mass(kernel: JumpKernel) -> float:
    return kernel.a0


def moments(kernel: JumpKernel):
    """First-moment vector and second-moment matrix.

    Raises MomentDiverges when the corresponding shell sums fail the Cauchy
    criterion; the second-moment matrix is validated symmetric PSD.
    """
    a1 = kernel.first_moment
    a2 = kernel.second_moment
    eigs = np.linalg.eigvalsh(a2)
    if eigs.min() < -1e-9 * max(eigs.max(), 1.0):
        raise NonIntegrable("second-moment matrix not PSD")
    return a1, a2


def parity_split(kernel: JumpKernel) -> ParitySplit:
    ev = kernel.evaluate

    def even_eval(p):
        return 0.5 * (ev(p) + ev(-np.asarray(p, dtype=float)))

    def odd_eval(p):
        return 0.5 * (ev(p) - ev(-np.asarray(p, dtype=float)))

    even = JumpKernel(kernel.dimension, even_eval, kernel.alpha,
                      kernel.tail_constant, name=f"{kernel.name}-even",
                      centers=np.concatenate([kernel.centers,
                                              -kernel.centers]))
    return ParitySplit(parent=kernel, even=even, odd=odd_eval)


def weak_asymmetry(kernel: JumpKernel, eps: float) -> JumpKernel:
    """Kernel p + eps*q where p, q are the even and odd parts of the rate."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    ev = kernel.evaluate

    def scaled_eval(p):
        pm = -np.asarray(p, dtype=float)
        return 0.5 * ((1.0 + eps) * ev(p) + (1.0 - eps) * ev(pm))

    return JumpKernel(kernel.dimension, scaled_eval, kernel.alpha,
                      kernel.tail_constant,
                      name=f"{kernel.name}-weak[{eps}]",
                      params={**kernel.params, "eps": eps},
                      centers=np.concatenate([kernel.centers,
                                              -kernel.centers]))


def fourier_symbol(kernel: JumpKernel, k) -> complex:
    """Symbol of the one-particle generator: int (e^{-i<x,k>} - 1) a(x) dx.

    The real part is <= 0 everywhere, with equality only at k = 0; the
    semigroup multiplier at time t is exp(t * symbol).
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.shape != (kernel.dimension,):
        raise ValueError(f"k must have shape ({kernel.dimension},)")
    if np.allclose(k, 0.0):
        return complex(0.0)

    def re_part(p):
        return (np.cos(p @ k) - 1.0) * kernel.evaluate(p)

    def im_part(p):
        return -np.sin(p @ k) * kernel.evaluate(p)

    d = kernel.dimension
    tail = _tail_bound(2.0 * kernel.tail_constant, kernel.alpha, d)
    re = expanding_integral(re_part, d, rtol=1e-9, tail_bound=tail,
                            centers=kernel.centers, diverges=NonIntegrable)
    im = expanding_integral(im_part, d, rtol=1e-9, tail_bound=tail,
                            centers=kernel.centers, diverges=NonIntegrable)
    return complex(re, im)


# -- built-in catalog --------------------------------------------------------


def gaussian_kernel(dimension=1, width=1.0, center=None):
    """Rate exp(-|x - c|^2 / w^2); separable across axes."""
    d = int(dimension)
    w = float(width)
    c = np.zeros(d) if center is None else np.atleast_1d(
        np.asarray(center, dtype=float))
    if c.shape != (d,):
        raise ValueError("center must match the dimension")

    def evaluator(p):
        return np.exp(-np.sum((p - c) ** 2, axis=-1) / w ** 2)

    factors = [(lambda x, ci=ci: np.exp(-(x - ci) ** 2 / w ** 2)) for ci in c]
    alpha = 2 * d + 2.0
    const = _sup_tail_constant(lambda r: np.exp(-np.maximum(
        r - np.linalg.norm(c), 0.0) ** 2 / w ** 2), alpha)
    return JumpKernel(d, evaluator, alpha, const, name="gaussian",
                      params={"width": w, "center": c.tolist()},
                      product_factors=factors, centers=c)


def bump_kernel(dimension=1, radius=1.0, height=1.0):
    """Compactly supported C-infinity bump h * exp(-u^2/(1-u^2)), u = |x|/r."""
    d = int(dimension)
    r = float(radius)
    h = float(height)

    def profile(s):
        s = np.asarray(s, dtype=float)
        u2 = np.clip((s / r) ** 2, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            vals = h * np.exp(-u2 / np.maximum(1.0 - u2, 1e-300))
        return np.where(u2 >= 1.0, 0.0, vals)

    def evaluator(p):
        return profile(np.linalg.norm(p, axis=-1))

    alpha = 2 * d + 2.0
    const = h * (1.0 + r) ** alpha
    return JumpKernel(d, evaluator, alpha, const, name="bump",
                      params={"radius": r, "height": h},
                      radial_profile=profile, support_radius=r)


def power_law_kernel(dimension=1, alpha=3.0, scale=1.0):
    """Heavy-tailed rate s / (1 + |y|)^alpha; needs alpha > 2d."""
    d = int(dimension)
    if alpha <= 2 * d:
        raise ValueError("power-law kernel needs alpha > 2d")

    def profile(s):
        return scale / (1.0 + np.asarray(s, dtype=float)) ** alpha

    def evaluator(p):
        return profile(np.linalg.norm(p, axis=-1))

    return JumpKernel(d, evaluator, alpha, scale * 1.0000001,
                      name="power-law", params={"alpha": alpha,
                                                "scale": scale},
                      radial_profile=profile)


def _sup_tail_constant(radial_majorant, alpha):
    r = np.concatenate([np.linspace(0.0, 50.0, 20001),
                        np.geomspace(50.0, 1e6, 2000)])
    vals = radial_majorant(r) * (1.0 + r) ** alpha
    return float(vals.max()) * (1.0 + 1e-6)


KERNEL_BUILDERS = {
    "gaussian": gaussian_kernel,
    "bump": bump_kernel,
    "power-law": power_law_kernel,
}


def build_kernel(name, dimension=1, **params):
    """Construct a catalog kernel by name."""
    try:
        builder = KERNEL_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown kernel '{name}'; "
                         f"available: {sorted(KERNEL_BUILDERS)}") from None
    return builder(dimension=dimension, **params)
