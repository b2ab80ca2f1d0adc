"""Truncated cluster expansion for pair potentials at high temperature.

Connected-graph weights k(xi) = sum over connected graphs of products of
pair factors exp(-beta V) - 1, with the tree-graph bound as a certified
ceiling.  Truncated coefficients always come with a rigorous geometric
tail budget, finite exactly inside the high-temperature low-activity
region sup(z) e^(2 beta B + 1) C(beta) < 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import MayerIntegralDiverges, OutsideRegime, TooManyVertices
from .quadrature import expanding_integral, _panel_nodes_weights

_MAX_VERTICES = 4


@dataclass(frozen=True)
class PairPotential:
    """Symmetric pair potential, possibly hard-core (+inf inside a core)."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    dimension: int = 1
    stability_constant: float = 0.0
    name: str = "custom"
    breakpoints: tuple = ()
    hard_core: float | None = None

    def evaluate(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return np.asarray(self.evaluator(pts), dtype=float)

    @property
    def interaction_range(self):
        return self.effective_range(1.0)

    def effective_range(self, beta, floor=1e-12):
        """Radius beyond which |exp(-beta V) - 1| < floor."""
        if beta == 0.0:
            return self.hard_core or 1.0
        radii = np.geomspace(1e-3, 1e4, 4000)
        pts = radii[:, None] * np.ones(self.dimension)[None, :] \
            / math.sqrt(self.dimension)
        f = mayer_f(self, beta, pts)
        alive = np.nonzero(np.abs(f) >= floor)[0]
        if alive.size == 0:
            return self.hard_core or 1e-3
        return float(radii[alive[-1]]) * 1.05


def mayer_f(potential: PairPotential, beta, pts):
    """exp(-beta V) - 1, with the hard-core convention 0 * inf = 0."""
    v = potential.evaluate(pts)
    if beta == 0.0:
        return np.zeros_like(v)
    with np.errstate(over="ignore"):
        out = np.expm1(-beta * v)
    return np.where(np.isinf(v), -1.0, out)


def hard_rods(radius=0.25, dimension=1):
    """Hard-core exclusion: V = +inf on |x| < radius, else 0."""
    r = float(radius)

    def evaluator(p):
        dist = np.linalg.norm(p, axis=-1)
        return np.where(dist < r, np.inf, 0.0)

    return PairPotential(evaluator, dimension=dimension,
                         stability_constant=0.0, name="hard-rods",
                         breakpoints=(-r, r), hard_core=r)


def gaussian_repulsion(amplitude=1.0, width=1.0, dimension=1):
    """Bounded repulsion V = A exp(-|x|^2 / w^2) >= 0."""
    def evaluator(p):
        return amplitude * np.exp(-np.sum(p * p, axis=-1) / width ** 2)

    return PairPotential(evaluator, dimension=dimension,
                         stability_constant=0.0,
                         name="gaussian-repulsion")


POTENTIAL_BUILDERS = {
    "hard-rods": hard_rods,
    "gaussian-repulsion": gaussian_repulsion,
}


def build_potential(name, **params):
    try:
        builder = POTENTIAL_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown potential '{name}'; "
                         f"available: {sorted(POTENTIAL_BUILDERS)}") from None
    return builder(**params)


# -- graph enumeration --------------------------------------------------------


def _is_connected(n, edges):
    if n == 1:
        return True
    adj = {i: set() for i in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


@lru_cache(maxsize=None)
def connected_graphs(n):
    """All connected labeled graphs on n vertices as edge tuples; n <= 4."""
    if n > _MAX_VERTICES:
        raise TooManyVertices(f"graph enumeration capped at {_MAX_VERTICES}")
    all_edges = list(itertools.combinations(range(n), 2))
    graphs = []
    for mask in range(1 << len(all_edges)):
        edges = tuple(e for b, e in enumerate(all_edges) if mask >> b & 1)
        if _is_connected(n, edges):
            graphs.append(edges)
    return tuple(graphs)


@lru_cache(maxsize=None)
def spanning_trees(n):
    """All labeled trees on n vertices (n^(n-2) of them); n <= 4."""
    return tuple(g for g in connected_graphs(n) if len(g) == n - 1)


@dataclass(frozen=True)
class GraphSet:
    vertices: int
    connected: tuple
    trees: tuple


def graph_set(n) -> GraphSet:
    return GraphSet(n, connected_graphs(n), spanning_trees(n))


# -- connectivity weights -----------------------------------------------------


def _pair_factors(points, beta, potential):
    """f values for every vertex pair; points has shape (..., m, d)."""
    m = points.shape[-2]
    pairs = list(itertools.combinations(range(m), 2))
    facs = {}
    for i, j in pairs:
        facs[(i, j)] = mayer_f(potential, beta,
                               points[..., i, :] - points[..., j, :])
    return facs


def connectivity_weight(xi, beta, potential: PairPotential):
    """k(xi): connected-graph sum of Mayer-factor products; |xi| <= 4."""
    pts = np.asarray(xi, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    batch = pts.ndim == 3
    if not batch:
        pts = pts[None, :, :]
    m = pts.shape[-2]
    if m > _MAX_VERTICES:
        raise TooManyVertices(f"|xi| capped at {_MAX_VERTICES}")
    facs = _pair_factors(pts, beta, potential)
    total = np.zeros(pts.shape[0])
    for graph in connected_graphs(m):
        term = np.ones(pts.shape[0])
        for e in graph:
            term = term * facs[e]
        total += term
    return total if batch else float(total[0])


def tree_bound_check(xi, beta, potential: PairPotential):
    """|k(xi)| against the tree-graph ceiling; returns (|k|, bound, pass)."""
    pts = np.asarray(xi, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = pts.shape[0]
    if m > _MAX_VERTICES:
        raise TooManyVertices(f"|xi| capped at {_MAX_VERTICES}")
    k = abs(connectivity_weight(pts, beta, potential))
    facs = _pair_factors(pts[None, :, :], beta, potential)
    bound = 0.0
    for tree in spanning_trees(m):
        term = 1.0
        for e in tree:
            term *= abs(float(facs[e][0]))
        bound += term
    bound *= math.exp(2.0 * beta * potential.stability_constant * m)
    return k, bound, k <= bound * (1.0 + 1e-12) + 1e-300


# -- Mayer integral and regime check ------------------------------------------


def mayer_integral(potential: PairPotential, beta) -> float:
    """C(beta) = int |exp(-beta V(x)) - 1| dx."""
    if beta == 0.0:
        return 0.0
    d = potential.dimension
    if potential.name == "hard-rods" and potential.hard_core is not None:
        r = potential.hard_core
        ball = {1: 2.0 * r, 2: math.pi * r * r,
                3: 4.0 / 3.0 * math.pi * r ** 3}[d]
        return ball
    try:
        return expanding_integral(
            lambda p: np.abs(mayer_f(potential, beta, p)), d, rtol=1e-10,
            breakpoints=potential.breakpoints,
            diverges=MayerIntegralDiverges)
    except MayerIntegralDiverges:
        raise
    except Exception as exc:
        raise MayerIntegralDiverges(str(exc)) from exc


def high_temp_check(z_sup, beta, potential: PairPotential):
    """(value, pass) for the smallness condition sup z e^(2 beta B + 1) C."""
    c_beta = mayer_integral(potential, beta)
    b = potential.stability_constant
    value = z_sup * math.exp(2.0 * beta * b + 1.0) * c_beta
    return value, value < 1.0


# -- truncated coefficients ---------------------------------------------------


def _cluster_nodes(anchors, order, potential, beta, points_per_panel=24):
    """Per-variable quadrature nodes/weights covering the connected range.

    Panel edges sit on anchor +- k * (core radius and effective range), so
    hard-core discontinuities in the single-hop factors are never straddled.
    """
    reach = order * potential.effective_range(beta)
    lo = anchors.min() - reach
    hi = anchors.max() + reach
    spans = {potential.effective_range(beta)}
    if potential.hard_core is not None:
        spans.add(potential.hard_core)
    spans.update(abs(b) for b in potential.breakpoints if b)
    marks = {a + s * k * span
             for a in anchors for k in range(order + 1)
             for s in (-1, 1) for span in spans}
    edges = [lo] + [m for m in sorted(marks) if lo < m < hi] + [hi]
    return _panel_nodes_weights(np.array(sorted(set(edges))),
                                points_per_panel)


def truncation_budget(eta_size, z_sup, beta, potential, order, max_terms=400):
    """Geometric tail of the expansion beyond the truncation order.

    Term n is bounded by (1/n!) m^(m-2) e^(2 beta B m) (sup z C(beta))^n with
    m = n + |eta| vertices; the sum converges inside the regime and is
    reported as +inf outside it.
    """
    c_beta = mayer_integral(potential, beta)
    b = potential.stability_constant
    x = z_sup * math.exp(2.0 * beta * b + 1.0) * c_beta
    if x >= 1.0:
        return math.inf
    total = 0.0
    for n in range(order + 1, max_terms):
        m = n + eta_size
        log_term = -math.lgamma(n + 1) + (m - 2) * math.log(m) \
            + 2.0 * beta * b * m + n * math.log(max(z_sup * c_beta, 1e-300))
        term = math.exp(log_term)
        total += term
        if term < 1e-16 * max(total, 1e-300):
            break
    return total


def ursell_truncated(z, beta, potential: PairPotential, eta, order):
    """Truncated cluster coefficient u(eta) with its tail budget; d = 1.

    z is an intensity profile or callable; eta holds one or two anchor
    points.  Raises OutsideRegime when the high-temperature condition fails
    (the budget would be infinite) and TooManyVertices past the graph cap.
    """
    evaluate_z = z.evaluate if hasattr(z, "evaluate") else z
    z_sup = getattr(z, "sup_bound", None)
    if z_sup is None:
        probes = np.linspace(-50, 50, 20001)[:, None]
        z_sup = float(np.asarray(evaluate_z(probes)).max())
    anchors = np.atleast_1d(np.asarray(eta, dtype=float)).reshape(-1)
    h = anchors.size
    if h > 2:
        raise TooManyVertices("coefficients implemented for |eta| <= 2")
    if h + order > _MAX_VERTICES:
        raise TooManyVertices(
            f"|eta| + order must stay within {_MAX_VERTICES} vertices")
    value_ok, regime_pass = high_temp_check(z_sup, beta, potential)
    if not regime_pass:
        raise OutsideRegime(
            f"high-temperature value {value_ok:.4g} >= 1; budget infinite")

    prefactor = float(np.prod(np.asarray(
        evaluate_z(anchors[:, None]), dtype=float)))
    total = connectivity_weight(anchors[:, None], beta, potential)
    if order >= 1:
        nodes, weights = _cluster_nodes(anchors, order, potential, beta)
        zw = np.asarray(evaluate_z(nodes[:, None]), dtype=float) * weights
        for n in range(1, order + 1):
            idx = [np.arange(nodes.size)] * n
            mesh = np.meshgrid(*idx, indexing="ij")
            flat = [m.ravel() for m in mesh]
            m_pts = anchors.size + n
            pts = np.empty((flat[0].size, m_pts, 1))
            pts[:, :anchors.size, 0] = anchors[None, :]
            wprod = np.ones(flat[0].size)
            for v in range(n):
                pts[:, anchors.size + v, 0] = nodes[flat[v]]
                wprod *= zw[flat[v]]
            kvals = connectivity_weight(pts, beta, potential)
            total += float(kvals @ wprod) / math.factorial(n)
    value = prefactor * total
    budget = prefactor * truncation_budget(h, z_sup, beta, potential, order)
    return value, budget


@dataclass(frozen=True)
class UrsellTable:
    """Truncated cluster coefficients for one (potential, beta, z) triple.

    singletons maps probe points x to (u({x}), budget); pairs maps (x, y)
    to (u({x, y}), budget); density_series holds the constant-activity
    equilibrium density by truncation order.
    """

    beta: float
    order: int
    singletons: dict
    pairs: dict
    density_series: tuple


def build_ursell_table(z, beta, potential: PairPotential, x_probes,
                       pair_offsets=(), order=2) -> UrsellTable:
    """Evaluate truncated coefficients on probe grids, budgets included."""
    singles = {float(x): ursell_truncated(z, beta, potential, [x], order)
               for x in x_probes}
    pair_order = min(order, _MAX_VERTICES - 2)
    pairs = {}
    for x in x_probes:
        for dy in pair_offsets:
            pairs[(float(x), float(x + dy))] = ursell_truncated(
                z, beta, potential, [x, x + dy], pair_order)
    sup = getattr(z, "sup_bound")
    series = tuple(rho_equi(sup, beta, potential, order=n)
                   for n in range(order + 1))
    return UrsellTable(beta=beta, order=order, singletons=singles,
                       pairs=pairs, density_series=series)


def rho_equi(activity, beta, potential: PairPotential, order=2):
    """Truncated equilibrium density at constant activity, with budget."""
    if activity == 0.0:
        return 0.0, 0.0

    class _Const:
        sup_bound = float(activity)

        @staticmethod
        def evaluate(p):
            return np.full(np.asarray(p).shape[0], float(activity))

    return ursell_truncated(_Const, beta, potential, [0.0], order)


def scaling_limit_check(z, beta, potential: PairPotential, eps_ladder,
                        x_probes, order=1):
    """|u_(mu_eps)({x/eps}) - rho_equi at z(x)| along the eps ladder.

    The scaled coefficient evaluates the cluster integrals with activity
    z(eps y + x), which freezes to the constant z(x) as eps -> 0.  Returns
    rows of (eps, x, scaled value, limit value, deviation).
    """
    evaluate_z = z.evaluate if hasattr(z, "evaluate") else z
    sup = getattr(z, "sup_bound")
    rows = []
    for x in x_probes:
        limit, budget = rho_equi(float(np.asarray(
            evaluate_z(np.array([[x]])))[0]), beta, potential, order)
        for eps in eps_ladder:
            class _Scaled:
                sup_bound = sup

                @staticmethod
                def evaluate(p, _eps=eps, _x=x):
                    return evaluate_z(np.asarray(p) * _eps + _x)

            val, _ = ursell_truncated(_Scaled, beta, potential, [0.0], order)
            rows.append({"eps": eps, "x": x, "value": val, "limit": limit,
                         "deviation": abs(val - limit), "budget": budget})
    return rows
