"""Adaptive panel quadrature on expanding boxes.

The integration scheme used throughout the package: composite Simpson rule on
geometrically spaced panels, refined by doubling the points per panel, with
the integration box doubled until the shell contributions pass a Cauchy test
and the declared tail bound is negligible.  Panel edges can be pinned to
breakpoints of the integrand (kinks, jumps, support edges) so the Simpson
rule never straddles a discontinuity.
"""

from __future__ import annotations

import numpy as np

from .errors import QuadratureFailure

_M_START = 16
_M_MAX = 1 << 14


def as_points(x, d):
    """Coerce input to an (n, d) float array of points."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1 and d == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"expected points of shape (n, {d}), got {arr.shape}")
    return arr


def geometric_edges(radius, inner=1.0, breakpoints=(), center=0.0):
    """Symmetric panel edges on [center-radius, center+radius].

    Edges are geometric away from the center (inner, 2*inner, 4*inner, ...)
    so slowly decaying tails cost only O(log radius) panels.  Declared
    breakpoints inside the interval are inserted as extra edges.
    """
    radius = float(radius)
    if radius <= 0:
        raise ValueError("radius must be positive")
    pos = [0.0]
    r = min(inner, radius)
    while r < radius:
        pos.append(r)
        r *= 2.0
    pos.append(radius)
    edges = sorted({center + s * p for p in pos for s in (-1.0, 1.0)})
    lo, hi = center - radius, center + radius
    for b in breakpoints:
        if lo < b < hi:
            edges.append(float(b))
    edges = np.array(sorted(set(edges)))
    return edges


_GAUSS_CACHE = {}
_GAUSS_ORDER_CAP = 256


def _split_edges(edges):
    edges = np.asarray(edges, dtype=float)
    mids = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(edges.size + mids.size)
    out[0::2] = edges
    out[1::2] = mids
    return out


def _panel_nodes_weights(edges, m):
    """Flattened Gauss-Legendre nodes/weights of order m for all panels.

    Gauss nodes are interior to each panel, so integrands with jumps at the
    panel edges are handled exactly.  Orders beyond the cap are realized by
    splitting every panel in half instead of raising the rule order, which
    keeps the leggauss setup cost bounded.
    """
    while m > _GAUSS_ORDER_CAP:
        edges = _split_edges(edges)
        m //= 2
    if m not in _GAUSS_CACHE:
        _GAUSS_CACHE[m] = np.polynomial.legendre.leggauss(m)
    x, w = _GAUSS_CACHE[m]
    edges = np.asarray(edges, dtype=float)
    h = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = mid[:, None] + 0.5 * h[:, None] * x[None, :]
    weights = 0.5 * h[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def integrate_panels_1d(f, edges, rtol=1e-10, m_max=_M_MAX):
    """Integrate f over the panels; returns (value, abs_value).

    f maps an (n,) array to values.  Convergence is judged on the signed
    value relative to the absolute integral, which itself serves only as a
    scale (and, for expanding boxes, as the divergence detector), so it is
    not refined to full precision.
    """
    prev = None
    m = _M_START
    while m <= m_max:
        nodes, weights = _panel_nodes_weights(edges, m)
        vals = np.asarray(f(nodes), dtype=float)
        value = float(weights @ vals)
        abs_value = float(weights @ np.abs(vals))
        if prev is not None:
            scale = max(abs_value, 1e-300)
            if abs(value - prev) <= rtol * scale:
                return value, abs_value
        prev = value
        m *= 2
    raise QuadratureFailure(f"panel refinement exhausted at m={m_max}")


def integrate_box(f, d, radius, rtol=1e-10, breakpoints=(), inner=1.0,
                  centers=None, m_max=None):
    """Integrate f over the box [-radius, radius]^d; returns (value, abs_value).

    f maps (n, d) points to values.  `centers`, when given, adds per-axis
    panel refinement around off-origin features (e.g. a shifted kernel).
    In d >= 2 the rule is the tensor product of the 1d panel rules.
    """
    if m_max is None:
        m_max = _M_MAX if d == 1 else (1 << 8 if d == 2 else 1 << 5)
    extra = list(breakpoints)
    if centers is not None:
        extra.extend(float(c) for c in np.atleast_1d(centers))
    edges = geometric_edges(radius, inner=inner, breakpoints=extra)
    if d == 1:
        g = lambda x: np.asarray(f(x[:, None]), dtype=float)
        return integrate_panels_1d(g, edges, rtol=rtol, m_max=m_max)

    prev = prev_abs = None
    m = 8 if d == 2 else 4
    while m <= m_max:
        nodes, weights = _panel_nodes_weights(edges, m)
        value, abs_value = _tensor_accumulate(f, d, nodes, weights)
        if prev is not None:
            scale = max(abs_value, 1e-300)
            if abs(value - prev) <= rtol * scale:
                return value, abs_value
        prev, prev_abs = value, abs_value
        m *= 2
    # tensor rules in d >= 2 are capped; return the last estimate rather
    # than refining without bound
    return prev, prev_abs


def _tensor_accumulate(f, d, nodes, weights, chunk=1 << 21):
    n = nodes.size
    total = 0.0
    total_abs = 0.0
    rows_per_chunk = max(1, chunk // (n ** (d - 1)))
    for start in range(0, n, rows_per_chunk):
        sl = slice(start, min(start + rows_per_chunk, n))
        axes = [nodes[sl]] + [nodes] * (d - 1)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = np.asarray(f(pts), dtype=float)
        w = weights[sl]
        for _ in range(d - 1):
            w = np.multiply.outer(w, weights)
        w = w.ravel()
        total += float(w @ vals)
        total_abs += float(w @ np.abs(vals))
    return total, total_abs


def expanding_integral(f, d, *, rtol=1e-10, r0=1.0, breakpoints=(),
                       centers=None, tail_bound=None, max_doublings=48,
                       diverges=QuadratureFailure, inner=1.0):
    """Integrate f over R^d by doubling the box until shell sums are Cauchy.

    `tail_bound(R)` is an optional analytic bound on the integral of |f|
    outside the ball of radius R; when provided, it carries the truncation
    guarantee at rtol and must fall below rtol times the accumulated
    absolute mass before expansion stops.  The shell sums of |f| act as the
    divergence detector (tolerance sqrt-ish, since the absolute integral is
    only a scale); `diverges` is raised when they fail to die out.
    """
    shell_tol = max(1e-6, rtol)
    radius = float(r0)
    value, abs_value = integrate_box(f, d, radius, rtol=rtol,
                                     breakpoints=breakpoints, centers=centers,
                                     inner=inner)
    for _ in range(max_doublings):
        radius *= 2.0
        new_value, new_abs = integrate_box(f, d, radius, rtol=rtol,
                                           breakpoints=breakpoints,
                                           centers=centers, inner=inner)
        shell = new_abs - abs_value
        value, abs_value = new_value, new_abs
        scale = max(abs_value, 1e-300)
        if abs(shell) <= shell_tol * scale:
            if tail_bound is None or tail_bound(radius) <= rtol * scale:
                return value
    raise diverges(f"shell sums not Cauchy up to radius {radius:.3g}")


def ball_average(f, d, radius, rtol=1e-9, breakpoints=(), mc_points=200_000,
                 mc_seed=20240817):
    """Average of f over the centered ball of the given radius.

    Product-rule quadrature in d <= 2, plain Monte Carlo in d = 3.
    """
    if d == 1:
        edges = geometric_edges(radius, breakpoints=breakpoints)
        val, _ = integrate_panels_1d(
            lambda x: np.asarray(f(x[:, None]), dtype=float), edges, rtol=rtol)
        return val / (2.0 * radius)
    if d == 2:
        r_edges = geometric_edges(radius, breakpoints=breakpoints)
        r_edges = r_edges[r_edges >= 0.0]
        if r_edges[0] > 0.0:
            r_edges = np.concatenate([[0.0], r_edges])
        th_edges = np.linspace(0.0, 2.0 * np.pi, 9)

        def integrand(r):
            nodes, weights = _panel_nodes_weights(th_edges, 64)
            pts = np.stack([np.outer(r, np.cos(nodes)).ravel(),
                            np.outer(r, np.sin(nodes)).ravel()], axis=-1)
            vals = np.asarray(f(pts), dtype=float).reshape(r.size, nodes.size)
            return (vals @ weights) * r

        val, _ = _radial_2d(integrand, r_edges, rtol)
        return val / (np.pi * radius ** 2)
    if d == 3:
        rng = np.random.default_rng(mc_seed)
        pts = rng.standard_normal((mc_points, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        pts *= radius * rng.random(mc_points)[:, None] ** (1.0 / 3.0)
        return float(np.mean(np.asarray(f(pts), dtype=float)))
    raise ValueError("ball_average supports d in {1, 2, 3}")


def _radial_2d(integrand, r_edges, rtol):
    prev = None
    m = _M_START
    while m <= 1 << 10:
        nodes, weights = _panel_nodes_weights(r_edges, m)
        vals = integrand(nodes)
        value = float(weights @ vals)
        if prev is not None and abs(value - prev) <= rtol * max(abs(value), 1e-300):
            return value, abs(value)
        prev = value
        m *= 2
    return prev, abs(prev)
