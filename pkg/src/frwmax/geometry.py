"""Spatial geometry on the two supported charts.

Flat space is ordinary Euclidean R^3.  Hyperbolic space (constant curvature
-1) is handled in the upper half-space chart {(x, y, z) : z > 0} carrying the
metric (dx^2 + dy^2 + dz^2) / z^2.  In that chart

* geodesic distance is  d(p, q) = 2 asinh( |p - q| / (2 sqrt(z_p z_q)) ),
* geodesics are vertical rays or circular arcs orthogonal to {z = 0},
* the geodesic sphere of radius r about (x0, y0, z0) is the Euclidean sphere
  centered at (x0, y0, z0 cosh r) with Euclidean radius z0 sinh r.

Sphere quadratures are product rules: Gauss-Legendre in the polar cosine and
a uniform periodic (trapezoid) rule in azimuth.  For the hyperbolic chart the
Gauss-Legendre nodes are placed in the *intrinsic* polar cosine, so discrete
weights sum to the exact surface area (4 pi r^2 flat, 4 pi sinh^2 r
hyperbolic) up to roundoff at every radius.  A second, support-aligned band
rule integrates over the intersection of a sphere with a ball around a given
center; it is what makes thin far-field caps resolvable at fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

MIN_ORDER = 4
DEFAULT_ORDER = 32

_VERTICAL_TOL = 1e-14


class Curvature(Enum):
    """Spatial curvature tag; every geometric operation dispatches on it."""

    FLAT = "flat"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class SpatialPoint:
    """A point of R^3 or of the upper half-space chart of H^3."""

    coords: tuple[float, float, float]
    chart: Curvature

    def __post_init__(self):
        if len(self.coords) != 3:
            raise ValueError("coords must be a real triple")
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        if self.chart is Curvature.HYPERBOLIC and self.coords[2] <= 0.0:
            raise ValueError(
                f"hyperbolic chart requires z > 0, got z = {self.coords[2]}"
            )

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def flat_point(x: float, y: float, z: float) -> SpatialPoint:
    return SpatialPoint((x, y, z), Curvature.FLAT)


def hyperbolic_point(x: float, y: float, z: float) -> SpatialPoint:
    return SpatialPoint((x, y, z), Curvature.HYPERBOLIC)


def _require_same_chart(p: SpatialPoint, q: SpatialPoint) -> Curvature:
    if p.chart is not q.chart:
        raise ValueError(f"chart mismatch: {p.chart.value} vs {q.chart.value}")
    return p.chart


def hyperbolic_distance_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Geodesic distance in the half-space chart, vectorized over rows.

    Uses d = 2 asinh(|a-b| / (2 sqrt(z_a z_b))), which stays fully accurate
    for nearby points where acosh(1 + x) would lose half the digits.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    za = a[..., 2]
    zb = b[..., 2]
    if np.any(za <= 0.0) or np.any(zb <= 0.0):
        raise ValueError("hyperbolic chart requires z > 0")
    sep = np.linalg.norm(a - b, axis=-1)
    return 2.0 * np.arcsinh(sep / (2.0 * np.sqrt(za * zb)))


def distance_arrays(chart: Curvature, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if chart is Curvature.FLAT:
        return np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), axis=-1)
    return hyperbolic_distance_arrays(a, b)


def geodesic_distance(p: SpatialPoint, q: SpatialPoint) -> float:
    """Geodesic distance between two points of the same chart."""
    chart = _require_same_chart(p, q)
    return float(distance_arrays(chart, p.array, q.array))


def enclosing_geodesic_radius(chart: Curvature, center: np.ndarray, radius: float) -> float:
    """Geodesic radius of the smallest geodesic ball about ``center`` that
    contains the Euclidean ball of the given radius.

    Flat chart: the Euclidean radius itself.  Half-space chart: the farthest
    point of the Euclidean ball is its bottom, giving
    2 asinh(R / (2 sqrt(z (z - R)))).
    """
    if radius == 0.0:
        return 0.0
    if radius < 0.0:
        raise ValueError("radius must be nonnegative")
    if chart is Curvature.FLAT:
        return float(radius)
    z = float(np.asarray(center, dtype=float)[2])
    if z - radius <= 0.0:
        raise ValueError("Euclidean ball touches the boundary plane z = 0")
    return 2.0 * math.asinh(radius / (2.0 * math.sqrt(z * (z - radius))))


# ---------------------------------------------------------------------------
# sphere points and full-sphere quadrature
# ---------------------------------------------------------------------------


def sphere_points(chart, center, r, mu, phi):
    """Points on the geodesic sphere S_r(center).

    ``mu`` is the cosine of the polar angle measured intrinsically from the
    +z direction (for the flat chart this is the ordinary polar cosine), and
    ``phi`` the azimuth.  Both may be arrays of a common shape.
    """
    c = np.asarray(center, dtype=float)
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if chart is Curvature.FLAT:
        st = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
        x = c[0] + r * st * np.cos(phi)
        y = c[1] + r * st * np.sin(phi)
        z = c[2] + r * mu
        return np.stack(np.broadcast_arrays(x, y, z), axis=-1)
    # Half-space chart.  With v = cos(intrinsic polar angle) the chart polar
    # cosine is ((1+v) - (1-v) e^{2r}) / ((1+v) + (1-v) e^{2r}) and the node
    # height is 2 z0 e^r / D with D = (1+v) + (1-v) e^{2r}; both forms stay
    # positive and cancellation-free for all r.
    z0 = c[2]
    e2r = math.exp(2.0 * r)
    er = math.exp(r)
    D = (1.0 + mu) + (1.0 - mu) * e2r
    z = 2.0 * z0 * er / D
    rho_sin = z0 * math.sinh(r) * 2.0 * er * np.sqrt(np.clip((1.0 - mu) * (1.0 + mu), 0.0, None)) / D
    x = c[0] + rho_sin * np.cos(phi)
    y = c[1] + rho_sin * np.sin(phi)
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes and surface-measure weights for a geodesic sphere S_r(center).

    ``order`` counts polar Gauss-Legendre nodes; the azimuthal rule uses
    2*order equispaced nodes.  Weights are positive and sum to the sphere
    area, 4 pi r^2 (flat) or 4 pi sinh^2 r (hyperbolic).
    """

    center: SpatialPoint
    radius: float
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def area(self) -> float:
        if self.center.chart is Curvature.FLAT:
            return 4.0 * math.pi * self.radius**2
        return 4.0 * math.pi * math.sinh(self.radius) ** 2


@lru_cache(maxsize=64)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    mu, wmu = roots_legendre(order)
    mu.setflags(write=False)
    wmu.setflags(write=False)
    return mu, wmu


def build_sphere_quadrature(center: SpatialPoint, r: float, order: int = DEFAULT_ORDER) -> SphereQuadrature:
    """Product-rule quadrature of the geodesic sphere S_r(center)."""
    if r <= 0.0:
        raise ValueError(f"sphere radius must be positive, got r = {r}")
    if order < MIN_ORDER:
        raise ValueError(f"order must be at least {MIN_ORDER}, got {order}")
    mu, wmu = _gauss_legendre(order)
    nphi = 2 * order
    phi = 2.0 * math.pi * np.arange(nphi) / nphi
    wphi = 2.0 * math.pi / nphi

    MU, PHI = np.meshgrid(mu, phi, indexing="ij")
    nodes = sphere_points(center.chart, center.array, r, MU, PHI).reshape(-1, 3)
    if center.chart is Curvature.FLAT:
        scale = r * r
    else:
        scale = math.sinh(r) ** 2
    weights = (np.repeat(wmu, nphi) * wphi) * scale
    return SphereQuadrature(center=center, radius=float(r), nodes=nodes, weights=weights, order=order)




# ---------------------------------------------------------------------------
# support-aligned band quadrature
# ---------------------------------------------------------------------------


def _orthonormal_frame(n_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # deterministic pair of unit vectors orthogonal to n_hat
    seed = np.array([0.0, 0.0, 1.0]) if abs(n_hat[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(seed, n_hat)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n_hat, e1)
    return e1, e2


def support_band_quadrature(
    chart: Curvature,
    sphere_center: np.ndarray,
    r: float,
    support_center: np.ndarray,
    support_geodesic_radius: float,
    order: int = DEFAULT_ORDER,
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature of S_r(sphere_center) restricted to the band that can meet
    the geodesic ball B_s(support_center), s <= support_geodesic_radius.

    Nodes are placed on rings of constant geodesic distance ``s`` from the
    support center (Gauss-Legendre in s, uniform in the ring angle); weights
    carry the surface measure of S_r(sphere_center), so summing w*f over the
    nodes approximates the surface integral of any f supported in the ball.
    Returns ``(nodes, weights)``; both are empty when the sphere cannot meet
    the ball.  The rule is exact in the sense that the missing part of the
    sphere lies outside the ball, where such f vanishes.
    """
    if r <= 0.0:
        raise ValueError(f"sphere radius must be positive, got r = {r}")
    if order < MIN_ORDER:
        raise ValueError(f"order must be at least {MIN_ORDER}, got {order}")
    p = np.asarray(sphere_center, dtype=float)
    c = np.asarray(support_center, dtype=float)
    d = float(distance_arrays(chart, p, c))
    s_lo = abs(r - d)
    s_hi = min(r + d, float(support_geodesic_radius))
    if s_hi <= s_lo or d == 0.0:
        return np.empty((0, 3)), np.empty((0,))

    ns = order
    nphi = 2 * order
    gl_x, gl_w = _gauss_legendre(ns)
    s = 0.5 * (s_hi + s_lo) + 0.5 * (s_hi - s_lo) * gl_x
    ws = 0.5 * (s_hi - s_lo) * gl_w
    phi = 2.0 * math.pi * np.arange(nphi) / nphi
    wphi = 2.0 * math.pi / nphi

    if chart is Curvature.FLAT:
        u_hat = (c - p) / d
        e1, e2 = _orthonormal_frame(u_hat)
        # ring on S_r(p) at distance s from c: offset t along u_hat from p
        t = (r * r + d * d - s * s) / (2.0 * d)
        r_minus_t = (s - (r - d)) * (s + (r - d)) / (2.0 * d)
        ring_rho = np.sqrt(np.clip(r_minus_t * (r + t), 0.0, None))
        ring_center = p[None, :] + t[:, None] * u_hat[None, :]
        ca, sa = np.cos(phi), np.sin(phi)
        nodes = (
            ring_center[:, None, :]
            + ring_rho[:, None, None] * (ca[None, :, None] * e1 + sa[None, :, None] * e2)
        )
        jac = r * s / d
    else:
        # rings are built on the small Euclidean realization of S_s(c); the
        # constraint d(p, y) = r is a plane through that sphere, which keeps
        # every intermediate quantity O(1) near the support even when the
        # probe coordinates are exponentially large or small.
        zc = c[2]
        zp = p[2]
        coshr_m1 = math.cosh(r) - 1.0
        C2 = np.empty((ns, 3))
        C2[:, 0] = c[0]
        C2[:, 1] = c[1]
        C2[:, 2] = zc * np.cosh(s)
        rho2 = zc * np.sinh(s)
        pc = p[None, :] - C2
        n_vec = pc.copy()
        n_vec[:, 2] += zp * coshr_m1
        n_norm = np.linalg.norm(n_vec, axis=1)
        num = np.einsum("ij,ij->i", pc, pc) + rho2 * rho2 - 2.0 * zp * coshr_m1 * C2[:, 2]
        h = np.clip(num / (2.0 * rho2 * n_norm), -1.0, 1.0)
        ring_rho = np.sqrt(np.clip(1.0 - h * h, 0.0, None))
        nodes = np.empty((ns, nphi, 3))
        ca, sa = np.cos(phi), np.sin(phi)
        for i in range(ns):
            n_hat = n_vec[i] / n_norm[i]
            e1, e2 = _orthonormal_frame(n_hat)
            omega = (
                h[i] * n_hat[None, :]
                + ring_rho[i] * (ca[:, None] * e1[None, :] + sa[:, None] * e2[None, :])
            )
            nodes[i] = C2[i][None, :] + rho2[i] * omega
        jac = math.sinh(r) * np.sinh(s) / math.sinh(d)

    weights = (jac * ws)[:, None] * wphi * np.ones_like(phi)[None, :]
    return nodes.reshape(-1, 3), weights.reshape(-1)


# ---------------------------------------------------------------------------
# geodesics and radial derivatives
# ---------------------------------------------------------------------------


def geodesic_points(chart: Curvature, start: np.ndarray, toward: np.ndarray, arc_lengths) -> np.ndarray:
    """Points at the given arc lengths along the geodesic from ``start``
    toward ``toward`` (negative arc length walks away from ``toward``)."""
    a = np.asarray(start, dtype=float)
    b = np.asarray(toward, dtype=float)
    s = np.atleast_1d(np.asarray(arc_lengths, dtype=float))
    if chart is Curvature.FLAT:
        sep = b - a
        norm = np.linalg.norm(sep)
        if norm == 0.0:
            raise ValueError("geodesic direction undefined for coincident points")
        return a[None, :] + s[:, None] * (sep / norm)[None, :]

    za, zb = a[2], b[2]
    horiz = b[:2] - a[:2]
    hnorm = np.linalg.norm(horiz)
    scale = max(1.0, np.linalg.norm(a - b))
    if hnorm <= _VERTICAL_TOL * scale:
        sign = 1.0 if zb >= za else -1.0
        out = np.repeat(a[None, :], len(s), axis=0)
        out[:, 2] = za * np.exp(sign * s)
        return out
    # circular arc orthogonal to {z=0} in the vertical plane through a and b
    h_hat = horiz / hnorm
    xi_b = hnorm
    xi_center = (xi_b * xi_b + zb * zb - za * za) / (2.0 * xi_b)
    rho = math.hypot(xi_center, za)
    alpha_a = math.atan2(za, -xi_center)
    alpha_b = math.atan2(zb, xi_b - xi_center)
    # unit-speed parameter along the arc is log tan(alpha/2), increasing in alpha
    t_a = math.log(math.tan(0.5 * alpha_a))
    sign = 1.0 if alpha_b >= alpha_a else -1.0
    t = t_a + sign * s
    alpha = 2.0 * np.arctan(np.exp(t))
    xi = xi_center + rho * np.cos(alpha)
    z = rho * np.sin(alpha)
    out = np.empty((len(s), 3))
    out[:, 0] = a[0] + xi * h_hat[0]
    out[:, 1] = a[1] + xi * h_hat[1]
    out[:, 2] = z
    return out


def geodesic_point(y: SpatialPoint, x: SpatialPoint, s: float) -> SpatialPoint:
    """Point at arc length ``s`` from ``y`` along the geodesic toward ``x``."""
    chart = _require_same_chart(y, x)
    pt = geodesic_points(chart, y.array, x.array, [s])[0]
    return SpatialPoint(tuple(pt), chart)


def geodesic_offsets(chart: Curvature, center: np.ndarray, nodes: np.ndarray, r: float, h: float):
    """For nodes at geodesic distance r from ``center``, return the points at
    distances r+h and r-h along the geodesics from ``center`` through each
    node.  Vectorized over nodes; used for radial derivatives on spheres.
    """
    x = np.asarray(center, dtype=float)
    Y = np.asarray(nodes, dtype=float)
    if chart is Curvature.FLAT:
        direction = (Y - x[None, :]) / r
        return x[None, :] + (r + h) * direction, x[None, :] + (r - h) * direction

    zx = x[2]
    horiz = Y[:, :2] - x[None, :2]
    hnorm = np.linalg.norm(horiz, axis=1)
    vertical = hnorm <= _VERTICAL_TOL * max(1.0, r)
    plus = np.empty_like(Y)
    minus = np.empty_like(Y)

    if np.any(vertical):
        sign = np.where(Y[vertical, 2] >= zx, 1.0, -1.0)
        for out, rr in ((plus, r + h), (minus, r - h)):
            out[vertical, 0] = x[0]
            out[vertical, 1] = x[1]
            out[vertical, 2] = zx * np.exp(sign * rr)

    gen = ~vertical
    if np.any(gen):
        hh = hnorm[gen]
        h_hat = horiz[gen] / hh[:, None]
        zy = Y[gen, 2]
        xi_y = hh
        xi_c = (xi_y * xi_y + zy * zy - zx * zx) / (2.0 * xi_y)
        rho = np.hypot(xi_c, zx)
        alpha_x = np.arctan2(zx, -xi_c)
        alpha_y = np.arctan2(zy, xi_y - xi_c)
        t_x = np.log(np.tan(0.5 * alpha_x))
        sign = np.where(alpha_y >= alpha_x, 1.0, -1.0)
        for out, rr in ((plus, r + h), (minus, r - h)):
            alpha = 2.0 * np.arctan(np.exp(t_x + sign * rr))
            xi = xi_c + rho * np.cos(alpha)
            out[gen, 0] = x[0] + xi * h_hat[:, 0]
            out[gen, 1] = x[1] + xi * h_hat[:, 1]
            out[gen, 2] = rho * np.sin(alpha)
    return plus, minus


def radial_derivative(f, y: SpatialPoint, x: SpatialPoint, gradient=None) -> float:
    """Derivative of the scalar ``f`` at ``y`` along the unit-speed geodesic
    from ``y`` toward ``x`` (the inward direction on the sphere about ``x``).

    Flat chart: the inward unit vector dotted with grad f(y), using the
    analytic ``gradient`` callable when supplied and second-order central
    differences along the ray otherwise.  Hyperbolic chart: central
    differences of f along the connecting geodesic with step
    1e-5 * max(1, d(x, y)).
    """
    chart = _require_same_chart(y, x)
    ya, xa = y.array, x.array
    r = float(distance_arrays(chart, ya, xa))
    if r == 0.0:
        raise ValueError("radial derivative undefined at the sphere center")
    if chart is Curvature.FLAT and gradient is not None:
        inward = (xa - ya) / r
        return float(np.dot(inward, np.asarray(gradient(ya), dtype=float)))
    h = 1e-5 * max(1.0, r)
    pts = geodesic_points(chart, ya, xa, [h, -h])
    return (float(f(pts[0])) - float(f(pts[1]))) / (2.0 * h)


# ---------------------------------------------------------------------------
# distances to box boundaries (used by the finite-difference oracle)
# ---------------------------------------------------------------------------


def distance_to_box_boundary(chart: Curvature, point: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    """Geodesic distance from an interior point to the boundary of an
    axis-aligned box.  Hyperbolic faces: vertical planes are at distance
    asinh(a / z), horizontal planes at |log(z_face / z)|.
    """
    p = np.asarray(point, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(p < lo) or np.any(p > hi):
        return 0.0
    if chart is Curvature.FLAT:
        return float(min(np.min(p - lo), np.min(hi - p)))
    z = p[2]
    dists = [
        math.asinh((p[0] - lo[0]) / z),
        math.asinh((hi[0] - p[0]) / z),
        math.asinh((p[1] - lo[1]) / z),
        math.asinh((hi[1] - p[1]) / z),
        math.log(z / lo[2]) if lo[2] > 0.0 else math.inf,
        math.log(hi[2] / z),
    ]
    return float(min(dists))
