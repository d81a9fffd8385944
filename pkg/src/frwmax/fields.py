"""Compactly supported vector-valued initial data.

The production family is sums of smooth bumps: component mu of a single bump
is  amplitude_mu * exp(-1 / (1 - |x - c|^2 / R^2))  inside the Euclidean ball
B_R(c) and identically zero outside.  Gradients are analytic.  Fields are
immutable, closed under addition and scalar multiplication (which is what
linearity tests exercise), and carry a certified Euclidean support ball; for
the half-space chart the enclosing *geodesic* support radius, which distance
arguments need, is reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Curvature, SpatialPoint, enclosing_geodesic_radius

_NORM_SAMPLE_SEED = 20260314


@dataclass(frozen=True)
class BumpTerm:
    amplitude: tuple[float, float, float]
    center: tuple[float, float, float]
    radius: float


def _bump_profile(pts: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    # exp(-1/(1-u)) with u = |x-c|^2/R^2, exactly zero outside the ball
    diff = pts - center[None, :]
    u = np.einsum("ij,ij->i", diff, diff) / (radius * radius)
    out = np.zeros(len(pts))
    inside = u < 1.0
    if np.any(inside):
        out[inside] = np.exp(-1.0 / (1.0 - u[inside]))
    return out


def _bump_profile_gradient(pts: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    diff = pts - center[None, :]
    u = np.einsum("ij,ij->i", diff, diff) / (radius * radius)
    grad = np.zeros_like(pts)
    inside = u < 1.0
    if np.any(inside):
        one_minus = 1.0 - u[inside]
        phi = np.exp(-1.0 / one_minus)
        coeff = -phi / (one_minus * one_minus) * (2.0 / (radius * radius))
        grad[inside] = coeff[:, None] * diff[inside]
    return grad


class VectorField:
    """Three scalar components with analytic gradients and a support ball."""

    def __init__(self, chart: Curvature, terms: list[BumpTerm], smoothness_class: str = "Cinf"):
        self.chart = chart
        self.terms = list(terms)
        self.smoothness_class = smoothness_class
        self._validate_support()

    def _validate_support(self):
        if not self.terms:
            self.support_center = np.zeros(3)
            self.support_radius = 0.0
            return
        centers = np.array([t.center for t in self.terms], dtype=float)
        radii = np.array([t.radius for t in self.terms], dtype=float)
        center = centers.mean(axis=0)
        radius = float(np.max(np.linalg.norm(centers - center[None, :], axis=1) + radii))
        if self.chart is Curvature.HYPERBOLIC:
            for t in self.terms:
                if t.center[2] - t.radius <= 0.0:
                    raise ValueError(
                        "support ball touches the boundary plane z = 0 "
                        f"(center z = {t.center[2]}, radius = {t.radius})"
                    )
            if center[2] - radius <= 0.0:
                # recenter the enclosing ball higher to keep clearance
                zmin = min(t.center[2] - t.radius for t in self.terms)
                zmax = max(t.center[2] + t.radius for t in self.terms)
                center = center.copy()
                center[2] = 0.5 * (zmin + zmax)
                radius = float(
                    np.max(np.linalg.norm(centers - center[None, :], axis=1) + radii)
                )
                if center[2] - radius <= 0.0:
                    raise ValueError("support union touches the boundary plane z = 0")
        self.support_center = center
        self.support_radius = radius

    # -- evaluation -------------------------------------------------------

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Component values at each row of ``pts``; shape (N, 3)."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros((len(pts), 3))
        for term in self.terms:
            phi = _bump_profile(pts, np.asarray(term.center), term.radius)
            out += phi[:, None] * np.asarray(term.amplitude)[None, :]
        return out

    def gradient_many(self, pts: np.ndarray) -> np.ndarray:
        """Gradients d f_mu / d x_j at each row of ``pts``; shape (N, 3, 3)
        indexed [point, component mu, coordinate j]."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros((len(pts), 3, 3))
        for term in self.terms:
            g = _bump_profile_gradient(pts, np.asarray(term.center), term.radius)
            out += np.asarray(term.amplitude)[None, :, None] * g[:, None, :]
        return out

    def eval(self, point: SpatialPoint) -> np.ndarray:
        if point.chart is not self.chart:
            raise ValueError(f"chart mismatch: field is {self.chart.value}, point is {point.chart.value}")
        return self.eval_many(point.array[None, :])[0]

    def gradient(self, point: SpatialPoint) -> np.ndarray:
        if point.chart is not self.chart:
            raise ValueError(f"chart mismatch: field is {self.chart.value}, point is {point.chart.value}")
        return self.gradient_many(point.array[None, :])[0]

    def component(self, mu: int):
        """Scalar callable for one component (and its gradient callable)."""
        def f(coords):
            return float(self.eval_many(np.asarray(coords, dtype=float)[None, :])[0, mu])

        def grad(coords):
            return self.gradient_many(np.asarray(coords, dtype=float)[None, :])[0, mu]

        return f, grad

    # -- geometry of the support -----------------------------------------

    def enclosing_geodesic_radius(self) -> float:
        """Geodesic radius of the smallest geodesic ball about the support
        center that contains the (Euclidean) support ball."""
        return enclosing_geodesic_radius(self.chart, self.support_center, self.support_radius)

    @property
    def is_zero(self) -> bool:
        return not self.terms or all(np.all(np.asarray(t.amplitude) == 0.0) for t in self.terms)

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "VectorField") -> "VectorField":
        if not isinstance(other, VectorField):
            return NotImplemented
        if other.chart is not self.chart:
            raise ValueError("cannot add fields on different charts")
        return VectorField(self.chart, self.terms + other.terms, self.smoothness_class)

    def scaled(self, factor: float) -> "VectorField":
        terms = [
            BumpTerm(tuple(factor * a for a in t.amplitude), t.center, t.radius)
            for t in self.terms
        ]
        return VectorField(self.chart, terms, self.smoothness_class)

    def __rmul__(self, factor: float) -> "VectorField":
        return self.scaled(float(factor))


def make_bump(center: SpatialPoint, radius: float, amplitude) -> VectorField:
    """Single smooth bump supported in the Euclidean ball B_radius(center)."""
    if radius <= 0.0:
        raise ValueError(f"support radius must be positive, got {radius}")
    amp = tuple(float(a) for a in amplitude)
    if len(amp) != 3:
        raise ValueError("amplitude must be a real triple")
    term = BumpTerm(amp, center.coords, float(radius))
    return VectorField(center.chart, [term])


def zero_field(chart: Curvature) -> VectorField:
    return VectorField(chart, [])


@dataclass(frozen=True)
class DataNorms:
    """Sampled suprema of the data: c_f bounds |(f, grad f)|, c_g bounds |g|."""

    c_f: float
    c_g: float
    resolution: int


def _support_samples(field: VectorField, n: int) -> np.ndarray:
    rng = np.random.default_rng(_NORM_SAMPLE_SEED)
    c = field.support_center
    R = field.support_radius
    if R == 0.0:
        return c[None, :]
    # rejection-free ball sampling; the fixed seed makes larger n a strict
    # superset of smaller n, so the sampled sup is monotone in resolution
    u = rng.standard_normal((n, 3))
    u /= np.linalg.norm(u, axis=1)[:, None]
    radii = R * rng.random(n) ** (1.0 / 3.0)
    pts = c[None, :] + radii[:, None] * u
    pts = np.vstack([c[None, :], pts] + [np.asarray(t.center)[None, :] for t in field.terms])
    if field.chart is Curvature.HYPERBOLIC:
        pts = pts[pts[:, 2] > 0.0]
    return pts


def data_norms(field_f: VectorField, field_g: VectorField, resolution: int = 20000) -> DataNorms:
    """Dense-sampling estimate of the data norms over the support balls."""
    if field_f.chart is not field_g.chart:
        raise ValueError("fields must share a chart")
    pts_f = _support_samples(field_f, resolution)
    vals = field_f.eval_many(pts_f)
    grads = field_f.gradient_many(pts_f).reshape(len(pts_f), -1)
    c_f = float(np.max(np.sqrt(np.sum(vals * vals, axis=1) + np.sum(grads * grads, axis=1)), initial=0.0))
    pts_g = _support_samples(field_g, resolution)
    gvals = field_g.eval_many(pts_g)
    c_g = float(np.max(np.linalg.norm(gvals, axis=1), initial=0.0))
    return DataNorms(c_f=c_f, c_g=c_g, resolution=resolution)


def max_divergence(field: VectorField, resolution: int = 5000) -> float:
    """Max sampled |div f| over the support (flat chart).

    The solver treats the three components independently, so data need not be
    divergence-free; this report lets callers audit gauge consistency.
    """
    if field.chart is not Curvature.FLAT:
        raise ValueError("divergence report is defined on the flat chart")
    pts = _support_samples(field, resolution)
    grads = field.gradient_many(pts)
    div = grads[:, 0, 0] + grads[:, 1, 1] + grads[:, 2, 2]
    return float(np.max(np.abs(div), initial=0.0))
