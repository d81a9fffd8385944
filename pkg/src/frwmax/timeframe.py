"""Conversions between cosmological time t and conformal time tau.

Flat chart:        a(tau) = tau^2,          t = tau^3 / 3.
Hyperbolic chart:  a(tau) = cosh(tau) - 1,  t = sinh(tau) - tau.

Both transforms are odd and strictly increasing; the scale factor vanishes
exactly at tau = 0 (the big-bang hypersurface).  The hyperbolic inversion is
a safeguarded Newton iteration inside a geometrically grown bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Curvature

_NEWTON_TOL = 1e-12
_NEWTON_MAX_ITER = 200


@dataclass(frozen=True)
class ConformalTime:
    """Conformal time value tagged with its curvature.

    Negative tau is legal; it addresses the reflected branch of solutions on
    the far side of the singular hypersurface.
    """

    tau: float
    curvature: Curvature


def sinh_minus_tau(tau: float) -> float:
    """sinh(tau) - tau, evaluated without cancellation for small tau."""
    if abs(tau) < 0.1:
        t2 = tau * tau
        # tau^3/6 * (1 + tau^2/20 + tau^4/840 + tau^6/60480)
        return (tau * t2 / 6.0) * (1.0 + t2 / 20.0 + t2 * t2 / 840.0 + t2 * t2 * t2 / 60480.0)
    return math.sinh(tau) - tau


def _cosh_minus_one(tau: float) -> float:
    s = math.sinh(0.5 * tau)
    return 2.0 * s * s


def tau_to_t(tau, curvature: Curvature | None = None) -> float:
    """Cosmological time of a conformal time (odd in tau)."""
    if isinstance(tau, ConformalTime):
        curvature = tau.curvature
        tau = tau.tau
    if curvature is None:
        raise ValueError("curvature required when tau is a bare float")
    tau = float(tau)
    if curvature is Curvature.FLAT:
        return tau**3 / 3.0
    return sinh_minus_tau(tau)


def scale_factor(tau, curvature: Curvature | None = None) -> float:
    """Scale factor a(tau); nonnegative, vanishing exactly at tau = 0."""
    if isinstance(tau, ConformalTime):
        curvature = tau.curvature
        tau = tau.tau
    if curvature is None:
        raise ValueError("curvature required when tau is a bare float")
    tau = float(tau)
    if curvature is Curvature.FLAT:
        return tau * tau
    return _cosh_minus_one(tau)


def _invert_sinh_minus_tau(t: float) -> float:
    # Solve sinh(tau) - tau = t for t >= 0.  Seed with the small- and
    # large-argument asymptotics, then Newton with a bisection safeguard.
    if t == 0.0:
        return 0.0
    tau = (6.0 * t) ** (1.0 / 3.0) if t < 1.0 else math.asinh(t)

    lo = 0.0  # f(0) = -t < 0
    hi = max(tau, 1e-8)
    for _ in range(_NEWTON_MAX_ITER):
        if sinh_minus_tau(hi) >= t:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket sinh(tau) - tau = t")

    tau = min(max(tau, lo), hi)
    for _ in range(_NEWTON_MAX_ITER):
        f = sinh_minus_tau(tau) - t
        if f > 0.0:
            hi = tau
        else:
            lo = tau
        fp = _cosh_minus_one(tau)
        step = f / fp if fp > 0.0 else 0.0
        nxt = tau - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)  # bisection fallback
        if abs(nxt - tau) <= _NEWTON_TOL * max(1.0, abs(tau)):
            return nxt
        tau = nxt
    raise RuntimeError("Newton iteration for conformal time did not converge")


def t_to_tau(t: float, curvature: Curvature) -> ConformalTime:
    """Conformal time of a cosmological time (inverse of :func:`tau_to_t`)."""
    t = float(t)
    if curvature is Curvature.FLAT:
        tau = math.copysign((3.0 * abs(t)) ** (1.0 / 3.0), t)
        return ConformalTime(tau, curvature)
    tau = _invert_sinh_minus_tau(abs(t))
    return ConformalTime(math.copysign(tau, t), curvature)
