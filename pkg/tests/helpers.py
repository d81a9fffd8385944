"""Shared test fixtures: an intrinsically geodesic bump on the half-space
chart with a closed-form radial solution, used as an independent reference
for the hyperbolic propagator."""

import math

import numpy as np
from scipy.integrate import quad

from frwmax.geometry import Curvature, distance_arrays


class GeodesicBump:
    """phi(d_hyp(x, c)) bump: support is the geodesic ball B_S(c)."""

    def __init__(self, center, S, amplitude):
        self.chart = Curvature.HYPERBOLIC
        self.center = np.asarray(center, dtype=float)
        self.S = float(S)
        self.amp = np.asarray(amplitude, dtype=float)
        z0 = self.center[2]
        # support metadata: geodesic radius S about the center itself;
        # the Euclidean enclosure has radius z0 (e^S - 1) about the center
        self.support_center = self.center
        self.support_radius = z0 * (math.exp(self.S) - 1.0)
        self.is_zero = bool(np.all(self.amp == 0.0))

    def profile(self, s):
        u = (np.asarray(s) / self.S) ** 2
        out = np.zeros_like(u)
        m = u < 1.0
        out[m] = np.exp(-1.0 / (1.0 - u[m]))
        return out

    def eval_many(self, pts):
        s = distance_arrays(Curvature.HYPERBOLIC, pts, self.center)
        return self.profile(s)[:, None] * self.amp[None, :]

    def gradient_many(self, pts):
        h = 1e-6
        out = np.zeros((len(pts), 3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            out[:, :, j] = (self.eval_many(pts + e) - self.eval_many(pts - e)) / (2 * h)
        return out

    def enclosing_geodesic_radius(self):
        return self.S


def geodesic_bump_exact_A(fld_f, fld_g, tau, rho):
    """Closed-form solution for geodesic-radial data, at geodesic distance
    rho from the common center (1D quadrature in the radial variable)."""
    S_f, S_g = fld_f.S, fld_g.S

    def phi(s, S):
        u = (s / S) ** 2
        return math.exp(-1.0 / (1.0 - u)) if u < 1 else 0.0

    fpart = (
        math.sinh(rho + tau) * phi(rho + tau, S_f)
        + math.copysign(1.0, rho - tau) * math.sinh(abs(rho - tau)) * phi(abs(rho - tau), S_f)
    ) / (2.0 * math.sinh(rho))
    lo, hi = abs(rho - tau), min(S_g, rho + tau)
    gpart = 0.0
    if hi > lo:
        gpart = quad(lambda s: math.sinh(s) * phi(s, S_g), lo, hi, epsabs=1e-15)[0] / (
            2.0 * math.sinh(rho)
        )
    return fpart * fld_f.amp + gpart * fld_g.amp
