import math

import numpy as np
import pytest

from frwmax.geometry import Curvature
from frwmax.timeframe import ConformalTime, scale_factor, t_to_tau, tau_to_t


def test_flat_time_transform():
    assert tau_to_t(3.0, Curvature.FLAT) == 9.0
    assert tau_to_t(ConformalTime(3.0, Curvature.FLAT)) == 9.0


def test_hyperbolic_time_transform_values():
    assert tau_to_t(0.0, Curvature.HYPERBOLIC) == 0.0
    assert abs(tau_to_t(2.0, Curvature.HYPERBOLIC) - (math.sinh(2.0) - 2.0)) < 1e-15
    # small-tau series cross-check: tau^3/6 + tau^5/120 + O(tau^7)
    for tau in (1e-3, 1e-2, 5e-2):
        series = tau**3 / 6.0 + tau**5 / 120.0
        assert abs(tau_to_t(tau, Curvature.HYPERBOLIC) - series) < 1e-16 + tau**7


def test_scale_factor():
    assert scale_factor(2.0, Curvature.FLAT) == 4.0
    assert scale_factor(0.0, Curvature.HYPERBOLIC) == 0.0
    assert abs(scale_factor(1.0, Curvature.HYPERBOLIC) - (math.cosh(1.0) - 1.0)) < 1e-15
    assert scale_factor(ConformalTime(-2.0, Curvature.FLAT)) == 4.0


def test_inverse_flat():
    assert abs(t_to_tau(9.0, Curvature.FLAT).tau - 3.0) < 1e-14
    assert t_to_tau(0.0, Curvature.HYPERBOLIC).tau == 0.0


def test_inverse_hyperbolic_round_trip_value():
    t = math.sinh(2.0) - 2.0
    assert abs(t_to_tau(t, Curvature.HYPERBOLIC).tau - 2.0) < 1e-10


@pytest.mark.parametrize("curvature", list(Curvature))
def test_round_trip_tau_grid(curvature):
    for tau in np.linspace(-20, 20, 81):
        t = tau_to_t(float(tau), curvature)
        back = t_to_tau(t, curvature).tau
        assert abs(back - tau) <= 1e-10 * max(1.0, abs(tau))


@pytest.mark.parametrize("curvature", list(Curvature))
def test_round_trip_t_grid(curvature):
    for t in np.concatenate([-np.geomspace(1e-12, 1e6, 30), [0.0], np.geomspace(1e-12, 1e6, 30)]):
        tau = t_to_tau(float(t), curvature).tau
        assert abs(tau_to_t(tau, curvature) - t) <= 1e-10 * max(1.0, abs(t))


@pytest.mark.parametrize("curvature", list(Curvature))
def test_oddness(curvature):
    for tau in (0.3, 1.7, 12.0):
        assert tau_to_t(-tau, curvature) == -tau_to_t(tau, curvature)


@pytest.mark.parametrize("curvature", list(Curvature))
def test_monotone(curvature):
    taus = np.linspace(-6, 6, 401)
    ts = [tau_to_t(float(tau), curvature) for tau in taus]
    assert all(b > a for a, b in zip(ts, ts[1:]))


def test_small_tau_cubic_asymptotics():
    # leading constant differs between the charts: 1/3 flat, 1/6 hyperbolic
    for tau in (1e-3, 5e-3, 1e-2):
        assert abs(tau_to_t(tau, Curvature.FLAT) - tau**3 / 3.0) == 0.0
        assert abs(tau_to_t(tau, Curvature.HYPERBOLIC) - tau**3 / 6.0) <= abs(tau) ** 5
