import math

import numpy as np
import pytest
from scipy.integrate import quad

import frwmax.propagator as prop
from frwmax.fields import make_bump, zero_field
from frwmax.geometry import Curvature, SpatialPoint, flat_point, hyperbolic_point
from frwmax.propagator import (
    CauchyProblem,
    limit_at_singularity,
    propagate,
    richardson_limit,
    solve_batch,
    solve_flat,
    solve_from_singularity,
    solve_hyperbolic,
    spherical_mean,
)

from helpers import GeodesicBump, geodesic_bump_exact_A

AMPS_F = (1.0, -0.7, 0.4)
AMPS_G = (0.5, 0.8, -0.6)


def flat_problem(tau0=0.0, R=1.0):
    f = make_bump(flat_point(0, 0, 0), R, AMPS_F)
    g = make_bump(flat_point(0, 0, 0), R, AMPS_G)
    return CauchyProblem(Curvature.FLAT, f, g, tau0=tau0)


def hyperbolic_problem(tau0=0.0, R=0.3, z0=1.0):
    f = make_bump(hyperbolic_point(0, 0, z0), R, AMPS_F)
    g = make_bump(hyperbolic_point(0, 0, z0), R, AMPS_G)
    return CauchyProblem(Curvature.HYPERBOLIC, f, g, tau0=tau0)


def bump_profile(s, R=1.0):
    u = (s / R) ** 2
    return math.exp(-1.0 / (1.0 - u)) if u < 1 else 0.0


def flat_exact_A(tau, rho, R=1.0):
    """d'Alembert reference for radial data: independent of the quadrature."""
    rho = max(rho, 1e-12)
    fpart = (
        (rho + tau) * bump_profile(rho + tau, R) + (rho - tau) * bump_profile(abs(rho - tau), R)
    ) / (2 * rho)
    lo, hi = abs(rho - tau), min(R, rho + tau)
    gpart = 0.0
    if hi > lo:
        gpart = quad(lambda s: s * bump_profile(s, R), lo, hi, epsabs=1e-15)[0] / (2 * rho)
    return fpart * np.asarray(AMPS_F) + gpart * np.asarray(AMPS_G)


# ---------------------------------------------------------------------------
# spherical means
# ---------------------------------------------------------------------------


def test_mean_of_constant_amplitude_bump_at_small_radius():
    f = make_bump(flat_point(0, 0, 0), 1.0, (2.0, 0.0, -1.0))
    m = spherical_mean(f, flat_point(0, 0, 0), 1e-6, order=16)
    assert np.allclose(m, f.eval(flat_point(0, 0, 0)), atol=1e-10)


def test_mean_kills_odd_integrand():
    # component value is odd around the sphere center for offset evaluation
    f = make_bump(flat_point(0, 0, 0), 1.0, (1.0, 0, 0))
    m_plus = spherical_mean(f, flat_point(0.3, 0, 0), 0.2, order=32)
    m_minus = spherical_mean(f, flat_point(-0.3, 0, 0), 0.2, order=32)
    assert abs(m_plus[0] - m_minus[0]) < 1e-12  # even in the offset by symmetry


def test_mean_concentric_equals_profile_value():
    f = make_bump(flat_point(0, 0, 0), 1.0, (1.0, 0, 0))
    m = spherical_mean(f, flat_point(0, 0, 0), 0.5, order=32)
    assert abs(m[0] - math.exp(-4.0 / 3.0)) < 1e-12


def test_mean_matches_quadruple_order_reference():
    f = make_bump(flat_point(0, 0, 0), 1.0, AMPS_F)
    center = flat_point(0.4, -0.2, 0.1)
    lo = spherical_mean(f, center, 0.5, order=32)
    hi = spherical_mean(f, center, 0.5, order=128)
    assert np.max(np.abs(lo - hi)) < 1e-8


def test_mean_radial_reference_flat():
    # exact 1D reduction for radial data
    f = make_bump(flat_point(0, 0, 0), 1.0, (1.0, 0, 0))
    rho, r = 0.7, 0.45
    m = spherical_mean(f, flat_point(rho, 0, 0), r, order=64)
    ref = quad(lambda s: s * bump_profile(s), abs(rho - r), min(1.0, rho + r), epsabs=1e-15)[0] / (
        2 * r * rho
    )
    assert abs(m[0] - ref) < 1e-10


def test_mean_rejects_bad_arguments():
    f = make_bump(flat_point(0, 0, 0), 1.0, AMPS_F)
    with pytest.raises(ValueError):
        spherical_mean(f, flat_point(0, 0, 0), 0.0)
    with pytest.raises(ValueError):
        spherical_mean(f, flat_point(0, 0, 0), 1.0, order=2)
    with pytest.raises(ValueError):
        spherical_mean(f, hyperbolic_point(0, 0, 1), 1.0)


# ---------------------------------------------------------------------------
# flat solver
# ---------------------------------------------------------------------------


def test_zero_data_gives_zero_solution():
    z = zero_field(Curvature.FLAT)
    problem = CauchyProblem(Curvature.FLAT, z, z, tau0=0.0)
    s = solve_from_singularity(problem, 1.0, flat_point(0.3, 0.2, 0.1))
    assert np.all(s.A == 0.0) and np.all(s.A_tau == 0.0)


def test_flat_solver_matches_radial_reference():
    problem = flat_problem()
    for tau in (0.5, 1.0, 2.5):
        for rho in (0.2, 0.9, tau, tau + 0.8):
            s = propagate(problem, tau, flat_point(rho, 0, 0), order=64)
            ref = flat_exact_A(tau, rho)
            assert np.max(np.abs(s.A - ref)) < 5e-6, (tau, rho)


def test_flat_solver_regular_tau0_shift_invariance():
    base = flat_problem(tau0=0.0)
    shifted = flat_problem(tau0=1.5)
    x = flat_point(0.8, -0.1, 0.4)
    a = propagate(base, 2.0, x, order=48)
    b = solve_flat(shifted, 3.5, x, order=48)
    assert np.allclose(a.A, b.A, atol=1e-14)
    assert np.allclose(a.A_tau, b.A_tau, atol=1e-14)


def test_finite_propagation_speed_and_sharp_huygens():
    for problem, point_of in (
        (flat_problem(), lambda d: flat_point(d, 0, 0)),
        (hyperbolic_problem(), lambda d: hyperbolic_point(0, 0, math.exp(-d))),
    ):
        r_geo = prop.data_support(problem)[1]
        tau = 6.0
        # exterior: sphere misses the support entirely
        s = propagate(problem, tau, point_of(tau + r_geo + 0.05), order=32)
        assert np.max(np.abs(s.A)) <= 1e-9
        # interior: strictly inside the light cone
        s = propagate(problem, tau, point_of(tau - r_geo - 0.05), order=32)
        assert np.max(np.abs(s.A)) <= 1e-9


def test_linearity_shared_support():
    f1 = make_bump(flat_point(0, 0, 0), 1.0, (1.0, 0.2, -0.3))
    g1 = make_bump(flat_point(0, 0, 0), 1.0, (0.4, -0.5, 0.6))
    f2 = make_bump(flat_point(0, 0, 0), 1.0, (-0.7, 0.9, 0.1))
    g2 = make_bump(flat_point(0, 0, 0), 1.0, (0.3, 0.3, -0.8))
    a, b = 1.7, -2.3
    combo = CauchyProblem(Curvature.FLAT, a * f1 + b * f2, a * g1 + b * g2, tau0=0.0)
    p1 = CauchyProblem(Curvature.FLAT, f1, g1, tau0=0.0)
    p2 = CauchyProblem(Curvature.FLAT, f2, g2, tau0=0.0)
    for tau, x in ((0.8, flat_point(0.5, 0.1, 0)), (3.0, flat_point(2.8, 0.5, 0))):
        sc = propagate(combo, tau, x, order=32)
        s1 = propagate(p1, tau, x, order=32)
        s2 = propagate(p2, tau, x, order=32)
        lin = a * s1.A + b * s2.A
        scale = max(np.max(np.abs(lin)), 1e-12)
        assert np.max(np.abs(sc.A - lin)) <= 1e-12 * scale


def test_mean_even_extension_small_r_derivative():
    # d/dr of the mean vanishes at r -> 0 (evenness): central estimate <= C r
    f = make_bump(flat_point(0, 0, 0), 1.0, (1.0, 0, 0))
    x = flat_point(0.2, 0.1, -0.3)
    for r in (1e-2, 1e-3, 1e-4):
        h = r / 2
        m_p = spherical_mean(f, x, r + h, order=32)[0]
        m_m = spherical_mean(f, x, r - h, order=32)[0] if r - h > 0 else f.eval(x)[0]
        dm = (m_p - m_m) / (2 * h)
        assert abs(dm) <= 10.0 * r


def test_quadrature_order_convergence():
    problem = flat_problem()
    x = flat_point(0.7, 0.2, -0.1)
    a32 = propagate(problem, 1.2, x, order=32).A
    a64 = propagate(problem, 1.2, x, order=64).A
    assert np.max(np.abs(a64 - a32)) < 1e-8


def test_near_zero_radius_guard_consistency():
    problem = flat_problem()
    x = flat_point(0.3, 0.0, 0.1)
    guarded = propagate(problem, 1e-9, x, order=32)  # below the guard
    full = propagate(problem, 1e-6, x, order=32)  # full formula
    fx = problem.f.eval(x)
    assert np.max(np.abs(guarded.A - fx)) < 1e-8
    assert np.max(np.abs(full.A - fx)) < 1e-5
    assert np.max(np.abs(guarded.A_tau - problem.g.eval(x))) < 1e-8


def test_initial_condition_recovery_regular_tau0():
    problem = flat_problem(tau0=2.0)
    x = flat_point(0.4, -0.2, 0.1)
    fx, gx = problem.f.eval(x), problem.g.eval(x)
    errsA, errsG = [], []
    for k in range(5):
        tau = 2.0 + 0.1 * 0.5**k
        s = solve_flat(problem, tau, x, order=48)
        errsA.append(np.max(np.abs(s.A - fx)))
        errsG.append(np.max(np.abs(s.A_tau - gx)))
    assert all(b <= a for a, b in zip(errsA, errsA[1:]))
    assert all(b <= a * 0.75 for a, b in zip(errsG, errsG[1:]))
    # leading error of A is tau * |g(x)|, of A_tau is tau * |lap f(x)|
    assert errsA[-1] < 3e-3 and errsG[-1] < 3e-2


def test_pde_residual_flat_second_order():
    # second-order space-time stencil residual of the solved field shrinks
    # like h^2 (ratio >= 3 per halving)
    problem = flat_problem()
    x0 = np.array([0.9, 0.3, -0.2])
    tau0 = 1.1
    order = 64

    def A1(tau, coords):
        return propagate(problem, tau, flat_point(*coords), order=order).A[0]

    residuals = []
    for h in (0.08, 0.04):
        lap = sum(
            A1(tau0, x0 + h * e) + A1(tau0, x0 - h * e)
            for e in np.eye(3)
        ) - 6 * A1(tau0, x0)
        dtt = A1(tau0 + h, x0) - 2 * A1(tau0, x0) + A1(tau0 - h, x0)
        residuals.append(abs(dtt - lap) / h**2)
    assert residuals[0] / residuals[1] >= 3.0 or residuals[1] < 1e-8


# ---------------------------------------------------------------------------
# hyperbolic solver
# ---------------------------------------------------------------------------


def test_hyperbolic_solver_matches_geodesic_radial_reference():
    c = np.array([0.0, 0.0, 1.0])
    f = GeodesicBump(c, 0.4, AMPS_F)
    g = GeodesicBump(c, 0.4, AMPS_G)
    problem = CauchyProblem(Curvature.HYPERBOLIC, f, g, tau0=0.0)
    for tau in (0.3, 1.5, 4.0):
        for rho_off in (-0.25, 0.0, 0.3):
            rho = tau + rho_off
            if rho <= 0.05:
                continue
            x = hyperbolic_point(0, 0, math.exp(-rho))
            s = propagate(problem, tau, x, order=48)
            ref = geodesic_bump_exact_A(f, g, tau, rho)
            scale = max(np.max(np.abs(ref)), 1e-12)
            assert np.max(np.abs(s.A - ref)) < 2e-4 * scale + 1e-12, (tau, rho)


def test_hyperbolic_solver_far_probes_all_directions():
    c = np.array([0.0, 0.0, 1.0])
    f = GeodesicBump(c, 0.4, AMPS_F)
    g = GeodesicBump(c, 0.4, AMPS_G)
    problem = CauchyProblem(Curvature.HYPERBOLIC, f, g, tau0=0.0)
    tau = 12.0
    rho = 12.1
    ref = geodesic_bump_exact_A(f, g, tau, rho)
    scale = np.max(np.abs(ref))
    for x in (
        hyperbolic_point(0, 0, math.exp(-rho)),  # below
        hyperbolic_point(0, 0, math.exp(rho)),  # above
    ):
        s = propagate(problem, tau, x, order=48)
        assert np.max(np.abs(s.A - ref)) < 1e-3 * scale


def test_solver_preconditions():
    problem = flat_problem(tau0=1.0)
    with pytest.raises(ValueError):
        solve_flat(problem, 1.0, flat_point(0, 0, 0))
    with pytest.raises(ValueError):
        solve_flat(problem, 0.5, flat_point(0, 0, 0))
    with pytest.raises(ValueError):
        solve_hyperbolic(problem, 2.0, flat_point(0, 0, 0))
    with pytest.raises(ValueError):
        solve_from_singularity(problem, 2.0, flat_point(0, 0, 0))
    sing = flat_problem(tau0=0.0)
    with pytest.raises(ValueError):
        solve_from_singularity(sing, 0.0, flat_point(0, 0, 0))


def test_chart_mismatch_in_problem():
    f = make_bump(flat_point(0, 0, 0), 1.0, AMPS_F)
    g = make_bump(flat_point(0, 0, 0), 1.0, AMPS_G)
    with pytest.raises(ValueError):
        CauchyProblem(Curvature.HYPERBOLIC, f, g, tau0=0.0)


# ---------------------------------------------------------------------------
# singular slice
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("make_problem", [flat_problem, hyperbolic_problem])
def test_data_recovery_at_singular_slice(make_problem):
    problem = make_problem()
    if problem.curvature is Curvature.FLAT:
        x = flat_point(0.3, 0.1, 0.0)
    else:
        x = hyperbolic_point(0.05, 0.02, 1.1)
    fx, gx = problem.f.eval(x), problem.g.eval(x)
    errA, errG = [], []
    for tau in (0.1, 0.05, 0.025):
        s = solve_from_singularity(problem, tau, x, order=48)
        errA.append(np.max(np.abs(s.A - fx)))
        errG.append(np.max(np.abs(s.A_tau - gx)))
    assert all(b < a for a, b in zip(errA, errA[1:]))
    assert all(b < a for a, b in zip(errG, errG[1:]))


def test_limit_at_singularity_values():
    problem = flat_problem()
    outside = flat_point(5.0, 0, 0)
    assert np.all(limit_at_singularity(problem, outside)[0] == 0.0)
    center = flat_point(0, 0, 0)
    A0, G0 = limit_at_singularity(problem, center)
    assert np.allclose(A0, np.asarray(AMPS_F) * math.exp(-1.0))
    assert np.allclose(G0, np.asarray(AMPS_G) * math.exp(-1.0))
    with pytest.raises(ValueError):
        limit_at_singularity(flat_problem(tau0=1.0), center)


@pytest.mark.parametrize("make_problem", [flat_problem, hyperbolic_problem])
def test_richardson_limit_agrees_with_analytic(make_problem):
    problem = make_problem()
    if problem.curvature is Curvature.FLAT:
        x = flat_point(0.25, -0.1, 0.05)
    else:
        x = hyperbolic_point(0.03, -0.02, 1.05)
    A0, G0 = limit_at_singularity(problem, x)
    Ae, Ge = richardson_limit(problem, x, order=48)
    assert np.max(np.abs(Ae - A0)) <= 1e-6
    assert np.max(np.abs(Ge - G0)) <= 1e-6


def test_reflection_continuity_through_singularity():
    problem = flat_problem()
    x = flat_point(0.2, 0.0, 0.1)
    gaps = []
    for k in range(3, 9):
        tau = 2.0**-k
        plus = solve_from_singularity(problem, tau, x, order=32)
        minus = solve_from_singularity(problem, -tau, x, order=32)
        gaps.append(np.max(np.abs(plus.A - minus.A)))
    # the gap is 2 tau M_g(tau), linear in tau
    assert all(b < 0.75 * a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 2.5 * 2.0**-8


def test_reflection_antisymmetry_with_zero_f():
    g = make_bump(flat_point(0, 0, 0), 1.0, AMPS_G)
    problem = CauchyProblem(Curvature.FLAT, zero_field(Curvature.FLAT), g, tau0=0.0)
    x = flat_point(0.3, 0.2, -0.1)
    for tau in (0.25, 0.8):
        plus = solve_from_singularity(problem, tau, x, order=32)
        minus = solve_from_singularity(problem, -tau, x, order=32)
        assert np.allclose(minus.A, -plus.A, rtol=0, atol=1e-13)
        assert np.allclose(minus.A_tau, plus.A_tau, rtol=0, atol=1e-13)


def test_reflection_symmetry_with_zero_g():
    f = make_bump(flat_point(0, 0, 0), 1.0, AMPS_F)
    problem = CauchyProblem(Curvature.FLAT, f, zero_field(Curvature.FLAT), tau0=0.0)
    x = flat_point(0.3, 0.2, -0.1)
    plus = solve_from_singularity(problem, 0.6, x, order=32)
    minus = solve_from_singularity(problem, -0.6, x, order=32)
    assert np.allclose(minus.A, plus.A, rtol=0, atol=1e-13)
    assert np.allclose(minus.A_tau, -plus.A_tau, rtol=0, atol=1e-13)


# ---------------------------------------------------------------------------
# batch evaluation
# ---------------------------------------------------------------------------


def test_batch_matches_serial_and_is_deterministic():
    problem = flat_problem()
    points = [(0.5 + 0.3 * k, flat_point(0.2 * k, 0.1, -0.05 * k)) for k in range(8)]
    serial = solve_batch(problem, points, order=16, workers=1)
    threaded = solve_batch(problem, points, order=16, workers=4)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.A_tau, b.A_tau)
