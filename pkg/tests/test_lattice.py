import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvhedge import ModelParams, PdeGrid, make_claim, solve_surfaces
from mvhedge.lattice import (
    ControlGridError,
    LatticeSpec,
    dp_coefficients,
    dp_policy,
    dp_value,
)
from mvhedge.value_coeff import NuQuery, solve_nu

from conftest import BASE

ZERO = make_claim("zero")
XS = np.array([-1.0, 0.0, 1.0, 2.0])


def nu(m):
    return solve_nu(NuQuery(m.rho, 1 - m.rho**2 + m.theta**2 * m.T))


def quad_fit_residual(x, v):
    coef = np.polyfit(x, v, 2)
    return np.max(np.abs(np.polyval(coef, x) - v)), coef


def test_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(0)
    with pytest.raises(ValueError):
        LatticeSpec(13, "exhaustive", (-1.0, 0.0, 1.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        LatticeSpec(4, "exhaustive", (-1.0, 0.0, 2.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        dp_coefficients(LatticeSpec.exhaustive(2), BASE, ZERO)


def test_zero_claim_zero_wealth():
    assert dp_value(LatticeSpec(), BASE, ZERO, 0.0) == 0.0
    pol = dp_policy(LatticeSpec(), BASE, ZERO)
    assert all(np.all(pol.control(k, j, 0.0) == 0.0) for k in range(12) for j in range(k + 1))
    spec = LatticeSpec.exhaustive(4, n_controls=401, n_x=41)
    assert dp_value(spec, BASE, ZERO, 0.0) == 0.0
    ex = dp_policy(spec, BASE, ZERO)
    assert all(ex.control(k, j, 0.0) == 0.0 for k in range(4) for j in range(k + 1))


def test_zero_claim_converges_to_nu():
    target = nu(BASE)
    gaps = [abs(dp_value(LatticeSpec(n), BASE, ZERO, 1.0) - target) for n in (6, 12, 24, 48)]
    assert gaps[1] / target < 0.02
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    # first order in the step size
    assert gaps[2] / gaps[3] == pytest.approx(2.0, rel=0.15)


@pytest.mark.parametrize("name,params", [("zero", {}), ("linear", {}), ("call", {}),
                                         ("linear", {"a": 0.0, "b": 1.0})])
def test_value_is_quadratic_in_wealth(name, params):
    c = make_claim(name, **params)
    v = dp_value(LatticeSpec(), BASE, c, XS)
    resid, _ = quad_fit_residual(XS, v)
    assert resid < 1e-6


@settings(max_examples=15)
@given(st.floats(0.0, 1.5), st.floats(-0.95, 0.95), st.floats(0.5, 2.0))
def test_nonnegative_without_correction(theta, rho, sigma):
    # claims with no unobserved part carry no correction term, so the value is a
    # nonnegative quadratic in wealth
    m = ModelParams(theta * sigma, sigma, rho, 1.0)
    for c in (ZERO, make_claim("call", underlying="w")):
        c2, c1, c0 = dp_coefficients(LatticeSpec(8), m, c)
        assert c2 > 0
        assert c1 * c1 <= c0 * c2 + 1e-10


def test_shifted_nonnegativity_with_correction():
    # for H = x the value may be negative; adding E(H - H_hat_T)^2 restores it
    c2, c1, c0 = dp_coefficients(LatticeSpec(), BASE, make_claim("linear"))
    shift = (1 - BASE.rho**2) * BASE.T
    assert c0 < 0
    assert c1 * c1 <= (c0 + shift) * c2 + 1e-10


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_policy_slope_matches_pde(sigma):
    m = ModelParams(0.5 * sigma, sigma, 0.5, 1.0)
    s = solve_surfaces(ZERO, m.theta, m.context(), PdeGrid.centered(m.T))
    v2, z2 = s.interp("v2", 0.0, 0.0), s.interp("z2", 0.0, 0.0)
    r = m.rho
    slope = (m.theta * v2 + r * z2) / (sigma * (1 - r * r + r * r * v2))
    pol = dp_policy(LatticeSpec(), m, ZERO)
    assert pol.slope[0][0] == pytest.approx(slope, rel=0.05)
    # the control is affine in wealth at every node
    x = np.array([-1.0, 0.5, 2.0])
    u = pol.control(3, 1, x)
    assert np.allclose(np.diff(u) / np.diff(x), -pol.slope[3][1], atol=1e-12)


def test_exhaustive_agrees_with_quadratic():
    c = make_claim("linear")
    n = 6
    ex = dp_value(LatticeSpec.exhaustive(n, n_controls=801), BASE, c, XS)
    qd = dp_value(LatticeSpec(n), BASE, c, XS)
    shift = (1 - BASE.rho**2) * BASE.T  # compare shifted values, which stay away from zero
    assert np.all(ex >= qd - 1e-9)  # a coarser control set cannot do better
    assert np.max(np.abs(ex - qd) / (qd + shift)) < 0.02


def test_exhaustive_policy_nearly_affine():
    # the argmin is resolved to the control step plus the wealth step times the slope
    spec = LatticeSpec.exhaustive(4, n_controls=1601, x_max=3.0, n_x=241)
    pol = dp_policy(spec, BASE, ZERO)
    x = np.linspace(-2, 2, 9)
    for k, j in ((1, 1), (3, 2)):
        u = pol.control(k, j, x)
        coef = np.polyfit(x, u, 1)
        tol = 16.0 / 1600 + abs(coef[0]) * 6.0 / 240
        assert np.max(np.abs(np.polyval(coef, x) - u)) <= tol


def test_exhaustive_monotone_under_refinement():
    c = make_claim("call")
    vals = [dp_value(LatticeSpec.exhaustive(4, n_controls=k, n_x=41), BASE, c, XS)
            for k in (201, 401, 801)]  # nested grids on [-8, 8]
    assert np.all(vals[1] <= vals[0] + 1e-12)
    assert np.all(vals[2] <= vals[1] + 1e-12)


def test_narrow_control_grid_is_reported():
    spec = LatticeSpec.exhaustive(4, pi_max=0.1, n_controls=21, n_x=41)
    with pytest.raises(ControlGridError):
        dp_value(spec, BASE, ZERO, 1.0)
    # non-strict mode returns the constrained value
    assert dp_value(spec, BASE, ZERO, 1.0, strict=False) > dp_value(LatticeSpec(4), BASE, ZERO, 1.0)


def test_exhaustive_rejects_wealth_off_grid():
    with pytest.raises(ValueError):
        dp_value(LatticeSpec.exhaustive(2, n_controls=101, n_x=21), BASE, ZERO, 10.0)


def test_state_dependent_theta():
    const = ModelParams(0.5, 1.0, 0.5, 1.0, theta_fn=lambda t, y: 0.5 + 0.0 * y)
    assert dp_coefficients(LatticeSpec(), const, ZERO) == pytest.approx(
        dp_coefficients(LatticeSpec(), BASE, ZERO), abs=1e-15)
    flat = ModelParams(0.5, 1.0, 0.5, 1.0, theta_fn=lambda t, y: 0.0 * y)
    assert dp_coefficients(LatticeSpec(), flat, ZERO)[0] == pytest.approx(1.0, abs=1e-14)
