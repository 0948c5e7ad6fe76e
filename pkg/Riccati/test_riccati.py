"""
Riccati Self-Tests
Run directly (python Riccati/test_riccati.py) or through pytest.
"""

import sys
from functools import lru_cache
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.mechanisms import DiscreteMechanism, LevyMechanism, RegimeError
from Riccati.solver import ShootingError, integral_wq, solve_wq
from Riccati.transforms import (entrance_law, expected_Ta, expected_Ta_routes,
                                integration_by_parts_identity, laplace_Ta_from_x,
                                laplace_Ta_infinity, resolvent_G)

FELLER = LevyMechanism.from_uncompensated(1.0, gamma=1.0)
BINARY_DEATHS = DiscreteMechanism(d=1.0, c=1.0, pi={1: 1.0})
FINITE_XI = DiscreteMechanism(d=1.5, c=2.0, pi={1: 1.0})
MECHANISMS = {'feller': (FELLER, 1.0), 'binary': (BINARY_DEATHS, None),
              'finite_xi': (FINITE_XI, None)}


@lru_cache(maxsize=None)
def _solved(name, q, ratio=config.RICCATI_SCHEDULE_RATIO):
    mech, c = MECHANISMS[name]
    return solve_wq(mech, q, c=c, schedule_ratio=ratio)


def _raises(exc, func, *args, **kwargs):
    try:
        func(*args, **kwargs)
    except exc:
        return
    raise AssertionError(f"{func.__name__} did not raise {exc.__name__}")


# ============================================================================
# SOLVER
# ============================================================================

def test_wq_positive_and_vanishing():
    for name in MECHANISMS:
        sol = _solved(name, 1.0)
        assert sol.diagnostics['positive'], name
        assert np.all(sol.w[:-1] > 0) and sol.w[-1] == 0.0
        assert np.all(np.diff(sol.s) > 0) and sol.s[-1] < sol.xi
        assert sol.max_residual < config.TOL_RES, (name, sol.max_residual)


def test_finite_xi_endpoints_approach_xi():
    sol = _solved('finite_xi', 1.0)
    assert np.isfinite(sol.xi)
    endpoints = sol.diagnostics['endpoints']
    assert all(a < b for a, b in zip(endpoints, endpoints[1:]))
    assert endpoints[-1] < sol.xi
    gaps = [sol.xi - T for T in endpoints]
    assert abs(gaps[1] / gaps[0] - 0.5) < 1e-6


def test_wq_increases_with_q():
    grid = np.linspace(-20.0, 0.0, 41)
    for name in ('feller', 'binary'):
        low, high = _solved(name, 1.0), _solved(name, 2.0)
        assert all(high.w_of_z(z) > low.w_of_z(z) for z in grid), name


def test_shooting_schedules_agree():
    grid = np.linspace(-20.0, 0.0, 41)
    for name in ('feller', 'binary'):
        halving, thirds = _solved(name, 1.0), _solved(name, 1.0, 3.0)
        gap = max(abs(halving.w_of_z(z) - thirds.w_of_z(z)) for z in grid)
        assert gap < config.SCHEDULE_AGREEMENT_MAX, (name, gap)


def test_shooting_needs_refinements():
    _raises(ShootingError, solve_wq, FELLER, 1.0, c=1.0, k_max=1)


def test_solver_domain_errors():
    _raises(ValueError, solve_wq, FELLER, 0.0, c=1.0)
    _raises(ValueError, solve_wq, FELLER, 1.0, c=1.0, schedule_ratio=1.0)
    _raises(RegimeError, solve_wq, DiscreteMechanism.binary(rho=1.0, c=1.0), 1.0)
    _raises(RegimeError, solve_wq, LevyMechanism.from_uncompensated(1.0), 1.0, c=1.0)


def test_integral_wq():
    sol = _solved('feller', 1.0)
    assert integral_wq(sol, 0.0) == 0.0
    assert 0.0 < integral_wq(sol, 1e-14) < 1e-12
    assert integral_wq(sol, sol.xi) == sol.W_total
    i = len(sol.s) // 2
    assert abs(integral_wq(sol, sol.s[i]) - sol.W[i]) < 1e-8
    assert np.all(np.diff(sol.W) >= 0)
    _raises(ValueError, integral_wq, sol, -1.0)

    finite = _solved('finite_xi', 1.0)
    _raises(ValueError, integral_wq, finite, 2.0 * finite.xi)


# ============================================================================
# TRANSFORMS
# ============================================================================

def test_laplace_infinity_decreases_in_q():
    values = [laplace_Ta_infinity(FELLER, q, c=1.0, solution=_solved('feller', q))
              for q in (1.0, 2.0)]
    assert 1.0 > values[0] > values[1] > 0.0
    _raises(ValueError, laplace_Ta_infinity, FELLER, 2.0, c=1.0, solution=_solved('feller', 1.0))


def test_entrance_law_limits():
    sol = _solved('feller', 1.0)
    at_infinity = laplace_Ta_infinity(FELLER, 1.0, c=1.0, solution=sol)
    assert entrance_law(FELLER, 1.0, 0.0, c=1.0, solution=sol) == 1.0
    assert abs(entrance_law(FELLER, 1.0, 1e6, c=1.0, solution=sol) - at_infinity) < 1e-12

    discrete = _solved('binary', 1.0)
    assert entrance_law(BINARY_DEATHS, 1.0, 1.0, solution=discrete) == 1.0
    assert entrance_law(BINARY_DEATHS, 1.0, 0.0, solution=discrete) == \
        laplace_Ta_infinity(BINARY_DEATHS, 1.0, solution=discrete)
    _raises(ValueError, entrance_law, BINARY_DEATHS, 1.0, 1.5, solution=discrete)


def test_entrance_law_completely_monotone():
    sol = _solved('feller', 1.0)
    grid = np.linspace(0.0, 3.0, 13)
    values = np.array([entrance_law(FELLER, 1.0, lam, c=1.0, solution=sol) for lam in grid])
    for order in (1, 2, 3):
        assert np.all((-1) ** order * np.diff(values, n=order) >= -1e-10), order


def test_laplace_from_x():
    sol = _solved('feller', 1.0)
    at_infinity = laplace_Ta_infinity(FELLER, 1.0, c=1.0, solution=sol)
    assert laplace_Ta_from_x(FELLER, 1.0, 0.0, c=1.0, solution=sol) == 1.0
    values = [laplace_Ta_from_x(FELLER, 1.0, x, c=1.0, solution=sol) for x in (1.0, 10.0)]
    assert 1.0 > values[0] > values[1] > at_infinity
    from_infinity = laplace_Ta_from_x(FELLER, 1.0, np.inf, c=1.0, solution=sol)
    assert abs(from_infinity - at_infinity) < 1e-5


def test_discrete_laplace_from_x():
    sol = _solved('binary', 1.0)
    at_infinity = laplace_Ta_infinity(BINARY_DEATHS, 1.0, solution=sol)
    one, five = (laplace_Ta_from_x(BINARY_DEATHS, 1.0, x, solution=sol) for x in (1, 5))
    assert 1.0 > one > five > at_infinity


def test_resolvent_pins():
    sol = _solved('feller', 1.0)
    assert resolvent_G(FELLER, 1.0, 0.0, 2.0, c=1.0, solution=sol) == 1.0
    assert resolvent_G(FELLER, 1.0, 1.0, 0.0, c=1.0, solution=sol) == 1.0
    value = resolvent_G(FELLER, 1.0, 1.0, 1.0, c=1.0, solution=sol)
    assert 0.0 < value < 1.0
    _raises(RegimeError, resolvent_G, BINARY_DEATHS, 1.0, 1.0, 1.0)
    _raises(ValueError, resolvent_G, FELLER, 1.0, 1.0, -1.0, c=1.0, solution=sol)


def test_resolvent_decreases_toward_laplace():
    sol = _solved('feller', 1.0)
    target = laplace_Ta_from_x(FELLER, 1.0, 1.0, c=1.0, solution=sol)
    values = [resolvent_G(FELLER, 1.0, 1.0, lam, c=1.0, solution=sol)
              for lam in (0.5, 2.0, 1e6)]
    assert values[0] > values[1] > values[2]
    assert abs(values[2] - target) < 1e-4


def test_integration_by_parts_identity():
    for name in ('feller', 'binary'):
        sol = _solved(name, 1.0)
        args = config.IDENTITY_LAMBDAS if name == 'feller' else (0.25, 0.5, 0.75)
        for arg in args:
            left, right = integration_by_parts_identity(sol, arg)
            assert abs(left - right) <= config.IDENTITY_REL_MAX * abs(right), (name, arg)


def test_expected_Ta_monotone_in_x():
    assert expected_Ta(FELLER, 0.0, c=1.0) == 0.0
    values = [expected_Ta(FELLER, x, c=1.0) for x in (1.0, 10.0, np.inf)]
    assert 0.0 < values[0] < values[1] < values[2]
    discrete = [expected_Ta(BINARY_DEATHS, x) for x in (1, 10, np.inf)]
    assert 0.0 < discrete[0] < discrete[1] < discrete[2]


def test_expected_Ta_routes_agree():
    for mech, c in ((BINARY_DEATHS, None), (FELLER, 1.0)):
        for x in (10.0, np.inf):
            by_m, by_s = expected_Ta_routes(mech, x, c=c)
            assert by_m > 0.0
            assert abs(by_m - by_s) <= 1e-8 * by_m, (mech, x, by_m, by_s)
            assert expected_Ta(mech, x, c=c) == by_m
    assert expected_Ta_routes(FELLER, 0.0, c=1.0) == (0.0, 0.0)


def test_expected_Ta_single_start_closed_form():
    # Pure deaths at rate d from one individual with no births: E_1(T_a) = 1/d
    mech = DiscreteMechanism(d=2.0, c=1.0, pi={})
    assert abs(expected_Ta(mech, 1) - 0.5) < 1e-8


def test_expected_Ta_is_laplace_slope():
    q = 0.005
    slope = lambda p: -np.log(laplace_Ta_infinity(BINARY_DEATHS, p)) / p
    richardson = 2.0 * slope(q) - slope(2.0 * q)
    expected = expected_Ta(BINARY_DEATHS, np.inf)
    assert abs(richardson - expected) < 1e-3 * expected


def test_transform_regime_errors():
    no_deaths = DiscreteMechanism.binary(rho=1.0, c=1.0)
    no_absorption = LevyMechanism.from_uncompensated(-1.0, atoms=[[1.0, 0.5]])
    _raises(RegimeError, expected_Ta, no_deaths, 1)
    _raises(RegimeError, expected_Ta, no_absorption, 1.0, c=1.0)
    _raises(RegimeError, laplace_Ta_infinity, no_absorption, 1.0, c=1.0)
    _raises(ValueError, expected_Ta, FELLER, -1.0, c=1.0)


if __name__ == "__main__":
    print("Testing Riccati")
    print("=" * 60)
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            test()
            print(f"✓ {name}")
