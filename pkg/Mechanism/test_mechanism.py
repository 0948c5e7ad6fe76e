"""
Mechanism Self-Tests
Run directly (python Mechanism/test_mechanism.py) or through pytest.
"""

import sys
from pathlib import Path

import numpy as np
from scipy import special

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.functionals import ContinuousFunctionals, DiscreteFunctionals, functionals_for
from Mechanism.mechanisms import (AbsorptionRegime, DiscreteMechanism, LevyMechanism,
                                  RegimeError, absorption_regime, condition_L,
                                  condition_partial, levy_tail, mechanism_from_dict,
                                  mechanism_to_dict, psi, psi_factored, psi_subordinator,
                                  tail)
from Mechanism.stationary import (mu_binary, mu_discrete, nu_discrete, nu_laplace,
                                  stationarity_residual, stationary_laplace,
                                  stationary_mean)

BINARY = DiscreteMechanism.binary(rho=1.0, c=1.0)
BINARY_DEATHS = DiscreteMechanism(d=1.0, c=1.0, pi={1: 1.0})
FELLER = LevyMechanism.from_uncompensated(1.0, gamma=1.0)
MIXED_SUBORDINATOR = LevyMechanism.from_uncompensated(
    0.5, atoms=[[0.5, 1.0], [2.0, 0.3]], exp_rate=0.7, exp_mean=1.5
)


def _ein(x):
    return special.exp1(x) + np.log(x) + np.euler_gamma


def test_discrete_psi_values():
    assert abs(psi(BINARY, 0.5) + 0.25) < 1e-15
    assert psi(BINARY, 1.0) == 0.0
    assert psi(BINARY_DEATHS, 0.0) == 1.0


def test_discrete_psi_factored_agrees():
    mech = DiscreteMechanism(d=0.3, c=2.0, pi={1: 0.5, 2: 0.25, 5: 1.0})
    grid = np.linspace(0.0, 1.0, 101)
    expanded = np.polynomial.polynomial.polyval(grid, mech.psi_coefficients())
    factored = psi_factored(mech, grid)
    scale = np.maximum(np.abs(expanded), 1e-300)
    assert np.all(np.abs(expanded - factored) <= 1e-12 * np.maximum(scale, 1e-3))


def test_psi_domain_errors():
    for mech, arg in ((BINARY, 1.5), (BINARY, -0.1), (FELLER, -1.0)):
        try:
            psi(mech, arg)
        except ValueError:
            continue
        raise AssertionError(f"psi accepted {arg}")


def test_continuous_psi_brownian():
    lam = np.linspace(0.0, 5.0, 11)
    assert np.allclose(psi(FELLER, lam), lam**2 / 2 - lam, atol=1e-14)
    assert psi(FELLER, 0.0) == 0.0


def test_subordinator_forms_agree():
    lam = np.linspace(0.0, 10.0, 41)
    compensated = psi(MIXED_SUBORDINATOR, lam)
    subordinator = psi_subordinator(MIXED_SUBORDINATOR, lam)
    assert MIXED_SUBORDINATOR.is_subordinator
    assert abs(MIXED_SUBORDINATOR.delta - 0.5) < 1e-14
    assert np.allclose(compensated, subordinator, rtol=1e-12, atol=1e-13)


def test_tails():
    assert tail(BINARY, 1) == 1.0 and tail(BINARY, 2) == 0.0
    mech = DiscreteMechanism(d=0.0, c=1.0, pi={1: 0.5, 3: 0.5})
    assert tail(mech, 2) == 0.5 and tail(mech, 3) == 0.5
    exp_jumps = LevyMechanism(alpha=0.0, exp_rate=2.0, exp_mean=1.0)
    assert abs(levy_tail(exp_jumps, 1.3) - 2.0 * np.exp(-1.3)) < 1e-15


def test_condition_L():
    assert condition_L(BINARY)
    assert condition_L(LevyMechanism(alpha=0.0, exp_rate=1.0))
    assert condition_L(LevyMechanism(alpha=0.0, atoms=[[1e6, 1.0]]))


def test_condition_partial():
    assert condition_partial(LevyMechanism.from_uncompensated(0.1, atoms=[[1.0, 0.5]]), 1.0)
    assert condition_partial(LevyMechanism.from_uncompensated(0.0, atoms=[[1.0, 2.0]]), 1.0)
    assert not condition_partial(LevyMechanism.from_uncompensated(0.0, atoms=[[1.0, 0.5]]), 1.0)
    assert not condition_partial(LevyMechanism.from_uncompensated(0.0, atoms=[[1.0, 1.0]]), 1.0)
    try:
        condition_partial(FELLER, 1.0)
    except RegimeError:
        pass
    else:
        raise AssertionError("condition (d) accepted a non-subordinator")


def test_absorption_regime():
    assert absorption_regime(FELLER) is AbsorptionRegime.EXTINCTION_WITH_ABSORPTION
    no_absorption = LevyMechanism.from_uncompensated(-1.0, atoms=[[1.0, 0.5]])
    assert absorption_regime(no_absorption) is AbsorptionRegime.EXTINCTION_WITHOUT_ABSORPTION
    subordinator = LevyMechanism.from_uncompensated(1.0)
    assert absorption_regime(subordinator) is AbsorptionRegime.RECURRENT


def test_discrete_exp_m_closed_forms():
    funcs = DiscreteFunctionals(BINARY)
    assert abs(funcs.exp_m(0.5) - np.exp(-0.5)) < 1e-15
    deaths = DiscreteFunctionals(BINARY_DEATHS)
    for s in (0.01, 0.2, 0.7, 1.0):
        assert abs(deaths.exp_m(s) - np.exp(s - 1.0) / s) < 1e-13 * deaths.exp_m(s)


def test_discrete_m_matches_quadrature():
    mech = DiscreteMechanism(d=0.4, c=1.5, pi={1: 0.7, 2: 0.2, 4: 0.1})
    funcs = DiscreteFunctionals(mech)
    for s in np.linspace(0.01, 1.0, 12):
        assert abs(funcs.m(s) - funcs.m_quadrature(s)) < 10 * config.TOL


def test_continuous_m_closed_form():
    funcs = ContinuousFunctionals(FELLER, 1.0)
    for lam in (0.0, 0.5, 2.0, 7.0):
        assert abs(funcs.m(lam) - (lam**2 / 4 - lam)) < 1e-12


def test_continuous_m_routes_agree():
    quad = ContinuousFunctionals(MIXED_SUBORDINATOR, 1.3)
    sub = ContinuousFunctionals(MIXED_SUBORDINATOR, 1.3, route='subordinator')
    for lam in (0.1, 1.0, 4.0, 25.0):
        closed = -(0.5 * lam + 1.0 * _ein(0.5 * lam) + 0.3 * _ein(2.0 * lam)
                   + 0.7 * np.log1p(lam * 1.5)) / 1.3
        budget = 10 * config.TOL * max(1.0, abs(closed))
        assert abs(quad.m(lam) - sub.m(lam)) < budget
        assert abs(quad.m(lam) - closed) < budget


def test_xi_values():
    assert abs(DiscreteFunctionals(BINARY).xi() - (1.0 - np.exp(-1.0))) < 1e-12
    assert DiscreteFunctionals(BINARY_DEATHS).xi() == np.inf
    assert ContinuousFunctionals(FELLER, 1.0).xi() == np.inf


def test_theta_monotone():
    discrete = DiscreteFunctionals(DiscreteMechanism(d=0.5, c=1.0, pi={1: 1.0}))
    values = [discrete.theta(s) for s in (0.0, 0.1, 0.5, 0.9, 1.0)]
    assert all(a > b for a, b in zip(values, values[1:]))
    continuous = ContinuousFunctionals(FELLER, 1.0)
    values = [continuous.theta(lam) for lam in (0.0, 0.5, 1.0, 3.0)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_phi_inverts_theta():
    discrete = DiscreteFunctionals(DiscreteMechanism(d=0.5, c=1.0, pi={1: 1.0, 2: 0.5}))
    for s in (1e-4, 0.05, 0.5, 0.99):
        assert abs(discrete.phi(discrete.theta(s)) - s) < 10 * config.TOL_PHI * s
    continuous = ContinuousFunctionals(FELLER, 1.0)
    for lam in (0.01, 0.5, 3.0):
        assert abs(continuous.phi(continuous.theta(lam)) - lam) < 10 * config.TOL_PHI * lam


def test_phi_beyond_xi_raises():
    funcs = DiscreteFunctionals(BINARY)
    try:
        funcs.phi(funcs.xi())
    except ValueError:
        pass
    else:
        raise AssertionError("phi accepted t = xi")


def test_log_coordinate_matches_theta():
    funcs = DiscreteFunctionals(DiscreteMechanism(d=0.5, c=1.0, pi={1: 1.0}))
    for z in (-5.0, 0.0, 3.0):
        s = funcs.x_of_z(z)
        assert abs(funcs.s_of_z(z) - funcs.theta(s)) < 1e-9
        assert abs(funcs.gap_of_z(z) - (funcs.xi() - funcs.theta(s))) < 1e-9
    continuous = ContinuousFunctionals(FELLER, 1.0)
    assert abs(continuous.s_of_z(0.5) - continuous.theta(np.exp(0.5))) < 1e-9


def test_r_spot_value():
    funcs = DiscreteFunctionals(BINARY)
    s = funcs.theta(0.5)
    assert abs(funcs.r_func(s)**2 - 4.0 * np.e) < 1e-7


def test_r_small_s_asymptotic():
    funcs = DiscreteFunctionals(BINARY_DEATHS)
    s = 1e-6
    assert abs(funcs.r_func(s) / funcs.r_small_s(s) - 1.0) < 1e-3
    continuous = ContinuousFunctionals(FELLER, 1.0)
    assert abs(continuous.r_func(s) / continuous.r_small_s(s) - 1.0) < 1e-3


def test_r_limit_at_xi():
    assert DiscreteFunctionals(DiscreteMechanism(d=0.2, c=1.0, pi={1: 1.0})).r_limit_at_xi() == np.inf
    half = DiscreteFunctionals(DiscreteMechanism(d=0.5, c=1.0, pi={1: 1.0}))
    assert abs(half.r_limit_at_xi() - np.e) < 1e-12
    assert DiscreteFunctionals(BINARY_DEATHS).r_limit_at_xi() == 0.0


def test_nu_discrete_binary():
    nu = nu_discrete(BINARY, 10)
    assert abs(nu[0] - np.exp(-1.0)) < 1e-15
    assert abs(nu[1] - np.exp(-1.0)) < 1e-15
    assert abs(nu[2] - np.exp(-1.0) / 2.0) < 1e-15
    half = nu_discrete(DiscreteMechanism.binary(rho=1.0, c=2.0), 6)
    expected = [np.exp(-0.5) * 0.5**i / special.factorial(i) for i in range(6)]
    assert np.allclose(half, expected, rtol=1e-13, atol=0)


def test_nu_deficit_decreases():
    deficits = [abs(np.sum(nu_discrete(BINARY, n)) - 1.0) for n in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(deficits, deficits[1:]))
    assert deficits[-1] < 1e-12


def test_nu_requires_no_deaths():
    try:
        nu_discrete(BINARY_DEATHS, 5)
    except RegimeError:
        pass
    else:
        raise AssertionError("nu_discrete accepted d > 0")


def test_mu_binary_values():
    assert abs(mu_binary(1.0, 1.0, 1) - 1.0 / (np.e - 1.0)) < 1e-12
    assert abs(mu_binary(1.0, 1.0, 2) - 0.29099) < 1e-5
    assert abs(mu_binary(1.0, 1.0, 3) - 0.09700) < 1e-5


def test_mu_series_matches_closed_form():
    n = config.DEFAULT_N_TERMS
    series = mu_discrete(BINARY, n)
    closed = mu_binary(1.0, 1.0, np.arange(1, n + 1))
    assert np.max(np.abs(series - closed)) < config.SERIES_VS_CLOSED_MAX
    assert abs(series.sum() - 1.0) < config.TOL


def test_mu_insufficient_terms():
    try:
        mu_discrete(BINARY, 3)
    except ValueError:
        pass
    else:
        raise AssertionError("N = 3 should leave too much stationary mass")


def test_stationary_drift_only():
    mech = LevyMechanism.from_uncompensated(1.0)
    assert nu_laplace(mech, 0.0, 1.0) == 1.0
    assert abs(nu_laplace(mech, 2.0, 1.0) - np.exp(-2.0)) < 1e-14
    assert abs(stationary_mean(mech, 1.0) - 1.0) < 1e-8
    assert abs(stationary_laplace(mech, 1.0, 1.0) - np.exp(-1.0)) < 1e-8


def test_stationary_slow_power_tail():
    # exp(m) = (1 + l)^{-p} for unit exponential jumps of total rate p and c = 1
    for p in (1.01, 1.5):
        mech = LevyMechanism.from_uncompensated(0.0, exp_rate=p, exp_mean=1.0)
        assert abs(stationary_mean(mech, 1.0) / (p - 1.0) - 1.0) < 1e-8
        assert abs(stationary_laplace(mech, 3.0, 1.0) - 4.0 ** (1.0 - p)) < 1e-8

        atom = LevyMechanism.from_uncompensated(0.0, atoms=[(1.0, p)])
        mean = stationary_mean(atom, 1.0)
        assert 0.0 < mean < 1.0
        assert 0.0 < stationary_laplace(atom, 1.0, 1.0) < 1.0
        assert abs(stationary_laplace(atom, 0.0, 1.0) - 1.0) < 1e-12


def test_stationary_mean_null_recurrent():
    mech = LevyMechanism.from_uncompensated(0.0, atoms=[[1.0, 0.5]])
    try:
        stationary_mean(mech, 1.0)
    except RegimeError:
        pass
    else:
        raise AssertionError("divergent stationary mean returned a number")


def test_stationarity_residual():
    assert stationarity_residual(MIXED_SUBORDINATOR, [0.3, 1.0, 3.0], c=1.0) < 1e-6
    assert stationarity_residual(DiscreteMechanism(d=0.2, c=1.0, pi={1: 1.0, 2: 0.3}),
                                 [0.1, 0.5, 0.9]) < 1e-6


def test_mechanism_dict_round_trip():
    mech, c = mechanism_from_dict({'setting': 'discrete', 'd': 0.5, 'c': 2.0,
                                   'pi': {'1': 1.0, '3': 0.25}})
    again, _ = mechanism_from_dict(mechanism_to_dict(mech))
    assert again == mech and c == 2.0
    levy, c = mechanism_from_dict({'setting': 'continuous', 'b': 1.0, 'gamma': 0.5, 'c': 1.0,
                                   'atoms': [[0.5, 2.0]], 'exp_jumps': {'rate': 1.0, 'mean': 2.0}})
    again, c_again = mechanism_from_dict(mechanism_to_dict(levy, c))
    assert again == levy and c_again == c
    assert abs(levy.drift_b - 1.0) < 1e-14


def test_functionals_factory():
    assert isinstance(functionals_for(BINARY), DiscreteFunctionals)
    assert isinstance(functionals_for(FELLER, 1.0), ContinuousFunctionals)
    try:
        functionals_for(FELLER)
    except ValueError:
        pass
    else:
        raise AssertionError("continuous functionals built without c")


if __name__ == "__main__":
    print("Testing Mechanism")
    print("=" * 60)
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            test()
            print(f"✓ {name}")
