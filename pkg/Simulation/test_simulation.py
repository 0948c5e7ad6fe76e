"""
Simulation Self-Tests
Run directly (python Simulation/test_simulation.py) or through pytest.
Monte Carlo checks use small seeded batches and tolerances of several
standard errors.
"""

import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.mechanisms import DiscreteMechanism, LevyMechanism, RegimeError, mechanism_from_dict
from Mechanism.stationary import mu_binary
from Numerics.streams import RandomStream, replica_stream
from Simulation.continuous_process import (EULER_LABEL, dynkin_exponential_check,
                                           feller_logistic_batch, lamperti_extinction_samples,
                                           null_recurrence_profile, resolvent_monte_carlo,
                                           simulate_feller_logistic)
from Simulation.discrete_process import (_extinction_kernel, birth_before_death_prob,
                                         expected_Ta_infinity_discrete, extinction_samples,
                                         holding_times, logistic_ode, occupation_distribution,
                                         rates, scaled_family, simulate, total_rate)
from Simulation.lamperti import (OUPath, compute_eta, lamperti_forward, lamperti_inverse,
                                 simulate_lamperti, simulate_ou, z_at)
from Simulation.replicas import run_replicas
from Simulation.trajectory import ExtinctionBatch, Trajectory

BINARY = DiscreteMechanism.binary(rho=1.0, c=1.0)
BINARY_DEATHS = DiscreteMechanism(d=1.0, c=1.0, pi={1: 1.0})
FELLER = LevyMechanism.from_uncompensated(1.0, gamma=1.0)
PURE_DECAY = LevyMechanism.from_uncompensated(0.0)
NULL_RECURRENT, _ = mechanism_from_dict(config.NULL_RECURRENT_MECHANISM)
NO_ABSORPTION, _ = mechanism_from_dict(config.NO_ABSORPTION_MECHANISM)
SEED = 12345


def _cfg(**overrides):
    return config.get_run_config(seed=SEED, **overrides)


def _raises(exc, func, *args, **kwargs):
    try:
        func(*args, **kwargs)
    except exc:
        return True
    return False


def _ou_endpoint(stream, mech, c, x0, cfg):
    return simulate_ou(mech, c, x0, cfg, stream).values[-1]


# ============================================================================
# TRAJECTORIES AND REPLICAS
# ============================================================================

def test_trajectory_state_at():
    path = Trajectory([0.0, 1.0, 2.5], [3, 2, 0], absorbed_at=2.5)
    assert path.state_at(0.5) == 3
    assert path.state_at(1.0) == 2
    assert path.state_at(7.0) == 0
    assert _raises(ValueError, Trajectory, [0.0, 0.0], [1, 1])
    assert _raises(ValueError, Trajectory, [0.0, 1.0], [1])


def test_extinction_batch_laplace_counts_censored_as_zero():
    batch = ExtinctionBatch([0.0, 1.0, 5.0], [False, False, True], SEED, 1, 5.0)
    mean, _ = batch.laplace(1.0)
    assert abs(mean - (1.0 + np.exp(-1.0)) / 3.0) < 1e-15
    assert abs(batch.censored_fraction - 1.0 / 3.0) < 1e-15


def test_replicas_match_across_workers():
    cfg = _cfg(replicas=8, t_max=50.0)
    args = (BINARY_DEATHS, 5, cfg.t_max, cfg.z_cap)
    sequential = run_replicas(_extinction_kernel, 8, SEED, labels=(1,), args=args, workers=1)
    parallel = run_replicas(_extinction_kernel, 8, SEED, labels=(1,), args=args, workers=2)
    assert sequential == parallel


# ============================================================================
# DISCRETE PROCESS
# ============================================================================

def test_rates_and_total_rate():
    assert rates(BINARY_DEATHS, 0) == []
    assert sorted(rates(BINARY_DEATHS, 3)) == [(2, 9.0), (4, 3.0)]
    assert total_rate(BINARY_DEATHS, 3) == 12.0
    assert _raises(ValueError, rates, BINARY_DEATHS, -1)


def test_birth_before_death_prob_exact():
    assert birth_before_death_prob(BINARY_DEATHS, 2) == Fraction(1, 3)
    assert birth_before_death_prob(BINARY, 1) == Fraction(1, 1)


def test_simulate_reproducible_and_absorbed():
    cfg = _cfg(t_max=1000.0)
    stream = RandomStream(SEED, (0,))
    first = simulate(BINARY_DEATHS, 10, cfg, stream)
    second = simulate(BINARY_DEATHS, 10, cfg, stream)
    assert np.array_equal(first.times, second.times)
    assert np.array_equal(first.states, second.states)
    assert first.final_state == 0 and first.absorbed_at == first.final_time
    assert np.all(np.abs(np.diff(first.states)) >= 1)


def test_occupation_close_to_conditioned_poisson():
    cfg = _cfg(t_max=5000.0)
    occupation = occupation_distribution(BINARY, 1, cfg)
    states = np.arange(1, max(occupation.size, 15) + 1)
    padded = np.zeros(states.size)
    padded[:occupation.size] = occupation
    tv = 0.5 * np.sum(np.abs(padded - mu_binary(1.0, 1.0, states)))
    assert tv < 0.06


def test_extinction_needs_deaths():
    assert _raises(RegimeError, extinction_samples, BINARY, 5, _cfg(replicas=2))
    assert _raises(RegimeError, occupation_distribution, BINARY_DEATHS, 1, _cfg())


def test_occupation_from_zero_is_rejected():
    try:
        occupation_distribution(BINARY, 0, _cfg())
    except ValueError as e:
        assert "absorbing" in str(e)
    else:
        raise AssertionError("x0 = 0 produced an occupation law")


def test_extinction_samples_small_batch():
    batch = extinction_samples(BINARY_DEATHS, 20, _cfg(replicas=50, t_max=1000.0))
    assert batch.n_replicas == 50
    assert batch.censored_fraction == 0.0
    assert np.all(batch.samples > 0)


def test_expected_Ta_from_infinity_matches_large_start():
    closed = expected_Ta_infinity_discrete(BINARY_DEATHS)
    batch = extinction_samples(BINARY_DEATHS, 200, _cfg(replicas=400, t_max=1000.0))
    assert batch.censored_fraction == 0.0
    assert abs(batch.mean() - closed) < 5.0 * batch.mean_stderr() + 0.01 * closed
    assert _raises(RegimeError, expected_Ta_infinity_discrete, BINARY)


def test_holding_times_mean():
    durations = holding_times(BINARY_DEATHS, 2, 2, _cfg(replicas=300, t_max=100.0))
    expected = 1.0 / total_rate(BINARY_DEATHS, 2)
    assert durations.size > 100
    stderr = expected / np.sqrt(durations.size)
    assert abs(durations.mean() - expected) < 5.0 * stderr


def test_logistic_ode_solves_equation():
    for b in (1.0, 0.0, -0.5):
        t = np.linspace(0.1, 5.0, 25)
        h = 1e-5
        z = logistic_ode(b, 2.0, 0.3, t)
        derivative = (logistic_ode(b, 2.0, 0.3, t + h) - logistic_ode(b, 2.0, 0.3, t - h)) / (2 * h)
        assert np.max(np.abs(derivative - (b * z - 2.0 * z * z))) < 1e-7
    assert logistic_ode(1.0, 2.0, 0.3, 0.0) == 0.3
    assert abs(logistic_ode(1.0, 2.0, 0.3, 60.0) - 0.5) < 1e-12


def test_scaled_family_rates():
    mech, rescaling = scaled_family(10, 1.0, 0.5, 1.0, 1.0)
    assert mech.rho == 60.0 and mech.d == 55.0 and mech.c == 1.0
    assert rescaling.initial_count(1.0) == 10
    assert rescaling.initial_count(0.25) == 3
    assert rescaling.initial_count(0.3) == 3
    assert rescaling.initial_count(0.21) == 3
    assert rescaling.upward_rate(1.0) == 600.0
    assert _raises(ValueError, scaled_family, 0, 1.0, 0.5, 1.0, 1.0)


# ============================================================================
# LAMPERTI ROUTE
# ============================================================================

def test_ou_without_noise_decays_exactly():
    cfg = _cfg(t_max=3.0)
    path = simulate_ou(PURE_DECAY, 2.0, 1.5, cfg, RandomStream(SEED))
    assert path.cap_hit and path.t0 is None
    assert abs(path.values[-1] - 1.5 * np.exp(-6.0)) < 1e-12
    eta = compute_eta(path)
    assert abs(eta[-1] - np.expm1(6.0) / 3.0) < 1e-9 * eta[-1]


def test_lamperti_pure_decay_is_logistic():
    cfg = _cfg(t_max=10.0, dt=0.01)
    trajectory = simulate_lamperti(PURE_DECAY, 2.0, 1.5, 4.0, cfg, RandomStream(SEED))
    expected = logistic_ode(0.0, 2.0, 1.5, trajectory.times)
    assert not trajectory.cap_hit and trajectory.absorbed_at is None
    assert np.max(np.abs(trajectory.states - expected)) < 1e-10


def test_lamperti_constant_path():
    times = np.linspace(0.0, 2.0, 201)
    path = OUPath.from_grid(times, np.full(times.size, 0.5), b=0.5, c=1.0, gamma=1.0)
    assert np.allclose(compute_eta(path), times / 0.5)
    trajectory = lamperti_forward(path, dt=0.01)
    assert abs(trajectory.final_time - 4.0) < 1e-12
    assert np.allclose(trajectory.states, 0.5)


def test_lamperti_inverse_recovers_ou():
    cfg = _cfg(t_max=10.0, dt=1e-3)
    trajectory = simulate_lamperti(PURE_DECAY, 1.0, 2.0, 3.0, cfg, RandomStream(SEED))
    clock, values = lamperti_inverse(trajectory)
    assert np.max(np.abs(values - 2.0 * np.exp(-clock))) < 1e-5


def test_exact_ou_transition_moments():
    c, x0, h = 1.0, 5.0, 0.5
    cfg = _cfg(t_max=h, dt=h)
    samples = np.array(run_replicas(_ou_endpoint, 2000, SEED, labels=(7,),
                                    args=(FELLER, c, x0, cfg)))
    decay = np.exp(-c * h)
    mean = x0 * decay + (FELLER.drift_b / c) * (1.0 - decay)
    variance = FELLER.gamma * (1.0 - decay**2) / (2.0 * c)
    assert abs(samples.mean() - mean) < 4.0 * np.sqrt(variance / samples.size)
    assert abs(samples.var(ddof=1) / variance - 1.0) < 0.15


def test_feller_paths_reach_zero_through_lamperti():
    batch = lamperti_extinction_samples(FELLER, 1.0, 0.2, _cfg(replicas=40, t_max=200.0))
    assert batch.censored_fraction == 0.0
    assert np.all(np.isfinite(batch.samples)) and np.all(batch.samples > 0)


def test_no_absorption_without_gaussian_part():
    cfg = _cfg(replicas=20, t_max=50.0, dt=0.01)
    batch = lamperti_extinction_samples(NO_ABSORPTION, 1.0, 1.0, cfg)
    assert np.all(batch.censored)
    trajectory = simulate_lamperti(NO_ABSORPTION, 1.0, 1.0, 5.0, cfg, RandomStream(SEED, (3,)))
    assert trajectory.absorbed_at is None
    assert np.all(trajectory.states > 0)


def test_z_at_matches_forward_grid():
    cfg = _cfg(t_max=50.0, dt=0.01)
    stream = RandomStream(SEED, (5,))
    path = simulate_ou(FELLER, 1.0, 1.0, cfg, stream, eta_target=1.0)
    trajectory = lamperti_forward(path, dt=0.01, t_end=1.0)
    assert np.allclose(z_at(path, trajectory.times), trajectory.states, atol=1e-12)


def test_null_recurrence_profile_decreases():
    cfg = _cfg(replicas=200, t_max=200.0)
    probabilities, errors = null_recurrence_profile(NULL_RECURRENT, 1.0, 1.0, 0.1,
                                                    [1.0, 100.0], cfg)
    assert probabilities[0] > 0.95
    assert probabilities[1] < probabilities[0] - 4.0 * errors[1]


# ============================================================================
# EULER ROUTE
# ============================================================================

def test_small_noise_tracks_logistic_ode():
    cfg = _cfg(dt=1e-3)
    trajectory = simulate_feller_logistic(1.0, 1.0, 1e-8, 0.1, cfg, RandomStream(SEED),
                                          t_end=5.0)
    expected = logistic_ode(1.0, 1.0, 0.1, trajectory.times)
    assert np.max(np.abs(trajectory.states - expected)) < 1e-3


def test_euler_absorption_is_final():
    cfg = _cfg(dt=1e-3)
    trajectory = simulate_feller_logistic(-2.0, 1.0, 1.0, 0.2, cfg, RandomStream(SEED),
                                          t_end=50.0)
    assert trajectory.absorbed_at is not None
    assert trajectory.final_state == 0.0
    assert trajectory.absorbed_at <= trajectory.final_time
    assert trajectory.state_at(trajectory.absorbed_at + 1.0) == 0


def test_euler_batch_matches_single_paths():
    cfg = _cfg(replicas=3, dt=1e-3)
    batch = feller_logistic_batch(1.0, 1.0, 1.0, 1.0, 0.2, cfg)
    for r in range(3):
        stream = replica_stream(SEED, r, EULER_LABEL)
        single = simulate_feller_logistic(1.0, 1.0, 1.0, 1.0, cfg, stream, t_end=0.2)
        assert np.isclose(single.final_state, batch.states[r], rtol=1e-12, atol=0.0)


def test_euler_batch_sample_times():
    cfg = _cfg(replicas=4, dt=1e-3)
    batch = feller_logistic_batch(1.0, 1.0, 1.0, 1.0, 5.0, cfg,
                                  sample_times=np.array([0.0, 0.5, 1.0, 2.0]))
    assert batch.states is None
    assert batch.sampled[0] == 1.0
    assert np.all(batch.sampled >= 0)
    assert _raises(ValueError, feller_logistic_batch, 1.0, 1.0, 1.0, 1.0, 5.0, cfg,
                   sample_times=np.ones(3))


def test_dynkin_trivial_cases():
    cfg = _cfg(replicas=10)
    assert dynkin_exponential_check(FELLER, 1.0, 1.0, 1.0, 0.0, cfg).residual == 0.0
    assert dynkin_exponential_check(FELLER, 1.0, 1.0, 0.0, 0.5, cfg).residual == 0.0


def test_dynkin_small_batch():
    cfg = _cfg(replicas=400, dt=1e-3, t_max=50.0)
    result = dynkin_exponential_check(FELLER, 1.0, 1.0, 1.0, 0.1, cfg)
    assert result.n_replicas == 400
    assert result.residual < 4.0 * result.stderr + 1e-3


def test_resolvent_monte_carlo_limits():
    cfg = _cfg(replicas=200, dt=1e-3)
    value, stderr = resolvent_monte_carlo(1.0, 1.0, 1.0, 1.0, 1.0, 0.0, cfg)
    assert value == 1.0 and stderr == 0.0
    # tau is almost 0 when q is huge, so Z_tau is close to x
    value, _ = resolvent_monte_carlo(1.0, 1.0, 1.0, 1.0, 1e4, 1.0, cfg)
    assert abs(value - np.exp(-1.0)) < 0.01
    assert _raises(ValueError, resolvent_monte_carlo, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, cfg)


if __name__ == "__main__":
    print("Testing Simulation")
    print("=" * 60)
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            test()
            print(f"✓ {name}")
