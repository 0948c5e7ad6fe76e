"""
Acceptance Suites
Monte Carlo runs at acceptance scale held against the closed forms, printed
as numbered pass/fail tables.

Usage:
    python lbp.py validate stationary|extinction|lamperti|regimes|scaling|riccati|resolvent|all
"""

import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Comparison.mc_statistics import (compare, comparison_table, completely_monotone,
                                      empirical_laplace, exponentiality_test, ks_critical,
                                      ks_two_sample, make_row, total_variation, within_sigmas)
from Mechanism.mechanisms import mechanism_from_dict
from Mechanism.stationary import mu_binary, mu_discrete, stationary_laplace, stationarity_residual
from Numerics.ode import GuardViolation, StepSizeUnderflow
from Numerics.quadrature import QuadratureError
from Riccati.solver import ShootingError, solve_wq
from Riccati.transforms import (NumericalFault, entrance_law, expected_Ta, expected_Ta_routes,
                                integration_by_parts_identity, laplace_Ta_from_x,
                                laplace_Ta_infinity, resolvent_G)
from Simulation.continuous_process import (absorbed_by, dynkin_exponential_check,
                                           feller_logistic_batch, lamperti_extinction_samples,
                                           lamperti_marginals, null_recurrence_profile,
                                           resolvent_monte_carlo)
from Simulation.discrete_process import (extinction_samples, holding_times,
                                         occupation_distribution, scaled_family,
                                         scaled_marginals)

# Stream labels of the suite experiments (kept apart from each other)
FROM_X_LABEL = 21
PILOT_LABEL = 22
SCALING_REFERENCE_LABEL = 23
FINE_DT_LABEL = 24

HOLDING_STATE = 2
DYNKIN_LAMBDA = 1.0
DYNKIN_T = 0.1
RESOLVENT_LAMBDA = 1.0
NULL_RECURRENT_TIMES = (1.0, 10.0, 100.0, 1000.0)
NO_ABSORPTION_TIMES = (1.0, 10.0, 100.0)
SCHEDULE_RATIO_ALT = 3.0


@dataclass
class SuiteResult:
    name: str
    rows: list
    seed: int
    elapsed: float
    outputs: list = field(default_factory=list)

    @property
    def passed(self):
        return all(row['passed'] for row in self.rows)


def _scaled(cfg, default_replicas, replicas, **overrides):
    """Run configuration for one experiment (replicas from the override or the suite default)."""
    return cfg.with_overrides(replicas=replicas or default_replicas, **overrides)


def _feller():
    mech, c = mechanism_from_dict(config.FELLER_MECHANISM)
    return mech, c


# ============================================================================
# DISCRETE SETTING
# ============================================================================

def stationary_suite(cfg, replicas=None, verbose=True):
    """
    Occupation law of binary splitting without deaths against the
    conditioned Poisson law, plus the series route and holding times.
    """
    mech, _ = mechanism_from_dict(config.STATIONARY_MECHANISM)
    rows = []

    run = cfg.with_overrides(t_max=config.STATIONARY_T_MAX)
    if verbose:
        print(f"\nOccupation over t_max = {run.t_max:g} (seed {run.seed})...")
    occupation = occupation_distribution(mech, 1, run, verbose=verbose)
    states = np.arange(1, max(occupation.size, cfg.n_terms) + 1)
    closed = mu_binary(mech.rho, mech.c, states)
    rows.append(compare("occupation vs Poisson(rho/c) | >= 1 (TV)",
                        total_variation(occupation, closed), 0.0, config.STATIONARY_TV_MAX))

    series = mu_discrete(mech, cfg.n_terms, tol=cfg.tol)
    exact = mu_binary(mech.rho, mech.c, np.arange(1, cfg.n_terms + 1))
    rows.append(compare(f"series mu vs closed form (max |diff|, i <= {cfg.n_terms})",
                        float(np.max(np.abs(series - exact))), 0.0, config.SERIES_VS_CLOSED_MAX))

    residual = stationarity_residual(mech, np.linspace(0.1, 0.9, 9))
    rows.append(compare("stationarity equation residual of exp(m)", residual, 0.0,
                        config.IDENTITY_REL_MAX))

    run = _scaled(cfg, config.ACCEPTANCE_REPLICAS_SMALL, replicas, t_max=50.0)
    durations = holding_times(mech, 1, HOLDING_STATE, run)
    rate = HOLDING_STATE * (mech.d + mech.rho + mech.c * (HOLDING_STATE - 1))
    statistic, _ = exponentiality_test(durations, rate)
    rows.append(compare(f"holding times in state {HOLDING_STATE} vs Exp({rate:g}) (KS)",
                        statistic, 0.0, ks_critical(durations.size)))
    return rows


def x_inf_sequence(mech, cfg, factors=(1, 2), verbose=True):
    """
    Extinction statistics from x_inf * factor for each factor.

    Returns:
        list: dicts with x0, laplace, laplace_stderr, mean, mean_stderr, censored, batch
    """
    table = []
    for factor in factors:
        x0 = int(cfg.x_inf * factor)
        batch = extinction_samples(mech, x0, cfg, labels=(factor,), verbose=verbose)
        value, stderr = batch.laplace(cfg.q)
        table.append({'x0': x0, 'laplace': value, 'laplace_stderr': stderr,
                      'mean': batch.mean(), 'mean_stderr': batch.mean_stderr(),
                      'censored': batch.censored_fraction, 'batch': batch})
    return table


def extinction_suite(cfg, replicas=None, verbose=True):
    """Extinction from (a proxy of) infinity for d = c = rho = 1."""
    mech, _ = mechanism_from_dict(config.EXTINCTION_MECHANISM)
    run = _scaled(cfg, config.ACCEPTANCE_REPLICAS_LARGE, replicas, t_max=config.EXTINCTION_T_MAX)
    rows = []

    base, doubled = x_inf_sequence(mech, run, factors=(1, 2), verbose=verbose)
    closed = laplace_Ta_infinity(mech, run.q, tol=run.tol_w)
    rows.append(compare(f"E[exp(-{run.q:g} T_a)] from x = {base['x0']} vs w_q formula",
                        base['laplace'], closed, config.LAPLACE_MC_MAX, base['laplace_stderr']))
    rows.append(compare(f"x_inf doubling shift ({base['x0']} -> {doubled['x0']})",
                        doubled['laplace'], base['laplace'], config.X_INF_SHIFT_MAX))

    try:
        expected = expected_Ta(mech, np.inf, tol=run.tol, verbose=verbose)
        rows.append(compare("mean T_a vs double integral (relative)", base['mean'], expected,
                            config.EXPECTED_TA_REL_MAX, base['mean_stderr'], relative=True))
    except NumericalFault as e:
        print(f"✗ {e}")
        rows.append(make_row("mean T_a vs double integral (relative)", base['mean'], np.nan,
                             np.inf, config.EXPECTED_TA_REL_MAX, False))
    rows.append(compare("censored fraction", base['censored'], 0.0, config.CENSORING_MAX))

    from_one = extinction_samples(mech, 1, run, labels=(FROM_X_LABEL,), verbose=verbose)
    value, stderr = from_one.laplace(run.q)
    rows.append(compare(f"E_1[exp(-{run.q:g} T_a)] vs w_q formula", value,
                        laplace_Ta_from_x(mech, run.q, 1, tol=run.tol_w),
                        config.LAPLACE_MC_MAX, stderr))
    return rows


# ============================================================================
# CONTINUOUS SETTING
# ============================================================================

def lamperti_suite(cfg, replicas=None, verbose=True):
    """Lamperti route against Euler, the generator check and extinction of the Feller case."""
    mech, c = _feller()
    x0, t = config.FELLER_X0, config.FELLER_T
    rows = []

    run = _scaled(cfg, config.ACCEPTANCE_REPLICAS_SMALL, replicas)
    lamperti = lamperti_marginals(mech, c, x0, [t], run, verbose=verbose)[:, 0]
    lamperti = lamperti[np.isfinite(lamperti)]
    euler = feller_logistic_batch(mech.drift_b, c, mech.gamma, x0, t, run, verbose=verbose).states
    fine = feller_logistic_batch(mech.drift_b, c, mech.gamma, x0, t,
                                 run.with_overrides(dt=run.dt / 2), labels=(FINE_DT_LABEL,),
                                 verbose=verbose).states
    ks, _ = ks_two_sample(lamperti, euler)
    ks_fine, _ = ks_two_sample(lamperti, fine)
    rows.append(compare(f"KS(Lamperti, Euler) of Z_{t:g} (dt = {run.dt:g})", ks, 0.0,
                        config.KS_TWO_ROUTE_MAX))
    rows.append(compare("KS shift under dt/2", ks_fine, ks, config.KS_DT_SHIFT_MAX))

    run = _scaled(cfg, config.ACCEPTANCE_REPLICAS_LARGE, replicas)
    dynkin = dynkin_exponential_check(mech, c, x0, DYNKIN_LAMBDA, DYNKIN_T, run, verbose=verbose)
    rows.append(within_sigmas(f"Dynkin residual for exp(-{DYNKIN_LAMBDA:g} z), t = {DYNKIN_T:g}",
                              dynkin.residual, 0.0, dynkin.stderr))

    batch = lamperti_extinction_samples(mech, c, x0, run, verbose=verbose)
    rows.append(compare(f"mean T_a from x = {x0:g} vs double integral (relative)", batch.mean(),
                        expected_Ta(mech, x0, c=c, tol=run.tol), config.EXPECTED_TA_REL_MAX,
                        batch.mean_stderr(), relative=True))
    value, stderr = batch.laplace(run.q)
    rows.append(compare(f"E_x[exp(-{run.q:g} T_a)] vs w_q formula", value,
                        laplace_Ta_from_x(mech, run.q, x0, c=c, tol=run.tol_w),
                        config.LAPLACE_MC_MAX, stderr))
    return rows


def regimes_suite(cfg, replicas=None, verbose=True):
    """Positive recurrence, null recurrence, absorption and extinction without absorption."""
    rows = []
    run = _scaled(cfg, config.ACCEPTANCE_REPLICAS_SMALL, replicas)
    x0 = config.FELLER_X0

    mech, c = mechanism_from_dict(config.SUBORDINATOR_MECHANISM)
    samples = lamperti_marginals(mech, c, x0, [config.SUBORDINATOR_T], run, verbose=verbose)[:, 0]
    samples = samples[np.isfinite(samples)]
    for lam in config.SUBORDINATOR_LAMBDAS:
        value, stderr = empirical_laplace(samples, lam)
        rows.append(compare(f"subordinator: Laplace of Z_{config.SUBORDINATOR_T:g} at {lam:g}",
                            value, stationary_laplace(mech, lam, c, tol=run.tol),
                            config.SUBORDINATOR_LAPLACE_MAX, stderr))

    mech, c = mechanism_from_dict(config.NULL_RECURRENT_MECHANISM)
    probabilities, errors = null_recurrence_profile(
        mech, c, x0, config.NULL_RECURRENT_EPS, NULL_RECURRENT_TIMES,
        run.with_overrides(t_max=10 * max(NULL_RECURRENT_TIMES)), verbose=verbose)
    rise = float(np.max(np.diff(probabilities)))
    slack = config.DYNKIN_SIGMAS * float(np.max(errors))
    rows.append(make_row("null recurrent: P(Z_t > eps) non-increasing (largest rise)", rise, 0.0,
                         max(rise, 0.0), slack, rise <= slack))
    rows.append(compare(f"null recurrent: P(Z_t > eps) at t = {NULL_RECURRENT_TIMES[-1]:g}",
                        probabilities[-1], 0.0, config.NULL_RECURRENT_EPS, errors[-1]))

    mech, c = _feller()
    pilot = lamperti_extinction_samples(mech, c, x0, run.with_overrides(replicas=1000),
                                        labels=(PILOT_LABEL,))
    horizon = 10.0 * float(np.max(pilot.samples))
    batch = lamperti_extinction_samples(mech, c, x0, run, verbose=verbose)
    fraction = absorbed_by(batch, horizon)
    rows.append(make_row(f"gamma > 0: absorbed fraction by t = {horizon:.3g}", fraction, 1.0,
                         1.0 - fraction, 1.0 - config.ABSORBED_FRACTION_MIN,
                         fraction > config.ABSORBED_FRACTION_MIN))

    mech, c = mechanism_from_dict(config.NO_ABSORPTION_MECHANISM)
    paths = lamperti_marginals(mech, c, x0, NO_ABSORPTION_TIMES, run, verbose=verbose)
    rows.append(compare("gamma = 0: fraction at 0 on the time grid",
                        float(np.mean(paths == 0.0)), 0.0, 1.0 / paths.size))
    medians = np.nanmedian(paths, axis=0)
    rows.append(make_row("gamma = 0: median Z_t falls over the grid", medians[-1], medians[0],
                         medians[-1] - medians[0], 0.0, medians[-1] < medians[0]))
    return rows


def scaling_sequence(cfg, replicas=None, verbose=True):
    """
    KS distance between Z^(n)_1 and the Feller-logistic marginal for each n.

    Returns:
        list: dicts with n, ks, replicas
    """
    params = config.SCALING_PARAMETERS
    run = _scaled(cfg, config.ACCEPTANCE_REPLICAS_SMALL, replicas)
    x0 = config.FELLER_X0
    reference = feller_logistic_batch(params['lam'] - params['delta'], params['c'],
                                      params['gamma'], x0, 1.0, run,
                                      labels=(SCALING_REFERENCE_LABEL,), verbose=verbose).states
    table = []
    for n in config.SCALING_N_VALUES:
        _, rescaling = scaled_family(n, **params)
        samples = scaled_marginals(rescaling, x0, 1.0, run, verbose=verbose)
        ks, _ = ks_two_sample(samples, reference)
        table.append({'n': int(n), 'ks': ks, 'replicas': run.replicas})
        if verbose:
            print(f"  n = {n}: KS = {ks:.4f}")
    return table


def scaling_suite(cfg, replicas=None, verbose=True):
    """KS distance to the diffusion limit strictly decreasing in n."""
    rows = []
    previous = None
    for entry in scaling_sequence(cfg, replicas, verbose):
        if previous is None:
            rows.append(make_row(f"KS(Z^(n)_1, Feller) n = {entry['n']}", entry['ks'], 0.0,
                                 entry['ks'], 1.0, entry['ks'] < 1.0))
        else:
            rows.append(make_row(f"KS(Z^(n)_1, Feller) n = {entry['n']} below previous n",
                                 entry['ks'], previous, entry['ks'], previous,
                                 entry['ks'] < previous))
        previous = entry['ks']
    return rows


# ============================================================================
# CLOSED FORMS
# ============================================================================

def _schedule_gap(first, second):
    upper = min(0.0, first.z_T, second.z_T)
    grid = np.linspace(max(first.z_min, second.z_min), upper, config.COMPARISON_GRID_SIZE)
    return max(abs(first.w_of_z(z) - second.w_of_z(z)) for z in grid)


def riccati_suite(cfg, replicas=None, verbose=True):
    """Residual, uniqueness check and shape of w_q in both settings; the by-parts identity."""
    discrete, _ = mechanism_from_dict(config.EXTINCTION_MECHANISM)
    feller, c = _feller()
    rows = []

    for label, mech, mech_c in (('discrete', discrete, None), ('continuous', feller, c)):
        for q in config.RICCATI_Q_VALUES:
            tag = f"{label} q = {q:g}"
            try:
                sol = solve_wq(mech, q, c=mech_c, tol=cfg.tol_w, k_max=cfg.k_max, verbose=verbose)
                alt = solve_wq(mech, q, c=mech_c, tol=cfg.tol_w, k_max=cfg.k_max,
                               schedule_ratio=SCHEDULE_RATIO_ALT)
            except ShootingError as e:
                print(f"✗ {tag}: {e}")
                rows.append(make_row(f"{tag}: shooting", np.nan, 0.0, np.inf, 0.0, False))
                continue
            rows.append(compare(f"{tag}: residual", sol.max_residual, 0.0, cfg.tol_res))
            rows.append(compare(f"{tag}: schedules 2 vs {SCHEDULE_RATIO_ALT:g} (sup)",
                                _schedule_gap(sol, alt), 0.0, config.SCHEDULE_AGREEMENT_MAX))
            flags = [sol.diagnostics[key] for key in ('positive', 'decreasing_at_ends',
                                                      'envelope_ok')]
            failing = len(flags) - sum(bool(flag) for flag in flags)
            rows.append(make_row(f"{tag}: positive, decreasing at ends, under sqrt(q) r",
                                 failing, 0.0, failing, 1.0, failing == 0))

        try:
            by_m, by_s = expected_Ta_routes(mech, np.inf, c=mech_c, tol=cfg.tol)
            rows.append(compare(f"{label}: E(T_a) m-form vs s-form (relative)", by_m, by_s,
                                config.ROUTE_AGREEMENT_TOL, relative=True))
        except (QuadratureError, StepSizeUnderflow, GuardViolation) as e:
            print(f"✗ {e}")
            rows.append(make_row(f"{label}: E(T_a) m-form vs s-form (relative)", np.nan, np.nan,
                                 np.inf, config.ROUTE_AGREEMENT_TOL, False))

    sol = solve_wq(feller, 1.0, c=c, tol=cfg.tol_w, k_max=cfg.k_max)
    for lam in config.IDENTITY_LAMBDAS:
        left, right = integration_by_parts_identity(sol, lam)
        rows.append(compare(f"integration by parts at lambda = {lam:g} (relative)", left, right,
                            config.IDENTITY_REL_MAX, relative=True))
    return rows


def resolvent_suite(cfg, replicas=None, verbose=True):
    """q G against the Monte Carlo resolvent, its boundary values and the entrance law."""
    mech, c = _feller()
    x0, q = config.FELLER_X0, cfg.q
    sol = solve_wq(mech, q, c=c, tol=cfg.tol_w, k_max=cfg.k_max)
    rows = []

    run = _scaled(cfg, config.ACCEPTANCE_REPLICAS_LARGE, replicas)
    value, stderr = resolvent_monte_carlo(mech.drift_b, c, mech.gamma, x0, q, RESOLVENT_LAMBDA,
                                          run, verbose=verbose)
    closed = resolvent_G(mech, q, x0, RESOLVENT_LAMBDA, c=c, solution=sol)
    rows.append(compare(f"q G(x = {x0:g}, lambda = {RESOLVENT_LAMBDA:g}) vs E[exp(-lambda Z_tau)]",
                        value, closed, config.RESOLVENT_MC_MAX, stderr))
    rows.append(compare("q G at x = 0", resolvent_G(mech, q, 0.0, 2.0, c=c, solution=sol), 1.0,
                        config.BOUNDARY_PIN_MAX))
    rows.append(compare("q G at lambda = 0", resolvent_G(mech, q, x0, 0.0, c=c, solution=sol),
                        1.0, config.BOUNDARY_PIN_MAX))

    at_infinity = laplace_Ta_infinity(mech, q, c=c, solution=sol)
    rows.append(compare("entrance law at lambda = 1e6 vs Laplace from infinity",
                        entrance_law(mech, q, 1e6, c=c, solution=sol), at_infinity,
                        config.BOUNDARY_PIN_MAX))
    grid = np.linspace(0.0, 3.0, 13)
    values = [entrance_law(mech, q, lam, c=c, solution=sol) for lam in grid]
    failing = completely_monotone(values)
    rows.append(make_row("entrance law: orders breaking complete monotonicity", len(failing),
                         0.0, len(failing), 1.0, not failing))
    return rows


SUITES = {
    'stationary': stationary_suite,
    'extinction': extinction_suite,
    'lamperti': lamperti_suite,
    'regimes': regimes_suite,
    'scaling': scaling_suite,
    'riccati': riccati_suite,
    'resolvent': resolvent_suite,
}


def run_suites(name, cfg, replicas=None, verbose=True):
    """
    Run one suite or all of them and print their tables.

    Args:
        name (str): A key of SUITES or 'all'
        cfg (RunConfig): Base run configuration (seed, workers, dt, tolerances)
        replicas (int): Replica count replacing every suite default
        verbose (bool): Print progress

    Returns:
        list: SuiteResult per suite
    """
    if name != 'all' and name not in SUITES:
        raise ValueError(f"Unknown suite '{name}' (expected one of {', '.join(SUITES)}, all)")
    names = list(SUITES) if name == 'all' else [name]

    results = []
    for suite in names:
        print(f"\n{'='*70}")
        print(f"Suite: {suite}")
        start = time.time()
        rows = SUITES[suite](cfg, replicas=replicas, verbose=verbose)
        result = SuiteResult(suite, rows, cfg.seed, time.time() - start)
        print(comparison_table(rows, title=f"VALIDATE {suite.upper()} (seed {cfg.seed}, "
                                           f"{result.elapsed:.1f}s)"))
        results.append(result)

    failed = sum(not row['passed'] for result in results for row in result.rows)
    print(f"\n{'='*70}")
    if failed:
        print(f"✗ {failed} CHECK(S) FAILED")
    else:
        print("✓ ALL CHECKS PASSED")
    print("=" * 70)
    return results
