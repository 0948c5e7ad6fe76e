"""
Logistic Branching Process Toolkit
Runs simulations, evaluates the closed forms and executes the Monte Carlo
validation suites.

Usage:
    python lbp.py simulate-discrete --config lbp_config.json [--plot]
    python lbp.py simulate-sde --config sde.json --replicas 1000
    python lbp.py simulate-lamperti --config levy.json --t_max=20
    python lbp.py analyze stationary|extinction|riccati|resolvent --config <path>
    python lbp.py validate stationary|extinction|lamperti|regimes|scaling|riccati|resolvent|all
    python lbp.py converge

Any RunConfig field can be overridden with --key=value and any mechanism
field with --mechanism.key=value.
"""

import argparse
import sys
import traceback
from pathlib import Path

import numpy as np

# Add module paths
sys.path.append(str(Path(__file__).parent))

import config
from Comparison.mc_statistics import compare, make_row
from Ingestion.config_loader import ConfigError, load_config, load_run_config, parse_overrides
from Mechanism.mechanisms import (AbsorptionRegime, DiscreteMechanism, LevyMechanism,
                                  RegimeError, absorption_regime, condition_partial,
                                  mechanism_from_dict)
from Mechanism.stationary import (mu_binary, mu_discrete, nu_discrete, nu_laplace,
                                  stationary_laplace, stationary_mean)
from Numerics.streams import replica_stream
from Output import plots, writers
from Output.report import CommandReport
from Riccati.solver import solve_wq
from Riccati.transforms import (entrance_law, expected_Ta, laplace_Ta_from_x,
                                laplace_Ta_infinity, resolvent_G)
from Simulation.continuous_process import (feller_logistic_batch, lamperti_extinction_samples,
                                           lamperti_marginals, simulate_feller_logistic)
from Simulation.discrete_process import extinction_samples, occupation_distribution, simulate
from Simulation.lamperti import lamperti_forward, simulate_ou
from Validation.suites import SUITES, run_suites, scaling_sequence, x_inf_sequence

ROUTES = ('discrete', 'sde', 'lamperti')
ANALYSES = ('stationary', 'extinction', 'riccati', 'resolvent')

DISCRETE_X_GRID = (1, 2, 5, 10, 100, np.inf)
CONTINUOUS_X_GRID = (0.1, 0.5, 1.0, 2.0, 10.0, np.inf)
LAMBDA_GRID = (0.0, 0.5, 1.0, 2.0, 5.0, np.inf)
X_INF_FACTORS = (1, 2, 4)


def _echo(raw, cfg):
    return {'mechanism': raw.get('mechanism', {}), 'run': cfg.as_dict()}


def _out_dir(out_dir):
    path = Path(out_dir or config.OUTPUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _replica_override(overrides):
    """Replica count given on the command line; suites keep their own default otherwise."""
    for section, key, value in reversed(list(overrides)):
        if section == 'run' and key == 'replicas':
            return int(value)
    return None


def _plotted_replicas(cfg):
    return range(min(cfg.replicas, config.MAX_PLOTTED_TRAJECTORIES))


# ============================================================================
# SIMULATE
# ============================================================================

def cmd_simulate(route, config_path, overrides=(), out_dir=None, plot=False, verbose=True):
    """
    Simulate sample paths and replica statistics through one route.

    Args:
        route (str): 'discrete', 'sde' or 'lamperti'
        config_path (str): Mechanism + run configuration file
        overrides (list): (section, key, value) triples
        out_dir (str): Output directory
        plot (bool): Also write SVG plots
        verbose (bool): Print progress

    Returns:
        CommandReport: Files written
    """
    if route not in ROUTES:
        raise ValueError(f"Unknown route '{route}' (expected one of {ROUTES})")
    mech, c, cfg, raw = load_config(config_path, overrides)
    report = CommandReport(f"simulate-{route}", _echo(raw, cfg))
    out = _out_dir(out_dir)
    extinction = None

    if route == 'discrete':
        if not isinstance(mech, DiscreteMechanism):
            raise RegimeError("simulate-discrete needs a discrete mechanism (setting 'discrete')")
        trajectories = [simulate(mech, cfg.x0, cfg, replica_stream(cfg.seed, r))
                        for r in _plotted_replicas(cfg)]
        if mech.d > 0:
            extinction = extinction_samples(mech, cfg.x0, cfg, verbose=verbose)
            report.add_output(writers.write_extinction_csv(out / "extinction_times.csv",
                                                           extinction))
        else:
            occupation = occupation_distribution(mech, cfg.x0, cfg, verbose=verbose)
            rows = [(i + 1, p) for i, p in enumerate(occupation)]
            report.add_output(writers.write_table_csv(out / "occupation.csv", ['i', 'p_i'], rows,
                                                      {'seed': cfg.seed}))
    else:
        if not isinstance(mech, LevyMechanism):
            raise RegimeError(f"simulate-{route} needs a continuous mechanism "
                              f"(setting 'continuous')")
        if route == 'sde':
            if mech.atoms or mech.exp_rate > 0:
                raise RegimeError("The Euler route covers the Feller-logistic diffusion only "
                                  "(no jumps); use simulate-lamperti")
            trajectories = [simulate_feller_logistic(mech.drift_b, c, mech.gamma, cfg.x0, cfg,
                                                     replica_stream(cfg.seed, r))
                            for r in _plotted_replicas(cfg)]
            batch = feller_logistic_batch(mech.drift_b, c, mech.gamma, cfg.x0, cfg.t_max, cfg,
                                          verbose=verbose)
            report.add_output(writers.write_table_csv(
                out / "final_states.csv", ['replica', 'z'], enumerate(batch.states.tolist()),
                {'seed': cfg.seed, 't': cfg.t_max, 'dt': cfg.dt}))
            extinction = batch.as_extinction_batch(cfg.seed, cfg.x0)
            report.add_output(writers.write_extinction_csv(out / "extinction_times.csv",
                                                           extinction))
        else:
            trajectories = []
            for r in _plotted_replicas(cfg):
                path = simulate_ou(mech, c, cfg.x0, cfg, replica_stream(cfg.seed, r),
                                   eta_target=cfg.t_max)
                trajectories.append(lamperti_forward(path, dt=cfg.dt, t_end=cfg.t_max))
                trajectories[-1].metadata.update({'seed': cfg.seed, 'replica': r})
                if r == 0:
                    report.add_output(writers.write_jump_log_csv(out / "jumps_0000.csv", path))
            if absorption_regime(mech) is AbsorptionRegime.EXTINCTION_WITH_ABSORPTION:
                extinction = lamperti_extinction_samples(mech, c, cfg.x0, cfg, verbose=verbose)
                report.add_output(writers.write_extinction_csv(out / "extinction_times.csv",
                                                               extinction))
            else:
                states = lamperti_marginals(mech, c, cfg.x0, [cfg.t_max], cfg,
                                            verbose=verbose)[:, 0]
                report.add_output(writers.write_table_csv(
                    out / "final_states.csv", ['replica', 'z'], enumerate(states.tolist()),
                    {'seed': cfg.seed, 't': cfg.t_max}))

    for r, trajectory in enumerate(trajectories):
        report.add_output(writers.write_trajectory_csv(out / f"trajectory_{r:04d}.csv",
                                                       trajectory))
    if plot:
        report.add_output(plots.plot_trajectories(trajectories, out / "trajectories",
                                                  title=f"{route} route"))
        if extinction is not None and not extinction.censored.all():
            report.add_output(plots.plot_histogram(
                extinction.samples[~extinction.censored], out / "extinction_times",
                title=f"Absorption times from x = {cfg.x0:g}", xlabel="T_a"))
    return report.finish()


# ============================================================================
# ANALYZE
# ============================================================================

def _analyze_stationary(mech, c, cfg, out, plot, report):
    if isinstance(mech, DiscreteMechanism):
        mu = mu_discrete(mech, cfg.n_terms, tol=cfg.tol)
        nu = nu_discrete(mech, cfg.n_terms)
        header = ['i', 'mu_i', 'nu_i']
        rows = [(i + 1, mu[i], nu[i]) for i in range(cfg.n_terms)]
        if set(mech.pi) <= {1}:
            closed = mu_binary(mech.rho, mech.c, np.arange(1, cfg.n_terms + 1))
            header.append('mu_i_closed_form')
            rows = [row + (closed[i],) for i, row in enumerate(rows)]
            if plot:
                report.add_output(plots.plot_pmf_comparison(mu, closed, out / "stationary_law"))
        report.add_output(writers.write_table_csv(out / "stationary_law.csv", header, rows))
        return

    if not mech.is_subordinator:
        raise RegimeError("A stationary law exists only for subordinator mechanisms "
                          "(nondecreasing Levy process); this one is not")
    if not condition_partial(mech, c):
        raise RegimeError("The subordinator is null recurrent (its drift does not exceed the "
                          "competition rate in the sense of the recurrence criterion)")
    rows = [(lam, nu_laplace(mech, lam, c), stationary_laplace(mech, lam, c, tol=cfg.tol))
            for lam in LAMBDA_GRID if np.isfinite(lam)]
    report.add_output(writers.write_table_csv(
        out / "stationary_laplace.csv", ['lambda', 'nu_laplace', 'mu_laplace'], rows,
        {'stationary_mean': repr(stationary_mean(mech, c, tol=cfg.tol))}))


def _analyze_extinction(mech, c, cfg, out, report, verbose):
    grid = DISCRETE_X_GRID if isinstance(mech, DiscreteMechanism) else CONTINUOUS_X_GRID
    solution = solve_wq(mech, cfg.q, c=c, tol=cfg.tol_w, k_max=cfg.k_max)
    rows = []
    for x in grid:
        mean = expected_Ta(mech, x, c=c, tol=cfg.tol, verbose=verbose)
        if np.isinf(x):
            laplace = laplace_Ta_infinity(mech, cfg.q, c=c, solution=solution)
        else:
            laplace = laplace_Ta_from_x(mech, cfg.q, x, c=c, solution=solution)
        rows.append((x, mean, laplace))
        if verbose:
            print(f"  x = {x:g}: E(T_a) = {mean:.6g}, E[exp(-q T_a)] = {laplace:.6g}")
    report.add_output(writers.write_table_csv(out / "extinction.csv",
                                              ['x', 'E_T_a', 'laplace_T_a'], rows,
                                              {'q': cfg.q}))


def _analyze_resolvent(mech, c, cfg, out, report):
    if not isinstance(mech, LevyMechanism):
        raise RegimeError("The resolvent is evaluated for continuous mechanisms only")
    solution = solve_wq(mech, cfg.q, c=c, tol=cfg.tol_w, k_max=cfg.k_max)
    # lambda = inf is the absorption transform, defined only when 0 is reached
    absorbing = absorption_regime(mech) is AbsorptionRegime.EXTINCTION_WITH_ABSORPTION
    lambdas = [lam for lam in LAMBDA_GRID if absorbing or np.isfinite(lam)]
    rows = [(x, lam, resolvent_G(mech, cfg.q, x, lam, c=c, solution=solution))
            for x in CONTINUOUS_X_GRID if np.isfinite(x) for lam in lambdas]
    report.add_output(writers.write_table_csv(out / "resolvent.csv", ['x', 'lambda', 'qG'],
                                              rows, {'q': cfg.q}))
    rows = [(lam, entrance_law(mech, cfg.q, lam, c=c, solution=solution))
            for lam in LAMBDA_GRID if np.isfinite(lam)]
    report.add_output(writers.write_table_csv(out / "entrance_law.csv", ['lambda', 'value'],
                                              rows, {'q': cfg.q}))


def cmd_analyze(what, config_path, overrides=(), out_dir=None, plot=False, verbose=True):
    """
    Closed-form tables for the configured mechanism.

    Args:
        what (str): 'stationary', 'extinction', 'riccati' or 'resolvent'

    Returns:
        CommandReport: Files written

    Raises:
        RegimeError: If the mechanism lies outside the regime of the request
    """
    if what not in ANALYSES:
        raise ValueError(f"Unknown analysis '{what}' (expected one of {ANALYSES})")
    mech, c, cfg, raw = load_config(config_path, overrides)
    report = CommandReport(f"analyze {what}", _echo(raw, cfg))
    out = _out_dir(out_dir)

    if what == 'stationary':
        _analyze_stationary(mech, c, cfg, out, plot, report)
    elif what == 'extinction':
        _analyze_extinction(mech, c, cfg, out, report, verbose)
    elif what == 'riccati':
        solution = solve_wq(mech, cfg.q, c=c, tol=cfg.tol_w, k_max=cfg.k_max, verbose=verbose)
        report.add_output(writers.write_riccati_csv(out / "riccati.csv", solution))
        if plot:
            report.add_output(plots.plot_riccati(solution, out / "riccati"))
    else:
        _analyze_resolvent(mech, c, cfg, out, report)
    return report.finish()


# ============================================================================
# VALIDATE / CONVERGE
# ============================================================================

def cmd_validate(suite, config_path=None, overrides=(), out_dir=None, verbose=True):
    """
    Run a Monte Carlo vs closed-form suite (or all of them).

    Returns:
        CommandReport: One check per table row; passed iff every check passed
    """
    cfg, _ = load_run_config(config_path, overrides)
    report = CommandReport(f"validate {suite}", {'run': cfg.as_dict()})
    replicas = _replica_override(overrides)
    for result in run_suites(suite, cfg, replicas=replicas, verbose=verbose):
        report.add_checks(result.rows, suite=result.name)
    _out_dir(out_dir)
    return report.finish()


def cmd_converge(config_path=None, overrides=(), out_dir=None, verbose=True):
    """
    Scaling-convergence table over n and x_inf insensitivity of extinction statistics.

    Returns:
        CommandReport: Tables written, with monotonicity and shift checks
    """
    cfg, _ = load_run_config(config_path, overrides)
    report = CommandReport("converge", {'run': cfg.as_dict()})
    out = _out_dir(out_dir)
    replicas = _replica_override(overrides)

    print(f"\n{'='*70}")
    print("Scaling sequence Z^(n) -> Feller-logistic diffusion")
    table = scaling_sequence(cfg, replicas=replicas, verbose=verbose)
    report.add_output(writers.write_table_csv(
        out / "scaling_convergence.csv", ['n', 'ks', 'replicas'],
        [(entry['n'], entry['ks'], entry['replicas']) for entry in table], {'seed': cfg.seed}))
    rows = [make_row(f"KS at n = {b['n']} below n = {a['n']}", b['ks'], a['ks'], b['ks'],
                     a['ks'], b['ks'] < a['ks']) for a, b in zip(table, table[1:])]

    print(f"\n{'='*70}")
    print("Extinction statistics against the starting level x_inf")
    mech, _ = mechanism_from_dict(config.EXTINCTION_MECHANISM)
    run_cfg = cfg.with_overrides(replicas=replicas or config.ACCEPTANCE_REPLICAS_SMALL,
                                 t_max=config.EXTINCTION_T_MAX)
    sequence = x_inf_sequence(mech, run_cfg, factors=X_INF_FACTORS, verbose=verbose)
    report.add_output(writers.write_table_csv(
        out / "x_inf_convergence.csv",
        ['x0', 'laplace', 'laplace_stderr', 'mean', 'mean_stderr', 'censored'],
        [(e['x0'], e['laplace'], e['laplace_stderr'], e['mean'], e['mean_stderr'],
          e['censored']) for e in sequence], {'seed': cfg.seed, 'q': run_cfg.q}))
    rows += [compare(f"Laplace shift x0 = {a['x0']} -> {b['x0']}", b['laplace'], a['laplace'],
                     config.X_INF_SHIFT_MAX) for a, b in zip(sequence, sequence[1:])]
    report.add_checks(rows, suite='converge')
    return report.finish()


# ============================================================================
# ENTRY POINT
# ============================================================================

def build_parser():
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument('--config', type=str, default=config.DEFAULT_CONFIG_PATH,
                        help=f'Mechanism + run configuration file (default: '
                             f'{config.DEFAULT_CONFIG_PATH})')
    common.add_argument('--seed', type=int, help='Root seed (overrides the config file)')
    common.add_argument('--replicas', type=int, help='Number of replicas')
    common.add_argument('--out-dir', type=str, default=config.OUTPUT_DIR,
                        help=f'Output directory (default: {config.OUTPUT_DIR})')
    common.add_argument('--plot', action='store_true', help='Also write SVG plots')
    common.add_argument('--quiet', action='store_true', help='Suppress progress messages')

    parser = argparse.ArgumentParser(
        description="Logistic branching processes: simulation, closed forms and validation",
        allow_abbrev=False
    )
    commands = parser.add_subparsers(dest='command', required=True)
    for route in ROUTES:
        commands.add_parser(f'simulate-{route}', parents=[common], allow_abbrev=False,
                            help=f'Simulate through the {route} route')
    analyze = commands.add_parser('analyze', parents=[common], allow_abbrev=False,
                                  help='Closed-form tables')
    analyze.add_argument('what', choices=ANALYSES)
    validate = commands.add_parser('validate', parents=[common], allow_abbrev=False,
                                   help='Monte Carlo vs closed-form suites')
    validate.add_argument('suite', nargs='?', default='all', choices=list(SUITES) + ['all'])
    commands.add_parser('converge', parents=[common], allow_abbrev=False,
                        help='Scaling and x_inf convergence tables')
    return parser


def main(argv=None):
    """Main entry point for command-line usage."""
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    verbose = not args.quiet

    try:
        overrides = parse_overrides(extra)
        if args.seed is not None:
            overrides.append(('run', 'seed', args.seed))
        if args.replicas is not None:
            overrides.append(('run', 'replicas', args.replicas))

        if args.command.startswith('simulate-'):
            report = cmd_simulate(args.command[len('simulate-'):], args.config, overrides,
                                  args.out_dir, args.plot, verbose)
        elif args.command == 'analyze':
            report = cmd_analyze(args.what, args.config, overrides, args.out_dir, args.plot,
                                 verbose)
        elif args.command == 'validate':
            report = cmd_validate(args.suite, args.config, overrides, args.out_dir, verbose)
        else:
            report = cmd_converge(args.config, overrides, args.out_dir, verbose)

        report.save_json(args.out_dir)
        print(report.format_console_output())
        sys.exit(0 if report.passed else 1)

    except FileNotFoundError as e:
        print(f"\n✗ Error: {e}")
        print("\nWrite a configuration file first (see README.md), or pass --config <path>")
        sys.exit(1)
    except (ConfigError, RegimeError) as e:
        print(f"\n✗ Error: {e}")
        sys.exit(1)
    except Exception as e:
        print(f"\n✗ Error during {args.command}: {e}")
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
