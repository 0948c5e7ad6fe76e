"""
Monte Carlo vs Closed Form Statistics Module
Distances, empirical transforms and tolerance comparisons used to hold
simulated laws against the analytic ones.
"""

import sys
from pathlib import Path

import numpy as np
from scipy import stats

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config


def total_variation(p, q):
    """
    Total variation distance between two pmfs on {1, 2, ...}.

    The shorter vector is padded with zeros.

    Args:
        p (array-like): First pmf, p[i-1] = P(i)
        q (array-like): Second pmf

    Returns:
        float: 0.5 * sum |p - q|
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    return float(0.5 * np.sum(np.abs(p - q)))


def ks_two_sample(first, second):
    """
    Two-sample Kolmogorov-Smirnov distance.

    Returns:
        tuple: (statistic, pvalue)
    """
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    if first.size == 0 or second.size == 0:
        raise ValueError("Both samples must be non-empty")
    result = stats.ks_2samp(first, second)
    return float(result.statistic), float(result.pvalue)


def exponentiality_test(durations, rate):
    """
    KS test of holding times against Exp(rate).

    Args:
        durations (array-like): Observed holding times
        rate (float): Rate of the exponential law

    Returns:
        tuple: (statistic, pvalue)

    Raises:
        ValueError: If rate <= 0 or durations is empty
    """
    durations = np.asarray(durations, dtype=float)
    if not rate > 0:
        raise ValueError(f"Exponential rate must be positive, got {rate}")
    if durations.size == 0:
        raise ValueError("No holding times to test")
    result = stats.kstest(durations, 'expon', args=(0.0, 1.0 / rate))
    return float(result.statistic), float(result.pvalue)


def empirical_laplace(samples, lam, censored=None):
    """
    E[exp(-lam X)] with its standard error.

    Censored samples (never absorbed) contribute 0.

    Returns:
        tuple: (estimate, stderr)
    """
    samples = np.asarray(samples, dtype=float)
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    values = np.exp(-lam * np.where(np.isnan(samples), np.inf, samples))
    if censored is not None:
        values = np.where(np.asarray(censored, dtype=bool), 0.0, values)
    return float(np.mean(values)), config.standard_error(values)


def relative_error(measured, reference):
    if reference == 0:
        return abs(measured)
    return abs(measured - reference) / abs(reference)


def completely_monotone(values, max_order=3, slack=1e-10):
    """
    Alternating-sign check of finite differences on an equispaced grid.

    Args:
        values (array-like): f on an increasing equispaced grid
        max_order (int): Highest difference order checked
        slack (float): Allowed violation per difference

    Returns:
        list: Orders that violate (-1)^n Delta^n f >= 0 (empty when monotone)
    """
    values = np.asarray(values, dtype=float)
    failing = []
    for order in range(1, max_order + 1):
        if values.size <= order:
            break
        if np.any((-1) ** order * np.diff(values, n=order) < -slack):
            failing.append(order)
    return failing


def ks_critical(n, level=1e-3):
    """One-sample KS statistic exceeded with probability `level` under the null."""
    return float(stats.kstwo.isf(level, int(n)))


def make_row(name, measured, reference, error, tolerance, passed, stderr=None):
    return {
        'name': name,
        'measured': float(measured),
        'reference': float(reference),
        'error': float(error),
        'tolerance': float(tolerance),
        'stderr': None if stderr is None else float(stderr),
        'passed': bool(passed),
    }


def compare(name, measured, reference, tolerance, stderr=None, relative=False):
    """
    One measured-vs-reference comparison.

    Args:
        name (str): Label of the check
        measured (float): Simulated or numerical value
        reference (float): Closed-form value
        tolerance (float): Admissible error
        stderr (float): Monte Carlo standard error of `measured`, if any
        relative (bool): Compare relative instead of absolute error

    Returns:
        dict: name, measured, reference, error, tolerance, stderr, passed
    """
    if relative:
        error = relative_error(measured, reference)
    else:
        error = abs(measured - reference)
    return make_row(name, measured, reference, error, tolerance, error < tolerance, stderr)


def within_sigmas(name, measured, reference, stderr, sigmas=config.DYNKIN_SIGMAS):
    """Pass when |measured - reference| is within `sigmas` standard errors."""
    bound = sigmas * stderr
    error = abs(measured - reference)
    return make_row(name, measured, reference, error, bound, error <= bound, stderr)


def comparison_table(rows, title="MONTE CARLO VS CLOSED FORM"):
    """
    Human-readable table of comparison rows.

    Returns:
        str: Formatted report
    """
    report = ["=" * 60, title, "=" * 60]
    for i, row in enumerate(rows, 1):
        mark = "✓ PASS" if row['passed'] else "✗ FAIL"
        line = (f"{i:2d}. {row['name']}: measured {row['measured']:.6g} vs "
                f"{row['reference']:.6g}  (error {row['error']:.3e} < {row['tolerance']:.1e})")
        if row.get('stderr') is not None:
            line += f"  [se {row['stderr']:.2e}]"
        report.append(f"{line}  {mark}")
    passed = sum(row['passed'] for row in rows)
    report.append("-" * 60)
    report.append(f"{passed}/{len(rows)} checks passed")
    return "\n".join(report)
