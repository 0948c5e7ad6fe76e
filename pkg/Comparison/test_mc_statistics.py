"""
Comparison Self-Tests
Run directly (python Comparison/test_mc_statistics.py) or through pytest.
"""

import sys
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
from Comparison.mc_statistics import (compare, comparison_table, completely_monotone,
                                      empirical_laplace, exponentiality_test, ks_critical,
                                      ks_two_sample, make_row, relative_error,
                                      total_variation, within_sigmas)


def test_total_variation_pads():
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert abs(total_variation([1.0], [0.5, 0.5]) - 0.5) < 1e-15
    assert abs(total_variation([0.2, 0.8], [0.8, 0.2]) - 0.6) < 1e-15


def test_ks_two_sample():
    rng = np.random.default_rng(1)
    same, _ = ks_two_sample(rng.exponential(size=4000), rng.exponential(size=4000))
    shifted, pvalue = ks_two_sample(rng.exponential(size=4000), 1.0 + rng.exponential(size=4000))
    assert same < 0.05
    assert shifted > 0.5 and pvalue < 1e-6
    try:
        ks_two_sample([], [1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("empty sample was accepted")


def test_exponentiality():
    rng = np.random.default_rng(2)
    statistic, pvalue = exponentiality_test(rng.exponential(0.25, size=5000), rate=4.0)
    assert statistic < 0.03 and pvalue > 1e-3
    wrong, _ = exponentiality_test(rng.exponential(0.25, size=5000), rate=1.0)
    assert wrong > 0.3
    assert statistic < ks_critical(5000)
    assert 0.05 < ks_critical(1000) < 0.07


def test_empirical_laplace():
    value, stderr = empirical_laplace([0.0, 0.0], 3.0)
    assert value == 1.0 and stderr == 0.0
    value, _ = empirical_laplace([1.0, 1.0], 1.0, censored=[False, True])
    assert abs(value - 0.5 * np.exp(-1.0)) < 1e-15


def test_completely_monotone():
    grid = np.linspace(0.0, 2.0, 9)
    assert completely_monotone(np.exp(-grid)) == []
    assert completely_monotone(1.0 / (1.0 + grid)) == []
    assert 1 in completely_monotone(grid)


def test_compare_rows():
    row = compare("mean", 1.02, 1.0, 0.05, relative=True)
    assert row['passed'] and abs(row['error'] - 0.02) < 1e-12
    assert not compare("tv", 0.3, 0.0, 0.02)['passed']
    assert within_sigmas("dynkin", 0.01, 0.0, 0.005, sigmas=3.0)['passed']
    assert not within_sigmas("dynkin", 0.02, 0.0, 0.005, sigmas=3.0)['passed']
    assert relative_error(3.0, 0.0) == 3.0
    failed = make_row("decreasing", 0.1, 0.0, 0.1, 0.0, False)
    assert not failed['passed'] and failed['stderr'] is None
    table = comparison_table([row])
    assert "✓ PASS" in table and "1/1 checks passed" in table


if __name__ == "__main__":
    print("Testing Comparison")
    print("=" * 60)
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            test()
            print(f"✓ {name}")
