"""
Numerics Self-Tests
Run directly (python Numerics/test_numerics.py) or through pytest.
"""

import sys
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
from Numerics.ode import GuardViolation, cumulative_integral, ode_solve
from Numerics.quadrature import QuadratureError, adaptive_quad, quad_geometric
from Numerics.roots import BracketError, expand_bracket, find_root_bracketed
from Numerics.series import power_series_exp
from Numerics.streams import RandomStream, replica_stream, stream_split


def test_quad_power_singularity():
    result = adaptive_quad(lambda s: s**-0.5, 0.0, 1.0, singularity_hints={'a': -0.5})
    assert abs(result.value - 2.0) < 1e-9
    assert result.converged


def test_quad_smooth():
    result = adaptive_quad(lambda v: np.exp(v - 1.0), 0.0, 1.0)
    assert abs(result.value - (1.0 - np.exp(-1.0))) < 1e-12


def test_quad_exponential_tail():
    head = quad_geometric(lambda x: np.exp(-x), 0.0, 40.0, tol=1e-11)
    assert abs(head.value - 1.0) < 2e-10
    whole = adaptive_quad(lambda x: np.exp(-x), 0.0, np.inf, tol=1e-11)
    assert abs(whole.value - 1.0) < 1e-10


def test_quad_divergent_raises():
    try:
        adaptive_quad(lambda x: 1.0 / x, 0.0, 1.0, limit=50)
    except QuadratureError as e:
        assert e.error_estimate > 0
    else:
        raise AssertionError("divergent integral was accepted")


def test_quad_rejects_bad_hint():
    try:
        adaptive_quad(lambda x: 1.0 / x, 0.0, 1.0, singularity_hints={'a': -1.0})
    except ValueError:
        pass
    else:
        raise AssertionError("non-integrable hint was accepted")


def test_ode_growth():
    sol = ode_solve(lambda t, y: y, 0.0, [1.0], 1.0, tol=1e-12)
    assert abs(sol.y_end[0] - np.e) < 1e-9
    assert abs(sol(0.5)[0] - np.exp(0.5)) < 1e-8


def test_ode_gaussian_decay():
    sol = ode_solve(lambda t, y: -2.0 * t * y, 0.0, [1.0], 1.0, tol=1e-12)
    assert abs(sol.y_end[0] - np.exp(-1.0)) < 1e-10


def test_ode_riccati_stable_branch():
    sol = ode_solve(lambda t, y: y**2 - 1.0, 0.0, [0.0], 20.0, tol=1e-10)
    assert abs(sol.y_end[0] + np.tanh(20.0)) < 1e-8
    assert abs(sol(1.0)[0] + np.tanh(1.0)) < 1e-7


def test_ode_backward():
    sol = ode_solve(lambda t, y: y, 1.0, [np.e], 0.0, tol=1e-12)
    assert abs(sol.y_end[0] - 1.0) < 1e-9
    assert sol.t[0] > sol.t[-1]


def test_ode_guard_violation():
    try:
        ode_solve(lambda t, y: y, 0.0, [1.0], 1.0, guard=lambda t, y: False, min_step=1e-3)
    except GuardViolation:
        pass
    else:
        raise AssertionError("guard that rejects everything did not stop the solver")


def test_cumulative_integral():
    sol = cumulative_integral(np.cos, 0.0, np.pi / 2, tol=1e-12)
    assert abs(sol.y_end[0] - 1.0) < 1e-10


def test_root_sqrt2():
    root = find_root_bracketed(lambda x: x**2 - 2.0, 1.0, 2.0, tol=1e-14)
    assert abs(root - np.sqrt(2.0)) < 1e-13


def test_root_linear():
    root, info = find_root_bracketed(lambda x: 3.0 * x - 1.0, 0.0, 1.0, full_output=True)
    assert abs(root - 1.0 / 3.0) < 1e-14
    assert info.iterations <= 4


def test_root_without_sign_change():
    try:
        find_root_bracketed(lambda x: x**2 + 1.0, -1.0, 1.0)
    except BracketError:
        pass
    else:
        raise AssertionError("missing sign change was not reported")


def test_expand_bracket():
    lo, hi = expand_bracket(lambda x: x - 37.5, 0.0, 1.0)
    assert lo <= 37.5 <= hi


def test_series_exp_identity():
    a = power_series_exp([0.0, 1.0], 12)
    factorials = np.cumprod(np.concatenate(([1.0], np.arange(1, 12))))
    assert np.allclose(a, 1.0 / factorials, rtol=1e-14, atol=0)


def test_series_exp_square():
    a = power_series_exp([0.0, 0.0, 0.5], 10)
    assert np.all(a[1::2] == 0.0)
    for half in range(5):
        expected = 1.0 / (2.0**half * np.prod(np.arange(1, half + 1)))
        assert abs(a[2 * half] - expected) < 1e-15


def test_series_exp_requires_zero_constant():
    try:
        power_series_exp([-1.0, 1.0], 5)
    except ValueError:
        pass
    else:
        raise AssertionError("g(0) != 0 was accepted")


def test_stream_reproducible():
    first = RandomStream(7).split(3).generator().random(5)
    second = stream_split(RandomStream(7), 3).generator().random(5)
    assert np.array_equal(first, second)
    nested = RandomStream(7).split(3).split(1).generator().random(5)
    again = RandomStream(7, (3, 1)).generator().random(5)
    assert np.array_equal(nested, again)


def test_stream_children_differ():
    a = replica_stream(11, 0).generator().random(5)
    b = replica_stream(11, 1).generator().random(5)
    assert not np.array_equal(a, b)


def test_stream_independence_smoke():
    n = 1_000_000
    a = RandomStream(2024).split(0).generator().standard_normal(n)
    b = RandomStream(2024).split(1).generator().standard_normal(n)
    correlation = np.corrcoef(a, b)[0, 1]
    assert abs(correlation) < 3.0 / np.sqrt(n)


if __name__ == "__main__":
    print("Testing Numerics")
    print("=" * 60)
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            test()
            print(f"✓ {name}")
