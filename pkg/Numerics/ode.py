"""
ODE Integration Module
Adaptive explicit Runge-Kutta (DOP853) stepping with dense output and a
guard predicate that can reject accepted steps.
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config


class StepSizeUnderflow(RuntimeError):
    """The integrator could not take a step above the minimum step size."""


class GuardViolation(RuntimeError):
    """The guard kept rejecting steps down to the minimum step size."""


@dataclass
class DenseSolution:
    """
    Accepted steps of an integration and the piecewise interpolant between them.

    `t` runs in integration order (decreasing for backward integration).
    """
    t: np.ndarray
    y: np.ndarray
    interpolant: integrate.OdeSolution
    n_evaluations: int = 0
    n_rejected: int = 0
    history: list = field(default_factory=list)

    def __call__(self, t):
        return self.interpolant(t)

    @property
    def t_end(self):
        return float(self.t[-1])

    @property
    def y_end(self):
        return self.y[-1]


def ode_solve(fun, t0, y0, t1, tol=config.TOL, guard=None, atol=None,
              min_step=config.ODE_MIN_STEP, max_step=np.inf):
    """
    Integrate y' = fun(t, y) from t0 to t1 (either direction).

    Args:
        fun (callable): Right-hand side fun(t, y) -> array
        t0 (float): Initial abscissa
        y0 (array-like): Initial state
        t1 (float): Final abscissa
        tol (float): Relative tolerance of the embedded error control
        guard (callable): Optional guard(t, y) -> bool; False rejects the step
        atol (float): Absolute tolerance (defaults to tol)
        min_step (float): Step size below which integration fails
        max_step (float): Upper bound on the step size

    Returns:
        DenseSolution: Accepted steps with dense interpolant

    Raises:
        StepSizeUnderflow: If the error control drives the step below min_step
        GuardViolation: If the guard rejects steps down to min_step
    """
    atol = tol if atol is None else atol
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    rtol = max(tol, 100 * np.finfo(float).eps)

    def make_solver(t_start, y_start, step_cap, first_step=None):
        return integrate.DOP853(fun, t_start, y_start, t1, rtol=rtol, atol=atol,
                                max_step=step_cap, first_step=first_step)

    solver = make_solver(t0, y0, max_step)
    ts, ys, segments = [float(t0)], [y0.copy()], []
    n_rejected = 0
    n_evaluations = 0
    capped_steps = 0

    while solver.status == 'running':
        t_prev, y_prev = solver.t, solver.y.copy()
        message = solver.step()
        if solver.status == 'failed':
            raise StepSizeUnderflow(f"Integration failed at t={t_prev:.6g}: {message}")

        h = abs(solver.t - t_prev)
        if guard is not None and not guard(solver.t, solver.y):
            n_rejected += 1
            n_evaluations += solver.nfev
            half = 0.5 * h
            if half < min_step:
                raise GuardViolation(
                    f"Guard rejected every step down to h={half:.3e} at t={t_prev:.6g}"
                )
            solver = make_solver(t_prev, y_prev, half, first_step=half)
            capped_steps = 0
            continue

        if h < min_step and solver.status == 'running':
            raise StepSizeUnderflow(f"Step size {h:.3e} below minimum at t={solver.t:.6g}")

        segments.append(solver.dense_output())
        ts.append(float(solver.t))
        ys.append(solver.y.copy())

        # After a rejection the step cap is lifted again once the guard stays quiet
        if solver.max_step < max_step:
            capped_steps += 1
            remaining = abs(t1 - solver.t)
            if capped_steps >= 8 and remaining > 0:
                n_evaluations += solver.nfev
                solver = make_solver(solver.t, solver.y, max_step,
                                     first_step=min(2.0 * h, remaining))
                capped_steps = 0

    n_evaluations += solver.nfev
    interpolant = integrate.OdeSolution(np.array(ts), segments)
    return DenseSolution(np.array(ts), np.array(ys), interpolant, n_evaluations, n_rejected)


def cumulative_integral(integrand, z_from, z_to, tol=config.TOL, initial=0.0):
    """
    Running integral I(z) = initial + int_{z_from}^{z} integrand, as an ODE.

    Gives a dense, error-controlled cumulative quadrature in one pass.

    Returns:
        DenseSolution: I along [z_from, z_to]
    """
    return ode_solve(lambda z, y: np.array([integrand(z)]), z_from, [initial], z_to,
                     tol=tol)
