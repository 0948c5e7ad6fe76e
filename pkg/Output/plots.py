"""
Static Plots Module
SVG figures of sample paths, empirical laws against closed forms, and w_q.
"""

import sys
from pathlib import Path

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config


def _save(fig, output_path):
    path = Path(output_path).with_suffix('.svg')
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format='svg')
    plt.close(fig)
    print(f"✓ Plot saved to {path}")
    return path


def plot_trajectories(trajectories, output_path, title="Sample paths"):
    """
    Overlay of up to MAX_PLOTTED_TRAJECTORIES paths.

    Discrete paths are drawn as steps, continuous ones as lines.

    Returns:
        Path: Written SVG
    """
    fig, ax = plt.subplots(figsize=config.FIGURE_SIZE)
    for trajectory in trajectories[:config.MAX_PLOTTED_TRAJECTORIES]:
        times, states = trajectory.times, trajectory.states.astype(float)
        if trajectory.piecewise_constant:
            ax.step(times, states, where='post', color=config.COLOR_SIMULATED, alpha=0.5, lw=0.8)
        else:
            ax.plot(times, states, color=config.COLOR_SIMULATED, alpha=0.5, lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("Z_t")
    ax.set_title(title)
    return _save(fig, output_path)


def plot_pmf_comparison(empirical, closed, output_path, title="Occupation law"):
    """
    Bars of an empirical pmf on {1, 2, ...} with the closed-form pmf as markers.
    """
    empirical = np.asarray(empirical, dtype=float)
    closed = np.asarray(closed, dtype=float)
    fig, ax = plt.subplots(figsize=config.FIGURE_SIZE)
    ax.bar(np.arange(1, empirical.size + 1), empirical, color=config.COLOR_SIMULATED,
           alpha=0.6, label="simulated")
    ax.plot(np.arange(1, closed.size + 1), closed, 'o', color=config.COLOR_CLOSED_FORM,
            label="closed form")
    ax.set_xlabel("state i")
    ax.set_ylabel("probability")
    ax.set_title(title)
    ax.legend()
    return _save(fig, output_path)


def plot_histogram(samples, output_path, title="Empirical law", reference=None, xlabel="value"):
    """
    Density histogram of samples, optionally against a vertical reference
    line (a closed-form mean) or a second sample.
    """
    samples = np.asarray(samples, dtype=float)
    samples = samples[np.isfinite(samples)]
    fig, ax = plt.subplots(figsize=config.FIGURE_SIZE)
    bins = np.histogram_bin_edges(samples, bins='auto')
    ax.hist(samples, bins, density=True, alpha=0.5, color=config.COLOR_SIMULATED,
            label="simulated")
    if reference is not None and np.ndim(reference) == 0:
        ax.axvline(float(reference), color=config.COLOR_CLOSED_FORM, label="closed form")
    elif reference is not None:
        ax.hist(np.asarray(reference, dtype=float), bins, density=True, alpha=0.5,
                color=config.COLOR_CLOSED_FORM, label="reference")
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    ax.legend()
    return _save(fig, output_path)


def plot_riccati(solution, output_path):
    """w_q and W = int_0^s w_q against s, with sqrt(q) r for comparison."""
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=config.FIGURE_SIZE)
    s = solution.s
    ax1.plot(s, solution.w, color=config.COLOR_CLOSED_FORM, label="w_q")
    envelope = np.sqrt(solution.q) * np.array([solution.functionals.r_z(z) for z in solution.z])
    ax1.plot(s, envelope, '--', color=config.COLOR_ENVELOPE, label="sqrt(q) r")
    ax1.set_yscale('log')
    ax1.legend()
    ax2.plot(s, solution.W, color=config.COLOR_CLOSED_FORM)
    ax2.set_ylabel("W(s)")
    ax2.set_xlabel("s")
    ax2.set_xscale('log')
    ax1.set_title(f"Riccati solution, q = {solution.q:g}")
    return _save(fig, output_path)
