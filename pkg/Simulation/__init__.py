"""
Simulation Module
Sample paths of the logistic branching process in both settings: exact
event-driven runs for integer states, Euler-Maruyama and the Lamperti time
change for continuous states.
"""

from . import continuous_process, discrete_process, lamperti, replicas, trajectory

__all__ = ['continuous_process', 'discrete_process', 'lamperti', 'replicas', 'trajectory']
