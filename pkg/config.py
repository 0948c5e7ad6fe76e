"""
Configuration file for the Logistic Branching Process toolkit
All parameters and constants used across the system
"""

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

# ============================================================================
# NUMERICAL TOLERANCES
# ============================================================================

# Deterministic functionals (m, theta, xi, nu, mu, double integrals)
TOL = 1e-10

# Inversion of theta (phi) by bracketed root finding
TOL_PHI = 1e-12

# Riccati solution: residual of w' - w^2 + q r^2 and terminal decay of w
TOL_RES = 1e-6
TOL_W = 1e-8

# Maximum number of shooting refinements T_k -> xi
K_MAX = 40

# QUADPACK subinterval budget per call
QUAD_LIMIT = 400

# Two quadrature routes for E(T_a) must agree to this relative error
ROUTE_AGREEMENT_TOL = 1e-8

# Riccati shooting works in a log coordinate z with s -> 0 as z -> -inf.
# Lower end of the integration range (s is roughly exp(z) there).
RICCATI_Z_MIN = -23.0

# Start of the shooting schedule (z = 0 is phi = 1/2, resp. lambda = 1)
RICCATI_Z_START = 0.0

# Number of points in the fixed comparison grid on (0, T0)
COMPARISON_GRID_SIZE = 64

# Step rejection when y exceeds SAFETY * sqrt(q) * r in the envelope zones
ENVELOPE_SAFETY = 10.0

# Fraction of the grid at each end treated as an envelope zone
ENVELOPE_ZONE_FRACTION = 0.1

# Smallest step the guarded ODE driver accepts before giving up
ODE_MIN_STEP = 1e-14

# Integrator tolerance for the shooting runs and the transform sweeps
RICCATI_ODE_TOL = 1e-11

# T_k approaches xi geometrically by this ratio (doubling for xi = inf)
RICCATI_SCHEDULE_RATIO = 2.0

# Successive shots may decrease by at most this relative amount
MONOTONE_SLACK = 1e-8

# Step of the five-point derivative used for the residual
RESIDUAL_STEP = 1e-3

# Transform sweeps hand over to quadrature once dm/dz exceeds this slope
TRANSFORM_SLOPE_SWITCH = 200.0

# z beyond which a transform sweep always hands over to quadrature
TRANSFORM_Z_TAIL = 40.0

# Above this dm/dz, e^{-m} theta is replaced by its leading term e^{log_jacobian} / (dm/dz)
TRANSFORM_ASYMPTOTIC_SLOPE = 1e8

# Continuous tails in z are truncated here (lambda = e^60)
TRANSFORM_Z_MAX = 60.0

# Relative slack when deciding that a Levy mechanism has nonnegative drift
SUBORDINATOR_DRIFT_TOL = 1e-13

# ============================================================================
# SIMULATION DEFAULTS
# ============================================================================

DEFAULT_SEED = 20240917
DEFAULT_REPLICAS = 10_000
DEFAULT_T_MAX = 100.0
DEFAULT_Z_CAP = 10**7
DEFAULT_DT = 1e-3
DEFAULT_X_INF = 1000
DEFAULT_X0 = 1.0
DEFAULT_BURN_IN = 0.0
DEFAULT_Q = 1.0
DEFAULT_N_TERMS = 30
DEFAULT_WORKERS = 1

# Random draws are taken from each replica stream in blocks of this size
DRAW_CHUNK = 4096

# Replicas advanced together by the vectorized Euler kernel
EULER_BLOCK = 1000

# Lamperti route: the OU step near zero is capped at
# LAMPERTI_STEP_FRACTION * R^2 / gamma so the Brownian move stays small
LAMPERTI_STEP_FRACTION = 1e-2

# Below this level the OU step stops shrinking with R (crossings then happen within a few steps)
LAMPERTI_R_FLOOR = 1e-4

# A time change whose final interval carries more than this share of eta is flagged coarse
LAMPERTI_COARSE_FRACTION = 0.05

# ============================================================================
# ACCEPTANCE THRESHOLDS
# ============================================================================

STATIONARY_TV_MAX = 0.02
SERIES_VS_CLOSED_MAX = 1e-10
LAPLACE_MC_MAX = 0.01
X_INF_SHIFT_MAX = 0.002
EXPECTED_TA_REL_MAX = 0.05
CENSORING_MAX = 0.001
KS_TWO_ROUTE_MAX = 0.02
KS_DT_SHIFT_MAX = 0.01
RESOLVENT_MC_MAX = 0.01
BOUNDARY_PIN_MAX = 1e-8
SCHEDULE_AGREEMENT_MAX = 1e-5
SUBORDINATOR_LAPLACE_MAX = 0.02
NULL_RECURRENT_EPS = 0.1
ABSORBED_FRACTION_MIN = 0.999
DYNKIN_SIGMAS = 3.0
IDENTITY_REL_MAX = 1e-6

# Replica counts used by the acceptance suites (overridable by --replicas)
ACCEPTANCE_REPLICAS_LARGE = 100_000
ACCEPTANCE_REPLICAS_SMALL = 10_000

# ============================================================================
# ACCEPTANCE MECHANISMS
# ============================================================================

# Discrete binary, no natural deaths: stationary law is Poisson(rho/c) | >= 1
STATIONARY_MECHANISM = {'setting': 'discrete', 'd': 0.0, 'c': 1.0, 'pi': {1: 1.0}}
STATIONARY_T_MAX = 1.0e5

# Discrete binary with natural deaths (d = c = rho = 1): extinction from infinity
EXTINCTION_MECHANISM = {'setting': 'discrete', 'd': 1.0, 'c': 1.0, 'pi': {1: 1.0}}
EXTINCTION_T_MAX = 1.0e3

# Feller-logistic diffusion dZ = bZ dt - cZ^2 dt + sqrt(gamma Z) dB
FELLER_MECHANISM = {'setting': 'continuous', 'b': 1.0, 'gamma': 1.0, 'c': 1.0}
FELLER_X0 = 1.0
FELLER_T = 1.0

# Regime trichotomy points
SUBORDINATOR_MECHANISM = {'setting': 'continuous', 'b': 1.0, 'gamma': 0.0, 'c': 1.0}
NULL_RECURRENT_MECHANISM = {'setting': 'continuous', 'b': 0.0, 'gamma': 0.0,
                            'atoms': [[1.0, 0.5]], 'c': 1.0}
NO_ABSORPTION_MECHANISM = {'setting': 'continuous', 'b': -1.0, 'gamma': 0.0,
                           'atoms': [[1.0, 0.5]], 'c': 1.0}
SUBORDINATOR_T = 50.0
SUBORDINATOR_LAMBDAS = (0.5, 1.0, 2.0)

# Rescaled family (lambda, delta, gamma, c) and the n-sequence
SCALING_PARAMETERS = {'lam': 1.0, 'delta': 0.5, 'gamma': 1.0, 'c': 1.0}
SCALING_N_VALUES = (10, 30, 100)

RICCATI_Q_VALUES = (0.1, 1.0, 10.0)
IDENTITY_LAMBDAS = (0.5, 1.0, 2.0)

# ============================================================================
# FILE PATHS
# ============================================================================

DEFAULT_CONFIG_PATH = "lbp_config.json"
OUTPUT_DIR = "output"
REPORT_FILENAME = "report.json"

# ============================================================================
# VISUALIZATION PARAMETERS
# ============================================================================

COLOR_SIMULATED = "#1f77b4"
COLOR_CLOSED_FORM = "#d62728"
COLOR_ENVELOPE = "#7f7f7f"
MAX_PLOTTED_TRAJECTORIES = 20
FIGURE_SIZE = (8, 5)

# ============================================================================
# RUN CONFIGURATION
# ============================================================================


@dataclass(frozen=True)
class RunConfig:
    """
    Reproducibility contract of every stochastic command.

    Replica r always draws from the substream derived from (seed, r), so a
    run is fully determined by this record.
    """
    seed: int = DEFAULT_SEED
    replicas: int = DEFAULT_REPLICAS
    t_max: float = DEFAULT_T_MAX
    z_cap: int = DEFAULT_Z_CAP
    dt: float = DEFAULT_DT
    x_inf: int = DEFAULT_X_INF
    x0: float = DEFAULT_X0
    burn_in: float = DEFAULT_BURN_IN
    q: float = DEFAULT_Q
    n_terms: int = DEFAULT_N_TERMS
    workers: int = DEFAULT_WORKERS
    tol: float = TOL
    tol_phi: float = TOL_PHI
    tol_res: float = TOL_RES
    tol_w: float = TOL_W
    k_max: int = K_MAX

    def validated(self):
        """
        Check field ranges.

        Returns:
            RunConfig: self, for chaining

        Raises:
            ValueError: If a field is out of range
        """
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit nonnegative integer, got {self.seed}")
        for name in ('replicas', 't_max', 'z_cap', 'dt', 'x_inf', 'q', 'n_terms',
                     'workers', 'tol', 'tol_phi', 'tol_res', 'tol_w', 'k_max'):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"RunConfig.{name} must be positive, got {value}")
        if self.x0 < 0:
            raise ValueError(f"RunConfig.x0 must be nonnegative, got {self.x0}")
        if not 0 <= self.burn_in < self.t_max:
            raise ValueError(
                f"RunConfig.burn_in must lie in [0, t_max), got {self.burn_in} (t_max={self.t_max})"
            )
        return self

    def with_overrides(self, **overrides):
        """Return a copy with the given fields replaced (types coerced to the defaults)."""
        known = {f.name: f for f in fields(self)}
        coerced = {}
        for key, value in overrides.items():
            if key not in known:
                raise ValueError(f"Unknown RunConfig field: '{key}'")
            if isinstance(getattr(self, key), int):
                try:
                    coerced[key] = int(value)
                except ValueError:
                    coerced[key] = int(float(value))
            else:
                coerced[key] = float(value)
        return replace(self, **coerced).validated()

    def as_dict(self):
        return asdict(self)


# ============================================================================
# HELPER FUNCTIONS
# ============================================================================

def get_run_config(**overrides):
    """
    Build a RunConfig from the defaults above.

    Args:
        **overrides: Field values replacing the defaults

    Returns:
        RunConfig: Validated configuration
    """
    return RunConfig().with_overrides(**overrides)


def run_field_names():
    """Names of the fields accepted in the `run` section of a config file."""
    return [f.name for f in fields(RunConfig)]


def standard_error(samples):
    """
    Monte Carlo standard error of the sample mean.

    Args:
        samples (np.ndarray): Replica values

    Returns:
        float: std / sqrt(n), 0 for fewer than two samples
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / np.sqrt(samples.size))
