"""Configuration module for the Mercury spin-orbit model: physical constants and integrator/survey defaults."""
import math

# --- Orbital and body constants (years, radians) ---
MEAN_MOTION = 26.0879          # n, rad/yr
ZETA = 0.09545                 # triaxiality strength, yr^-2
ETA = 0.03096                  # tidal strength, yr^-2
GAMMA = 0.3243                 # eta / zeta
ORBITAL_PERIOD = 2 * math.pi / MEAN_MOTION   # T0, yr

# --- Andrade rheology ---
ALPHA_RHEO = 0.2
TAU_MAXWELL = 500.0
TAU_ANDRADE = 500.0
SELF_GRAVITATION = 15.51726

# Fourier coefficients A_k of the triaxial torque, k in {-2..8}
FOURIER_COEFFICIENTS = {
    -2: 7.673e-5,
    -1: 1.865e-4,
    0: 0.0,
    1: -1.023e-1,
    2: 8.958e-1,
    3: 6.542e-1,
    4: 3.260e-1,
    5: 1.380e-1,
    6: 5.325e-2,
    7: 1.937e-2,
    8: 6.763e-3,
}
TRIAXIAL_INDICES = tuple(range(-2, 9))
TIDAL_INDICES = tuple(range(1, 10))     # A_9 is not tabulated and counts as zero
MAIN_HARMONIC = 3

# Continuation multipliers (S scales the k != 3 sidebands, lambda the tidal torque)
SIDEBAND_SCALE = 1.0
DISSIPATION_SCALE = 1.0

# --- Integrator profiles ---
INTEGRATOR_DEFAULTS = {
    'rel_tol': 1e-10,
    'abs_tol': 1e-12,
    'max_step': ORBITAL_PERIOD / 8,
    'kink_slope_threshold': 1.0,
    'clamp_step': ORBITAL_PERIOD / 200,
    'min_step': 1e-14,
}
SURVEY_PROFILE = {'rel_tol': 1e-7, 'abs_tol': 1e-9}
PRECISE_PROFILE = {'rel_tol': 1e-12, 'abs_tol': 1e-14}

# --- Newton refinement of periodic solutions ---
NEWTON_TOL = 1e-10
NEWTON_MAX_STEPS = 25
NEWTON_MAX_HALVINGS = 5

# --- Quadrature ---
J_PANELS = 256
GAUSS_NODES = 8
QUADRATURE_TOL = 1e-9
I2_PSI1_PANELS = 64            # 64 panels x 8 nodes = 512 nodes in psi_1
I2_PSI2_NODES = 64            # smooth part only
I2_PSI2_PANELS = 64
I2_KINK_LEVELS = 40
I2_TOL = 1e-13
ROOT_BRACKET = (1e-4, 2e-2)
ROOT_GRID_POINTS = 48
ROOT_RTOL = 1e-8

# --- Spectral analysis ---
MIN_SPECTRUM_SAMPLES = 2 ** 18
PEAK_MEDIAN_FACTOR = 5.0

# --- Bifurcation scans ---
SCAN_TRANSIENT_PERIODS = 50_000
SCAN_RECORD_PERIODS = 200

# --- Pre-capture ---
KINK_EXCLUSION = 0.02          # in units of n around half-integers
OMEGA_FIXED_POINT_TOL = 1e-10
OMEGA_MAX_ITERATIONS = 100

# --- Basin survey ---
SURVEY_DEFAULTS = {
    'delta': 0.02,
    'lock_periods': 500,
    'max_time': 3e7,
    'strip_width': 0.5,        # in units of n
    'thetadot_max': 4.5,       # in units of n
}
RANDOM_SEED = 42
