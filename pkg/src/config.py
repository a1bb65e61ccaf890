import os

OUTPUT_DIR = 'output'

# --- Default configuration lookup ---
CONFIG_DIR_ENV = 'SPINORBIT_CONFIG_DIR'
DEFAULT_CONFIG_NAME = 'spinorbit.conf'

# --- Output file names (relative to --out) ---
MANIFEST_NAME = 'manifest.json'
TRAJECTORY_CSV = 'trajectory.csv'
STROBOSCOPIC_CSV = 'stroboscopic.csv'
CENSUS_CSV = 'census.csv'
QP_CONSTRUCTION_JSON = 'qp_construction.json'
SPECTRUM_CSV = 'spectrum.csv'
SPECTRUM_JSON = 'spectrum.json'
BIFURCATION_CSV = 'bifurcation.csv'
BIFURCATION_FIT_JSON = 'bifurcation_fit.json'
PRECAPTURE_JSON = 'precapture.json'
PRECAPTURE_CURVE_CSV = 'precapture_curve.csv'
OUTCOMES_CSV = 'outcomes.csv'
STRIP_TABLE_CSV = 'strip_table.csv'
BARRIER_JSON = 'barrier_report.json'
MLFLOW_DIR = 'mlruns'


def default_config_path():
    """Returns the default config file path from the environment, or None if unset/missing."""
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if not config_dir:
        return None
    path = os.path.join(config_dir, DEFAULT_CONFIG_NAME)
    return path if os.path.isfile(path) else None


def read_key_values(path):
    """
    Reads a plain-text `key = value` file. Blank lines and `#` comments are ignored.

    :param path: Path to the config file.
    :return: Ordered dict of raw string values.
    :raises ValueError: On a line without '=' (the message names the line).
    """
    values = {}
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got '{raw.strip()}'")
            key, value = line.split('=', 1)
            key, value = key.strip(), value.strip()
            if not key or not value:
                raise ValueError(f"{path}:{lineno}: empty key or value in '{raw.strip()}'")
            values[key] = value
    return values
