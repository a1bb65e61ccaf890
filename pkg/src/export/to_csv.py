import json
import math
import os

import numpy as np
import pandas as pd

from ..dynamics.params import PhysicalParams, DEFAULT_PARAMS


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _clean(value):
    # JSON has no NaN; write null instead
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def write_json(data, out_dir, file_name):
    """Writes `data` as indented JSON into out_dir and returns the path."""
    path = os.path.join(out_dir, file_name)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_clean(data), f, indent=4, default=_json_default)
    return path


def write_frame(frame: pd.DataFrame, out_dir, file_name):
    """Writes a table as CSV without the index and returns the path."""
    path = os.path.join(out_dir, file_name)
    frame.to_csv(path, index=False, encoding='utf-8')
    return path


def outcomes_frame(outcomes, params: PhysicalParams = DEFAULT_PARAMS) -> pd.DataFrame:
    """Per-sample survey table: theta0, thetadot0_over_n, outcome, capture_time."""
    return pd.DataFrame({
        'theta0': [o.initial.theta for o in outcomes],
        'thetadot0_over_n': [o.initial.theta_dot / params.n for o in outcomes],
        'outcome': [o.label for o in outcomes],
        'capture_time': [o.capture_time for o in outcomes],
    }, columns=['theta0', 'thetadot0_over_n', 'outcome', 'capture_time'])
