"""
Seeded Monte-Carlo survey of the basins of attraction over [0, pi) x (0, 4.5 n].

Initial conditions are drawn per sample index from counter-based streams, integrated until they
lock onto a j:2 resonance (or the time limit), and aggregated per strip of width n/2.
"""
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..dynamics import config as C
from ..dynamics.integrator import IntegratorConfig, watch_capture
from ..dynamics.params import PhysicalParams, SpinState, DEFAULT_PARAMS
from .seeding import SampleSeeder

logger = logging.getLogger(__name__)

UNRESOLVED = 'Unresolved'
Z_95 = 1.96
SURVEY_KEYS = frozenset(('delta', 'lock_periods', 'max_time'))


def resonance_label(j: Optional[int]) -> str:
    """'p:1' for even j and 'j:2' for odd j; 'Unresolved' for None."""
    if j is None:
        return UNRESOLVED
    if j % 2 == 0:
        return f"{j // 2}:1"
    return f"{j}:2"


@dataclass(frozen=True)
class SurveyConfig:
    """Sampling region, capture rule and integrator profile of a basin survey."""
    n_samples: int = 900
    seed: int = C.RANDOM_SEED
    delta: float = C.SURVEY_DEFAULTS['delta']
    lock_periods: int = C.SURVEY_DEFAULTS['lock_periods']
    max_time: float = C.SURVEY_DEFAULTS['max_time']
    strip_width: float = C.SURVEY_DEFAULTS['strip_width']
    thetadot_max: float = C.SURVEY_DEFAULTS['thetadot_max']
    strips: Optional[Tuple[int, ...]] = None
    stratified: bool = True
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig.survey)

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError(f"n_samples must be positive, got {self.n_samples}")
        if not 0.0 < self.delta < 0.25:
            raise ValueError(f"delta must lie in (0, 0.25), got {self.delta}")
        if self.lock_periods < 1 or self.max_time <= 0:
            raise ValueError("lock_periods and max_time must be positive")
        count = self.strip_count
        if self.strips is not None and any(not 0 <= i < count for i in self.strips):
            raise ValueError(f"Strip indices must lie in [0, {count}), got {self.strips}")

    @property
    def strip_count(self) -> int:
        return int(round(self.thetadot_max / self.strip_width))

    def strip_bounds(self) -> List[Tuple[float, float]]:
        """(lo, hi] bounds in units of n of the strips in use."""
        indices = self.strips if self.strips is not None else range(self.strip_count)
        return [(i * self.strip_width, (i + 1) * self.strip_width) for i in indices]

    def to_dict(self):
        d = asdict(self)
        d['strips'] = list(self.strips) if self.strips is not None else None
        return d


@dataclass
class CaptureOutcome:
    index: int
    initial: SpinState
    j: Optional[int]
    capture_time: float
    strip: Tuple[float, float]

    @property
    def label(self) -> str:
        return resonance_label(self.j)

    @property
    def resolved(self) -> bool:
        return self.j is not None


def draw_initial_conditions(config: SurveyConfig, params: PhysicalParams = DEFAULT_PARAMS):
    """
    Initial states for every sample index, with their strip.

    theta0 is uniform on [0, pi) and theta_dot0 uniform on the strip's (lo, hi]; with stratification
    sample i falls in strip i mod (number of strips), otherwise the whole region is one strip.
    """
    seeder = SampleSeeder(config.seed)
    strips = config.strip_bounds()
    if not config.stratified:
        strips = [(strips[0][0], strips[-1][1])]
    draws = []
    for i in range(config.n_samples):
        lo, hi = strips[i % len(strips)]
        u_theta, u_rate = seeder.uniforms(i)
        rate = (hi - u_rate * (hi - lo)) * params.n
        draws.append((SpinState(math.pi * u_theta, rate, 0.0), (lo, hi)))
    return draws


def classify_capture(state: SpinState, config: SurveyConfig, params: PhysicalParams = DEFAULT_PARAMS,
                     index: int = 0, strip: Tuple[float, float] = (math.nan, math.nan)) -> CaptureOutcome:
    """Integrates one initial condition until it locks onto a resonance or max_time runs out."""
    j, t_lock, _ = watch_capture(state, config.delta, config.lock_periods, config.max_time,
                                 config.integrator, params)
    return CaptureOutcome(index=index, initial=state, j=j, capture_time=t_lock, strip=strip)


def run_survey(config: SurveyConfig, params: PhysicalParams = DEFAULT_PARAMS, jobs: int = 1):
    """
    Classifies every drawn initial condition, in parallel, results ordered by sample index.

    :return: (outcomes, per-strip statistics frame).
    """
    draws = draw_initial_conditions(config, params)
    logger.info("Basin survey: %d samples over %d strips, seed %d", len(draws), len(config.strip_bounds()),
                config.seed)
    outcomes = Parallel(n_jobs=jobs)(
        delayed(classify_capture)(state, config, params, i, strip) for i, (state, strip) in enumerate(draws))
    unresolved = sum(not o.resolved for o in outcomes)
    if unresolved:
        logger.warning("%d of %d samples unresolved after %.3g yr", unresolved, len(outcomes), config.max_time)
    return outcomes, strip_stats(outcomes)


def strip_stats(outcomes: Sequence[CaptureOutcome]) -> pd.DataFrame:
    """
    Per strip and outcome: count m, fraction p = m/total, 95% half-width c = 1.96 sqrt(p(1-p)/total),
    and p_resolved over resolved samples only. Unresolved samples get their own row.
    """
    columns = ['strip_lo', 'strip_hi', 'outcome', 'm', 'total', 'p', 'c', 'p_resolved']
    if not outcomes:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame({'strip_lo': [o.strip[0] for o in outcomes],
                          'strip_hi': [o.strip[1] for o in outcomes],
                          'outcome': [o.label for o in outcomes],
                          'resolved': [o.resolved for o in outcomes]})
    rows = []
    for (lo, hi), group in frame.groupby(['strip_lo', 'strip_hi'], sort=True):
        total = len(group)
        resolved_total = int(group['resolved'].sum())
        for label, m in group['outcome'].value_counts(sort=False).sort_index().items():
            p = m / total
            rows.append({
                'strip_lo': lo, 'strip_hi': hi, 'outcome': label, 'm': int(m), 'total': total,
                'p': p, 'c': Z_95 * math.sqrt(p * (1.0 - p) / total),
                'p_resolved': (m / resolved_total) if (label != UNRESOLVED and resolved_total) else math.nan,
            })
    return pd.DataFrame(rows, columns=columns)


@dataclass
class BarrierReport:
    """Resolved outcomes that cross the 3:2 barrier from above or the 1:1 barrier from below."""
    checked: int
    violations: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {'checked': self.checked, 'passed': self.passed, 'violations': self.violations}


def _barrier_rule(ratio: float, j: int) -> Optional[str]:
    if j < 0:
        return 'retrograde outcome from a prograde start'
    if ratio > 1.5 and j < 3:
        return 'below 3:2 from above 1.5n'
    if ratio < 1.0 and j > 2:
        return 'above 1:1 from below n'
    if 1.0 < ratio <= 1.5 and j not in (2, 3):
        return 'neither 1:1 nor 3:2 from (n, 1.5n]'
    return None


def barrier_check(outcomes: Sequence[CaptureOutcome], params: PhysicalParams = DEFAULT_PARAMS) -> BarrierReport:
    """Collects barrier violations as rare-event candidates; they are reported, not raised."""
    report = BarrierReport(checked=0)
    for o in outcomes:
        if not o.resolved:
            continue
        report.checked += 1
        ratio = o.initial.theta_dot / params.n
        rule = _barrier_rule(ratio, o.j)
        if rule is not None:
            report.violations.append({'index': o.index, 'theta0': o.initial.theta,
                                      'thetadot0_over_n': ratio, 'outcome': o.label, 'rule': rule})
    if report.violations:
        logger.warning("Barrier check: %d rare-event candidates", len(report.violations))
    return report
