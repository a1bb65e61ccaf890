import math

import numpy as np
import pytest

from src.dynamics.params import SpinState
from src.survey.basins import (UNRESOLVED, CaptureOutcome, SurveyConfig, barrier_check, classify_capture,
                               draw_initial_conditions, resonance_label, run_survey, strip_stats)
from src.survey.seeding import SampleSeeder

N = 26.0879


def _outcome(index, ratio, j, strip=(0.5, 1.0)):
    return CaptureOutcome(index=index, initial=SpinState(0.5, ratio * N, 0.0), j=j,
                          capture_time=math.nan if j is None else 1e6, strip=strip)


@pytest.mark.parametrize("j, label", [
    (3, '3:2'), (2, '1:1'), (4, '2:1'), (5, '5:2'), (1, '1:2'), (-2, '-1:1'), (-1, '-1:2'), (None, UNRESOLVED),
])
def test_resonance_label(j, label):
    assert resonance_label(j) == label


def test_seeder_streams_are_per_index():
    seeder = SampleSeeder(42)
    np.testing.assert_array_equal(seeder.uniforms(7), SampleSeeder(42).uniforms(7))
    assert not np.array_equal(seeder.uniforms(7), seeder.uniforms(8))
    assert not np.array_equal(seeder.uniforms(7), SampleSeeder(43).uniforms(7))
    with pytest.raises(ValueError):
        SampleSeeder(-1)
    with pytest.raises(ValueError):
        seeder.stream(-3)


def test_draws_are_reproducible_and_stratified(params):
    config = SurveyConfig(n_samples=45, seed=5)
    draws = draw_initial_conditions(config, params)
    again = draw_initial_conditions(config, params)
    assert [s for s, _ in draws] == [s for s, _ in again]
    assert config.strip_count == 9
    for i, (state, (lo, hi)) in enumerate(draws):
        assert (lo, hi) == (0.5 * (i % 9), 0.5 * (i % 9) + 0.5)
        assert 0.0 <= state.theta < math.pi
        assert lo * params.n < state.theta_dot <= hi * params.n
        assert state.t == 0.0


def test_draw_of_one_sample_ignores_the_rest(params):
    small = draw_initial_conditions(SurveyConfig(n_samples=10, seed=9), params)
    large = draw_initial_conditions(SurveyConfig(n_samples=30, seed=9), params)
    assert [s for s, _ in small] == [s for s, _ in large[:10]]


def test_strip_subset_and_uniform_region(params):
    config = SurveyConfig(n_samples=6, strips=(3,))
    assert config.strip_bounds() == [(1.5, 2.0)]
    assert all(strip == (1.5, 2.0) for _, strip in draw_initial_conditions(config, params))
    uniform = draw_initial_conditions(SurveyConfig(n_samples=20, stratified=False), params)
    assert all(strip == (0.0, 4.5) for _, strip in uniform)


@pytest.mark.parametrize("changes", [
    {'n_samples': 0}, {'delta': 0.3}, {'lock_periods': 0}, {'max_time': -1.0}, {'strips': (9,)},
])
def test_survey_config_validation(changes):
    with pytest.raises(ValueError):
        SurveyConfig(**changes)


def test_survey_config_record():
    record = SurveyConfig(strips=(1, 2)).to_dict()
    assert record['strips'] == [1, 2]
    assert record['integrator']['rel_tol'] == 1e-7


def test_strip_statistics():
    outcomes = [_outcome(0, 0.7, 2), _outcome(1, 0.8, 2), _outcome(2, 0.9, None),
                _outcome(3, 1.7, 3, strip=(1.5, 2.0))]
    stats = strip_stats(outcomes)
    assert list(stats.columns) == ['strip_lo', 'strip_hi', 'outcome', 'm', 'total', 'p', 'c', 'p_resolved']
    row = stats[(stats['strip_lo'] == 0.5) & (stats['outcome'] == '1:1')].iloc[0]
    assert row['m'] == 2 and row['total'] == 3
    assert row['p'] == pytest.approx(2 / 3)
    assert row['c'] == pytest.approx(1.96 * math.sqrt(2 / 3 * 1 / 3 / 3))
    assert row['p_resolved'] == pytest.approx(1.0)
    unresolved = stats[stats['outcome'] == UNRESOLVED].iloc[0]
    assert unresolved['m'] == 1
    assert math.isnan(unresolved['p_resolved'])
    upper = stats[stats['strip_lo'] == 1.5].iloc[0]
    assert upper['outcome'] == '3:2' and upper['p'] == 1.0 and upper['c'] == 0.0
    assert strip_stats([]).empty


def test_barrier_rules(params):
    outcomes = [
        _outcome(0, 1.7, 2),      # below 3:2 from above 1.5 n
        _outcome(1, 0.8, 3),      # above 1:1 from below n
        _outcome(2, 1.2, 4),      # neither 1:1 nor 3:2
        _outcome(3, 2.0, 3),
        _outcome(4, 0.6, 2),
        _outcome(5, 1.3, 2),
        _outcome(6, 3.0, None),
        _outcome(7, 2.2, -2),
    ]
    report = barrier_check(outcomes, params)
    assert report.checked == 7
    assert not report.passed
    assert sorted(v['index'] for v in report.violations) == [0, 1, 2, 7]
    assert report.to_dict()['passed'] is False


def test_barrier_check_passes_clean_survey(params):
    report = barrier_check([_outcome(0, 2.0, 3), _outcome(1, 0.6, 2)], params)
    assert report.passed and report.violations == []


@pytest.mark.slow
def test_capture_into_3_2(params):
    config = SurveyConfig(max_time=3e6)
    outcome = classify_capture(SpinState(1.7, 1.75 * params.n, 0.0), config, params)
    assert outcome.label == '3:2'
    assert outcome.capture_time == pytest.approx(1.08e6, rel=0.1)


@pytest.mark.slow
def test_survey_is_independent_of_worker_count(params):
    config = SurveyConfig(n_samples=8, seed=11, strips=(2, 3), max_time=2e4)
    serial, stats_serial = run_survey(config, params, jobs=1)
    parallel, stats_parallel = run_survey(config, params, jobs=2)
    assert [(o.index, o.j) for o in serial] == [(o.index, o.j) for o in parallel]
    np.testing.assert_array_equal([o.capture_time for o in serial], [o.capture_time for o in parallel])
    assert stats_serial.equals(stats_parallel)


@pytest.mark.slow
def test_desk_scale_survey(params):
    config = SurveyConfig(n_samples=900, seed=42)
    outcomes, stats = run_survey(config, params, jobs=-1)
    assert barrier_check(outcomes, params).passed
    assert stats.groupby(['strip_lo', 'strip_hi'])['total'].first().eq(100).all()

    def fraction(label, lo, hi):
        pool = [o for o in outcomes if lo <= o.strip[0] and o.strip[1] <= hi]
        return sum(o.label == label for o in pool) / len(pool)

    assert fraction('3:2', 1.5, 2.0) >= 0.95
    assert 0.40 <= fraction('3:2', 2.5, 4.5) <= 0.62
    assert fraction('1:1', 0.0, 1.0) >= 0.85
