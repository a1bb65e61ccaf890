"""
Spin-orbit pipeline: runs one workflow per subcommand, writes its CSV/JSON outputs
and the run manifest into a single output directory.
"""
import logging
import math
import os
import time
from dataclasses import asdict
from typing import Dict, List, Optional

import numpy as np

from . import config as paths
from .analysis.attractors import CENSUS_RESONANCES, census_frame, periodic_census
from .analysis.bifurcation import bifurcation_frame, bifurcation_scan, fit_hopf
from .analysis.precapture import (decay_curve, fit_linear_tidal, max_omega_deviation, solve_Omega,
                                  time_to_capture, time_to_reach)
from .analysis.quasiperiodic import I2_time_average, second_order_averages, solve_construction
from .analysis.spectrum import extract_frequency
from .dynamics import config as C
from .dynamics.integrator import (IntegratorConfig, StroboscopicSampling, UniformSampling, integrate,
                                  stroboscopic_map)
from .dynamics.params import PhysicalParams, SpinState, DEFAULT_PARAMS
from .export.manifest import RunManifest
from .export.to_csv import outcomes_frame, write_frame, write_json
from .survey.basins import SurveyConfig, barrier_check, run_survey

logger = logging.getLogger(__name__)


class SpinOrbitPipeline:
    """
    Orchestrates a single subcommand run: computation, outputs, manifest and optional tracking.
    """
    def __init__(self, params: PhysicalParams = DEFAULT_PARAMS, integrator: Optional[IntegratorConfig] = None,
                 survey_settings: Optional[Dict[str, float]] = None, out_dir: str = paths.OUTPUT_DIR,
                 jobs: int = 1, track: bool = False):
        if jobs == 0:
            raise ValueError("jobs must be non-zero")
        self.params = params
        self.integrator = integrator
        self.survey_settings = dict(survey_settings or {})
        self.out_dir = out_dir
        self.jobs = jobs
        self.track = track
        self.metrics: Dict[str, float] = {}
        self.resolved_integrator: Optional[IntegratorConfig] = integrator
        self._methods = {
            'simulate': self.simulate,
            'periodic-census': self.periodic_census,
            'qp-construct': self.qp_construct,
            'spectrum': self.spectrum,
            'bifurcate': self.bifurcate,
            'precapture': self.precapture,
            'basins': self.basins,
        }

    @property
    def subcommands(self) -> List[str]:
        return list(self._methods)

    def run(self, subcommand: str, args, manifest: RunManifest) -> RunManifest:
        """Runs `subcommand` with parsed `args` and saves the manifest next to its outputs."""
        if subcommand not in self._methods:
            raise ValueError(f"Unknown subcommand '{subcommand}'")
        os.makedirs(self.out_dir, exist_ok=True)
        started = time.perf_counter()
        outputs = self._methods[subcommand](args)
        manifest.duration_s = time.perf_counter() - started
        if self.resolved_integrator is not None:
            manifest.config['integrator'] = asdict(self.resolved_integrator)
        manifest.outputs = [os.path.basename(p) for p in outputs]
        manifest.save(self.out_dir)
        if self.track:
            self._log_to_mlflow(subcommand, manifest)
        print(f"\nWrote {len(outputs)} output file(s) and {paths.MANIFEST_NAME} to {self.out_dir}")
        return manifest

    def _config(self, default: IntegratorConfig) -> IntegratorConfig:
        self.resolved_integrator = self.integrator or default
        return self.resolved_integrator

    def _log_to_mlflow(self, subcommand: str, manifest: RunManifest) -> None:
        import mlflow

        mlflow.set_tracking_uri('file:' + os.path.abspath(os.path.join(self.out_dir, paths.MLFLOW_DIR)))
        mlflow.set_experiment("spin_orbit")
        with mlflow.start_run(run_name=subcommand):
            mlflow.log_param("subcommand", subcommand)
            for key, value in manifest.overrides.items():
                mlflow.log_param(key, value)
            if manifest.seed is not None:
                mlflow.log_param("seed", manifest.seed)
            finite = {k: float(v) for k, v in self.metrics.items() if v is not None and math.isfinite(v)}
            mlflow.log_metrics(finite)
            mlflow.log_metric("duration_s", manifest.duration_s)
        print(f"Run logged to MLflow under {paths.MLFLOW_DIR}/")

    # --- Subcommands ---

    def simulate(self, args) -> List[str]:
        print("\n--- Integrating Trajectory ---")
        n = self.params.n
        state = SpinState(args.theta0, args.thetadot0 * n, args.t0)
        if args.sample == 'strobe':
            sampling, name = StroboscopicSampling(args.every), paths.STROBOSCOPIC_CSV
        else:
            sampling, name = UniformSampling(args.dt if args.dt else self.params.period / 16), paths.TRAJECTORY_CSV
        traj = integrate(state, args.t_end, self._config(IntegratorConfig()), self.params, sampling)
        omega0 = args.resonance / 2.0 if args.resonance is not None else None
        frame = traj.to_frame(omega0, n if omega0 is not None else None)
        frame['thetadot_over_n'] = frame['theta_dot'] / n
        if omega0 is not None:
            frame['zdot_over_n'] = frame['thetadot_over_n'] - omega0
        if args.sample == 'strobe':
            frame.insert(0, 'k', np.rint(frame['t'] / self.params.period).astype(int))
        final = traj.final_state
        print(f"{len(traj)} samples, {traj.steps} steps; final theta_dot/n = {final.theta_dot / n:.6f}")
        self.metrics.update({'final_thetadot_over_n': final.theta_dot / n, 'steps': traj.steps})
        return [write_frame(frame, self.out_dir, name)]

    def periodic_census(self, args) -> List[str]:
        print("\n--- Refining Periodic Solutions ---")
        resonances = args.resonances or CENSUS_RESONANCES
        solutions = periodic_census(self.params, self._config(IntegratorConfig.precise()), resonances, self.jobs)
        frame = census_frame(solutions, self.params)
        for sol in solutions:
            label = 'S' if sol.stable else 'U'
            print(f"{sol.resonance.label:>6} branch {sol.branch}: theta0={sol.section_point.theta:.6f} "
                  f"thetadot0/n={sol.section_point.theta_dot / self.params.n:.8f} [{label}]")
        self.metrics['stable_count'] = int(frame['stable'].sum())
        return [write_frame(frame, self.out_dir, paths.CENSUS_CSV)]

    def qp_construct(self, args) -> List[str]:
        print("\n--- Constructing Quasi-periodic 3:2 Attractor ---")
        construction = solve_construction(self.params)
        record = construction.to_dict()
        if args.averages:
            record['second_order_averages'] = second_order_averages(construction, self.params)
            record['I2_time_average_at_root'] = I2_time_average(construction.a_root, self.params)
        print(f"a* = {construction.a_root:.6g}, C1 = {construction.C1:.6g}, alpha = {construction.alpha:.6g}")
        print(f"D = {construction.D:.6g}, mu = {construction.mu:.6g}, omega_L = {construction.omega_L:.8g}")
        self.metrics.update({'a_root': construction.a_root, 'alpha': construction.alpha, 'mu': construction.mu})
        return [write_json(record, self.out_dir, paths.QP_CONSTRUCTION_JSON)]

    def spectrum(self, args) -> List[str]:
        print("\n--- Spectral Analysis of the 3:2 Attractor ---")
        n, period = self.params.n, self.params.period
        config = self._config(IntegratorConfig())
        state = SpinState(math.pi, 1.5 * n, 0.0)
        if args.transient > 0:
            state = stroboscopic_map(state, args.transient, config, self.params)
        dt = args.dt if args.dt else period / 16
        traj = integrate(state, state.t + args.periods * period, config, self.params, UniformSampling(dt))
        spectrum = extract_frequency(traj, self.params)
        construction_omega = math.sqrt(2.0 * self.params.zeta * self.params.coefficient(C.MAIN_HARMONIC))
        summary = {
            'omega_L': spectrum.omega_L,
            'T1_over_T0': n / spectrum.omega_L,
            'omega_sq_minus_omega_L_sq': construction_omega ** 2 - spectrum.omega_L ** 2,
            'peak_frequencies': spectrum.freq[spectrum.peaks],
            'samples': len(traj),
        }
        print(f"omega_L = {spectrum.omega_L:.6f} rad/yr, T1 = {n / spectrum.omega_L:.4f} T0")
        self.metrics['omega_L'] = spectrum.omega_L
        return [write_frame(spectrum.to_frame(), self.out_dir, paths.SPECTRUM_CSV),
                write_json(summary, self.out_dir, paths.SPECTRUM_JSON)]

    def bifurcate(self, args) -> List[str]:
        print(f"\n--- Bifurcation Scan in {args.param} ---")
        values = np.arange(args.start, args.stop + 0.5 * args.step, args.step)
        points = bifurcation_scan(args.param, values, self.params, self._config(IntegratorConfig.survey()),
                                  args.transient, args.record, self.jobs)
        summary = {'parameter': args.param,
                   'values': [pt.value for pt in points],
                   'amplitudes': [pt.amplitude for pt in points],
                   'omega_L': [pt.omega_L for pt in points]}
        # fit first: a failed fit writes nothing
        if args.fit:
            fit = fit_hopf(summary['values'], summary['amplitudes'], noise_floor=args.noise_floor)
            summary['hopf_fit'] = fit.to_dict()
            print(f"Hopf fit: S0 = {fit.S0:.4f}, kappa = {fit.kappa:.4f}, A0 = {fit.A0:.4g}")
            self.metrics.update({'S0': fit.S0, 'kappa': fit.kappa})
        return [write_frame(bifurcation_frame(points), self.out_dir, paths.BIFURCATION_CSV),
                write_json(summary, self.out_dir, paths.BIFURCATION_FIT_JSON)]

    def precapture(self, args) -> List[str]:
        print("\n--- Pre-capture Estimates ---")
        n = self.params.n
        theta_dot0 = args.thetadot0 * n
        target = args.target * n
        fit = fit_linear_tidal((args.op if args.op else args.thetadot0) * n, self.params)
        sol = solve_Omega(args.theta0, theta_dot0, fit, self.params)
        t_capture = time_to_capture(theta_dot0, target, fit)
        record = {
            'a': fit.a, 'b': fit.b, 'R': sol.R, 't_capture': t_capture,
            'omega_table': sol.Omega,
            'max_omega_deviation': max_omega_deviation(theta_dot0, fit, self.params),
        }
        print(f"a = {fit.a:.4g}, b = {fit.b:.4g}, R = {sol.R:.4f}; estimated capture after {t_capture:.4g} yr")
        if args.full:
            config = self._config(IntegratorConfig.survey())
            record['t_numerical'] = time_to_reach(SpinState(args.theta0, theta_dot0, 0.0), target,
                                                  args.max_time, self.params, config)
            print(f"Numerical first passage: {record['t_numerical']}")
        self.metrics.update({'t_capture': t_capture, 'b': fit.b})
        outputs = [write_json(record, self.out_dir, paths.PRECAPTURE_JSON)]
        if args.curve_t_end:
            outputs.append(write_frame(decay_curve(sol, fit, args.curve_t_end, params=self.params),
                                       self.out_dir, paths.PRECAPTURE_CURVE_CSV))
        return outputs

    def basins(self, args) -> List[str]:
        print("\n--- Basin of Attraction Survey ---")
        settings = dict(self.survey_settings)
        for key, flag in (('delta', args.delta), ('lock_periods', args.lock), ('max_time', args.max_time)):
            if flag is not None:
                settings[key] = flag
        if 'lock_periods' in settings:
            settings['lock_periods'] = int(settings['lock_periods'])
        config = SurveyConfig(n_samples=args.n, seed=args.seed, strips=args.strips, stratified=not args.uniform,
                              integrator=self._config(IntegratorConfig.survey()), **settings)
        outcomes, stats = run_survey(config, self.params, self.jobs)
        report = barrier_check(outcomes, self.params)
        resolved = sum(o.resolved for o in outcomes)
        print(f"{resolved} of {len(outcomes)} samples resolved; barrier check "
              f"{'passed' if report.passed else f'found {len(report.violations)} candidates'}")
        self.metrics.update({'resolved_fraction': resolved / len(outcomes),
                             'barrier_violations': len(report.violations)})
        return [write_frame(outcomes_frame(outcomes, self.params), self.out_dir, paths.OUTCOMES_CSV),
                write_frame(stats, self.out_dir, paths.STRIP_TABLE_CSV),
                write_json(report.to_dict(), self.out_dir, paths.BARRIER_JSON)]