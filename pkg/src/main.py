import argparse
import logging
import sys
from dataclasses import asdict

from .config import OUTPUT_DIR, default_config_path, read_key_values
from .dynamics.integrator import INTEGRATOR_KEYS, IntegratorConfig
from .dynamics.params import PARAM_KEYS, PhysicalParams
from .exceptions import InvalidParameters, SpinOrbitError
from .export.manifest import RunManifest
from .survey.basins import SURVEY_KEYS

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2


class UsageError(Exception):
    """Bad flags or a bad config file; maps to exit status 1."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _key_value(text):
    if '=' not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got '{text}'")
    key, value = text.split('=', 1)
    return key.strip(), value.strip()


def _int_list(text):
    try:
        return tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser():
    common = _ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help="Plain-text key = value override file.")
    common.add_argument('--set', dest='overrides', type=_key_value, action='append', default=[],
                        metavar='KEY=VALUE', help="Override one parameter (repeatable).")
    common.add_argument('--jobs', type=int, default=1, help="Worker processes (default: 1; -1 for all cores).")
    common.add_argument('--out', type=str, default=OUTPUT_DIR, help=f"Output directory (default: {OUTPUT_DIR}).")
    common.add_argument('--verbose', action='store_true', default=False, help="Log at DEBUG level.")
    common.add_argument('--track', action='store_true', default=False, help="Log metrics to MLflow under --out.")

    parser = _ArgumentParser(prog='spinorbit', description="Mercury spin-orbit toolkit")
    parser.add_argument('--from-manifest', type=str, default=None, metavar='PATH',
                        help="Replay the run recorded in a manifest file or output directory.")
    sub = parser.add_subparsers(dest='subcommand')

    p = sub.add_parser('simulate', parents=[common], help="Integrate one trajectory.")
    p.add_argument('--theta0', type=float, required=True, help="Initial angle (rad).")
    p.add_argument('--thetadot0', type=float, required=True, help="Initial spin rate in units of n.")
    p.add_argument('--t0', type=float, default=0.0, help="Initial time (yr).")
    p.add_argument('--t-end', type=float, required=True, help="Final time (yr).")
    p.add_argument('--sample', choices=['strobe', 'uniform'], default='strobe', help="Output sampling rule.")
    p.add_argument('--every', type=int, default=1, help="Stroboscopic stride in periods.")
    p.add_argument('--dt', type=float, default=None, help="Uniform sampling step (yr; default T0/16).")
    p.add_argument('--resonance', type=int, default=None, metavar='P',
                   help="Add libration column z = theta - (P/2) n t.")

    p = sub.add_parser('periodic-census', parents=[common], help="Refine and classify the periodic solutions.")
    p.add_argument('--resonances', type=_int_list, default=None, help="Comma-separated p values (default: all).")

    p = sub.add_parser('qp-construct', parents=[common], help="Analytic quasi-periodic 3:2 attractor.")
    p.add_argument('--averages', action='store_true', default=False,
                   help="Also evaluate the second-order secular averages and the time-average form of I2.")

    p = sub.add_parser('spectrum', parents=[common], help="Slow frequency of the 3:2 attractor by FFT.")
    p.add_argument('--periods', type=int, default=200_000, help="Recorded orbital periods.")
    p.add_argument('--transient', type=int, default=5_000, help="Discarded orbital periods.")
    p.add_argument('--dt', type=float, default=None, help="Sampling step (yr; default T0/16).")

    p = sub.add_parser('bifurcate', parents=[common], help="Bifurcation scan in S or lambda.")
    p.add_argument('--param', choices=['S', 'lambda'], default='S')
    p.add_argument('--start', type=float, required=True)
    p.add_argument('--stop', type=float, required=True)
    p.add_argument('--step', type=float, default=0.005)
    p.add_argument('--transient', type=int, default=50_000, help="Discarded orbital periods per value.")
    p.add_argument('--record', type=int, default=200, help="Recorded stroboscopic values per value.")
    p.add_argument('--fit', action='store_true', default=False, help="Fit A0 (S - S0)^kappa to the amplitudes.")
    p.add_argument('--noise-floor', type=float, default=1e-7, help="Amplitude below which a value counts as periodic.")

    p = sub.add_parser('precapture', parents=[common], help="Linear-tidal pre-capture estimates.")
    p.add_argument('--thetadot0', type=float, required=True, help="Initial spin rate in units of n.")
    p.add_argument('--theta0', type=float, default=0.0, help="Initial angle (rad).")
    p.add_argument('--target', type=float, default=1.5, help="Target spin rate in units of n.")
    p.add_argument('--op', type=float, default=None, help="Operating point in units of n (default: thetadot0).")
    p.add_argument('--curve-t-end', type=float, default=None, help="Write the approximate decay curve up to this time (yr).")
    p.add_argument('--full', action='store_true', default=False, help="Also integrate the full model to the target.")
    p.add_argument('--max-time', type=float, default=3e7, help="Integration limit for --full (yr).")

    p = sub.add_parser('basins', parents=[common], help="Seeded basin-of-attraction survey.")
    p.add_argument('--n', type=int, default=900, help="Number of samples.")
    p.add_argument('--seed', type=int, default=42)
    p.add_argument('--strips', type=_int_list, default=None, help="Comma-separated strip indices (default: all).")
    p.add_argument('--max-time', type=float, default=None, help="Integration limit per sample (yr).")
    p.add_argument('--delta', type=float, default=None, help="Capture tolerance on theta_dot/n.")
    p.add_argument('--lock', type=int, default=None, help="Lock duration in orbital periods.")
    p.add_argument('--uniform', action='store_true', default=False, help="Sample the region without stratification.")
    return parser


def resolve_settings(args):
    """
    Merges defaults < $SPINORBIT_CONFIG_DIR/spinorbit.conf < --config < --set.

    :return: (params, integrator config or None, survey settings, merged raw overrides).
    :raises UsageError: On unknown keys or malformed values.
    """
    raw = {}
    for path in (default_config_path(), args.config):
        if path:
            try:
                raw.update(read_key_values(path))
            except OSError as e:
                raise UsageError(f"--config: cannot read {path}: {e}")
            except ValueError as e:
                raise UsageError(str(e))
    raw.update(dict(args.overrides))
    unknown = sorted(set(raw) - PARAM_KEYS - INTEGRATOR_KEYS - SURVEY_KEYS)
    if unknown:
        raise UsageError(f"Unknown configuration key(s): {', '.join(unknown)}")
    try:
        params = PhysicalParams.from_mapping({k: v for k, v in raw.items() if k in PARAM_KEYS})
        integrator_values = {k: float(v) for k, v in raw.items() if k in INTEGRATOR_KEYS}
        survey = {k: float(v) for k, v in raw.items() if k in SURVEY_KEYS}
        integrator = IntegratorConfig(**integrator_values) if integrator_values else None
    except (ValueError, InvalidParameters) as e:
        raise UsageError(str(e))
    return params, integrator, survey, raw


def replay_argv(manifest: RunManifest):
    """The recorded argv with --config files replaced by the overrides they resolved to."""
    argv, skip = [], False
    for token in manifest.argv:
        if skip:
            skip = False
            continue
        if token == '--config':
            skip = True
            continue
        if token.startswith('--config='):
            continue
        argv.append(token)
    for key, value in manifest.overrides.items():
        argv.extend(['--set', f"{key}={value}"])
    return argv


def dispatch(argv):
    """Parses `argv`, runs one subcommand and returns the exit status."""
    argv = list(argv)
    try:
        args = build_parser().parse_args(argv)
        if args.from_manifest:
            manifest = RunManifest.load(args.from_manifest)
            print(f"=== Replaying {manifest.subcommand} from manifest ===")
            return dispatch(replay_argv(manifest))
        if not args.subcommand:
            raise UsageError("spinorbit: a subcommand is required")
        params, integrator, survey, raw = resolve_settings(args)
    except UsageError as e:
        print(f"Usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as e:
        print(f"Usage error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    from .pipeline import SpinOrbitPipeline

    print(f"=== Running {args.subcommand} ===")
    try:
        pipeline = SpinOrbitPipeline(params=params, integrator=integrator, survey_settings=survey,
                                     out_dir=args.out, jobs=args.jobs, track=args.track)
        config = {'params': params.to_dict(),
                  'integrator': asdict(integrator) if integrator else None,
                  'survey': survey}
        manifest = RunManifest(subcommand=args.subcommand, argv=argv, config=config, overrides=raw,
                               seed=getattr(args, 'seed', None))
        pipeline.run(args.subcommand, args, manifest)
    except SpinOrbitError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as e:
        print(f"Usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    """Entry point: `python -m src.main <subcommand> [options]`."""
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == '__main__':
    main()
