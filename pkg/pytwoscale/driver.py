#! /usr/bin/env python

import argparse
import importlib
import logging
import os
import sys

import numpy as np
import pandas as pd

# custom imports
from pytwoscale.hazard.fit1d import fit_1d, predict_1d, select_rho_1d
from pytwoscale.hazard.fit2d import (Penalty2D, cut_surface, fit_2d,
                                     select_rho_2d, surface_grid)
from pytwoscale.hazard.ph2d import (baseline_grid, fit_ph, select_rho_ph)
from pytwoscale.lexis.binning import (BinAxis, BinGrid, bin_1d, bin_2d,
                                      bin_individuals, occurrence_exposure)
from pytwoscale.lexis.records import read_records_csv, write_records_csv
from pytwoscale.make_report import render_report
from pytwoscale.run_info import RunInfo, write_json
from pytwoscale.simulation.hazard_models import choose_hazard_model
from pytwoscale.simulation.schemes import ObservationScheme
from pytwoscale.simulation.study import (EstimatorSettings, SimConfig,
                                         StudyResult, run_study,
                                         simulate_dataset)
from pytwoscale.splines.basis import KnotGrid
from pytwoscale.utils.errors import FitError, StudyError, TwoScaleError
from pytwoscale.version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FIT_FAILED = 1
EXIT_INVALID_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_STUDY_FAILED = 4
EXIT_PARTIAL_STUDY = 5

EXIT_CODES = """exit codes:
  0  all outputs written and every fit converged
  1  a fit failed; no results written
  2  invalid input or usage
  3  outputs written but a fit did not converge
  4  the simulation study failed (too many replicates failed)
  5  study results written but some replicates failed or did not
     converge
"""

# settings of data analyses
FIT_DEFAULTS = {'bin_width_u': 30.0,
                'bin_width_s': 30.0,
                'nseg_u': 20,
                'nseg_s': 20,
                'degree': 3,
                'pord_u': 2,
                'pord_s': 2,
                'rho': None,
                'rho_u': None,
                'rho_s': None,
                'rho_strategy': 'numeric',
                'covariates': None,
                'cuts_u': None,
                'rate_scale': 1.0,
                'grid_points': 200}

# settings of simulations
SIM_DEFAULTS = {'hm': 'HM1',
                'scheme': 'A',
                'n': 1000,
                'S': 1,
                'seed': 2024,
                'with_covariates': False,
                'study': False,
                's_max': 20.0,
                't_max': 30.0,
                'bin_width': 1.0,
                'nseg_u': 12,
                'nseg_s': 12,
                'degree': 3,
                'pord_u': 2,
                'pord_s': 2,
                'rho_strategy': 'numeric'}


def name_from_path(infile_path):
    """
    Returns just the base of the filename from the path.

    Parameters
    ----------
    infile_path : string
        The path to a settings or data file
        (absolute, relative, or missing extensions are okay)

    Returns
    -------
    file_name_base : string
        The base name without the extension or path
    """
    file_dir = os.path.dirname(infile_path)
    sys.path.append(file_dir)
    file_name = os.path.basename(infile_path)
    file_name_base = os.path.splitext(file_name)[0]
    return file_name_base


def load_infile(infile_path):
    """
    Loads a settings file as a python module based on the path.

    Parameters
    ----------
    infile_path : string
        The path to the settings file.

    Returns
    -------
    infile : Python module
        The settings file imported as a python module. Module level
        names that match setting keys (``nseg_u = 20``) supply values.
    """
    if not os.path.isfile(infile_path):
        raise FileNotFoundError(f"settings file {infile_path} not found")
    file_name = name_from_path(infile_path)
    infile = importlib.import_module(file_name)
    return infile


def default_threads():
    try:
        return max(1, int(os.environ.get('TWOSCALE_THREADS', 1)))
    except ValueError:
        return 1


def resolve_settings(args, defaults, config=None):
    """
    Resolves every setting in ``defaults``: command line flags first,
    then the settings module, then the default.
    """
    settings = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None and config is not None:
            value = getattr(config, key, None)
        settings[key] = default if value is None else value
    settings['threads'] = args.threads if args.threads is not None else \
        getattr(config, 'threads', default_threads())
    return settings


def _float_list(text):
    return [float(v) for v in text.split(',') if v.strip()]


def _name_list(text):
    return [v.strip() for v in text.split(',') if v.strip()]


def _add_common(parser):
    parser.add_argument('--config', help='python settings file')
    parser.add_argument('--outdir', default='.', help='output directory')
    parser.add_argument('--prefix', help='prefix of the output files')
    parser.add_argument('--threads', type=int,
                        help='worker threads (default: $TWOSCALE_THREADS '
                             'or 1; 1 is reproducible)')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true')
    verbosity.add_argument('--quiet', '-q', action='store_true')


def _add_grid(parser, two_dim):
    parser.add_argument('--degree', type=int, help='B-spline degree')
    if two_dim:
        parser.add_argument('--bin-width-u', dest='bin_width_u', type=float)
        parser.add_argument('--bin-width-s', dest='bin_width_s', type=float)
        parser.add_argument('--nseg-u', dest='nseg_u', type=int)
        parser.add_argument('--nseg-s', dest='nseg_s', type=int)
        parser.add_argument('--pord-u', dest='pord_u', type=int)
        parser.add_argument('--pord-s', dest='pord_s', type=int)
        parser.add_argument('--rho-u', dest='rho_u', type=float,
                            help='fixed rho_u (needs --rho-s)')
        parser.add_argument('--rho-s', dest='rho_s', type=float,
                            help='fixed rho_s (needs --rho-u)')
        parser.add_argument('--rho-strategy', dest='rho_strategy',
                            choices=['grid', 'numeric'])
        parser.add_argument('--cuts-u', dest='cuts_u', type=_float_list,
                            help='comma separated u values for cutting '
                                 'lines of the surface')
    else:
        parser.add_argument('--bin-width', '--bin-width-s',
                            dest='bin_width_s', type=float)
        parser.add_argument('--nseg', '--nseg-s', dest='nseg_s', type=int)
        parser.add_argument('--pord', '--pord-s', dest='pord_s', type=int)
        parser.add_argument('--rho', type=float,
                            help='fixed rho, skips the AIC search')
        parser.add_argument('--grid-points', dest='grid_points', type=int,
                            help='number of prediction times')


def build_parser():
    ap = argparse.ArgumentParser(
        prog='twoscale',
        description='Smooth hazards over one and two time scales',
        epilog=EXIT_CODES,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument('--version', action='version', version=__version__)
    sub = ap.add_subparsers(dest='command', required=True)

    for name, helptext, two_dim in (
            ('fit1d', 'hazard over the second time scale s', False),
            ('fit2d', 'hazard over (u, s)', True),
            ('fitph', 'proportional hazards with a (u, s) baseline', True)):
        p = sub.add_parser(name, help=helptext, epilog=EXIT_CODES,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument('--infile', required=True, help='records CSV file')
        p.add_argument('--rate-scale', dest='rate_scale', type=float,
                       help='multiplies output hazards, e.g. 365.25')
        _add_grid(p, two_dim)
        if name == 'fitph':
            p.add_argument('--covariates', type=_name_list,
                           help='comma separated covariate columns '
                                '(default: all extra columns)')
        _add_common(p)

    p = sub.add_parser('simulate', help='simulate data or run a study',
                       epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument('--hm', help='hazard model: HM1, HM2 or HM3')
    p.add_argument('--scheme', help='observation scheme: A, B or C')
    p.add_argument('--n', type=int, help='sample size')
    p.add_argument('--S', dest='S', type=int, help='replicates')
    p.add_argument('--seed', type=int)
    p.add_argument('--s-max', dest='s_max', type=float)
    p.add_argument('--t-max', dest='t_max', type=float)
    p.add_argument('--with-covariates', dest='with_covariates',
                   action='store_true', default=None)
    p.add_argument('--study', action='store_true', default=None,
                   help='fit every replicate and report recovery metrics')
    p.add_argument('--bin-width', dest='bin_width', type=float)
    p.add_argument('--nseg-u', dest='nseg_u', type=int)
    p.add_argument('--nseg-s', dest='nseg_s', type=int)
    p.add_argument('--degree', type=int)
    p.add_argument('--pord-u', dest='pord_u', type=int)
    p.add_argument('--pord-s', dest='pord_s', type=int)
    p.add_argument('--rho-strategy', dest='rho_strategy',
                   choices=['grid', 'numeric'])
    _add_common(p)

    p = sub.add_parser('rerun', help='repeat the run of a manifest')
    p.add_argument('manifest', help='a <prefix>_manifest.json file')
    p.add_argument('--outdir', help='write the outputs here instead')
    return ap


def write_csv(df, path):
    """Writes a table with round-trip float precision."""
    df.to_csv(path, index=False, float_format='%.17g', encoding='utf-8')
    return path


class Run(object):
    """
    Output bookkeeping of one command: paths, manifest and report.
    """

    def __init__(self, args, argv, settings, inputs=()):
        self.args = args
        self.settings = settings
        os.makedirs(args.outdir, exist_ok=True)
        self.info = RunInfo(args.command, argv, settings, inputs)

    def path(self, suffix):
        return os.path.join(self.args.outdir,
                            f"{self.args.prefix}_{suffix}")

    def say(self, message):
        if not self.args.quiet:
            print(message)

    def csv(self, df, suffix):
        return self.info.add_output(write_csv(df, self.path(suffix)))

    def json(self, data, suffix):
        return self.info.add_output(write_json(data, self.path(suffix)))

    def close(self, summary, tables=None, exit_code=EXIT_OK):
        report = self.path('report.txt')
        render_report({'command': self.args.command,
                       'version': __version__,
                       'settings': self.settings,
                       'summary': summary,
                       'files': self.info.outputs + [report],
                       'tables': tables or {}}, report)
        self.info.add_output(report)
        manifest = self.path('manifest.json')
        self.info.finish(exit_code)
        self.info.write(manifest)
        self.say(f"Results written to {self.args.outdir} "
                 f"({len(self.info.outputs) + 1} files)")
        return exit_code


def _data_grid(records, settings, two_dim):
    s_axis = BinAxis.covering(0.0, max(rec.s_out for rec in records),
                              settings['bin_width_s'], label='s')
    s_knots = KnotGrid(s_axis.origin, s_axis.end, settings['nseg_s'],
                       settings['degree'])
    if not two_dim:
        return BinGrid(s=s_axis), s_knots
    u_axis = BinAxis.covering(0.0, max(rec.u for rec in records),
                              settings['bin_width_u'], label='u')
    u_knots = KnotGrid(u_axis.origin, u_axis.end, settings['nseg_u'],
                       settings['degree'])
    return BinGrid(s=s_axis, u=u_axis), (u_knots, s_knots)


def _read(run, covariates=None):
    run.say(f"Reading input from {run.args.infile}")
    records, names = read_records_csv(run.args.infile, covariates)
    if not records:
        raise FitError("no records to fit")
    return records, names


def cmd_fit1d(run):
    settings = run.settings
    records, _ = _read(run, covariates=[])
    bins, knots = _data_grid(records, settings, two_dim=False)
    data = bin_1d(records, bins)
    run.say(f"Binned {len(records)} records into {bins.s.n} bins "
            f"({data.n_events} events)")

    if settings['rho'] is not None:
        fit = fit_1d(data, knots, settings['pord_s'], settings['rho'])
        profile = None
    else:
        fit, profile = select_rho_1d(data, knots, settings['pord_s'],
                                     threads=settings['threads'])

    scale = settings['rate_scale']
    times = np.linspace(knots.domain_lo, knots.domain_hi,
                        settings['grid_points'])
    summary = dict(fit.summary(), n_records=len(records),
                   n_events=data.n_events)
    run.json(summary, 'fit1d.json')
    run.csv(predict_1d(fit, knots, times, scale), 'hazard1d.csv')
    breaks = bins.s.breaks
    run.csv(pd.DataFrame({'s_lo': breaks[:-1],
                          's_hi': breaks[1:],
                          'events': data.y,
                          'exposure': data.r,
                          'rate': scale * occurrence_exposure(data)}),
            'bins1d.csv')
    if profile is not None:
        run.csv(profile, 'aic_profile.csv')
    return fit, summary, {}


def _penalty_or_search(run, data, knots, fit_func, select_func):
    settings = run.settings
    orders = (settings['pord_u'], settings['pord_s'])
    fixed = (settings['rho_u'], settings['rho_s'])
    if (fixed[0] is None) != (fixed[1] is None):
        raise ValueError("--rho-u and --rho-s must be given together")
    if fixed[0] is not None:
        penalty = Penalty2D(fixed[0], fixed[1], orders[0], orders[1])
        return fit_func(data, knots, penalty), None
    run.say(f"Searching smoothing parameters ({settings['rho_strategy']})")
    return select_func(data, knots, orders,
                       strategy=settings['rho_strategy'],
                       threads=settings['threads'])


def _write_cuts(run, fit, knots):
    cuts = run.settings['cuts_u']
    if cuts:
        run.csv(cut_surface(fit, knots, cuts,
                            rate_scale=run.settings['rate_scale']),
                'cuts.csv')


def cmd_fit2d(run):
    records, _ = _read(run, covariates=[])
    bins, knots = _data_grid(records, run.settings, two_dim=True)
    data = bin_2d(records, bins)
    run.say(f"Binned {len(records)} records on a {bins.u.n} x {bins.s.n} "
            f"grid ({data.n_events} events)")
    fit, trace = _penalty_or_search(run, data, knots, fit_2d, select_rho_2d)
    summary = dict(fit.summary(), n_records=len(records),
                   n_events=data.n_events)
    run.json(summary, 'fit2d.json')
    run.csv(surface_grid(fit, run.settings['rate_scale']), 'surface2d.csv')
    if trace is not None:
        run.csv(trace, 'rho_trace.csv')
    _write_cuts(run, fit, knots)
    return fit, summary, {}


def cmd_fitph(run):
    records, names = _read(run, covariates=run.settings['covariates'])
    bins, knots = _data_grid(records, run.settings, two_dim=True)
    data = bin_individuals(records, bins, names)
    run.say(f"Binned {data.n} individuals with {data.p} covariates on a "
            f"{bins.u.n} x {bins.s.n} grid ({data.n_events} events)")
    fit, trace = _penalty_or_search(run, data, knots, fit_ph, select_rho_ph)
    summary = dict(fit.summary(), n_records=len(records),
                   n_events=data.n_events)
    betas = fit.beta_table()
    run.json(summary, 'fitph.json')
    run.csv(baseline_grid(fit, run.settings['rate_scale']), 'surface2d.csv')
    run.csv(betas, 'beta.csv')
    if trace is not None:
        run.csv(trace, 'rho_trace.csv')
    _write_cuts(run, fit, knots)
    return fit, summary, {'regression coefficients': betas}


def cmd_simulate(run):
    settings = run.settings
    spec = choose_hazard_model(settings['hm'])
    scheme = ObservationScheme(kind=settings['scheme'],
                               s_max=settings['s_max'],
                               t_max=settings['t_max'])
    config = SimConfig(n=settings['n'], replicates=settings['S'],
                       seed=settings['seed'],
                       covariates=bool(settings['with_covariates']))

    if not settings['study']:
        streams = config.streams()
        sizes = []
        for r, rng in enumerate(streams):
            records, names = simulate_dataset(config, spec, scheme, rng)
            suffix = 'records.csv' if config.replicates == 1 else \
                f'records_{r + 1:03d}.csv'
            run.info.add_output(write_records_csv(records, run.path(suffix),
                                                  names))
            sizes.append(len(records))
        summary = {'hazard_model': spec.kind,
                   'hazard_parameters': spec.params,
                   'scheme': scheme.kind,
                   'replicates': config.replicates,
                   'records_per_replicate': sizes}
        run.json(summary, 'simulate.json')
        return None, summary, {}

    study = EstimatorSettings(bin_width=settings['bin_width'],
                              nseg=(settings['nseg_u'], settings['nseg_s']),
                              degree=settings['degree'],
                              orders=(settings['pord_u'], settings['pord_s']),
                              strategy=settings['rho_strategy'])
    run.say(f"Running {config.replicates} replicate(s) of {spec.kind} under "
            f"scheme {scheme.kind} with n={config.n}")
    result = run_study(config, spec, scheme, study,
                       threads=settings['threads'])
    summary = dict(result.summary(), hazard_model=spec.kind,
                   hazard_parameters=spec.params, scheme=scheme.kind)
    run.json(summary, 'study.json')
    run.csv(result.to_frame(), 'study_grid.csv')
    tables = {}
    if config.covariates:
        run.csv(result.betas, 'study_beta.csv')
        tables['regression coefficients'] = result.beta_summary()
    return result, summary, tables


def choose_command(command):
    """
    Returns the function that runs a subcommand.

    Parameters
    ----------
    command : string
        Accepts: fit1d, fit2d, fitph, simulate
    """
    commands = {
        'fit1d': (cmd_fit1d, FIT_DEFAULTS),
        'fit2d': (cmd_fit2d, FIT_DEFAULTS),
        'fitph': (cmd_fitph, FIT_DEFAULTS),
        'simulate': (cmd_simulate, SIM_DEFAULTS),
    }
    return commands[command]


def cmd_rerun(args):
    manifest = RunInfo.read(args.manifest)
    argv = list(manifest['argv'])
    if args.outdir is not None:
        argv += ['--outdir', args.outdir]
    print(f"Re-running {manifest['command']} from {args.manifest}")
    return main(argv)


def _configure_logging(args):
    level = logging.WARNING
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.ERROR
    logging.basicConfig(format='%(levelname)s %(name)s: %(message)s')
    logging.getLogger('pytwoscale').setLevel(level)


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    # Read commandline arguments
    args = build_parser().parse_args(argv)
    if args.command == 'rerun':
        return cmd_rerun(args)
    _configure_logging(args)

    command, defaults = choose_command(args.command)
    try:
        config = load_infile(args.config) if args.config else None
        settings = resolve_settings(args, defaults, config)
        if args.prefix is None:
            args.prefix = name_from_path(args.infile) if \
                getattr(args, 'infile', None) else 'sim'
        inputs = [p for p in (getattr(args, 'infile', None), args.config)
                  if p]
        run = Run(args, argv, settings, inputs)
        fit, summary, tables = command(run)
    except StudyError as err:
        print(f"Error: {err}", file=sys.stderr)
        return EXIT_STUDY_FAILED
    except FitError as err:
        print(f"Error: fit failed: {err}", file=sys.stderr)
        return EXIT_FIT_FAILED
    except (TwoScaleError, ValueError, OSError) as err:
        print(f"Error: {err}", file=sys.stderr)
        return EXIT_INVALID_INPUT

    exit_code = EXIT_OK
    if isinstance(fit, StudyResult):
        if not fit.complete:
            print(f"Warning: {len(fit.failures)} replicate(s) failed and "
                  f"{len(fit.nonconverged)} did not converge; they are left "
                  "out of the metrics", file=sys.stderr)
            exit_code = EXIT_PARTIAL_STUDY
    elif fit is not None and not fit.converged:
        print("Warning: IWLS did not converge; results written anyway",
              file=sys.stderr)
        exit_code = EXIT_NOT_CONVERGED
    return run.close(summary, tables, exit_code)


if __name__ == '__main__':
    sys.exit(main())
