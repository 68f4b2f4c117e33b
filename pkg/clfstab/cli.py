'''
    Command line front end.

    Commands:
    ---------
    zoo list | zoo show NAME: Catalog of example systems.

    simulate: Classical or sampled closed loop, trajectory CSV.

    synthesize: Feedback synthesis from a CLF with its verification report.

    clf-verify: CLF decrease condition on an annulus grid.

    check-brockett: Brockett necessary-condition verdict.

    iss-fit: Asymptotic-gain probe over inputs and initial states.

    lyap-verify: ISS/iISS-Lyapunov candidate check from a candidate file.

    sweep-robustness: Robust-stabilization experiment grid.

    Every command accepts --config FILE (JSON, "schema": 1, keys named like
    the command's flags), --strict, --verbose and --out (the trajectory CSV
    for simulate, the JSON report elsewhere). Flags override config values.
    Errors are written to stderr as JSON objects with a machine-readable
    kind; exit codes are 0 (ok), 2 (validation),
    3 (simulation) and 4 (failed check under --strict).
'''


import argparse
import sys as pysys
from json import loads, JSONDecodeError
from os.path import isfile
from hashlib import sha1
from logging import info, basicConfig, INFO, WARNING

import numpy as np
import pandas as pd

from clfstab.consts import (EXIT_OK, EXIT_SIMULATION, EXIT_CHECK_FAILED,
                            SCHEMA_VERSION, MAX_SWEEP_CELLS, FAILS)
from clfstab.errors import ClfstabError, InvalidParams, InvalidCLF
from clfstab.systems import (zoo_names, zoo_build, parse_control_set)
from clfstab.signals import parse_signal, ridge_flip, radial, piecewise, zero
from clfstab import clf_smooth, nonsmooth_clf
from clfstab.clf_smooth import (known_feedback, zero_feedback,
                                constant_feedback, universal_formula_feedback,
                                pointwise_min_feedback, verify_clf_on_region,
                                small_control_profile,
                                feedback_from_expression)
from clfstab.nonsmooth_clf import (MoreauEnvelope, ContinuousCLF,
                                   from_smooth, proximal_feedback,
                                   envelope_decrease_check)
from clfstab.sampling_sim import (parse_schedule, PerturbationSpec,
                                  ScheduleSpec, simulate_pi_trajectory,
                                  simulate_classical, constants_for,
                                  robust_stabilization_experiment,
                                  band_schedule, initial_states,
                                  default_envelope, SizingConstants)
from clfstab.obstructions import check_brockett
from clfstab.iss_analysis import (input_signal, asymptotic_gain_probe,
                                  candidate_from_expression,
                                  verify_lyapunov_candidate)
from clfstab.dblib import ResultStore, DB_PATH
from clfstab.utils import (dumps_json, write_text, write_csv, parse_vector)
from clfstab import config


VERBOSE = config.get_bool('RUN_VERBOSE', False)

SIZING_FLAGS = {'c': 'c', 'm': 'm', 'delta_rate': 'delta-rate',
                'kappa': 'kappa', 'delta_hi': 'delta-hi',
                'delta_lo': 'delta-lo', 'eps_bound': 'eps-bound',
                't_bound': 't-bound'}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParams(message)


# ===============
#     PARSING
# ===============


def _params(items) -> dict:
    params = {}
    for item in items or []:
        key, sep, raw = item.partition('=')
        if not sep:
            raise InvalidParams('parameter %r is not key=value' % item)
        try:
            params[key] = loads(raw)
        except JSONDecodeError:
            params[key] = raw
    return params


def _vectors(text: str) -> np.ndarray:
    '''
        Semicolon-separated comma vectors: "1,0;0,1".
    '''

    rows = [parse_vector(part) for part in str(text).split(';')
            if part.strip()]
    if not rows:
        return np.zeros((0, 0))
    if len({r.size for r in rows}) != 1:
        raise InvalidParams('vectors in %r differ in length' % text)
    return np.array(rows)


def _system(args):
    sys = zoo_build(args.system, _params(args.param))
    if getattr(args, 'control_set', None):
        sys.control_set = parse_control_set(args.control_set, sys.m)
    return sys


def _smooth_clf(args, sys):
    if args.clf_expr:
        return clf_smooth.clf_from_expression(args.clf_expr, sys.n, args.W)
    if args.clf in clf_smooth.BUILTIN:
        return clf_smooth.builtin_clf(args.clf, sys.n)
    if args.clf in nonsmooth_clf.BUILTIN:
        return nonsmooth_clf.BUILTIN[args.clf](sys.n)
    if isfile(args.clf):
        data = _read_json(args.clf, 'CLF file')
        if not isinstance(data, dict) or not data.get('V'):
            raise InvalidCLF('CLF file %s has no "V" expression' % args.clf)
        return clf_smooth.clf_from_expression(data['V'], sys.n,
                                              data.get('W') or args.W)
    raise InvalidCLF('unknown CLF %r' % args.clf)


def _continuous_clf(args, sys) -> ContinuousCLF:
    if not args.clf_expr and args.clf in nonsmooth_clf.BUILTIN:
        return nonsmooth_clf.BUILTIN[args.clf](sys.n)
    return from_smooth(_smooth_clf(args, sys))


def _envelope(args, sys) -> MoreauEnvelope:
    base = _continuous_clf(args, sys)
    if args.alpha:
        return MoreauEnvelope(base, args.alpha)
    return default_envelope(base, args.r)


def _feedback(args, sys):
    spec = args.feedback
    if spec == 'known':
        return known_feedback(sys)
    if spec == 'zero':
        return zero_feedback(sys.m)
    if spec.startswith('constant:'):
        return constant_feedback(parse_vector(spec.split(':', 1)[1]))
    if spec == 'universal':
        return universal_formula_feedback(_smooth_clf(args, sys), sys)
    if spec == 'pointwise':
        return pointwise_min_feedback(_smooth_clf(args, sys), sys)
    if spec == 'proximal':
        return proximal_feedback(_envelope(args, sys), sys)
    if spec.startswith('expr:'):
        spec = spec[len('expr:'):]
    return feedback_from_expression(spec, sys.n, sys.m)


def _emit(args, payload) -> str:
    text = dumps_json(payload)
    if getattr(args, 'out', None):
        write_text(args.out, text)
    else:
        pysys.stdout.write(text)
    return text


def _run_id(args) -> str:
    keys = {k: v for k, v in sorted(vars(args).items())
            if k not in ('func', 'db', 'out', 'csv', 'verbose')}
    return sha1(dumps_json(keys).encode()).hexdigest()[:12]


# ================
#     COMMANDS
# ================


def cmd_zoo(args) -> int:
    if args.action == 'list':
        _emit(args, {'systems': [zoo_build(name).describe()
                                 for name in zoo_names()]})
        return EXIT_OK
    if not args.name:
        raise InvalidParams('zoo show needs a system name')
    _emit(args, zoo_build(args.name, _params(args.param)).describe())
    return EXIT_OK


def _classical_frame(traj, n: int, m: int) -> pd.DataFrame:
    cols = {'t': traj.times}
    for i in range(n):
        cols['x%d' % (i + 1)] = traj.states[:, i]
    controls = traj.controls.reshape(-1, m)
    if len(controls) < traj.times.size:
        pad = controls[-1:] if len(controls) else np.zeros((1, m))
        controls = np.vstack([controls] + [pad] * (traj.times.size
                                                   - len(controls)))
    for j in range(m):
        cols['u%d' % (j + 1)] = controls[:, j]
    cols['is_sample'] = np.ones(traj.times.size, dtype=int)
    return pd.DataFrame(cols)


def cmd_simulate(args) -> int:
    sys = _system(args)
    law = _feedback(args, sys)
    x0 = parse_vector(args.x0) if args.x0 else np.ones(sys.n)
    if args.schedule:
        schedule = parse_schedule(args.schedule).build(args.horizon)
        pert = PerturbationSpec(
            sys.n, parse_signal(args.error, sys.n) if args.error else None,
            parse_signal(args.disturbance, sys.n) if args.disturbance
            else None)
        envelope = getattr(law, 'envelope', None)
        traj = simulate_pi_trajectory(sys, law, schedule, x0, pert,
                                      args.substeps, envelope=envelope)
        frame = traj.to_frame()
        escaped, escape_time = traj.escaped, traj.escape_time
    else:
        if args.error or args.disturbance:
            raise InvalidParams('perturbations need a sampling schedule')
        traj = simulate_classical(sys, law, x0, args.horizon, args.step)
        frame = _classical_frame(traj, sys.n, sys.m)
        escaped, escape_time = traj.escaped, traj.escape_time
    if args.csv:
        write_csv(frame, args.csv)
    final = frame[['x%d' % (i + 1) for i in range(sys.n)]].iloc[-1]
    _emit(args, {'system': sys.name, 'feedback': law.as_dict(),
                 'sampled': bool(args.schedule), 'rows': len(frame),
                 'final_time': float(frame['t'].iloc[-1]),
                 'final_state': final.tolist(),
                 'final_norm': float(np.linalg.norm(final.values)),
                 'escaped': escaped, 'escape_time': escape_time})
    info('simulate: %s done, %d rows', sys.name, len(frame))
    return EXIT_SIMULATION if escaped else EXIT_OK


def cmd_synthesize(args) -> int:
    sys = _system(args)
    if args.method == 'proximal':
        env = _envelope(args, sys)
        law = proximal_feedback(env, sys)
        report = envelope_decrease_check(env, sys, sys.control_set, args.r,
                                         args.R, args.resolution)
        profile = None
    else:
        clf = _smooth_clf(args, sys)
        law = (universal_formula_feedback(clf, sys)
               if args.method == 'universal'
               else pointwise_min_feedback(clf, sys))
        report = verify_clf_on_region(clf, sys, sys.control_set, args.r,
                                      args.R, args.resolution)
        profile = (small_control_profile(law, sys.n)
                   if args.method == 'universal' else None)
    if args.csv:
        pts = _grid({'lo': -args.R, 'hi': args.R,
                     'resolution': args.resolution}, sys.n)
        rows = [dict([('x%d' % (i + 1), float(x[i])) for i in range(sys.n)]
                     + [('u%d' % (j + 1), float(u[j]))
                        for j in range(sys.m)])
                for x, u in ((x, law(x)) for x in pts)]
        write_csv(pd.DataFrame(rows), args.csv)
    _emit(args, {'system': sys.name, 'feedback': law.as_dict(),
                 'verification': report.as_dict(),
                 'small_control_profile': profile})
    if args.strict and not report.passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _region(text: str):
    r, sep, R = str(text).partition(':')
    try:
        r, R = float(r), float(R)
    except ValueError:
        raise InvalidParams('region %r is not r:R' % text)
    if not sep or not 0 < r < R:
        raise InvalidParams('region %r needs 0 < r < R' % text)
    return r, R


def cmd_clf_verify(args) -> int:
    if args.region:
        args.r, args.R = _region(args.region)
    sys = _system(args)
    clf = _smooth_clf(args, sys)
    report = verify_clf_on_region(clf, sys, sys.control_set, args.r, args.R,
                                  args.resolution)
    _emit(args, dict(report.as_dict(), system=sys.name,
                     clf=getattr(clf, 'name', None)))
    if args.strict and not report.passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_check_brockett(args) -> int:
    sys = _system(args)
    verdict = check_brockett(sys, probe=not args.no_probe,
                             x_radius=args.x_radius,
                             u_radius=args.u_radius,
                             n_targets=args.targets)
    _emit(args, verdict)
    if args.strict and verdict['status'] == FAILS:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _read_json(path: str, what: str) -> dict:
    try:
        with open(path, 'r') as f:
            data = loads(f.read())
    except (OSError, JSONDecodeError) as e:
        raise InvalidParams('cannot read %s %s (%s)' % (what, path, e))
    if isinstance(data, dict) and data.get('schema', SCHEMA_VERSION) \
            != SCHEMA_VERSION:
        raise InvalidParams('%s %s has schema %r, expected %d'
                            % (what, path, data.get('schema'),
                               SCHEMA_VERSION))
    return data


def _check_cells(count: int):
    if count == 0:
        raise InvalidParams('empty sweep grid')
    if count > MAX_SWEEP_CELLS:
        raise InvalidParams('sweep of %d cells exceeds the limit of %d'
                            % (count, MAX_SWEEP_CELLS))


def cmd_iss_fit(args) -> int:
    sys = _system(args)
    specs = list(args.input or [])
    if args.inputs:
        data = _read_json(args.inputs, 'inputs file')
        if isinstance(data, dict):
            if 'inputs' not in data:
                raise InvalidParams('inputs file %s has no "inputs" list'
                                    % args.inputs)
            data = data['inputs']
        specs += data
    inputs = [input_signal(s, sys.m, args.horizon) for s in specs]
    x0s = _vectors(args.x0_grid) if args.x0_grid else np.zeros((1, sys.n))
    _check_cells(len(inputs) * len(x0s))
    if x0s.shape[1] != sys.n:
        raise InvalidParams('initial states must have dimension %d' % sys.n)
    feedback = _feedback(args, sys) if args.feedback else None
    probe = asymptotic_gain_probe(sys, inputs, x0s, args.horizon,
                                  args.tail_fraction, feedback, args.step)
    if args.csv:
        write_csv(pd.DataFrame(probe.rows), args.csv)
    if args.db:
        with ResultStore(args.db) as store:
            store.insert('gain', probe.rows, _run_id(args))
    _emit(args, dict(probe.as_dict(), system=sys.name))
    if args.strict and any(row['escaped'] for row in probe.rows):
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _grid(spec: dict, dim: int) -> np.ndarray:
    lo, hi = float(spec.get('lo', -1.0)), float(spec.get('hi', 1.0))
    res = int(spec.get('resolution', 21))
    if res < 1 or hi < lo:
        raise InvalidParams('invalid grid %r' % spec)
    axis = np.linspace(lo, hi, res)
    mesh = np.meshgrid(*([axis] * dim), indexing='ij')
    return np.stack([a.reshape(-1) for a in mesh], axis=-1)


def cmd_lyap_verify(args) -> int:
    data = _read_json(args.candidate, 'candidate file')
    try:
        sys = zoo_build(data['system'], data.get('params'))
        cand = candidate_from_expression(
            data['V'], sys.n, data['form'], data['alpha'],
            data.get('gamma'), data.get('rho'))
    except KeyError as e:
        raise InvalidParams('candidate file misses %s' % e)
    states = _grid(data.get('states', {}), sys.n)
    inputs = _grid(data.get('inputs', {}), sys.m)
    _check_cells(len(states) * len(inputs))
    report = verify_lyapunov_candidate(cand, sys, states, inputs)
    _emit(args, dict(report.as_dict(), system=sys.name,
                     candidate=cand.as_dict()))
    if args.strict and not report.passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _band_specs(tokens, constants: SizingConstants) -> list:
    specs = []
    for token in tokens:
        if token == 'compliant':
            specs.append(band_schedule(constants))
        elif token.startswith('jitter'):
            parts = token.split(':')
            mid = band_schedule(constants).h
            j = float(parts[1]) if len(parts) > 1 else 0.2
            specs.append(ScheduleSpec('jitter', mid, j,
                                      int(parts[2]) if len(parts) > 2
                                      else 0))
        else:
            try:
                specs.append(band_schedule(constants, float(token)))
            except ValueError:
                raise InvalidParams('unknown band %r' % token)
    return specs


def _error_specs(tokens, n: int, constants: SizingConstants) -> list:
    '''
        zero | ridge:F | radial:F | piecewise:F[:seed] with amplitudes
        F * eps_bound.
    '''

    specs = []
    for token in tokens:
        parts = token.split(':')
        if parts[0] == 'zero':
            specs.append(PerturbationSpec(n))
            continue
        try:
            amp = float(parts[1]) * constants.eps_bound
        except (IndexError, ValueError):
            raise InvalidParams('malformed error spec %r' % token)
        if parts[0] == 'ridge':
            e = ridge_flip(amp, n)
        elif parts[0] == 'radial':
            e = radial(amp, n)
        elif parts[0] == 'piecewise':
            seed = int(parts[2]) if len(parts) > 2 else 0
            e = piecewise(seed, band_schedule(constants).h, amp, n)
        else:
            raise InvalidParams('unknown error spec %r' % token)
        specs.append(PerturbationSpec(n, e, zero(n)))
    return specs


def cmd_sweep_robustness(args) -> int:
    sys = _system(args)
    env = _envelope(args, sys)
    overrides = {k: getattr(args, k) for k in SIZING_FLAGS
                 if getattr(args, k) is not None}
    bands = [b for b in args.bands.split(',') if b]
    errors = [e for e in args.errors.split(',') if e]
    x0s = (_vectors(args.x0_grid) if args.x0_grid
           else initial_states(sys.n, args.x0_radius or args.R / 2,
                               args.x0_count))
    _check_cells(len(bands) * len(errors) * len(x0s))
    constants = constants_for(env, sys, args.r, args.R, sys.control_set,
                              **overrides)
    report = robust_stabilization_experiment(
        sys, env, sys.control_set, args.r, args.R,
        _band_specs(bands, constants), _error_specs(errors, sys.n, constants),
        x0s, constants, args.horizon, args.substeps)
    frame = report.to_frame()
    if args.csv:
        write_csv(frame, args.csv)
    if args.db:
        with ResultStore(args.db) as store:
            store.insert('robustness', frame, _run_id(args))
    _emit(args, report.as_dict())
    for row in report.rows:
        info('sweep: cell %d %s %s passed=%s', row['cell'], row['schedule'],
             row['perturbation'], row['passed'])
    if args.strict and report.summary['compliant_failed']:
        return EXIT_CHECK_FAILED
    return EXIT_OK


# ==============
#     PARSER
# ==============


def _common(p, system: bool = True, out: bool = True):
    p.add_argument('--config', help='JSON config file (schema 1)')
    p.add_argument('--strict', action='store_true', default=None,
                   help='exit 4 when a check fails')
    p.add_argument('--verbose', action='store_true', default=None)
    if out:
        p.add_argument('--out', help='JSON report path (default: stdout)')
    if system:
        p.add_argument('--system', required=False, help='zoo system name')
        p.add_argument('--param', action='append',
                       help='system parameter key=value (JSON value)')
        p.add_argument('--control-set', dest='control_set',
                       help='ball:R[:res] | box:lo:hi[:res] | finite:u;u')


def _clf_args(p, r: float = 0.1, R: float = 2.0):
    p.add_argument('--clf', default='quadratic',
                   help='built-in CLF (quadratic, double-integrator, log1p, '
                        'artstein, abs) or a JSON file {"schema": 1, '
                        '"V": ..., "W": ...}')
    p.add_argument('--clf-expr', dest='clf_expr',
                   help='CLF as an expression in x1..xn')
    p.add_argument('--W', help='decrease rate as an expression in x1..xn')
    p.add_argument('--alpha', type=float, help='envelope scale')
    p.add_argument('--r', type=float, default=r)
    p.add_argument('--R', type=float, default=R)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='clfstab',
                     description='CLF feedback synthesis workbench')
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)

    p = sub.add_parser('zoo', help='list or show example systems')
    p.add_argument('action', choices=('list', 'show'))
    p.add_argument('name', nargs='?')
    _common(p, system=False)
    p.add_argument('--param', action='append')
    p.set_defaults(func=cmd_zoo)

    p = sub.add_parser('simulate', help='simulate a closed loop')
    _common(p, out=False)
    _clf_args(p)
    p.add_argument('--feedback', default='known',
                   help='known | universal | pointwise | proximal | zero | '
                        'constant:v | [expr:]e1;...;em in x1..xn')
    p.add_argument('--x0', help='initial state, comma separated')
    p.add_argument('--horizon', type=float, default=10.0)
    p.add_argument('--schedule', help='uniform:h | jitter:h:j:seed; '
                                      'classical integration when omitted')
    p.add_argument('--e', '--error', dest='error',
                   help='measurement error signal')
    p.add_argument('--d', '--disturbance', dest='disturbance',
                   help='disturbance signal')
    p.add_argument('--step', type=float)
    p.add_argument('--substeps', type=int)
    p.add_argument('--out', '--csv', dest='csv',
                   help='trajectory CSV path')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('synthesize', help='synthesize a feedback from a CLF')
    _common(p)
    _clf_args(p)
    p.add_argument('--method', default='universal',
                   choices=('universal', 'pointwise', 'proximal'))
    p.add_argument('--resolution', type=int, default=41)
    p.add_argument('--csv', help='feedback samples CSV path')
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser('clf-verify', help='check a CLF decrease condition')
    _common(p)
    _clf_args(p)
    p.add_argument('--region', help='annulus r:R (overrides --r and --R)')
    p.add_argument('--grid', '--resolution', dest='resolution', type=int,
                   default=41, help='grid points per axis')
    p.set_defaults(func=cmd_clf_verify)

    p = sub.add_parser('check-brockett', help='Brockett necessary condition')
    _common(p)
    p.add_argument('--no-probe', dest='no_probe', action='store_true',
                   default=None)
    p.add_argument('--x-radius', dest='x_radius', type=float, default=0.5)
    p.add_argument('--u-radius', dest='u_radius', type=float, default=1.0)
    p.add_argument('--targets', type=int, default=32)
    p.set_defaults(func=cmd_check_brockett)

    p = sub.add_parser('iss-fit', help='asymptotic gain probe')
    _common(p)
    _clf_args(p)
    p.add_argument('--feedback', help='close the loop before probing')
    p.add_argument('--inputs', help='JSON file {"schema": 1, "inputs": [...]}')
    p.add_argument('--input', action='append', help='input signal spec')
    p.add_argument('--x0-grid', dest='x0_grid', help='x0 list "1,0;0,1"')
    p.add_argument('--horizon', type=float, default=30.0)
    p.add_argument('--tail-fraction', dest='tail_fraction', type=float)
    p.add_argument('--step', type=float, default=1e-2)
    p.add_argument('--csv', help='gain table CSV path')
    p.add_argument('--db', nargs='?', const=DB_PATH,
                   help='SQLite result store (bare flag: configured path)')
    p.set_defaults(func=cmd_iss_fit)

    p = sub.add_parser('lyap-verify', help='verify a Lyapunov candidate')
    _common(p, system=False)
    p.add_argument('--candidate', required=False, help='candidate JSON file')
    p.set_defaults(func=cmd_lyap_verify)

    p = sub.add_parser('sweep-robustness',
                       help='robust-stabilization experiment sweep')
    _common(p)
    _clf_args(p, r=0.1, R=2.0)
    p.add_argument('--bands', default='compliant',
                   help='compliant | jitter[:j[:seed]] | factor of delta_hi')
    p.add_argument('--errors', default='zero',
                   help='zero | ridge:F | radial:F | piecewise:F[:seed]')
    p.add_argument('--x0-grid', dest='x0_grid')
    p.add_argument('--x0-count', dest='x0_count', type=int, default=16)
    p.add_argument('--x0-radius', dest='x0_radius', type=float)
    p.add_argument('--horizon', type=float)
    p.add_argument('--substeps', type=int)
    for dest, flag in SIZING_FLAGS.items():
        p.add_argument('--' + flag, dest=dest, type=float)
    p.add_argument('--csv', help='cell table CSV path')
    p.add_argument('--db', nargs='?', const=DB_PATH,
                   help='SQLite result store (bare flag: configured path)')
    p.set_defaults(func=cmd_sweep_robustness)
    return parser


def _merge_config(parser, argv) -> argparse.Namespace:
    '''
        Parses argv; values of --config become defaults that flags override.
    '''

    args = parser.parse_args(argv)
    if getattr(args, 'command', None) is None \
            or getattr(args, 'config', None) is None:
        return args
    data = _read_json(args.config, 'config file')
    if not isinstance(data, dict) or data.get('schema') != SCHEMA_VERSION:
        raise InvalidParams('config file needs "schema": %d'
                            % SCHEMA_VERSION)
    data = {k.replace('-', '_'): v for k, v in data.items()
            if k not in ('schema', 'command')}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = set(data) - known
    if unknown:
        raise InvalidParams('unknown config key(s) %s'
                            % ', '.join(sorted(unknown)))
    sub.set_defaults(**data)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = _merge_config(parser, argv)
        if not getattr(args, 'command', None):
            raise InvalidParams('no command given')
        basicConfig(level=INFO if (args.verbose or VERBOSE) else WARNING,
                    format='%(message)s')
        if hasattr(args, 'system') and args.command != 'zoo' \
                and not args.system:
            raise InvalidParams('--system is required')
        if args.command == 'lyap-verify' and not args.candidate:
            raise InvalidParams('--candidate is required')
        info('clfstab: %s', args.command)
        return args.func(args)
    except ClfstabError as e:
        pysys.stderr.write(dumps_json(e.as_dict()))
        return e.exit_code
    except (ValueError, KeyError) as e:
        e = InvalidParams(str(e))
        pysys.stderr.write(dumps_json(e.as_dict()))
        return e.exit_code
