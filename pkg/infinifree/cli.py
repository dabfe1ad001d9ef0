"""
Command-line front end.

    infinifree law show --law sc.json --grid -3:3:61 --imag 0.1
    infinifree cumulants --law spike.json --order 6
    infinifree convolve --x sc.json --y spike.json --grid -3:3:61 --imag 0.5 --out conv.csv
    infinifree ov-convolve --x ov1.json --y ov2.json --b b.json
    infinifree lift --cumulants joint.json --entries entries.json --b b.json --M 6
    infinifree freeness-check --cumulants a.json --cumulants b.json --order 6
    infinifree rmt-verify --ensemble gue --spike 2 --N 1024 --trials 200 --z 0+3i --seed 7
    infinifree verify-all

Exit status is 0 on success, 2 on invalid input and 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .cumulants import cumulants_from_moments, freeness_check, joint_from_free_cumulants
from .errors import InfinifreeError, NumericalError, ValidationError
from .jsonio import (
    JSONWriter, encode, parse_complex, read_cumulants, read_document, read_law, read_matrix, read_ov_law, to_json,
)
from .ovspace import lift_scalar_matrix
from .rmt import EnsembleSpec, estimate_inf_taus, predict
from .subord import embedded_inf_convolve, free_convolve_G
from .verify import format_table, run_all


__all__ = ['main', 'run', 'build_parser']

log = logging.getLogger(__name__)

CONVOLVE_HEADER = ['z_re', 'z_im', 'G_re', 'G_im', 'g_re', 'g_im',
                   'omega1_re', 'omega1_im', 'omega2_re', 'omega2_im', 'resF', 'iters']
LAW_HEADER = ['z_re', 'z_im', 'G_re', 'G_im', 'g_re', 'g_im']
EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def parse_grid(text: str) -> np.ndarray:
    """'re0:re1:n' → n evenly spaced real parts."""
    try:
        start, stop, count = text.split(':')
        start, stop, count = float(start), float(stop), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f'grid must be re0:re1:n ({text!r})') from None
    if count < 1:
        raise argparse.ArgumentTypeError(f'grid count must be at least 1 ({count})')
    return np.linspace(start, stop, count)


def positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f'must be positive ({text})')
    return value


def complex_arg(text: str) -> complex:
    try:
        return parse_complex(text)
    except ValidationError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _num(value: float) -> str:
    return format(float(value), '.17g')


class Output:
    """Collects the result and writes it once, when the command has finished."""

    def __init__(self, path: str):
        self.path = path
        self.buffer = io.StringIO()

    def flush(self):
        if self.path == '-':
            sys.stdout.write(self.buffer.getvalue())
        else:
            with open(self.path, 'w', newline='') as f:
                f.write(self.buffer.getvalue())

    def summary(self, text: str):
        print(text, file=sys.stderr if self.path == '-' else sys.stdout)


def _points(args) -> list[complex]:
    points = list(args.z or [])
    if args.grid is not None:
        points.extend(complex(re, args.imag) for re in args.grid)
    if not points:
        raise ValidationError('no evaluation points; give --z or --grid')
    return points


def _evaluate(fn: Callable, points: Sequence[complex], workers: int) -> list:
    """fn at every point, in order; independent points run on a thread pool."""
    if workers <= 1:
        return [fn(z) for z in points]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, points))


def cmd_law_show(args, out: Output):
    law = read_law(args.law)
    points = _points(args)
    writer = csv.writer(out.buffer, lineterminator='\n')
    writer.writerow(LAW_HEADER)
    for z, point in zip(points, _evaluate(law.transform_point, points, args.workers)):
        writer.writerow([_num(v) for v in (z.real, z.imag, point.G.real, point.G.imag, point.g.real, point.g.imag)])
    out.summary(f'{len(points)} points of {law.kind} law')


def cmd_cumulants(args, out: Output):
    law = read_law(args.law)
    table = cumulants_from_moments(law.oracle(args.label), args.label, args.order)
    writer = JSONWriter(out.buffer)
    for entry in table.to_json():
        writer.send(entry)
    writer.close()
    out.summary(f'{len(table.table)} cumulants up to order {args.order}')


def cmd_convolve(args, out: Output):
    x, y = read_law(args.x), read_law(args.y)
    writer = csv.writer(out.buffer, lineterminator='\n')
    writer.writerow(CONVOLVE_HEADER)
    worst = 0.0
    points = _points(args)

    def convolve(z):
        return free_convolve_G(x, y, z, args.tol, args.max_iter, infinitesimal=True)

    for z, point in zip(points, _evaluate(convolve, points, args.workers)):
        result = point.result
        worst = max(worst, result.residual_F)
        w1, w2 = result.omega1.std, result.omega2.std
        writer.writerow([_num(v) for v in (
            z.real, z.imag, point.G.real, point.G.imag, point.g.real, point.g.imag,
            w1.real, w1.imag, w2.real, w2.imag, result.residual_F,
        )] + [str(result.iterations)])
    out.summary(f'{len(points)} points, max residual {worst:.3g}')


def cmd_ov_convolve(args, out: Output):
    x, y = read_ov_law(args.x), read_ov_law(args.y)
    b = read_matrix(args.b)
    point = free_convolve_G(x, y, b, args.tol, args.max_iter, infinitesimal=True)
    report = {
        'G': point.G,
        'g': point.g,
        'g_embedded': embedded_inf_convolve(x, y, b, args.tol, args.max_iter),
        'omega1': point.result.omega1.std,
        'omega2': point.result.omega2.std,
        'residual_F': point.result.residual_F,
        'residual_G': point.result.residual_G,
        'iterations': point.result.iterations,
    }
    out.buffer.write(json.dumps(encode(report), indent=2) + '\n')
    out.summary(f'operator-valued convolution over M_{x.d}, residual {point.result.residual_F:.3g}')


def _families(args):
    families = [read_cumulants(path) for path in args.cumulants or []]
    for i, path in enumerate(args.law or []):
        label = f'x{i + 1}'
        families.append(cumulants_from_moments(read_law(path).oracle(label), label, args.order))
    if not families:
        raise ValidationError('no variables; give --cumulants or --law')
    return families


def read_entries(path: str) -> dict:
    """{'N': n, 'matrices': {name: N×N nested list of labels or null}, 'label': name}."""
    data = read_document(path)
    if not isinstance(data, dict) or 'matrices' not in data or 'N' not in data:
        raise ValidationError(f'{path} must hold N and matrices')
    return data


def cmd_lift(args, out: Output):
    scalar = joint_from_free_cumulants(_families(args))
    entries = read_entries(args.entries)
    law = lift_scalar_matrix(scalar, entries['matrices'], int(entries['N']), entries.get('label'), args.M, args.K)
    b = read_matrix(args.b)
    G, bound = law.cauchy_with_bound(b)
    g = law.inf_cauchy(b).std
    out.buffer.write(json.dumps(encode({'G': G.std, 'g': g, 'tail_bound': bound}), indent=2) + '\n')
    out.summary(f'lifted {law.label} over M_{law.d}, tail bound {bound:.3g}')


def cmd_freeness_check(args, out: Output):
    families = _families(args)
    oracle = joint_from_free_cumulants(families)
    labeling = {label: i for i, f in enumerate(families) for label in f.labels}
    report = freeness_check(oracle, labeling, args.order)
    out.buffer.write(to_json(report) + '\n')
    verdict = '≤' if report.passed(args.tol) else '>'
    out.summary(f'max violation {report.max_violation:.3g} {verdict} {args.tol:.0e}')


def cmd_rmt_verify(args, out: Output):
    spec = EnsembleSpec(args.N, args.ensemble, args.variance, tuple(args.spike or ()), args.seed, args.trials)
    points = args.z or [3j]
    predictions = [predict(spec, z) for z in points]
    estimates = estimate_inf_taus(spec, points, [G for G, _ in predictions])
    rows = []
    for z, (_, g), estimate in zip(points, predictions, estimates):
        rows.append({
            'z': z,
            'g_hat': estimate.value,
            'std_err': estimate.std_error,
            'prediction': g,
            'sigma_distance': estimate.sigma_distance(g),
        })
    out.buffer.write(json.dumps(encode(rows[0] if len(rows) == 1 else rows), indent=2) + '\n')
    out.summary(f'N = {args.N}, {args.trials} trials, worst distance {max(r["sigma_distance"] for r in rows):.2f} σ')


def cmd_verify_all(args, out: Output):
    results = run_all(args.full)
    out.buffer.write(format_table(results) + '\n')
    failed = [r.name for r in results if not r.passed]
    out.summary(f'{len(results) - len(failed)}/{len(results)} checks passed')
    if failed:
        out.flush()
        raise NumericalError(f'failed checks: {", ".join(failed)}')


def _common(parser: argparse.ArgumentParser, tol: float = 1e-12):
    parser.add_argument('--out', default='-', help='output path, - for stdout')
    parser.add_argument('--tol', type=positive, default=tol)
    parser.add_argument('--max-iter', type=int, default=10000)
    parser.add_argument('--config', help='key = value file of option defaults')
    parser.add_argument('-v', '--verbose', action='count', default=0)


def _grid_options(parser: argparse.ArgumentParser):
    parser.add_argument('--z', type=complex_arg, action='append', help='evaluation point, e.g. 0+2i')
    parser.add_argument('--grid', type=parse_grid, help='real parts re0:re1:n')
    parser.add_argument('--imag', type=positive, default=0.1, help='imaginary part of grid points')
    parser.add_argument('--workers', type=int, default=1, help='threads evaluating grid points')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='infinifree', description='Infinitesimal free probability toolkit.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)

    law = commands.add_parser('law', help='scalar law transforms')
    law_commands = law.add_subparsers(dest='law_command', required=True)
    show = law_commands.add_parser('show', help='G and g on a grid, as CSV')
    show.add_argument('--law', required=True)
    _grid_options(show)
    _common(show)
    show.set_defaults(handler=cmd_law_show)

    cumulants = commands.add_parser('cumulants', help='free and infinitesimal cumulants of a law, as JSON')
    cumulants.add_argument('--law', required=True)
    cumulants.add_argument('--order', type=int, default=8)
    cumulants.add_argument('--label', default='x')
    _common(cumulants)
    cumulants.set_defaults(handler=cmd_cumulants)

    convolve = commands.add_parser('convolve', help='G, g and subordination functions of x + y, as CSV')
    convolve.add_argument('--x', required=True)
    convolve.add_argument('--y', required=True)
    _grid_options(convolve)
    _common(convolve)
    convolve.set_defaults(handler=cmd_convolve)

    ov = commands.add_parser('ov-convolve', help='operator-valued convolution at one point, as JSON')
    ov.add_argument('--x', required=True)
    ov.add_argument('--y', required=True)
    ov.add_argument('--b', required=True)
    _common(ov, 1e-10)
    ov.set_defaults(handler=cmd_ov_convolve)

    lift = commands.add_parser('lift', help='Cauchy transforms of a matrix with scalar-law entries')
    lift.add_argument('--cumulants', action='append', help='cumulant table of one free family')
    lift.add_argument('--law', action='append', help='law file of one free variable')
    lift.add_argument('--order', type=int, default=8)
    lift.add_argument('--entries', required=True)
    lift.add_argument('--b', required=True)
    lift.add_argument('--M', type=positive, required=True, help='norm bound of the lifted matrix')
    lift.add_argument('--K', type=int, default=10)
    _common(lift)
    lift.set_defaults(handler=cmd_lift)

    freeness = commands.add_parser('freeness-check', help='infinitesimal freeness report, as JSON')
    freeness.add_argument('--cumulants', action='append')
    freeness.add_argument('--law', action='append')
    freeness.add_argument('--order', type=int, default=6)
    _common(freeness, 1e-10)
    freeness.set_defaults(handler=cmd_freeness_check)

    rmt = commands.add_parser('rmt-verify', help='Monte Carlo ĝ against the predicted g, as JSON')
    rmt.add_argument('--ensemble', choices=['gue', 'deterministic'], default='gue')
    rmt.add_argument('--spike', type=float, action='append')
    rmt.add_argument('--variance', type=positive, default=1.0)
    rmt.add_argument('--N', type=int, default=1024)
    rmt.add_argument('--trials', type=int, default=200)
    rmt.add_argument('--z', type=complex_arg, action='append')
    rmt.add_argument('--seed', type=int, default=0)
    _common(rmt)
    rmt.set_defaults(handler=cmd_rmt_verify)

    verify = commands.add_parser('verify-all', help='run the acceptance suite')
    verify.add_argument('--full', action='store_true', help='full-scale sizes and orders')
    _common(verify)
    verify.set_defaults(handler=cmd_verify_all)
    return parser


def _subcommand(parser: argparse.ArgumentParser, argv: list[str]) -> tuple[argparse.ArgumentParser, int]:
    """The innermost subparser named in @argv and the index just after its name."""
    end = 0
    while True:
        subparsers = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
        if not subparsers:
            return parser, end
        for i in range(end, len(argv)):
            if argv[i] in subparsers[0].choices:
                parser, end = subparsers[0].choices[argv[i]], i + 1
                break
        else:
            return parser, end


def read_config(path: str) -> dict[str, str]:
    """key = value lines; # starts a comment."""
    values = {}
    try:
        with open(path) as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise ValidationError(f'cannot read config {path}: {e.strerror}') from None
    for number, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValidationError(f'{path}:{number}: expected key = value ({line!r})')
        key, value = (part.strip() for part in line.split('=', 1))
        values[key.replace('_', '-')] = value
    return values


def with_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """
    @argv with the options of its --config file spliced in after the
    subcommand, so options given on the command line still win.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('--config')
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    sub, end = _subcommand(parser, argv)
    actions = {s: a for a in sub._actions for s in a.option_strings}
    extra = []
    for key, value in read_config(known.config).items():
        action = actions.get(f'--{key}')
        if action is None or key in ('config', 'help'):
            raise ValidationError(f'unknown config key {key!r}')
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() in ('1', 'true', 'yes', 'on'):
                extra.append(f'--{key}')
        elif isinstance(action, argparse._AppendAction):
            for item in value.split(','):
                extra.append(f'--{key}={item.strip()}')
        else:
            extra.append(f'--{key}={value}')
    return argv[:end] + extra + argv[end:]


def _configure_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(with_config(parser, argv))
    except ValidationError as e:
        print(f'infinifree: error: {e}', file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID

    try:
        _configure_logging(args.verbose)
        log.info('running %s', args.command)
        out = Output(args.out)
        args.handler(args, out)
        out.flush()
    except ValidationError as e:
        print(f'infinifree: error: {e}', file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as e:
        print(f'infinifree: numerical failure: {e}', file=sys.stderr)
        return EXIT_NUMERICAL
    except InfinifreeError as e:
        print(f'infinifree: {e}', file=sys.stderr)
        return EXIT_INVALID
    except argparse.ArgumentTypeError as e:
        print(f'infinifree: error: {e}', file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main():
    sys.exit(run())
