"""The `metastab` command line.

Subcommands:

 * `bound`: computes M' for an expression and prints the recursion trace
 * `verify`: runs a seeded soundness campaign, or replays recorded instances
 * `table`: compares the engine with the closed form bounds
 * `egorov`: computes M2 and checks the Egorov conclusion on an instance
 * `dct`: checks the dominated convergence (or, with `--p`, the Lp) conclusion
 * `modes`: classifies a symbolic family or an instance by mode of convergence

Exit codes: 0 success, 1 a checked property is violated, 2 invalid input,
3 a guard or the enumeration budget was exhausted.

Example:

    $ metastab bound --expr "F(0)+2" --lambda 1/2 --lambda-prime 1/4
    expr=F(0)+2
    m_prime=16
    ...

"""
import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

import pandas as pd

from . import __version__
from .functional_dsl import GuardExceededError, from_expr, constant, parse_oracle
from .bar_engine import Budget, compute_bound, schedule_by_name, trace_to_dict
from .measure_model import EnumerationBudgetExceeded, parse_rational, format_rational, load_instance
from .derived_bounds import (EgorovInput, egorov_bound, egorov_check, dct_check, lp_check,
                             pointwise_bound_holds, bound_table)
from .modes import SymbolicFamily, classify_family, classify_finite, implication_suite
from . import campaigns

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_EXHAUSTED = 3

BUDGET_VARIABLE = 'METASTABLE_BUDGET'


@dataclass
class RunConfig:
    command: str = 'bound'
    expr: str = None
    lam: str = None
    lam_prime: str = None
    epsilon: str = None
    p: int = None
    schedule: str = 'default'
    tree: str = 'dialogue'
    modulus: str = None
    instance: str = None
    oracle: str = None
    seed: int = 0
    size: int = 100
    budget: int = None
    jobs: int = 1
    fmt: str = 'text'
    out: str = None
    node_guard: int = None
    theorem: str = 'bound'
    replay: str = None
    n_range: str = '1..5'
    nested: bool = True
    family: str = None
    window: int = 20
    strict: bool = False
    verbose: int = 0

    def guards(self):
        """The guard and budget overrides as keyword arguments."""
        result = {}
        if self.node_guard is not None:
            result['node_guard'] = self.node_guard
        if self.budget is not None:
            result['enumeration_budget'] = self.budget
        return result


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--expr', help='functional in the expression language, e.g. "F(0)+2"')
    common.add_argument('--lambda', dest='lam', help='error lambda as p/q')
    common.add_argument('--lambda-prime', dest='lam_prime', help="error lambda' as p/q")
    common.add_argument('--epsilon', help='epsilon as p/q')
    common.add_argument('--p', type=int, help='exponent of the Lp check')
    common.add_argument('--schedule', default=RunConfig.schedule,
                        help='default, concentrated or a JSON schedule file')
    common.add_argument('--seed', type=int, default=RunConfig.seed, help='campaign seed')
    common.add_argument('--size', type=int, default=RunConfig.size, help='number of campaign instances')
    common.add_argument('--budget', type=int,
                        help='enumeration budget (default ${0} or 10^7)'.format(BUDGET_VARIABLE))
    common.add_argument('--jobs', type=int, default=RunConfig.jobs, help='worker processes for campaigns')
    common.add_argument('--format', dest='fmt', choices=['json', 'csv', 'text'], default=RunConfig.fmt)
    common.add_argument('--out', help='write the output to this file instead of stdout')
    common.add_argument('--oracle', help='function F as id, succ, shift:k, double, const:k or table:a,b,c')
    common.add_argument('--instance', help='JSON instance file')
    common.add_argument('--node-guard', dest='node_guard', type=int, help='maximal number of recursion nodes')
    common.add_argument('-v', '--verbose', action='count', default=0, help='-v for info, -vv for debug output')
    return common


def build_parser():
    common = _common_options()
    parser = argparse.ArgumentParser(prog='metastab', description='Explicit metastable convergence bounds.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', required=True)

    bound = commands.add_parser('bound', parents=[common], help="compute M' with its recursion trace")
    bound.add_argument('--tree', choices=['dialogue', 'modulus'], default=RunConfig.tree,
                       help='securedness criterion of the recursion')
    bound.add_argument('--modulus', help='modulus of continuity of --expr spanning the modulus tree, e.g. "F(0)+1"')

    verify = commands.add_parser('verify', parents=[common], help='run a soundness campaign')
    verify.add_argument('--theorem', choices=campaigns.THEOREMS, default=RunConfig.theorem)
    verify.add_argument('--replay', help='file with recorded instances, one JSON object per line')

    table = commands.add_parser('table', parents=[common], help='compare with the closed form bounds')
    table.add_argument('--n', dest='n_range', default=RunConfig.n_range, help='range like 1..5 or list like 1,3')
    table.add_argument('--no-nested', dest='nested', action='store_false', help='omit the F(F(0))+n rows')

    egorov = commands.add_parser('egorov', parents=[common], help='metastable Egorov bound')
    egorov.add_argument('--strict', action='store_true', help='decide whether M1 is a pointwise bound')

    commands.add_parser('dct', parents=[common], help='dominated convergence and Lp checks')

    modes = commands.add_parser('modes', parents=[common], help='classify by mode of convergence')
    modes.add_argument('--family', choices=[f.value for f in SymbolicFamily] + ['all'])
    modes.add_argument('--window', type=int, default=RunConfig.window)
    return parser


def parse_args(argv=None):
    """Builds the run configuration from the command line.

    :rtype: RunConfig
    """
    args = build_parser().parse_args(argv)
    values = vars(args)
    config = RunConfig(**{key: value for key, value in values.items() if key in RunConfig.__dataclass_fields__})
    if config.budget is None and os.environ.get(BUDGET_VARIABLE):
        try:
            config.budget = int(os.environ[BUDGET_VARIABLE])
        except ValueError:
            raise ValueError('{0} must be an integer, got {1!r}'.format(BUDGET_VARIABLE, os.environ[BUDGET_VARIABLE]))
    return config


def _require(config, *names):
    missing = [name for name in names if getattr(config, name) is None]
    if missing:
        flags = {'lam': '--lambda', 'lam_prime': '--lambda-prime'}
        raise ValueError('{0} requires {1}'.format(
            config.command, ', '.join(flags.get(name, '--' + name) for name in missing)))


def _budget(config):
    _require(config, 'lam', 'lam_prime')
    return Budget(config.lam, config.lam_prime)


def _emit(config, text):
    if not text.endswith('\n'):
        text += '\n'
    if config.out:
        with open(config.out, 'w') as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _emit_mapping(config, data):
    if config.fmt == 'json':
        _emit(config, json.dumps(data, sort_keys=True))
    elif config.fmt == 'csv':
        _emit(config, pd.DataFrame([data]).to_csv(index=False))
    else:
        _emit(config, '\n'.join('{0}={1}'.format(key, value) for key, value in data.items()))


def _emit_frame(config, frame):
    if config.fmt == 'json':
        _emit(config, frame.to_json(orient='records', lines=True))
    elif config.fmt == 'csv':
        _emit(config, frame.to_csv(index=False))
    else:
        _emit(config, frame.to_string(index=False))


def cmd_bound(config):
    """Computes M' for `--expr` and prints it with the recursion trace."""
    _require(config, 'expr')
    f = from_expr(config.expr)
    options = config.guards()
    if config.tree == 'modulus':
        _require(config, 'modulus')
        options['modulus'] = from_expr(config.modulus)
    trace = compute_bound(f, _budget(config), schedule_by_name(config.schedule), tree=config.tree, **options)
    data = trace_to_dict(trace)
    if config.fmt == 'json':
        _emit(config, json.dumps(data, sort_keys=True))
    elif config.fmt == 'csv':
        frame = pd.DataFrame([{
            'sigma': ' '.join(str(v) for v in node['sigma']),
            'secured': node['secured'],
            'value': node['value'],
            'iteration_count': node.get('iteration_count'),
            'children': ' '.join(str(v) for v in node.get('children', [])),
        } for node in data['nodes']])
        _emit(config, frame.to_csv(index=False))
    else:
        _emit_mapping(config, {key: data[key] for key in ('expr', 'lambda', 'lambda_prime', 'schedule', 'tree',
                                                           'm_prime', 'nodes_visited', 'max_depth')})
    return EXIT_OK


def _read_replay(location):
    with open(location) as handle:
        return [line for line in handle.read().splitlines() if line.strip()]


def cmd_verify(config):
    """Runs the campaign of `--theorem` or replays `--replay`; fails on any violation."""
    if config.replay:
        rows = []
        for number, line in enumerate(_read_replay(config.replay)):
            data = json.loads(line)
            if 'instance' in data and isinstance(data['instance'], str):
                data = json.loads(data['instance'])
            status, detail = campaigns.replay_instance(data)
            rows.append({'id': number, 'seed': config.seed, 'theorem': data.get('theorem'), 'status': status,
                         'detail': detail, 'instance': json.dumps(data, sort_keys=True)})
        frame = pd.DataFrame(rows, columns=campaigns.COLUMNS)
    else:
        options = config.guards()
        if config.theorem == 'monotone' and config.epsilon is not None:
            options['epsilon'] = config.epsilon
        frame = campaigns.run_campaign(config.theorem, config.seed, config.size, jobs=config.jobs, **options)
    counts = campaigns.summarize(frame)
    if config.fmt == 'text':
        theorems = sorted(set(frame['theorem'].dropna())) if config.replay else [config.theorem]
        lines = ['theorem={0}'.format(','.join(theorems)), 'seed={0}'.format(config.seed),
                 'instances={0}'.format(len(frame))]
        lines += ['{0}={1}'.format(status, count) for status, count in counts.items()]
        lines += ['violating instance: {0}'.format(row.instance)
                  for row in frame.itertuples() if row.status == campaigns.VIOLATION]
        _emit(config, '\n'.join(lines))
    else:
        _emit_frame(config, frame)
    return EXIT_VIOLATION if counts[campaigns.VIOLATION] else EXIT_OK


def parse_range(text):
    """Parses `1..5` or `1,3,4` into a list of naturals."""
    text = text.strip()
    try:
        if '..' in text:
            start, _, end = text.partition('..')
            values = list(range(int(start), int(end) + 1))
        else:
            values = [int(v) for v in text.split(',')]
    except ValueError:
        raise ValueError('Invalid range: {0!r}'.format(text))
    if not values or min(values) < 0:
        raise ValueError('Invalid range: {0!r}'.format(text))
    return values


def _budgets(config):
    """All valid pairs from the comma separated `--lambda` and `--lambda-prime` lists."""
    _require(config, 'lam', 'lam_prime')
    budgets = []
    for lam in config.lam.split(','):
        for lam_prime in config.lam_prime.split(','):
            if parse_rational(lam) > parse_rational(lam_prime) > 0:
                budgets.append(Budget(lam, lam_prime))
    if not budgets:
        raise ValueError("no lambda > lambda' > 0 among the given values")
    return budgets


def cmd_table(config):
    """Prints the comparison with the closed form bounds; fails when an F(0)+n row does not match."""
    frame = bound_table(parse_range(config.n_range), _budgets(config), nested=config.nested,
                        **({'node_guard': config.node_guard} if config.node_guard is not None else {}))
    _emit_frame(config, frame)
    return EXIT_VIOLATION if any(match is False for match in frame['match']) else EXIT_OK


def _egorov_input(config, instance=None):
    _require(config, 'epsilon')
    if config.expr is not None:
        m1 = from_expr(config.expr)
    elif instance is not None and instance.funcs is not None:
        m1 = constant(instance.funcs.stab_index)
    else:
        raise ValueError('{0} requires --expr or an --instance with functions'.format(config.command))
    return EgorovInput(m1, config.epsilon, _budget(config), schedule_by_name(config.schedule))


def _load_funcs(config):
    _require(config, 'instance')
    instance = load_instance(config.instance)
    if instance.funcs is None:
        raise ValueError('instance {0} has no functions'.format(config.instance))
    return instance


def cmd_egorov(config):
    """Computes M2(F2) and, for an instance, the least m satisfying the Egorov conclusion."""
    instance = load_instance(config.instance) if config.instance else None
    inp = _egorov_input(config, instance)
    _require(config, 'oracle')
    f2 = parse_oracle(config.oracle)
    m2, trace = egorov_bound(inp, f2, **config.guards())
    data = {'m1': inp.m1.description, 'oracle': str(f2), 'epsilon': format_rational(inp.epsilon),
            'lambda': format_rational(inp.budget.lam), 'lambda_prime': format_rational(inp.budget.lam_prime),
            'm2': m2, 'nodes_visited': trace.nodes_visited}
    code = EXIT_OK
    if instance is not None and instance.funcs is not None:
        if config.strict:
            data['pointwise_bound'] = pointwise_bound_holds(instance.space, instance.funcs, inp.m1, inp.epsilon,
                                                            inp.budget.lam_prime, **config.guards())
        data['m'] = egorov_check(instance.space, instance.funcs, inp, f2, m2=m2)
        if data['m'] is None and data.get('pointwise_bound', True):
            logging.error('Egorov conclusion fails for {0}'.format(config.instance))
            code = EXIT_VIOLATION
    _emit_mapping(config, data)
    return code


def cmd_dct(config):
    """Checks the dominated convergence conclusion, or the Lp one when `--p` is given."""
    instance = _load_funcs(config)
    inp = _egorov_input(config, instance)
    _require(config, 'oracle')
    f = parse_oracle(config.oracle)
    m2 = egorov_bound(inp, f, **config.guards())[0]
    if config.p is None:
        m = dct_check(instance.space, instance.funcs, inp, f, m2=m2)
    else:
        m = lp_check(instance.space, instance.funcs, inp, f, config.p, m2=m2)
    _emit_mapping(config, {'m1': inp.m1.description, 'oracle': str(f), 'p': config.p, 'm2': m2, 'm': m})
    return EXIT_OK if m is not None else EXIT_VIOLATION


def cmd_modes(config):
    """Classifies `--family` (or all three) or the functions of `--instance`."""
    epsilon = config.epsilon or '1/2'
    lam = config.lam or '1'
    if config.instance:
        instance = _load_funcs(config)
        reports = [classify_finite(instance.space, instance.funcs, epsilon, lam)]
    elif config.family:
        families = list(SymbolicFamily) if config.family == 'all' else [SymbolicFamily(config.family)]
        reports = [classify_family(family, epsilon, lam, config.window) for family in families]
    else:
        raise ValueError('modes requires --family or --instance')
    verdict = implication_suite(reports, require_gaps=config.family == 'all')
    data = [report.to_dict() for report in reports]
    if config.fmt == 'json':
        _emit(config, '\n'.join(json.dumps(entry, sort_keys=True) for entry in data))
    else:
        frame = pd.DataFrame([{key: entry[key] for key in ('family', 'epsilon', 'lambda', 'window', 'ae', 'au',
                                                          'aum', 'aum_prime')} for entry in data])
        _emit_frame(config, frame)
    return EXIT_OK if verdict.ok else EXIT_VIOLATION


COMMANDS = {
    'bound': cmd_bound,
    'verify': cmd_verify,
    'table': cmd_table,
    'egorov': cmd_egorov,
    'dct': cmd_dct,
    'modes': cmd_modes,
}


def main(argv=None):
    """Runs the command line and returns the exit code."""
    try:
        config = parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else EXIT_USAGE
    except ValueError as err:
        sys.stderr.write('error: {0}\n'.format(err))
        return EXIT_USAGE
    logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * config.verbose),
                        format='%(levelname)s: %(message)s')
    try:
        return COMMANDS[config.command](config)
    except (GuardExceededError, EnumerationBudgetExceeded) as err:
        logging.error(str(err))
        sys.stderr.write('exhausted: {0}\n'.format(err))
        return EXIT_EXHAUSTED
    except ValueError as err:
        sys.stderr.write('error: {0}\n'.format(err))
        return EXIT_USAGE
    except OSError as err:
        sys.stderr.write('error: {0}\n'.format(err))
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
