"""Seeded soundness campaigns for the computed bounds.

A campaign generates `size` random instances for one theorem, checks the
theorem's conclusion on each and collects the outcomes in a data frame. Every
instance is drawn from its own generator, seeded with `[seed, id]`, so a
single instance can be reproduced without the others and the result does not
depend on how the work is split across processes.

The campaigns are

 * `bound`: the bar recursion bound on instances where the fast sufficient test
   establishes the hypothesis
 * `bound-exact`: the same on tiny instances decided by exhaustive enumeration
 * `conditions`: the implications between the three equivalent conditions
 * `egorov`, `dct`, `lp`: the Egorov, dominated convergence and Lp conclusions
 * `monotone`: the bound for nondecreasing sequences against every F with
   m <= F(m) <= m + 4

Each row has the status `ok`, `violation`, `undecided` (enumeration budget
exhausted), `skipped` (recursion guard exhausted) or `vacuous` (hypothesis not
established).

Example:

    >>> report = run_campaign('bound', seed=1, size=20)
    >>> int((report.status == 'violation').sum())
    0

"""
import concurrent.futures
import json
import logging
from fractions import Fraction

import numpy as np
import pandas as pd

from .functional_dsl import (GuardExceededError, explore_dialogues, format_expr, from_expr, constant,
                             parse_oracle, random_expr)
from .bar_engine import Budget, compute_bound
from .measure_model import (EnumerationBudgetExceeded, FiniteProbSpace, SetSeq, FuncSeq, Instance,
                            parse_rational, format_rational, instance_to_dict, instance_from_dict,
                            measure, integral, lp_power, cond1, cond2, cond3, cond3_witness, top_body,
                            hypothesis_holds, hypothesis_sufficient, conclusion_check)
from .derived_bounds import (EgorovInput, egorov_bound, egorov_check, dct_check, lp_check,
                             pointwise_bound_holds, monotone_bound, oscillation)

OK = 'ok'
VIOLATION = 'violation'
UNDECIDED = 'undecided'
SKIPPED = 'skipped'
VACUOUS = 'vacuous'

COLUMNS = ['id', 'seed', 'theorem', 'status', 'detail', 'instance']

# generator limits per campaign
DEFAULT_OPTIONS = {
    'bound': {'points': 4, 'stab': 6, 'depth': 2, 'node_guard': 2000},
    'bound-exact': {'points': 3, 'stab': 3, 'depth': 1, 'node_guard': 2000, 'enumeration_budget': 10000},
    'conditions': {'points': 3, 'stab': 3, 'depth': 1, 'enumeration_budget': 10000},
    'egorov': {'points': 4, 'stab': 6},
    'dct': {'points': 4, 'stab': 6},
    'lp': {'points': 4, 'stab': 6},
    'monotone': {'length': 8, 'spread': 4, 'cap': 20, 'epsilon': None},
}

THEOREMS = tuple(DEFAULT_OPTIONS)

_LAMBDA_PRIMES = ('1/4', '1/3', '1/2', '2/3')
_GAPS = ('1/2', '1/4', '1/8')
_EPSILONS = ('1/4', '1/2', '1')
_LEVELS = tuple(Fraction(k, 4) for k in range(5))


def _pick(rng, values):
    return values[int(rng.integers(0, len(values)))]


def _random_space(rng, points):
    weights = [int(w) for w in rng.integers(1, 5, size=points)]
    total = sum(weights)
    return FiniteProbSpace(tuple(Fraction(w, total) for w in weights))


def _random_subset(rng, points, density):
    return frozenset(int(x) for x in np.flatnonzero(rng.random(points) < density))


def _random_sets(rng, points, stab):
    density = rng.random()
    prefix = [_random_subset(rng, points, density) for _ in range(stab)]
    return SetSeq(prefix, _random_subset(rng, points, density / 2))


def _random_funcs(rng, points, stab):
    terms = [tuple(_pick(rng, _LEVELS) for _ in range(points)) for _ in range(stab + 1)]
    return FuncSeq(terms[:-1], terms[-1])


def _random_budget(rng):
    lam_prime = parse_rational(_pick(rng, _LAMBDA_PRIMES))
    lam = lam_prime + parse_rational(_pick(rng, _GAPS))
    return Budget(lam, lam_prime)


def _random_oracle(rng):
    kind = int(rng.integers(0, 6))
    if kind == 0:
        return 'id'
    if kind == 1:
        return 'succ'
    if kind == 2:
        return 'double'
    if kind == 3:
        return 'shift:{0}'.format(int(rng.integers(0, 4)))
    if kind == 4:
        return 'const:{0}'.format(int(rng.integers(0, 6)))
    return 'table:' + ','.join(str(int(v)) for v in rng.integers(0, 8, size=int(rng.integers(1, 6))))


def generate_instance(theorem, seed, instance_id, **kwargs):
    """Draws instance `instance_id` of the campaign.

    :param theorem: the campaign name
    :param seed: the campaign seed
    :param instance_id: the number of the instance
    :param kwargs: overrides of the generator limits in :data:`DEFAULT_OPTIONS`
    :return: the JSON serializable instance
    :rtype: dict
    """
    if theorem not in DEFAULT_OPTIONS:
        raise ValueError('Unknown campaign: {0}, use one of {1}'.format(theorem, ', '.join(THEOREMS)))
    options = dict(DEFAULT_OPTIONS[theorem])
    options.update({key: value for key, value in kwargs.items() if key in options})
    rng = np.random.default_rng([seed, instance_id])

    if theorem == 'monotone':
        steps = rng.integers(0, 9, size=int(rng.integers(1, options['length'] + 1)))
        values = [Fraction(int(v), 8) for v in np.sort(steps)]
        epsilon = _pick(rng, _EPSILONS)
        if options['epsilon'] is not None:
            epsilon = format_rational(parse_rational(options['epsilon']))
        return {'theorem': theorem, 'values': [format_rational(v) for v in values],
                'epsilon': epsilon, 'spread': options['spread'], 'cap': options['cap']}

    points = int(rng.integers(1, options['points'] + 1))
    stab = int(rng.integers(0, options['stab'] + 1))
    space = _random_space(rng, points)
    budget = _random_budget(rng)
    data = {'theorem': theorem, 'lambda': format_rational(budget.lam),
            'lambda_prime': format_rational(budget.lam_prime)}
    if theorem in ('bound', 'bound-exact', 'conditions'):
        data.update(instance_to_dict(Instance(space, _random_sets(rng, points, stab))))
        data['expr'] = format_expr(random_expr(rng, options['depth']))
        for key in ('node_guard', 'enumeration_budget'):
            if key in options:
                data[key] = options[key]
    else:
        data.update(instance_to_dict(Instance(space, funcs=_random_funcs(rng, points, stab))))
        data['epsilon'] = _pick(rng, _EPSILONS)
        data['oracle'] = _random_oracle(rng)
    return data


def _limits(data):
    return {key: data[key] for key in ('node_guard', 'enumeration_budget') if key in data}


def _check_bound(data):
    instance = instance_from_dict(data)
    space, seq = instance.space, instance.sets
    f = from_expr(data['expr'])
    budget = Budget(data['lambda'], data['lambda_prime'])
    exact = data['theorem'] == 'bound-exact'
    if exact:
        established = hypothesis_holds(space, seq, f, budget.lam_prime, **_limits(data))
    else:
        established = hypothesis_sufficient(space, seq, f, budget.lam_prime)
    if not established:
        return VACUOUS, 'hypothesis does not hold'
    m_prime = compute_bound(f, budget, **_limits(data)).m_prime
    index = conclusion_check(space, seq, budget.lam, m_prime)
    if index is None:
        return VIOLATION, 'no n <= {0} with mu(A_n) < {1}'.format(m_prime, format_rational(budget.lam))
    return OK, 'n = {0} <= M\' = {1}'.format(index, m_prime)


def _check_conditions(data):
    instance = instance_from_dict(data)
    space, seq = instance.space, instance.sets
    lam = parse_rational(data['lambda'])
    limits = _limits(data)
    m = cond1(space, seq, lam)
    details = []
    if m is not None:
        if not cond2(space, seq, lam, m):
            return VIOLATION, 'condition (1) at M = {0} without condition (2)'.format(m)
        lam_prime = (measure(space, top_body(seq, m)) + lam) / 2
        if not cond3(space, seq, constant(m), lam, lam_prime, **limits):
            return VIOLATION, 'condition (2) at M = {0} without condition (3)'.format(m)
        details.append('(1) -> (2) -> (3) at M = {0}'.format(m))
    witness = cond3_witness(space, seq, lam)
    if (witness is None) != (m is None):
        return VIOLATION, 'condition (3) witness disagrees with condition (1)'
    if witness is not None and not cond3(space, seq, witness[1], lam, witness[0], **limits):
        return VIOLATION, 'condition (3) witness does not verify'
    f = from_expr(data['expr'])
    lam_prime = parse_rational(data['lambda_prime'])
    if cond3(space, seq, f, lam, lam_prime, **limits):
        if m is None:
            return VIOLATION, 'condition (3) for {0} without condition (1)'.format(data['expr'])
        details.append('(3) -> (1) for {0}'.format(data['expr']))
    return OK, '; '.join(details) or 'no condition holds'


def _egorov_data(data):
    instance = instance_from_dict(data)
    fs = instance.funcs
    budget = Budget(data['lambda'], data['lambda_prime'])
    inp = EgorovInput(constant(fs.stab_index), data['epsilon'], budget)
    return instance.space, fs, inp, parse_oracle(data['oracle'])


def _check_egorov(data):
    space, fs, inp, f2 = _egorov_data(data)
    if not pointwise_bound_holds(space, fs, inp.m1, inp.epsilon, inp.budget.lam_prime):
        return VIOLATION, 'M1 = {0} is not a pointwise bound'.format(fs.stab_index)
    m2 = egorov_bound(inp, f2)[0]
    m = egorov_check(space, fs, inp, f2, m2=m2)
    if m is None:
        return VIOLATION, 'no m <= {0} with a good set of measure > 1 - lambda'.format(m2)
    return OK, 'm = {0} <= M2 = {1}'.format(m, m2)


def _check_dct(data):
    space, fs, inp, f = _egorov_data(data)
    for n in range(fs.stab_index + 1):
        for n2 in range(fs.stab_index + 1):
            g, h = fs.term(n), fs.term(n2)
            gap = abs(integral(space, g) - integral(space, h))
            if gap > integral(space, [abs(a - b) for a, b in zip(g, h)]):
                return VIOLATION, 'triangle inequality fails for n = {0}, n\' = {1}'.format(n, n2)
    m2 = egorov_bound(inp, f)[0]
    m = dct_check(space, fs, inp, f, m2=m2)
    if m is None:
        return VIOLATION, 'no m <= {0} with integrals closer than eps + lambda'.format(m2)
    return OK, 'm = {0} <= M2 = {1}'.format(m, m2)


def _check_lp(data):
    space, fs, inp, f = _egorov_data(data)
    m2 = egorov_bound(inp, f)[0]
    found = []
    for p in (1, 2, 3):
        m = lp_check(space, fs, inp, f, p, m2=m2)
        if m is None:
            return VIOLATION, 'no m <= {0} for p = {1}'.format(m2, p)
        found.append('p = {0}: m = {1}'.format(p, m))
    # for p = 1 the Lp distance is the integral of |f_n - f_n'|
    for n in range(fs.stab_index + 1):
        g, h = fs.term(n), fs.term(n + 1)
        difference = [a - b for a, b in zip(g, h)]
        if lp_power(space, difference, 1) != integral(space, [abs(v) for v in difference]):
            return VIOLATION, 'L1 norm differs from the integral at n = {0}'.format(n)
    return OK, '; '.join(found)


def _check_monotone(data):
    values = [parse_rational(v) for v in data['values']]
    epsilon = parse_rational(data['epsilon'])
    spread, cap = data['spread'], data['cap']
    f = from_expr(monotone_bound(epsilon))

    def term(n):
        return values[min(n, len(values) - 1)]

    def wiggles(m, b):
        return oscillation(term(n) for n in range(m, min(b, max(m, len(values))) + 1)) >= epsilon

    def choices(position):
        return list(range(position, min(position + spread, max(position, cap)) + 1))

    count = 0
    for bound, answers in explore_dialogues(f, choices):
        count += 1
        # the witness lies on the path 0, F(0), F(F(0)), ...
        if all(wiggles(m, b) for m, b in answers.items() if m <= bound):
            def oracle(m, answers=answers):
                return answers.get(m, min(m + spread, max(m, cap)))
            if all(wiggles(m, oracle(m)) for m in range(bound + 1)):
                return VIOLATION, 'F = {0} has no witness m <= {1}'.format(answers, bound)
    return OK, '{0} functions checked'.format(count)


CHECKS = {
    'bound': _check_bound,
    'bound-exact': _check_bound,
    'conditions': _check_conditions,
    'egorov': _check_egorov,
    'dct': _check_dct,
    'lp': _check_lp,
    'monotone': _check_monotone,
}


def check_instance(data, checks=None):
    """Runs the check of the instance's theorem.

    :param data: the instance as returned by :func:`generate_instance`
    :param checks: optional mapping from theorem to check function, replacing
                   the built in checks
    :return: tuple `(status, detail)`
    """
    check = (checks or CHECKS)[data['theorem']]
    try:
        return check(data)
    except EnumerationBudgetExceeded as err:
        return UNDECIDED, str(err)
    except GuardExceededError as err:
        return SKIPPED, str(err)


def _run_one(job):
    theorem, seed, instance_id, checks, options = job
    data = generate_instance(theorem, seed, instance_id, **options)
    status, detail = check_instance(data, checks)
    if status == VIOLATION:
        logging.error('{0} instance {1}: {2}: {3}'.format(theorem, instance_id, detail, json.dumps(data)))
    elif status == UNDECIDED:
        logging.warning('{0} instance {1} undecided: {2}'.format(theorem, instance_id, detail))
    return {
        'id': instance_id,
        'seed': seed,
        'theorem': theorem,
        'status': status,
        'detail': detail,
        'instance': json.dumps(data, sort_keys=True),
    }


def run_campaign(theorem, seed, size, jobs=1, checks=None, **kwargs):
    """Runs a soundness campaign.

    :param theorem: one of :data:`THEOREMS`
    :param seed: the campaign seed
    :param size: the number of instances
    :param jobs: the number of worker processes
    :param checks: optional replacement check functions (must be picklable when jobs > 1)
    :param kwargs: overrides of the generator limits, e.g. `points`, `stab`, `node_guard`
    :return: data frame with the columns id, seed, theorem, status, detail and
             instance (the JSON text of the instance), ordered by id
    :rtype: pandas.DataFrame
    """
    if theorem not in DEFAULT_OPTIONS:
        raise ValueError('Unknown campaign: {0}, use one of {1}'.format(theorem, ', '.join(THEOREMS)))
    if size < 0:
        raise ValueError('size must not be negative')
    work = [(theorem, seed, instance_id, checks, kwargs) for instance_id in range(size)]
    if jobs > 1 and size > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as executor:
            rows = list(executor.map(_run_one, work, chunksize=max(1, size // (4 * jobs))))
    else:
        rows = [_run_one(job) for job in work]
    frame = pd.DataFrame(rows, columns=COLUMNS).sort_values('id').reset_index(drop=True)
    logging.info('{0} campaign, seed {1}: {2}'.format(theorem, seed, summarize(frame)))
    return frame


def summarize(frame):
    """Counts the statuses of a campaign report.

    :rtype: dict
    """
    counts = {status: 0 for status in (OK, VIOLATION, UNDECIDED, SKIPPED, VACUOUS)}
    for status, count in frame['status'].value_counts().items():
        counts[status] = int(count)
    return counts


def replay_instance(data, checks=None):
    """Checks a recorded instance again.

    :param data: the instance, as dictionary or as its JSON text
    :return: tuple `(status, detail)`
    """
    if isinstance(data, str):
        data = json.loads(data)
    return check_instance(data, checks)
