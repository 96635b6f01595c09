"""This module derives further bounds from the bar recursion and checks their conclusions.

Covered are

 * the bound F^(ceil(1/eps)+1)(0) for nondecreasing sequences (:func:`monotone_bound`),
 * the metastable Egorov theorem (:func:`egorov_functional`, :func:`egorov_bound`,
   :func:`egorov_check`) together with the dominated convergence and Lp
   consequences (:func:`dct_check`, :func:`lp_check`),
 * the reduction of net indexed sequences along a cofinal sequence (:func:`net_reduce`),
 * the comparison of the engine against the closed form bounds (:func:`bound_table`)
   and a search for instances needing large indices (:func:`lower_bound_search`).

Example:

    >>> inp = EgorovInput(from_expr('F(0)+1'), '1/2', Budget('1/2', '1/4'))
    >>> f = egorov_functional(inp, parse_oracle('double'))
    >>> eval_total(f, parse_oracle('const:1'))[0]
    3

"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import pandas as pd

from .functional_dsl import (Const, Iter, Functional, GuardExceededError, eval_total,
                             from_expr)
from .bar_engine import (Budget, WeightSchedule, default_schedule, concentrated_schedule,
                         compute_bound)
from .measure_model import (parse_rational, format_rational, bad_set, integral, lp_power,
                            adversarial_witness, range_union, conclusion_check, hypothesis_holds,
                            uniform_space, SetSeq, Instance, EnumerationBudgetExceeded)

# exponents above this are not expanded by :func:`ffn_recurrence`
RECURRENCE_BIT_LIMIT = 4096

TABLE_NODE_GUARD = 20000


def monotone_bound(epsilon):
    """Returns the bound F^(ceil(1/eps)+1)(0) on the metastable convergence of nondecreasing sequences in [0, 1].

    :param epsilon: positive rational
    :return: the expression `iter(ceil(1/eps)+1, 0)`
    """
    epsilon = parse_rational(epsilon)
    if epsilon <= 0:
        raise ValueError('epsilon must be positive, got {0}'.format(epsilon))
    return Iter(math.ceil(1 / epsilon) + 1, Const(0))


def oscillation(values):
    """Returns max - min of the values."""
    values = list(values)
    return max(values) - min(values)


def monotone_check(values, epsilon, oracle):
    """Returns the least m <= M(F) such that the sequence oscillates less than epsilon on [m, F(m)].

    :param values: the sequence a_0, a_1, ..., continued by its last value
    :param epsilon: positive rational
    :param oracle: the function F
    :return: the witness m or None
    """
    values = [parse_rational(v) for v in values]
    epsilon = parse_rational(epsilon)
    bound = eval_total(from_expr(monotone_bound(epsilon)), oracle)[0]

    def term(n):
        return values[min(n, len(values) - 1)]

    for m in range(bound + 1):
        end = oracle(m)
        if end < m:
            return m
        end = min(end, max(m, len(values)))
        if oscillation(term(n) for n in range(m, end + 1)) < epsilon:
            return m
    return None


@dataclass(frozen=True)
class EgorovInput(object):
    """The data of the metastable Egorov theorem: M1, epsilon and the budgets."""
    m1: Functional
    epsilon: Fraction
    budget: Budget
    schedule: WeightSchedule = field(default_factory=default_schedule)

    def __post_init__(self):
        object.__setattr__(self, 'epsilon', parse_rational(self.epsilon))
        if self.epsilon <= 0:
            raise ValueError('epsilon must be positive, got {0}'.format(self.epsilon))
        if not self.m1.monotone:
            raise ValueError('M1 must be monotone, {0} is not'.format(self.m1.description))


def _interval_max(oracle, a, b):
    if hasattr(oracle, 'interval_max'):
        return oracle.interval_max(a, b)
    return max(oracle(n) for n in range(a, b + 1))


class _DerivedDialogue(object):
    """Answers G(m) = max of F2 over [m, F(m)] while asking F through the outer dialogue."""

    def __init__(self, outer, f2):
        self.outer = outer
        self.f2 = f2

    def tick(self):
        self.outer.tick()

    def ask(self, m):
        # an empty interval counts as the singleton {m}
        return _interval_max(self.f2, m, max(m, self.outer.ask(m)))


def egorov_functional(inp, f2):
    """Returns the functional F -> M1(G) with G(m) = max of F2(n) over n in [m, F(m)].

    :param inp: the Egorov data
    :type inp: EgorovInput
    :param f2: the function F2 (an :class:`Oracle` or any callable)
    :rtype: Functional
    """
    m1 = inp.m1
    return Functional(lambda dialogue: m1.run(_DerivedDialogue(dialogue, f2)),
                      monotone=m1.monotone,
                      description='egorov({0}, {1})'.format(m1.description, f2))


def egorov_bound(inp, f2, **kwargs):
    """Computes M2(F2), the bound of :func:`compute_bound` for the Egorov functional.

    :return: tuple `(m2, trace)`
    """
    trace = compute_bound(egorov_functional(inp, f2), inp.budget, inp.schedule, **kwargs)
    return trace.m_prime, trace


def _conclusion_index(fs, m2, holds):
    # every index from N on sees the tail only and passes
    for m in range(min(m2, fs.stab_index) + 1):
        if holds(m):
            return m
    return None


def _terms(fs, m, b):
    if b < m:
        return []
    return [fs.term(n) for n in range(m, min(b, max(m, fs.stab_index)) + 1)]


def egorov_check(space, fs, inp, f2, m2=None, **kwargs):
    """Returns the least m <= M2(F2) with mu({x : f_n(x) varies less than eps on [m, F2(m)]}) > 1 - lambda.

    :param space: the space
    :param fs: the function sequence
    :type fs: FuncSeq
    :param inp: the Egorov data; M1 must be a lambda'-uniform bound for `fs`
    :param f2: the function F2
    :param m2: the bound, computed by :func:`egorov_bound` if not given
    :return: the witness m, None means the conclusion fails
    """
    if m2 is None:
        m2 = egorov_bound(inp, f2, **kwargs)[0]
    threshold = 1 - inp.budget.lam
    everything = space.points

    def holds(m):
        return sum(space.weights[x] for x in everything - bad_set(fs, inp.epsilon, m, f2(m))) > threshold

    return _conclusion_index(fs, m2, holds)


def dct_check(space, fs, inp, f, m2=None, **kwargs):
    """Returns the least m <= M2(F) with |int f_n - int f_n'| < eps + lambda for all n, n' in [m, F(m)].

    :return: the witness m or None
    """
    if m2 is None:
        m2 = egorov_bound(inp, f, **kwargs)[0]
    bound = inp.epsilon + inp.budget.lam

    def holds(m):
        values = [integral(space, g) for g in _terms(fs, m, f(m))]
        return not values or oscillation(values) < bound

    return _conclusion_index(fs, m2, holds)


def lp_check(space, fs, inp, f, p, m2=None, **kwargs):
    """Returns the least m <= M2(F) with ||f_n - f_n'||_p^p < eps^p + lambda for all n, n' in [m, F(m)].

    The p-th root is never taken, both sides are compared as p-th powers.

    :param p: natural number >= 1
    :return: the witness m or None
    """
    if p < 1:
        raise ValueError('p must be at least 1, got {0}'.format(p))
    if m2 is None:
        m2 = egorov_bound(inp, f, **kwargs)[0]
    bound = inp.epsilon ** p + inp.budget.lam

    def holds(m):
        terms = _terms(fs, m, f(m))
        for g, h in itertools.combinations(terms, 2):
            if lp_power(space, [a - b for a, b in zip(g, h)], p) >= bound:
                return False
        return True

    return _conclusion_index(fs, m2, holds)


def pointwise_bound_witness(space, fs, m1, epsilon, lam_prime, **kwargs):
    """Searches F with mu({x : every m <= M1(F) sees a deviation >= eps on [m, F(m)]}) >= lambda'.

    M1 is a lambda'-uniform bound on the eps-metastable pointwise convergence
    of `fs` iff no such F exists. Accepts the optional arguments of
    :func:`.adversarial_witness`.

    :return: None, or the witness found
    :raises NonMonotoneError: if `m1` is not monotone
    """
    epsilon = parse_rational(epsilon)
    lam_prime = parse_rational(lam_prime)
    return adversarial_witness(space, m1, fs.stab_index, lambda m, b: bad_set(fs, epsilon, m, b),
                               frozenset(), lam_prime, **kwargs)


def pointwise_bound_holds(space, fs, m1, epsilon, lam_prime, **kwargs):
    """Decides whether M1 is a lambda'-uniform bound on the eps-metastable pointwise convergence of `fs`.

    Only monotone M1 can be decided.

    :rtype: bool
    """
    return pointwise_bound_witness(space, fs, m1, epsilon, lam_prime, **kwargs) is None


@dataclass(frozen=True)
class NetReduction(object):
    """A strictly increasing cofinal sequence a_0 < a_1 < ..."""
    cofinal: object

    def __call__(self, n):
        return self.cofinal(n)


def linear_net(step, offset=0):
    """Returns the cofinal sequence a_n = offset + step * n."""
    if step < 1:
        raise ValueError('step must be positive, got {0}'.format(step))
    return NetReduction(lambda n: offset + step * n)


def net_reduce(seq, net):
    """Returns the sequence A'_n = union of A_i over i in [a_n, a_(n+1)].

    :param seq: the set sequence
    :type seq: SetSeq
    :param net: the cofinal sequence
    :type net: NetReduction
    :return: the reduced sequence, stabilizing at the least n with a_n >= N
    :rtype: SetSeq
    :raises ValueError: if the cofinal sequence is not strictly increasing
    """
    prefix = []
    n = 0
    while net(n) < seq.stab_index:
        if net(n + 1) <= net(n):
            raise ValueError('cofinal sequence is not increasing at {0}'.format(n))
        prefix.append(range_union(seq, net(n), net(n + 1)))
        n += 1
    return SetSeq(prefix, seq.tail)


def net_conclusion_check(space, seq, net, lam, m_prime):
    """Returns the least i <= a_(M') with mu(A_i) < lambda, or None."""
    return conclusion_check(space, seq, lam, net(m_prime))


def ffn_recurrence(n, budget, steps):
    """Returns m_0, ..., m_steps with m_0 = n and m_(i+1) = n * ceil(2^(m_i+1) / (lambda - lambda')).

    Values whose exponent exceeds the bit limit are returned as strings
    naming the expression instead of the number.

    :rtype: list
    """
    values = [n]
    for i in range(steps):
        previous = values[-1]
        if isinstance(previous, str) or previous + 1 > RECURRENCE_BIT_LIMIT:
            values.append('{0}*ceil(2^(m_{1}+1)/({2}))'.format(n, i, format_rational(budget.gap)))
        else:
            values.append(n * math.ceil(Fraction(2 ** (previous + 1)) / budget.gap))
    return values


def _short(value):
    if isinstance(value, int) and value.bit_length() > 64:
        return 'about 2^{0}'.format(value.bit_length() - 1)
    return str(value)


def _table_row(expr, n, budget, schedule, engine, closed, match, note=''):
    return {
        'expr': expr,
        'n': n,
        'lambda': format_rational(budget.lam),
        'lambda_prime': format_rational(budget.lam_prime),
        'schedule': str(schedule),
        'engine_m_prime': engine,
        'closed_form': closed,
        'match': match,
        'note': note,
    }


def bound_table(n_range, budget_range, **kwargs):
    """Compares the engine against the closed form bounds.

    For every n and every budget three rows are produced:

     * `F(0)+n` with the default schedule against n * ceil(2 / (lambda - lambda'))
     * `F(0)+n` with the concentrated schedule against n * ceil(1 / (lambda - lambda'))
     * `F(F(0))+n` with the default schedule against the recurrence value m_c,
       c = ceil(2 / (lambda - lambda')); the note reports m_(c-1), which is what
       the recursion yields. This row asserts nothing; when the recursion
       exceeds its node guard the engine column reads `exhausted`.

    :param n_range: the values of n
    :param budget_range: the budgets
    :param kwargs: optional arguments

     - `node_guard` (int): the guard for the `F(F(0))+n` rows (default 20000)

     - `nested` (bool): whether to include the `F(F(0))+n` rows (default True)

    :return: data frame with columns expr, n, lambda, lambda_prime, schedule,
             engine_m_prime, closed_form, match, note
    :rtype: pandas.DataFrame
    """
    node_guard = kwargs.get('node_guard', TABLE_NODE_GUARD)
    nested = kwargs.get('nested', True)
    rows = []
    for budget in budget_range:
        for n in n_range:
            text = 'F(0)+{0}'.format(n)
            for schedule, closed in ((default_schedule(), n * math.ceil(2 / budget.gap)),
                                     (concentrated_schedule(), n * math.ceil(1 / budget.gap))):
                engine = compute_bound(from_expr(text), budget, schedule).m_prime
                if engine != closed:
                    logging.error('{0}: engine gives {1}, closed form {2}'.format(text, engine, closed))
                rows.append(_table_row(text, n, budget, schedule, engine, closed, engine == closed))
            if not nested:
                continue
            text = 'F(F(0))+{0}'.format(n)
            count = math.ceil(2 / budget.gap)
            recurrence = ffn_recurrence(n, budget, count)
            note = 'recursion yields m_{0} = {1}'.format(count - 1, _short(recurrence[count - 1]))
            try:
                engine = str(compute_bound(from_expr(text), budget, node_guard=node_guard).m_prime)
            except GuardExceededError as err:
                logging.warning('{0}: {1}'.format(text, err))
                engine = 'exhausted'
            rows.append(_table_row(text, n, budget, default_schedule(), engine,
                                   _short(recurrence[count]), None, note))
    return pd.DataFrame(rows, columns=['expr', 'n', 'lambda', 'lambda_prime', 'schedule',
                                       'engine_m_prime', 'closed_form', 'match', 'note'])


@dataclass(frozen=True)
class SearchBudget(object):
    """Limits of :func:`lower_bound_search`."""
    max_points: int = 3
    max_stab: int = 4
    max_instances: int = 10000


@dataclass(frozen=True)
class LowerBoundReport(object):
    instance: Instance
    least_index: int
    searched: int
    reference: int
    m_prime: int
    undecided: int = 0


def lower_bound_reference(n, budget):
    """Returns n * (ceil((1 - lambda') / (lambda - lambda')) - 1)."""
    return n * (math.ceil((1 - budget.lam_prime) / budget.gap) - 1)


def _candidate_sequences(search):
    for points in range(1, search.max_points + 1):
        subsets = [frozenset(c) for size in range(points + 1)
                   for c in itertools.combinations(range(points), size)]
        for stab in range(search.max_stab + 1):
            for terms in itertools.product(subsets, repeat=stab + 1):
                yield points, SetSeq(terms[:-1], terms[-1])


def lower_bound_search(n, budget, search=None, **kwargs):
    """Searches small instances satisfying the hypothesis for `F(0)+n` whose least small set comes late.

    Spaces are uniform, the search enumerates all set sequences up to the
    limits and keeps the one whose least index with mu(A_i) < lambda is
    largest. The result is a lower bound for M' only as far as the search
    reaches; it never claims optimality.
    Instances whose hypothesis exhausts the enumeration budget are counted
    as undecided and skipped, so the best instance found so far is returned.

    :param n: the offset in `F(0)+n`
    :param budget: the budgets
    :type budget: Budget
    :param search: the search limits
    :type search: SearchBudget
    :rtype: LowerBoundReport
    """
    search = search or SearchBudget()
    f = from_expr('F(0)+{0}'.format(n))
    m_prime = compute_bound(f, budget).m_prime
    reference = lower_bound_reference(n, budget)
    best = None
    best_index = None
    searched = 0
    undecided = 0
    for points, seq in _candidate_sequences(search):
        if searched >= search.max_instances:
            logging.info('lower bound search stopped after {0} instances'.format(searched))
            break
        searched += 1
        space = uniform_space(points)
        try:
            if not hypothesis_holds(space, seq, f, budget.lam_prime, **kwargs):
                continue
        except EnumerationBudgetExceeded as err:
            logging.debug('undecided instance skipped: {0}'.format(err))
            undecided += 1
            continue
        index = conclusion_check(space, seq, budget.lam, max(m_prime, seq.stab_index))
        if index is not None and (best_index is None or index > best_index):
            best = Instance(space, seq)
            best_index = index
    if undecided:
        logging.warning('lower bound search left {0} of {1} instances undecided'.format(undecided, searched))
    return LowerBoundReport(best, best_index, searched, reference, m_prime, undecided)
