"""Finite probability spaces and the sequences living on them.

All quantities are exact rationals (:class:`fractions.Fraction`). A space is a
finite list of point weights, sets are frozensets of point ids, and sequences of
sets or functions are eventually constant: they are given by a finite prefix and
a tail that is repeated forever from the stabilization index on. With that
representation every statement quantifying over all functions F becomes
decidable, since F only matters up to the cap max(m, N).

Example:

    >>> space = uniform_space(3)
    >>> seq = SetSeq([{0}, {1}], set())
    >>> measure(space, range_union(seq, 0, 1))
    Fraction(2, 3)
    >>> hypothesis_holds(space, seq, from_expr('F(0)+1'), '1/3')
    True

"""
import json
import logging
import re
from dataclasses import dataclass
from fractions import Fraction

from . import settings
from .functional_dsl import explore_dialogues, eval_total, constant

DEFAULT_ENUMERATION_BUDGET = 10 ** 7

_RATIONAL = re.compile(r'^\s*-?\d+(\s*/\s*\d+)?\s*$')


class EnumerationBudgetExceeded(RuntimeError):
    """Raised when an exhaustive decision runs out of budget; the answer is undecided."""
    pass


class NonMonotoneError(ValueError):
    """Raised when a decision procedure needs a monotone functional and did not get one."""
    pass


def parse_rational(value):
    """Converts the value into a Fraction.

    Accepted are Fractions, integers and strings of the form `p/q` or `p`.
    Decimal strings and floats are rejected, so nothing is ever rounded.

    :param value: the value to convert
    :rtype: Fraction
    :raises ValueError: for anything else
    """
    if isinstance(value, bool):
        raise ValueError('Not a rational: {0!r}'.format(value))
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    if isinstance(value, str) and _RATIONAL.match(value):
        try:
            return Fraction(value.replace(' ', ''))
        except ZeroDivisionError:
            raise ValueError('Zero denominator in {0!r}'.format(value))
    raise ValueError('Not a rational (expected p/q): {0!r}'.format(value))


def format_rational(value):
    """Writes the rational as `p/q` (or `p` for integers)."""
    return str(Fraction(value))


@dataclass(frozen=True)
class FiniteProbSpace(object):
    """A finite probability space on the points 0, ..., k-1 with the power set as sigma algebra."""
    weights: tuple

    def __post_init__(self):
        weights = tuple(parse_rational(w) for w in self.weights)
        if not weights:
            raise ValueError('A probability space needs at least one point')
        if any(w <= 0 for w in weights):
            raise ValueError('Point weights must be positive: {0}'.format(
                [format_rational(w) for w in weights]))
        if sum(weights) != 1:
            raise ValueError('Point weights sum to {0}, not 1'.format(sum(weights)))
        object.__setattr__(self, 'weights', weights)

    @property
    def size(self):
        return len(self.weights)

    @property
    def points(self):
        return frozenset(range(len(self.weights)))


def uniform_space(k):
    """Returns the space with k points of weight 1/k each."""
    if k < 1:
        raise ValueError('A probability space needs at least one point')
    return FiniteProbSpace(tuple(Fraction(1, k) for _ in range(k)))


@dataclass(frozen=True)
class SetSeq(object):
    """An eventually constant sequence of sets: A_n = prefix[n] below N, tail from N on."""
    prefix: tuple
    tail: frozenset

    def __post_init__(self):
        object.__setattr__(self, 'prefix', tuple(frozenset(a) for a in self.prefix))
        object.__setattr__(self, 'tail', frozenset(self.tail))

    @property
    def stab_index(self):
        return len(self.prefix)

    def term(self, n):
        return self.prefix[n] if n < len(self.prefix) else self.tail

    def points(self):
        """Returns all points mentioned by any term."""
        result = set(self.tail)
        for a in self.prefix:
            result.update(a)
        return result


@dataclass(frozen=True)
class FuncSeq(object):
    """An eventually constant sequence of functions with values in [0, 1].

    Each function is a tuple of rationals indexed by point id.
    """
    prefix: tuple
    tail: tuple

    def __post_init__(self):
        prefix = tuple(tuple(parse_rational(v) for v in g) for g in self.prefix)
        tail = tuple(parse_rational(v) for v in self.tail)
        for g in prefix + (tail,):
            if len(g) != len(tail):
                raise ValueError('All functions must be defined on the same points')
            if any(v < 0 or v > 1 for v in g):
                raise ValueError('Function values must lie in [0, 1]')
        object.__setattr__(self, 'prefix', prefix)
        object.__setattr__(self, 'tail', tail)

    @property
    def stab_index(self):
        return len(self.prefix)

    def term(self, n):
        return self.prefix[n] if n < len(self.prefix) else self.tail


def measure(space, subset):
    """Returns the exact measure of the subset.

    :param space: the space
    :type space: FiniteProbSpace
    :param subset: collection of point ids
    :rtype: Fraction
    :raises ValueError: if a point id does not belong to the space
    """
    total = Fraction(0)
    for x in subset:
        if not 0 <= x < space.size:
            raise ValueError('Point {0} is not in a space of {1} points'.format(x, space.size))
        total += space.weights[x]
    return total


def _cap(seq, m, b):
    return min(b, max(m, seq.stab_index))


def range_union(seq, m, b):
    """Returns the union of A_n over n in [m, b]; empty if b < m.

    Terms beyond the stabilization index all equal the tail, so only the
    indices up to min(b, max(m, N)) are visited.

    :rtype: frozenset
    """
    if b < m:
        return frozenset()
    result = set()
    for n in range(m, _cap(seq, m, b) + 1):
        result.update(seq.term(n))
    return frozenset(result)


def tail_union(seq, m):
    """Returns the union of A_n over all n >= m."""
    return range_union(seq, m, max(m, seq.stab_index))


def bad_set(fs, epsilon, m, b):
    """Returns the points where two terms with indices in [m, b] differ by at least epsilon.

    :param fs: the function sequence
    :type fs: FuncSeq
    :param epsilon: positive rational
    :param m: start of the interval
    :param b: end of the interval (empty interval if b < m)
    :rtype: frozenset
    """
    epsilon = parse_rational(epsilon)
    if epsilon <= 0:
        raise ValueError('epsilon must be positive, got {0}'.format(epsilon))
    if b < m:
        return frozenset()
    terms = [fs.term(n) for n in range(m, _cap(fs, m, b) + 1)]
    result = set()
    for x in range(len(fs.tail)):
        values = [g[x] for g in terms]
        if max(values) - min(values) >= epsilon:
            result.add(x)
    return frozenset(result)


def cond1(space, seq, lam):
    """Returns the least M with mu(union of A_n, n >= M) < lambda, or None.

    Beyond the stabilization index the union is the tail, so M ranges over [0, N].
    """
    lam = parse_rational(lam)
    for m in range(seq.stab_index + 1):
        if measure(space, tail_union(seq, m)) < lam:
            return m
    return None


def _intersection(stab_index, part, beyond, answer, bound):
    """The intersection over m <= bound of part(m, answer(m)).

    Every index m > N contributes `beyond` when answer(m) >= m and the empty
    set otherwise, so only the indices up to N are visited one by one.
    """
    result = None
    for m in range(min(bound, stab_index) + 1):
        piece = part(m, answer(m))
        result = piece if result is None else result & piece
        if not result:
            return frozenset()
    if bound > stab_index:
        result &= beyond
    return result


def top_body(seq, m_bound):
    """Returns the largest possible intersection for the bound M, reached at F(m) = max(m, N)."""
    return _intersection(seq.stab_index, lambda m, b: range_union(seq, m, b), seq.tail,
                         lambda m: max(m, seq.stab_index), m_bound)


def cond2(space, seq, lam, m_bound):
    """Decides whether every F satisfies mu(intersection over m <= M of the unions over [m, F(m)]) < lambda.

    For a fixed M the intersection grows with F and F only matters up to
    max(m, N), so the single function F(m) = max(m, N) decides the statement.

    :rtype: bool
    """
    lam = parse_rational(lam)
    return measure(space, top_body(seq, m_bound)) < lam


def adversarial_witness(space, f, stab_index, part, beyond, threshold, **kwargs):
    """Searches a function F where the intersection over m <= M(F) of part(m, F(m)) has measure >= threshold.

    `part(m, b)` must be empty for b < m, grow with b, and stay constant once
    b >= max(m, N). Beyond N it must equal `beyond` for b >= m. The search
    enumerates every dialogue of `f` where the answer at a queried position p
    is 0 or lies in [p, max(p, N)], and takes F(m) = max(m, N) at all other
    positions. Capping F at max(m, N) and lowering values below m to 0 never
    makes the intersection smaller and, as f is monotone, never increases
    M(F), so this search is exhaustive.

    :param space: the space
    :param f: a monotone functional
    :param stab_index: the stabilization index N
    :param part: callable `(m, b) -> frozenset`
    :param beyond: the value of part beyond N
    :param threshold: the measure to reach
    :param kwargs: optional arguments

     - `enumeration_budget` (int): maximal number of dialogues to complete (default 10^7)

     - `query_guard` (int): the evaluation guard per dialogue

    :return: None if no such F exists, otherwise a dictionary with keys `m`
             (the value M(F)), `answers` (F at the queried positions) and
             `measure`
    :raises NonMonotoneError: if `f` is not flagged monotone
    :raises EnumerationBudgetExceeded: when the budget is exhausted before a decision
    """
    if not f.monotone:
        raise NonMonotoneError('{0} is not monotone, the enumeration would be unsound'.format(f.description))
    budget = kwargs.get('enumeration_budget', settings.get('enumeration_budget', DEFAULT_ENUMERATION_BUDGET))

    def choices(p):
        # 0 represents every value below p: all give an empty interval
        options = list(range(p, max(p, stab_index) + 1))
        if p > 0:
            options.insert(0, 0)
        return options

    count = 0
    for value, answers in explore_dialogues(f, choices, **kwargs):
        count += 1
        if count > budget:
            logging.warning('enumeration for {0} undecided after {1} dialogues'.format(f.description, budget))
            raise EnumerationBudgetExceeded('enumeration exceeded {0} dialogues'.format(budget))

        def answer(m, answers=answers):
            return answers.get(m, max(m, stab_index))

        body = _intersection(stab_index, part, beyond, answer, value)
        if any(stab_index < p <= value and a < p for p, a in answers.items()):
            body = frozenset()
        mass = measure(space, body)
        if mass >= threshold:
            return {'m': value, 'answers': dict(sorted(answers.items())), 'measure': mass}
    return None


def hypothesis_witness(space, seq, f, lam_prime, **kwargs):
    """Searches a function F with mu(intersection over m <= M(F) of the unions over [m, F(m)]) >= lambda'.

    Accepts the same optional arguments as :func:`adversarial_witness`.

    :param seq: the set sequence
    :type seq: SetSeq
    :param f: a monotone functional
    :param lam_prime: the error lambda'
    :return: None, or the witness as described in :func:`adversarial_witness`
    """
    lam_prime = parse_rational(lam_prime)
    return adversarial_witness(space, f, seq.stab_index, lambda m, b: range_union(seq, m, b), seq.tail,
                               lam_prime, **kwargs)


def hypothesis_holds(space, seq, f, lam_prime, **kwargs):
    """Decides the metastable hypothesis: for every F, mu(intersection over m <= M(F) of the unions over [m, F(m)]) < lambda'.

    Accepts the same optional arguments as :func:`hypothesis_witness`.

    :rtype: bool
    """
    return hypothesis_witness(space, seq, f, lam_prime, **kwargs) is None


def cond3(space, seq, f, lam, lam_prime, **kwargs):
    """Decides condition (3) for the given lambda' and the bound M(F) supplied by f.

    :return: True iff lambda' < lambda and the hypothesis holds for f and lambda'
    """
    lam = parse_rational(lam)
    lam_prime = parse_rational(lam_prime)
    if not lam_prime < lam:
        return False
    return hypothesis_holds(space, seq, f, lam_prime, **kwargs)


def cond3_witness(space, seq, lam):
    """Finds data for condition (3) when one exists.

    For an eventually constant sequence condition (3) holds iff mu(tail) <
    lambda: otherwise F(m) = max(m, N) keeps the whole tail in every
    intersection, and if it holds, M = N works for every F.

    :return: None, or the tuple `(lambda', functional)` with
             lambda' = (mu(tail) + lambda) / 2 and the constant functional N
    """
    lam = parse_rational(lam)
    mass = measure(space, seq.tail)
    if mass >= lam:
        return None
    return (mass + lam) / 2, constant(seq.stab_index)


def hypothesis_sufficient(space, seq, f, lam_prime, **kwargs):
    """A fast sufficient test for the hypothesis.

    With M0 = M(0), every F has M(F) >= M0, so each intersection lies inside
    the union of A_n over n >= M0. If that union is small enough the
    hypothesis holds. False negatives are possible.

    :rtype: bool
    """
    lam_prime = parse_rational(lam_prime)
    m0 = eval_total(f, lambda position: 0, **kwargs)[0]
    return measure(space, tail_union(seq, m0)) < lam_prime


def conclusion_check(space, seq, lam, m_prime):
    """Returns the least n <= M' with mu(A_n) < lambda, or None.

    :param m_prime: the bound M'
    :rtype: int
    """
    lam = parse_rational(lam)
    for n in range(min(m_prime, seq.stab_index) + 1):
        if measure(space, seq.term(n)) < lam:
            return n
    return None


def integral(space, g):
    """Returns the integral of the function g (rationals indexed by point id)."""
    if len(g) != space.size:
        raise ValueError('Function has {0} values on a space of {1} points'.format(len(g), space.size))
    return sum((w * parse_rational(v) for w, v in zip(space.weights, g)), Fraction(0))


def lp_power(space, g, p):
    """Returns the p-th power of the Lp norm of g, the integral of |g|^p.

    :param p: natural number >= 1
    :rtype: Fraction
    """
    if p < 1:
        raise ValueError('p must be at least 1, got {0}'.format(p))
    return integral(space, [abs(parse_rational(v)) ** p for v in g])


@dataclass(frozen=True)
class Instance(object):
    """A space together with a set sequence, a function sequence or both."""
    space: FiniteProbSpace
    sets: SetSeq = None
    funcs: FuncSeq = None


def _check_instance(instance):
    if instance.sets is not None:
        stray = [x for x in instance.sets.points() if not 0 <= x < instance.space.size]
        if stray:
            raise ValueError('Sets mention points {0} outside the space'.format(sorted(stray)))
    if instance.funcs is not None and len(instance.funcs.tail) != instance.space.size:
        raise ValueError('Functions are defined on {0} points, the space has {1}'.format(
            len(instance.funcs.tail), instance.space.size))


def instance_to_dict(instance):
    """Converts the instance into the JSON structure with rationals as `p/q` strings."""
    data = {'weights': [format_rational(w) for w in instance.space.weights]}
    if instance.sets is not None:
        data['sets'] = {
            'prefix': [sorted(a) for a in instance.sets.prefix],
            'tail': sorted(instance.sets.tail),
            'stab': instance.sets.stab_index,
        }
    if instance.funcs is not None:
        data['funcs'] = {
            'prefix': [[format_rational(v) for v in g] for g in instance.funcs.prefix],
            'tail': [format_rational(v) for v in instance.funcs.tail],
            'stab': instance.funcs.stab_index,
        }
    return data


def instance_from_dict(data):
    """Reads an instance from its JSON structure.

    Example of the structure::

        {"weights": ["1/3", "1/3", "1/3"],
         "sets": {"prefix": [[0], [1]], "tail": [], "stab": 2}}

    :rtype: Instance
    :raises ValueError: if the structure is malformed
    """
    try:
        space = FiniteProbSpace(tuple(data['weights']))
        sets = None
        funcs = None
        if 'sets' in data:
            entry = data['sets']
            sets = SetSeq(entry['prefix'], entry['tail'])
            if entry.get('stab', sets.stab_index) != sets.stab_index:
                raise ValueError('stab must equal the prefix length')
        if 'funcs' in data:
            entry = data['funcs']
            funcs = FuncSeq(entry['prefix'], entry['tail'])
            if entry.get('stab', funcs.stab_index) != funcs.stab_index:
                raise ValueError('stab must equal the prefix length')
    except (KeyError, TypeError) as err:
        raise ValueError('Malformed instance: {0}'.format(err))
    instance = Instance(space, sets, funcs)
    _check_instance(instance)
    return instance


def load_instance(location):
    """Loads an instance file.

    :param location: file name of the JSON instance
    :rtype: Instance
    """
    with open(location) as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as err:
            raise ValueError('Instance file {0} is not valid JSON: {1}'.format(location, err))
    return instance_from_dict(data)


def save_instance(instance, location):
    """Writes the instance as JSON to the given file."""
    with open(location, 'w') as handle:
        json.dump(instance_to_dict(instance), handle, sort_keys=True)
