"""This module classifies sequences of functions by their mode of convergence.

The four modes are

 * `ae`: pointwise convergence almost everywhere,
 * `au`: almost uniform convergence,
 * `aum`: almost uniform metastable pointwise convergence, and
 * `aum_prime`: its variant measured against a fixed limit f,

with AU -> AUM' -> AUM -> AE. On a finite probability space the four coincide
(:func:`classify_finite`). To see that none of the implications reverses,
:class:`SymbolicFamily` provides three families on the natural numbers with
counting measure, the discrete versions of the indicator functions of
[n, n+1] and [n, oo) on the real line. Their bad sets are known in closed form
as :class:`Region` values (a finite set plus possibly a final segment), and
each claim is backed by a :class:`Certificate` that is checked against direct
evaluation on a finite window.

Example:

    >>> report = classify_family(SymbolicFamily.tail_indicator, '1/2', 1, 20)
    >>> report.aum, report.aum_prime
    ('holds', 'fails')

"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .functional_dsl import eval_total, from_expr, parse_oracle
from .measure_model import parse_rational, format_rational, bad_set, measure, Instance

HOLDS = 'holds'
FAILS = 'fails'
FINITE = 'holds-on-finite-model'

MODES = ('ae', 'au', 'aum', 'aum_prime')

# the functions F a positive certificate is checked against
CERTIFICATE_ORACLES = ('id', 'succ', 'shift:3', 'double', 'const:0', 'const:2', 'table:4,1,9,2')


@dataclass(frozen=True)
class Region(object):
    """A set of naturals of the form `finite` union [start, oo); `start` None means no final segment."""
    finite: frozenset = frozenset()
    start: int = None

    def __post_init__(self):
        finite = frozenset(self.finite)
        if self.start is not None:
            finite = frozenset(x for x in finite if x < self.start)
        object.__setattr__(self, 'finite', finite)

    def union(self, other):
        starts = [s for s in (self.start, other.start) if s is not None]
        return Region(self.finite | other.finite, min(starts) if starts else None)

    def intersection(self, other):
        finite = self.finite & other.finite
        if other.start is not None:
            finite |= {x for x in self.finite if x >= other.start}
        if self.start is not None:
            finite |= {x for x in other.finite if x >= self.start}
        start = None
        if self.start is not None and other.start is not None:
            start = max(self.start, other.start)
        return Region(finite, start)

    def restrict(self, window):
        """Returns the members up to and including `window`."""
        result = {x for x in self.finite if x <= window}
        if self.start is not None:
            result.update(range(self.start, window + 1))
        return frozenset(result)

    def measure(self):
        """Returns the counting measure, `math.inf` for infinite regions."""
        return math.inf if self.start is not None else len(self.finite)

    def __str__(self):
        parts = [str(x) for x in sorted(self.finite)]
        if self.start is not None:
            parts.append('{0}..'.format(self.start))
        return '{' + ','.join(parts) + '}'


EMPTY = Region()


def _format_measure(value):
    return 'inf' if value == math.inf else format_rational(value)


class SymbolicFamily(Enum):
    """The three sequences on the naturals with counting measure.

     * `shift_indicator`: f_n(x) = 1 if x = n, else 0
     * `tail_indicator`: h_n(x) = 1 if x >= n, else 0
     * `alt_tail`: g_n(x) = (-1)^n if x >= n, else 0

    All three converge pointwise to 0.
    """
    shift_indicator = 'shift_indicator'
    tail_indicator = 'tail_indicator'
    alt_tail = 'alt_tail'

    def at(self, n, x):
        if self is SymbolicFamily.shift_indicator:
            return 1 if x == n else 0
        if self is SymbolicFamily.tail_indicator:
            return 1 if x >= n else 0
        return (-1) ** n if x >= n else 0

    def deviation(self, n, n2, epsilon):
        """Returns {x : |f_n(x) - f_n2(x)| >= eps} in closed form (0 < eps <= 1)."""
        if n == n2:
            return EMPTY
        low, high = min(n, n2), max(n, n2)
        if self is SymbolicFamily.shift_indicator:
            return Region({n, n2})
        if self is SymbolicFamily.tail_indicator:
            return Region(range(low, high))
        # beyond both indices the values differ by 2 when the parities differ
        return Region(range(low, high), high if (n - n2) % 2 else None)

    def limit_deviation(self, n, epsilon):
        """Returns {x : |f_n(x) - 0| >= eps} in closed form (0 < eps <= 1)."""
        if self is SymbolicFamily.shift_indicator:
            return Region({n})
        return Region((), n)


def _check_arguments(epsilon, lam, window):
    epsilon = parse_rational(epsilon)
    lam = parse_rational(lam)
    if not 0 < epsilon <= 1:
        raise ValueError('epsilon must lie in (0, 1], got {0}'.format(epsilon))
    if lam <= 0:
        raise ValueError('lambda must be positive, got {0}'.format(lam))
    if window < 1:
        raise ValueError('window must be positive, got {0}'.format(window))
    return epsilon, lam


def direct_deviation(family, n, n2, epsilon, window):
    """Evaluates {x <= window : |f_n(x) - f_n2(x)| >= eps} point by point."""
    return frozenset(x for x in range(window + 1)
                     if abs(family.at(n, x) - family.at(n2, x)) >= epsilon)


def check_closed_forms(family, epsilon, window):
    """Compares the closed form deviation sets with direct evaluation for all n, n' <= window.

    :return: list of the pairs `(n, n')` where the two disagree
    """
    epsilon = parse_rational(epsilon)
    mismatches = []
    for n, n2 in itertools.product(range(window + 1), repeat=2):
        if family.deviation(n, n2, epsilon).restrict(window) != direct_deviation(family, n, n2, epsilon, window):
            mismatches.append((n, n2))
    for n in range(window + 1):
        direct = frozenset(x for x in range(window + 1) if abs(family.at(n, x)) >= epsilon)
        if family.limit_deviation(n, epsilon).restrict(window) != direct:
            mismatches.append((n, None))
    if mismatches:
        logging.error('closed forms of {0} disagree on {1}'.format(family.value, mismatches[:5]))
    return mismatches


@dataclass(frozen=True)
class Certificate(object):
    """The evidence for one mode of one subject.

    `witness` is the index or bound expression used, `oracle` the function F
    of a failure, `limit` the limit function for `aum_prime`, and `checks`
    lists `(index, measure)` pairs computed on the window.
    """
    subject: str
    mode: str
    status: str
    epsilon: Fraction
    lam: Fraction
    window: int
    basis: str = ''
    witness: str = None
    oracle: str = None
    limit: str = None
    checks: tuple = ()
    instance: Instance = field(default=None, repr=False, compare=False)

    def to_dict(self):
        data = {
            'mode': self.mode,
            'status': self.status,
            'basis': self.basis,
            'checks': [[index, value] for index, value in self.checks],
        }
        for key in ('witness', 'oracle', 'limit'):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        return data


@dataclass(frozen=True)
class ModeReport(object):
    subject: str
    epsilon: Fraction
    lam: Fraction
    window: int
    ae: str
    au: str
    aum: str
    aum_prime: str
    certificates: dict = field(default_factory=dict, compare=False)

    def status(self, mode):
        return getattr(self, mode)

    def holds(self, mode):
        return self.status(mode) in (HOLDS, FINITE)

    def to_dict(self):
        return {
            'family': self.subject,
            'epsilon': format_rational(self.epsilon),
            'lambda': format_rational(self.lam),
            'window': self.window,
            'ae': self.ae,
            'au': self.au,
            'aum': self.aum,
            'aum_prime': self.aum_prime,
            'certificates': {mode: self.certificates[mode].to_dict()
                             for mode in MODES if mode in self.certificates},
        }


def _union_over(pairs, deviation):
    result = EMPTY
    for pair in pairs:
        result = result.union(deviation(*pair))
    return result


def _cauchy_region(family, epsilon, m, b):
    """The closed form of the union over n, n' in [m, b] of the deviation sets."""
    return _union_over(itertools.product(range(m, b + 1), repeat=2),
                       lambda n, n2: family.deviation(n, n2, epsilon))


def _limit_region(family, epsilon, m, b):
    return _union_over(((n,) for n in range(m, b + 1)), lambda n: family.limit_deviation(n, epsilon))


def _metastable_region(region, oracle, bound):
    """The intersection over m <= bound of region(m, F(m))."""
    result = None
    for m in range(bound + 1):
        part = region(m, oracle(m))
        result = part if result is None else result.intersection(part)
    return result


def _direct_metastable(family, epsilon, oracle, bound, window, limit):
    result = None
    for m in range(bound + 1):
        part = set()
        indices = range(m, oracle(m) + 1)
        for x in range(window + 1):
            if limit:
                hit = any(abs(family.at(n, x)) >= epsilon for n in indices)
            else:
                hit = any(abs(family.at(n, x) - family.at(n2, x)) >= epsilon
                          for n, n2 in itertools.product(indices, repeat=2))
            if hit:
                part.add(x)
        result = part if result is None else result & part
    return frozenset(result)


# bound expressions M(F) that make the metastable bad sets empty
_AUM_WITNESS = {
    SymbolicFamily.shift_indicator: 'F(0)+1',
    SymbolicFamily.tail_indicator: 'F(0)',
}
_AUM_PRIME_WITNESS = {
    SymbolicFamily.shift_indicator: 'F(0)+1',
}
# functions F defeating every bound
_AUM_COUNTER = {
    SymbolicFamily.alt_tail: 'succ',
}
_AUM_PRIME_COUNTER = {
    SymbolicFamily.tail_indicator: 'id',
    SymbolicFamily.alt_tail: 'id',
}


def _ae_certificate(family, epsilon, lam, window):
    # from x+1 on every term vanishes at x
    checks = []
    for x in range(window + 1):
        values = [family.at(n, x) for n in range(x + 1, window + 2)]
        checks.append((x, format_rational(max(values) - min(values))))
    return Certificate(family.value, 'ae', HOLDS, epsilon, lam, window,
                       basis='f_n(x) = 0 for n > x', witness='x+1', checks=tuple(checks))


def _au_certificate(family, epsilon, lam, window):
    checks = []
    for m in range(window + 1):
        region = Region((), m)
        checks.append((m, _format_measure(region.measure())))
    return Certificate(family.value, 'au', FAILS, epsilon, lam, window,
                       basis='the bad set from m is [m, oo) for every m', checks=tuple(checks))


def _positive_certificate(family, mode, epsilon, lam, window, witness):
    limit = mode == 'aum_prime'
    region = (lambda m, b: _limit_region(family, epsilon, m, b)) if limit else \
        (lambda m, b: _cauchy_region(family, epsilon, m, b))
    bound_functional = from_expr(witness)
    checks = []
    for text in CERTIFICATE_ORACLES:
        oracle = parse_oracle(text)
        bound = eval_total(bound_functional, oracle)[0]
        closed = _metastable_region(region, oracle, bound)
        checks.append((text, _format_measure(closed.measure())))
    return Certificate(family.value, mode, HOLDS, epsilon, lam, window,
                       basis='M(F) = {0} empties the bad set'.format(witness), witness=witness,
                       limit='0' if limit else None, checks=tuple(checks))


def _negative_certificate(family, mode, epsilon, lam, window, counter):
    limit = mode == 'aum_prime'
    region = (lambda m, b: _limit_region(family, epsilon, m, b)) if limit else \
        (lambda m, b: _cauchy_region(family, epsilon, m, b))
    oracle = parse_oracle(counter)
    checks = []
    for bound in range(window + 1):
        closed = _metastable_region(region, oracle, bound)
        checks.append((bound, _format_measure(closed.measure())))
    return Certificate(family.value, mode, FAILS, epsilon, lam, window,
                       basis='F = {0} keeps an infinite bad set for every M'.format(counter),
                       oracle=counter, limit='0' if limit else None, checks=tuple(checks))


def classify_family(family, epsilon, lam, window, **kwargs):
    """Classifies one of the symbolic families with certificates checked on [0, window].

    The results are

     * `shift_indicator`: AE, AUM and AUM' hold, AU fails
     * `tail_indicator`: AE and AUM hold, AU and AUM' fail
     * `alt_tail`: only AE holds

    :param family: the family
    :type family: SymbolicFamily
    :param epsilon: rational in (0, 1]
    :param lam: positive rational
    :param window: positive natural, the range of points and indices checked
    :rtype: ModeReport
    :raises ValueError: for a window of 0 or epsilon outside (0, 1]
    """
    if not isinstance(family, SymbolicFamily):
        family = SymbolicFamily(family)
    epsilon, lam = _check_arguments(epsilon, lam, window)
    certificates = {
        'ae': _ae_certificate(family, epsilon, lam, window),
        'au': _au_certificate(family, epsilon, lam, window),
    }
    for mode, witnesses, counters in (('aum', _AUM_WITNESS, _AUM_COUNTER),
                                      ('aum_prime', _AUM_PRIME_WITNESS, _AUM_PRIME_COUNTER)):
        if family in witnesses:
            certificates[mode] = _positive_certificate(family, mode, epsilon, lam, window, witnesses[family])
        else:
            certificates[mode] = _negative_certificate(family, mode, epsilon, lam, window, counters[family])
    for certificate in certificates.values():
        if not verify_certificate(certificate):
            logging.error('certificate for {0} of {1} does not verify'.format(certificate.mode, family.value))
            raise RuntimeError('certificate for {0} of {1} does not verify'.format(
                certificate.mode, family.value))
    return ModeReport(family.value, epsilon, lam, window,
                      *(certificates[mode].status for mode in MODES), certificates=certificates)


def classify_finite(space, fs, epsilon, lam, **kwargs):
    """Classifies an eventually constant sequence on a finite probability space.

    All four modes hold: every point converges from the stabilization index N
    on, so the bad set of AU from N is empty and the constant bound M(F) = N
    serves AUM and, with the tail as limit, AUM'.

    :param space: the space
    :param fs: the function sequence
    :type fs: FuncSeq
    :param epsilon: positive rational
    :param lam: positive rational
    :rtype: ModeReport
    """
    epsilon = parse_rational(epsilon)
    lam = parse_rational(lam)
    if epsilon <= 0 or lam <= 0:
        raise ValueError('epsilon and lambda must be positive')
    n = fs.stab_index
    instance = Instance(space, funcs=fs)

    ae_checks = []
    for x in range(space.size):
        witness = next(m for m in range(n + 1) if x not in bad_set(fs, epsilon, m, n))
        ae_checks.append((x, witness))
    au_checks = []
    au_index = None
    for m in range(n + 1):
        mass = measure(space, bad_set(fs, epsilon, m, max(m, n)))
        au_checks.append((m, format_rational(mass)))
        if mass < lam:
            au_index = m
            break
    metastable_checks = []
    for text in CERTIFICATE_ORACLES:
        oracle = parse_oracle(text)
        mass = measure(space, bad_set(fs, epsilon, n, oracle(n)))
        metastable_checks.append((text, format_rational(mass)))
    limit_mass = measure(space, _limit_bad_set(fs, epsilon, n))

    certificates = {
        'ae': Certificate('finite', 'ae', FINITE, epsilon, lam, 0, basis='per point witness',
                          checks=tuple(ae_checks), instance=instance),
        'au': Certificate('finite', 'au', FINITE if au_index is not None else FAILS, epsilon, lam, 0,
                          basis='least m with a small bad set', witness=str(au_index),
                          checks=tuple(au_checks), instance=instance),
        'aum': Certificate('finite', 'aum', FINITE, epsilon, lam, 0, basis='constant bound',
                           witness=str(n), checks=tuple(metastable_checks), instance=instance),
        'aum_prime': Certificate('finite', 'aum_prime', FINITE if limit_mass < lam else FAILS, epsilon, lam, 0,
                                 basis='constant bound', witness=str(n), limit='tail',
                                 checks=((n, format_rational(limit_mass)),), instance=instance),
    }
    statuses = {certificates[mode].status for mode in MODES}
    if statuses != {FINITE}:
        logging.error('modes do not coincide on a finite model: {0}'.format(statuses))
    return ModeReport('finite', epsilon, lam, 0, *(certificates[mode].status for mode in MODES),
                      certificates=certificates)


def _limit_bad_set(fs, epsilon, m):
    limit = fs.tail
    return frozenset(x for x in range(len(limit)) if abs(fs.term(m)[x] - limit[x]) >= epsilon)


def _verify_finite(certificate):
    instance = certificate.instance
    if instance is None:
        return False
    report = classify_finite(instance.space, instance.funcs, certificate.epsilon, certificate.lam)
    return report.certificates[certificate.mode] == certificate


def verify_certificate(certificate):
    """Checks the certificate again.

    For the symbolic families the closed form bad sets are recomputed, their
    measures compared against lambda, and every set is compared with direct
    evaluation on the window. Certificates of finite models are checked by
    classifying the model again.

    :rtype: bool
    """
    if certificate.subject == 'finite':
        return _verify_finite(certificate)
    family = SymbolicFamily(certificate.subject)
    epsilon, lam, window = certificate.epsilon, certificate.lam, certificate.window
    if check_closed_forms(family, epsilon, window):
        return False
    limit = certificate.mode == 'aum_prime'
    region = (lambda m, b: _limit_region(family, epsilon, m, b)) if limit else \
        (lambda m, b: _cauchy_region(family, epsilon, m, b))

    if certificate.mode == 'ae':
        return all(family.at(n, x) == 0 for x in range(window + 1) for n in range(x + 1, window + 2))

    if certificate.mode == 'au':
        for m in range(window + 1):
            # indices up to window + 1 already cover [m, window]
            closed = Region((), m)
            direct = _cauchy_region(family, epsilon, m, window + 1).restrict(window)
            if closed.restrict(window) != direct or closed.measure() < lam:
                return False
        return certificate.status == FAILS

    if certificate.status == HOLDS:
        functional = from_expr(certificate.witness)
        for text in CERTIFICATE_ORACLES:
            oracle = parse_oracle(text)
            bound = eval_total(functional, oracle)[0]
            closed = _metastable_region(region, oracle, bound)
            direct = _direct_metastable(family, epsilon, oracle, bound, window, limit)
            if closed.restrict(window) != direct or not closed.measure() < lam:
                return False
        return True

    oracle = parse_oracle(certificate.oracle)
    for bound in range(window + 1):
        closed = _metastable_region(region, oracle, bound)
        direct = _direct_metastable(family, epsilon, oracle, bound, window, limit)
        if closed.restrict(window) != direct or closed.measure() < lam:
            return False
    return True


# (stronger, weaker) pairs of the implication chain
CHAIN = (('au', 'aum_prime'), ('aum_prime', 'aum'), ('aum', 'ae'))


@dataclass(frozen=True)
class ImplicationVerdict(object):
    ok: bool
    violations: tuple
    gaps: dict


def implication_suite(reports, require_gaps=True):
    """Checks AU -> AUM' -> AUM -> AE on every report and collects the witnesses that no arrow reverses.

    :param reports: the mode reports
    :param require_gaps: whether every arrow needs a witness against its reversal
    :return: the verdict; `violations` lists `(subject, stronger, weaker)`,
             `gaps` maps each arrow to the subjects where the weaker mode
             holds and the stronger fails
    :rtype: ImplicationVerdict
    """
    violations = []
    gaps = {pair: [] for pair in CHAIN}
    for report in reports:
        for stronger, weaker in CHAIN:
            if report.holds(stronger) and not report.holds(weaker):
                logging.error('{0}: {1} holds but {2} does not'.format(report.subject, stronger, weaker))
                violations.append((report.subject, stronger, weaker))
            if report.holds(weaker) and not report.holds(stronger):
                gaps[(stronger, weaker)].append(report.subject)
    ok = not violations
    if require_gaps and not all(gaps.values()):
        logging.warning('unwitnessed reversals: {0}'.format([pair for pair, found in gaps.items() if not found]))
        ok = False
    return ImplicationVerdict(ok, tuple(violations), gaps)
