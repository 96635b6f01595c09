"""This module computes the bound M' by recursion along the unsecured sequences.

The main function is :func:`compute_bound`. For a continuous functional M and
error budgets :math:`\\lambda > \\lambda' > 0` it computes N(()) where

 * N(sigma) = M(sigma-hat) when sigma is secured, and otherwise
 * N(sigma) = max(n_0, ..., n_c) with n_0 = 0, n_{i+1} = N(sigma + (n_i,)) and
   c = ceil(1 / w_m) for m = len(sigma).

The weights w_m come from a :class:`WeightSchedule`; the default one is
:math:`(\\lambda - \\lambda') / 2^{m+1}`, giving c = ceil(2^{m+1} / (lambda - lambda')).

Example:

    >>> trace = compute_bound(from_expr('F(0)+3'), Budget('1/2', '1/4'))
    >>> trace.m_prime
    24
    >>> budget = Budget('1/2', '1/4')
    >>> compute_bound(from_expr('F(0)+3'), budget, concentrated_schedule()).m_prime
    12

"""
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import settings
from .functional_dsl import GuardExceededError, probe, modulus, hat, eval_hat
from .measure_model import parse_rational, format_rational

DEFAULT_NODE_GUARD = 10 ** 6
DEFAULT_DEPTH_GUARD = 10 ** 4


class ZeroWeightError(ValueError):
    """Raised when an iteration count is requested at a depth with weight 0."""
    pass


class RecursionGuardError(GuardExceededError):
    """Raised when the recursion computes too many nodes or gets too deep."""
    pass


@dataclass(frozen=True)
class Budget(object):
    """The error budgets lambda > lambda' > 0; strings like '1/2' are accepted."""
    lam: Fraction
    lam_prime: Fraction

    def __post_init__(self):
        object.__setattr__(self, 'lam', parse_rational(self.lam))
        object.__setattr__(self, 'lam_prime', parse_rational(self.lam_prime))
        if not self.lam > self.lam_prime > 0:
            raise ValueError('Budget needs lambda > lambda\' > 0, got {0} and {1}'.format(
                self.lam, self.lam_prime))

    @property
    def gap(self):
        return self.lam - self.lam_prime


@dataclass(frozen=True)
class WeightSchedule(object):
    """Per depth error weights w_m.

    kinds:

     * `default`: w_m = (lambda - lambda') / 2^(m+1)
     * `concentrated`: w_0 = lambda - lambda', all others 0
     * `explicit`: the listed weights, 0 beyond
    """
    kind: str = 'default'
    weights: tuple = ()

    def weight(self, m, budget):
        if self.kind == 'default':
            return budget.gap / 2 ** (m + 1)
        if self.kind == 'concentrated':
            return budget.gap if m == 0 else Fraction(0)
        if self.kind == 'explicit':
            return self.weights[m] if m < len(self.weights) else Fraction(0)
        raise ValueError('Unknown schedule kind: {0}'.format(self.kind))

    def partial_sum_bound(self, budget):
        """Returns a bound on the sum of all weights."""
        if self.kind in ('default', 'concentrated'):
            return budget.gap
        return sum(self.weights, Fraction(0))

    def __str__(self):
        if self.kind == 'explicit':
            return 'explicit:' + ','.join(format_rational(w) for w in self.weights)
        return self.kind


def default_schedule():
    return WeightSchedule('default')


def concentrated_schedule():
    return WeightSchedule('concentrated')


def explicit_schedule(weights):
    """Returns the schedule with the given weights (rationals or 'p/q' strings)."""
    weights = tuple(parse_rational(w) for w in weights)
    if any(w < 0 for w in weights):
        raise ValueError('Schedule weights must be nonnegative')
    return WeightSchedule('explicit', weights)


def load_schedule(location):
    """Loads a schedule from a JSON file.

    The file either names a kind, `{"kind": "concentrated"}`, or lists the
    weights, `{"weights": ["1/8", "1/16"]}`.

    :param location: the file name
    :rtype: WeightSchedule
    """
    with open(location) as handle:
        data = json.load(handle)
    if 'weights' in data:
        return explicit_schedule(data['weights'])
    return schedule_by_name(data.get('kind', 'default'))


def schedule_by_name(name):
    """Resolves `default`, `concentrated` or a JSON file name to a schedule."""
    if name == 'default':
        return default_schedule()
    if name == 'concentrated':
        return concentrated_schedule()
    return load_schedule(name)


def validate_schedule(schedule, budget):
    """Raises a ValueError when the weights sum to more than lambda - lambda'."""
    total = schedule.partial_sum_bound(budget)
    if total > budget.gap:
        raise ValueError('Schedule weights sum to {0}, more than lambda - lambda\' = {1}'.format(
            total, budget.gap))


def iteration_count(m_bar, budget, schedule=None):
    """Returns the number of chain steps ceil(1 / w_m) at an unsecured node of depth `m_bar`.

    :param m_bar: the depth, i.e. the length of the unsecured sequence
    :param budget: the error budgets
    :type budget: Budget
    :param schedule: the weight schedule (default schedule if not given)
    :return: the count, equal to ceil(2^(m+1) / (lambda - lambda')) for the default schedule
    :rtype: int
    :raises ZeroWeightError: if the weight at that depth is 0
    """
    schedule = schedule or default_schedule()
    weight = schedule.weight(m_bar, budget)
    if weight <= 0:
        raise ZeroWeightError('Schedule {0} has weight 0 at depth {1}'.format(schedule, m_bar))
    return math.ceil(1 / weight)


@dataclass(frozen=True)
class NodeRecord(object):
    """One node of the recursion.

    For unsecured nodes `children` holds n_0 = 0, n_1, ... as computed; if the
    chain hit a value it had before, `fixed_from` is the index of that value,
    the list stops there and all further values repeat earlier ones.
    """
    sigma: tuple
    secured: bool
    value: int
    iteration_count: int = None
    children: tuple = ()
    fixed_from: int = None


@dataclass(frozen=True)
class BoundTrace(object):
    m_prime: int
    nodes: tuple
    nodes_visited: int
    max_depth: int
    description: str = ''
    budget: Budget = None
    schedule: WeightSchedule = field(default_factory=default_schedule)
    tree: str = 'dialogue'
    modulus: str = ''

    def node(self, sigma):
        """Returns the record of the given node or None."""
        sigma = tuple(sigma)
        for record in self.nodes:
            if record.sigma == sigma:
                return record
        return None


class _Frame(object):

    def __init__(self, sigma, count):
        self.sigma = sigma
        self.count = count
        self.chain = [0]
        self.sizes = []
        self.seen = {0: 0}
        self.size = 1
        self.fixed_from = None

    def accept(self, value, size):
        """Takes the next chain value and returns the next child, or None when done."""
        self.chain.append(value)
        self.sizes.append(size)
        self.size += size
        calls = len(self.sizes)
        if calls == self.count:
            return None
        earlier = self.seen.get(value)
        if earlier is not None:
            # n_calls = n_earlier, so the calls earlier+1 .. calls repeat periodically
            period = self.sizes[earlier:]
            whole, part = divmod(self.count - calls, len(period))
            self.size += whole * sum(period) + sum(period[:part])
            self.fixed_from = calls
            return None
        self.seen[value] = calls
        return self.sigma + (value,)


class _BarRecursion(object):

    def __init__(self, f, budget, schedule, tree, **kwargs):
        self.f = f
        self.k = kwargs.pop('modulus', None)
        if tree not in ('dialogue', 'modulus'):
            raise ValueError('Unknown tree: {0}'.format(tree))
        if tree == 'modulus' and self.k is None:
            raise ValueError('The modulus tree needs a modulus functional')
        self.k_values = {}
        self.budget = budget
        self.schedule = schedule
        self.tree = tree
        self.kwargs = kwargs
        self.node_guard = kwargs.get('node_guard', settings.get('node_guard', DEFAULT_NODE_GUARD))
        self.depth_guard = kwargs.get('depth_guard', settings.get('depth_guard', DEFAULT_DEPTH_GUARD))
        self.memo = {}
        self.records = []
        self.max_depth = 0

    def _secured(self, sigma):
        value, secured, _ = probe(self.f, sigma, **self.kwargs)
        if self.tree == 'modulus':
            # leaves of {sigma : k(tau^) >= len(tau) for every prefix tau}
            leaf = any(self._k(sigma[:length]) < length for length in range(len(sigma) + 1))
            if leaf and modulus(self.f, hat(sigma), **self.kwargs) >= len(sigma):
                raise ValueError('{0} is not a modulus of continuity of {1} at {2}'.format(
                    self.k.description, self.f.description, sigma))
            secured = leaf
        return value, secured

    def _k(self, tau):
        value = self.k_values.get(tau)
        if value is None:
            value = eval_hat(self.k, tau, **self.kwargs)
            self.k_values[tau] = value
        return value

    def _open(self, sigma):
        if len(self.records) >= self.node_guard:
            raise RecursionGuardError('bar recursion exceeded {0} nodes'.format(self.node_guard))
        if len(sigma) > self.depth_guard:
            raise RecursionGuardError('bar recursion exceeded depth {0}'.format(self.depth_guard))
        self.max_depth = max(self.max_depth, len(sigma))
        value, secured = self._secured(sigma)
        if secured:
            self.records.append(NodeRecord(sigma, True, value))
            self.memo[sigma] = (value, 1)
            return None
        return _Frame(sigma, iteration_count(len(sigma), self.budget, self.schedule))

    def _close(self, frame):
        value = max(frame.chain)
        self.records.append(NodeRecord(frame.sigma, False, value, frame.count, tuple(frame.chain),
                                       frame.fixed_from))
        self.memo[frame.sigma] = (value, frame.size)
        logging.debug('N({0}) = {1}'.format(frame.sigma, value))
        return value, frame.size

    def solve(self, root):
        stack = []
        pending = tuple(root)
        while True:
            if pending is not None:
                result = self.memo.get(pending)
                if result is None:
                    frame = self._open(pending)
                    if frame is not None:
                        stack.append(frame)
                        pending = frame.sigma + (0,)
                        continue
                    result = self.memo[pending]
            if not stack:
                return result
            pending = stack[-1].accept(*result)
            if pending is None:
                result = self._close(stack.pop())


def n_sigma(f, sigma, budget, schedule=None, **kwargs):
    """Returns N(sigma) of the bar recursion.

    :param f: the continuous functional
    :type f: Functional
    :param sigma: the finite sequence
    :param budget: the error budgets
    :type budget: Budget
    :param schedule: the weight schedule (default schedule if not given)
    :param kwargs: optional arguments

     - `node_guard` (int): maximal number of distinct nodes to compute (default 10^6)

     - `depth_guard` (int): maximal sequence length (default 10^4)

     - `tree` (str): `dialogue` (default) or `modulus`, the well-founded tree to recurse on

     - `modulus` (Functional): the modulus of continuity k of `f` spanning the `modulus` tree,
       whose leaves are the sequences with a prefix tau such that k(tau^) < len(tau)

     - `query_guard` (int): the evaluation guard per node

    :rtype: int
    :raises ZeroWeightError: when an unsecured node sits at a depth of weight 0
    :raises RecursionGuardError: when a guard is exceeded
    """
    schedule = schedule or default_schedule()
    validate_schedule(schedule, budget)
    tree = kwargs.pop('tree', 'dialogue')
    return _BarRecursion(f, budget, schedule, tree, **kwargs).solve(tuple(sigma))[0]


def compute_bound(f, budget, schedule=None, **kwargs):
    """Computes the bound M' = N(()) together with the full recursion record.

    Accepts the same optional arguments as :func:`n_sigma`.

    :param f: the continuous functional
    :type f: Functional
    :param budget: the error budgets
    :type budget: Budget
    :param schedule: the weight schedule (default schedule if not given)
    :rtype: BoundTrace
    """
    schedule = schedule or default_schedule()
    validate_schedule(schedule, budget)
    tree = kwargs.pop('tree', 'dialogue')
    recursion = _BarRecursion(f, budget, schedule, tree, **kwargs)
    value, size = recursion.solve(())
    logging.info('M\' = {0} for {1} after {2} nodes'.format(value, f.description, len(recursion.records)))
    return BoundTrace(value, tuple(recursion.records), size, recursion.max_depth,
                      f.description, budget, schedule, tree,
                      recursion.k.description if recursion.k is not None else '')


def trace_to_dict(trace):
    """Converts the trace into a JSON serializable dictionary.

    Rationals are written as 'p/q' strings, nodes are sorted by sequence.
    """
    nodes = []
    for record in sorted(trace.nodes, key=lambda r: (len(r.sigma), r.sigma)):
        entry = {
            'sigma': list(record.sigma),
            'secured': record.secured,
            'value': record.value,
        }
        if not record.secured:
            entry['iteration_count'] = record.iteration_count
            entry['children'] = list(record.children)
            entry['fixed_from'] = record.fixed_from
        nodes.append(entry)
    return {
        'expr': trace.description,
        'lambda': format_rational(trace.budget.lam) if trace.budget else None,
        'lambda_prime': format_rational(trace.budget.lam_prime) if trace.budget else None,
        'schedule': str(trace.schedule),
        'tree': trace.tree,
        'modulus': trace.modulus,
        'm_prime': trace.m_prime,
        'nodes_visited': trace.nodes_visited,
        'max_depth': trace.max_depth,
        'nodes': nodes,
    }


def trace_to_json(trace, indent=None):
    return json.dumps(trace_to_dict(trace), indent=indent, sort_keys=True)
