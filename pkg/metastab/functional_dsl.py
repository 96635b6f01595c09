"""This module hosts the continuous functionals the bounds are computed from.

A functional :math:`M : (\\mathbb{N} \\to \\mathbb{N}) \\to \\mathbb{N}` is evaluated
by asking an oracle for values of :math:`F` at positions, and every position asked
for is logged. From the log we get continuity for free: the value only depends on
the queried positions. The concrete source of functionals is a tiny expression
language:

    expr   := term | expr "+" term
    term   := factor | term "*" factor
    factor := nat | "F" "(" expr ")" | "max" "(" expr "," expr ")"
            | "iter" "(" nat "," expr ")" | "(" expr ")"

Example:

    >>> f = from_expr(parse_expr('F(F(0))'))
    >>> eval_total(f, lambda m: 2 * m + 2)
    (6, frozenset({0, 2}))
    >>> eval_hat(f, (2, 9, 4))
    4
    >>> is_secured(f, (2,))
    False

"""
import logging
import re
from dataclasses import dataclass

from . import settings

DEFAULT_QUERY_GUARD = 10 ** 6

# python refuses to convert longer decimal strings by default
MAX_LITERAL_DIGITS = 4300

# parentheses and applications, each costing a few interpreter frames when walked
MAX_NESTING = 100
MAX_DEPTH = 250


class ParseError(ValueError):
    """Raised when a DSL text does not conform to the grammar."""

    def __init__(self, message, position):
        super(ParseError, self).__init__('{0} at position {1}'.format(message, position))
        self.position = position


class GuardExceededError(RuntimeError):
    """Raised when an evaluation takes more steps than its guard allows."""
    pass


@dataclass(frozen=True)
class Const(object):
    k: int


@dataclass(frozen=True)
class Apply(object):
    """F(arg)"""
    arg: object


@dataclass(frozen=True)
class Add(object):
    left: object
    right: object


@dataclass(frozen=True)
class Mul(object):
    left: object
    right: object


@dataclass(frozen=True)
class Max(object):
    left: object
    right: object


@dataclass(frozen=True)
class Iter(object):
    """F applied k times to arg"""
    k: int
    arg: object


_TOKEN = re.compile(r'(\d+)|(max|iter|F)|(.)')


def _tokenize(text):
    tokens = []
    position = 0
    while True:
        while position < len(text) and text[position].isspace():
            position += 1
        if position >= len(text):
            break
        match = _TOKEN.match(text, position)
        if match.group(1) is not None:
            if len(match.group(1)) > MAX_LITERAL_DIGITS:
                raise ParseError('natural literal overflow', position)
            tokens.append(('nat', int(match.group(1)), position))
        elif match.group(2) is not None:
            tokens.append((match.group(2), match.group(2), position))
        elif match.group(3) in ('+', '*', '(', ')', ','):
            tokens.append((match.group(3), match.group(3), position))
        else:
            raise ParseError("unexpected character '{0}'".format(match.group(3)), position)
        position = match.end(0)
    tokens.append(('end', None, len(text)))
    return tokens


class _Parser(object):

    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.index = 0
        self.nesting = 0

    def peek(self):
        return self.tokens[self.index]

    def take(self, kind):
        token = self.tokens[self.index]
        if token[0] != kind:
            found = 'end of input' if token[0] == 'end' else "'{0}'".format(token[1])
            raise ParseError("expected '{0}' but found {1}".format(kind, found), token[2])
        self.index += 1
        return token

    def expr(self):
        node = self.term()
        while self.peek()[0] == '+':
            self.take('+')
            node = Add(node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == '*':
            self.take('*')
            node = Mul(node, self.factor())
        return node

    def factor(self):
        kind, value, position = self.peek()
        if kind == 'nat':
            self.take('nat')
            return Const(value)
        if kind in ('F', 'max', 'iter', '('):
            self.nesting += 1
            if self.nesting > MAX_NESTING:
                raise ParseError('expression nested deeper than {0}'.format(MAX_NESTING), position)
            node = self.compound(kind)
            self.nesting -= 1
            return node
        found = 'end of input' if kind == 'end' else "'{0}'".format(value)
        raise ParseError('expected a factor but found {0}'.format(found), position)

    def compound(self, kind):
        if kind == 'F':
            self.take('F')
            self.take('(')
            arg = self.expr()
            self.take(')')
            return Apply(arg)
        if kind == 'max':
            self.take('max')
            self.take('(')
            left = self.expr()
            self.take(',')
            right = self.expr()
            self.take(')')
            return Max(left, right)
        if kind == 'iter':
            self.take('iter')
            self.take('(')
            count = self.take('nat')[1]
            self.take(',')
            arg = self.expr()
            self.take(')')
            return Iter(count, arg)
        self.take('(')
        node = self.expr()
        self.take(')')
        return node


def parse_expr(text):
    """Parses the given text into an expression tree.

    :param text: the expression, e.g. `F(F(0))+1`
    :type text: str
    :return: the syntax tree
    :raises ParseError: when the text does not conform to the grammar or nests too deeply
    """
    parser = _Parser(text)
    node = parser.expr()
    parser.take('end')
    if expr_depth(node) > MAX_DEPTH:
        raise ParseError('expression deeper than {0}'.format(MAX_DEPTH), 0)
    return node


def format_expr(expr):
    """Prints the expression in the canonical form accepted by :func:`parse_expr`.

    :param expr: the expression tree
    :return: the text, such that `parse_expr(format_expr(e)) == e`
    :rtype: str
    """
    if isinstance(expr, Const):
        return str(expr.k)
    if isinstance(expr, Apply):
        return 'F({0})'.format(format_expr(expr.arg))
    if isinstance(expr, Max):
        return 'max({0},{1})'.format(format_expr(expr.left), format_expr(expr.right))
    if isinstance(expr, Iter):
        return 'iter({0},{1})'.format(expr.k, format_expr(expr.arg))
    if isinstance(expr, Add):
        right = format_expr(expr.right)
        if isinstance(expr.right, Add):
            right = '(' + right + ')'
        return '{0}+{1}'.format(format_expr(expr.left), right)
    if isinstance(expr, Mul):
        left = format_expr(expr.left)
        if isinstance(expr.left, Add):
            left = '(' + left + ')'
        right = format_expr(expr.right)
        if isinstance(expr.right, (Add, Mul)):
            right = '(' + right + ')'
        return '{0}*{1}'.format(left, right)
    raise ValueError('Not an expression: {0!r}'.format(expr))


def _children(expr):
    if isinstance(expr, Const):
        return ()
    if isinstance(expr, (Apply, Iter)):
        return (expr.arg,)
    return (expr.left, expr.right)


def expr_depth(expr):
    depth = 0
    stack = [(expr, 0)]
    while stack:
        node, level = stack.pop()
        depth = max(depth, level)
        stack.extend((child, level + 1) for child in _children(node))
    return depth


class _Dialogue(object):
    """Answers queries from an oracle, logging the positions and counting steps."""

    def __init__(self, oracle, guard):
        self.oracle = oracle
        self.guard = guard
        self.steps = 0
        self.positions = set()

    def tick(self):
        self.steps += 1
        if self.steps > self.guard:
            raise GuardExceededError('evaluation exceeded {0} steps'.format(self.guard))

    def ask(self, position):
        self.tick()
        self.positions.add(position)
        return self.oracle(position)


def _eval_expr(expr, dialogue):
    dialogue.tick()
    if isinstance(expr, Const):
        return expr.k
    if isinstance(expr, Apply):
        return dialogue.ask(_eval_expr(expr.arg, dialogue))
    if isinstance(expr, Add):
        return _eval_expr(expr.left, dialogue) + _eval_expr(expr.right, dialogue)
    if isinstance(expr, Mul):
        return _eval_expr(expr.left, dialogue) * _eval_expr(expr.right, dialogue)
    if isinstance(expr, Max):
        return max(_eval_expr(expr.left, dialogue), _eval_expr(expr.right, dialogue))
    if isinstance(expr, Iter):
        value = _eval_expr(expr.arg, dialogue)
        for _ in range(expr.k):
            value = dialogue.ask(value)
        return value
    raise ValueError('Not an expression: {0!r}'.format(expr))


class Functional(object):
    """A continuous functional given by an evaluator working on a dialogue.

    The evaluator receives an object with an `ask(position)` method answering
    values of the oracle, and a `tick()` method that counts one evaluation step.
    It must not consult the oracle in any other way, which makes the result
    depend on the asked positions only.
    """

    def __init__(self, evaluator, monotone=False, description='<functional>'):
        self._evaluator = evaluator
        self.monotone = monotone
        self.description = description

    def run(self, dialogue):
        return self._evaluator(dialogue)

    def __repr__(self):
        return 'Functional({0}, monotone={1})'.format(self.description, self.monotone)


def from_expr(expr):
    """Creates the functional evaluating the given expression.

    :param expr: the expression tree, or its text
    :return: the (monotone) functional
    :rtype: Functional
    """
    if isinstance(expr, str):
        expr = parse_expr(expr)
    elif expr_depth(expr) > MAX_DEPTH:
        raise ValueError('Expression deeper than {0}'.format(MAX_DEPTH))
    return Functional(lambda dialogue: _eval_expr(expr, dialogue), monotone=True,
                      description=format_expr(expr))


def constant(k):
    """Returns the functional that is constantly `k` and asks nothing."""
    return from_expr(Const(k))


def eval_total(f, oracle, **kwargs):
    """Evaluates the functional against a total oracle.

    :param f: the functional
    :type f: Functional
    :param oracle: callable answering the value of F at a position
    :param kwargs: optional arguments

     - `query_guard` (int): maximal number of evaluation steps (default 10^6)

    :return: tuple `(value, queries)` with queries the set of positions consulted
    :raises GuardExceededError: when the guard is exceeded or the evaluation runs out of stack
    """
    guard = kwargs.get('query_guard', settings.get('query_guard', DEFAULT_QUERY_GUARD))
    dialogue = _Dialogue(oracle, guard)
    try:
        value = f.run(dialogue)
    except RecursionError:
        raise GuardExceededError('evaluation of {0} ran out of stack'.format(f.description))
    return value, frozenset(dialogue.positions)


def hat(sigma):
    """Returns the oracle extending the finite sequence by zeros."""
    sigma = tuple(sigma)
    length = len(sigma)
    return lambda n: sigma[n] if n < length else 0


def probe(f, sigma, **kwargs):
    """Evaluates against the zero extension of sigma, reporting securedness as well.

    :return: tuple `(value, secured, queries)`
    """
    value, queries = eval_total(f, hat(sigma), **kwargs)
    secured = all(position < len(sigma) for position in queries)
    return value, secured, queries


def eval_hat(f, sigma, **kwargs):
    """Returns the value of the functional at the zero extension of `sigma`."""
    return eval_total(f, hat(sigma), **kwargs)[0]


def is_secured(f, sigma, **kwargs):
    """Returns whether the finite sequence determines the value of the functional.

    The test is the dialogue criterion: evaluation against the zero extension
    asks only positions below `len(sigma)`. Every extension of a secured
    sequence asks the same positions and gets the same value.

    :param f: the functional
    :param sigma: the finite sequence
    :type sigma: tuple
    :rtype: bool
    """
    return probe(f, sigma, **kwargs)[1]


def modulus(f, oracle, **kwargs):
    """Returns the dialogue modulus of continuity k(F), the largest queried position (0 if none).

    Two oracles agreeing on all positions up to k(F) give the same value.
    """
    queries = eval_total(f, oracle, **kwargs)[1]
    return max(queries) if queries else 0


class _Unanswered(Exception):

    def __init__(self, position):
        super(_Unanswered, self).__init__(position)
        self.position = position


def explore_dialogues(f, choices, **kwargs):
    """Enumerates every dialogue of the functional against a family of oracles.

    The family consists of all oracles whose answer at a position `p` lies in
    `choices(p)`. The exploration is depth first: evaluation proceeds until a
    position without an answer is asked, then branches over its choices in the
    order given. Each completed dialogue is yielded once.

    :param f: the functional
    :param choices: callable returning the (non empty) list of answers for a position
    :param kwargs: passed on to :func:`eval_total`
    :return: generator of tuples `(value, answers)` where answers maps each
             queried position to its answer
    """
    stack = [{}]
    completed = 0
    while stack:
        answers = stack.pop()

        def oracle(position, answers=answers):
            if position not in answers:
                raise _Unanswered(position)
            return answers[position]

        try:
            value, _ = eval_total(f, oracle, **kwargs)
        except _Unanswered as missing:
            options = list(choices(missing.position))
            if not options:
                raise ValueError('no choices for position {0}'.format(missing.position))
            for option in reversed(options):
                extended = dict(answers)
                extended[missing.position] = option
                stack.append(extended)
            continue
        completed += 1
        yield value, answers
    logging.debug('explored {0} dialogues of {1}'.format(completed, f.description))


class Oracle(object):
    """A named total function N -> N that can be written on the command line.

    Supported specifications:

     * `id`: m -> m
     * `succ`: m -> m + 1
     * `shift:k`: m -> m + k
     * `double`: m -> 2m
     * `const:k`: m -> k
     * `table:a,b,c`: the listed values, the identity beyond
    """

    def __init__(self, kind, arg=None):
        self.kind = kind
        self.arg = arg

    def __call__(self, m):
        if self.kind == 'id':
            return m
        if self.kind == 'succ':
            return m + 1
        if self.kind == 'shift':
            return m + self.arg
        if self.kind == 'double':
            return 2 * m
        if self.kind == 'const':
            return self.arg
        if self.kind == 'table':
            return self.arg[m] if m < len(self.arg) else m
        raise ValueError('Unknown oracle kind: {0}'.format(self.kind))

    def interval_max(self, a, b):
        """Returns the maximum over the positions in `[a, b]` (`a <= b`)."""
        if self.kind == 'table':
            inside = [self.arg[n] for n in range(a, min(b, len(self.arg) - 1) + 1)]
            if b >= len(self.arg):
                inside.append(b)
            return max(inside)
        if self.kind == 'const':
            return self.arg
        # the remaining kinds are nondecreasing
        return self(b)

    def __eq__(self, other):
        return isinstance(other, Oracle) and (self.kind, self.arg) == (other.kind, other.arg)

    def __hash__(self):
        return hash((self.kind, self.arg))

    def __str__(self):
        if self.kind in ('id', 'succ', 'double'):
            return self.kind
        if self.kind == 'table':
            return 'table:' + ','.join(str(v) for v in self.arg)
        return '{0}:{1}'.format(self.kind, self.arg)

    def __repr__(self):
        return 'Oracle({0})'.format(self)


def parse_oracle(text):
    """Parses an oracle specification like `succ`, `shift:3` or `table:1,4,4`.

    :rtype: Oracle
    """
    text = text.strip()
    kind, _, arg = text.partition(':')
    try:
        if kind in ('id', 'succ', 'double') and not arg:
            return Oracle(kind)
        if kind in ('shift', 'const'):
            value = int(arg)
            if value < 0:
                raise ValueError(arg)
            return Oracle(kind, value)
        if kind == 'table':
            values = tuple(int(v) for v in arg.split(','))
            if not values or min(values) < 0:
                raise ValueError(arg)
            return Oracle(kind, values)
    except ValueError:
        raise ValueError('Invalid oracle specification: {0}'.format(text))
    raise ValueError('Invalid oracle specification: {0}'.format(text))


def random_expr(rng, depth, max_const=3, max_iter=3):
    """Generates a random expression of depth at most `depth`.

    :param rng: a numpy random generator
    :param depth: the maximal depth
    :param max_const: the largest literal to use
    :param max_iter: the largest iteration count to use
    :return: the expression tree
    """
    if depth <= 0 or rng.integers(0, 4) == 0:
        return Const(int(rng.integers(0, max_const + 1)))
    kind = int(rng.integers(0, 5))
    if kind == 0:
        return Apply(random_expr(rng, depth - 1, max_const, max_iter))
    if kind == 1:
        return Iter(int(rng.integers(0, max_iter + 1)), random_expr(rng, depth - 1, max_const, max_iter))
    left = random_expr(rng, depth - 1, max_const, max_iter)
    right = random_expr(rng, depth - 1, max_const, max_iter)
    if kind == 2:
        return Add(left, right)
    if kind == 3:
        return Mul(left, right)
    return Max(left, right)
