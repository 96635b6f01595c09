"""metastab computes explicit metastable convergence bounds by bar recursion.

Given a continuous functional M(F), written in a small expression language, the
package computes the bound M' on the index of a small set in any sequence of
sets satisfying the metastable hypothesis, derives quantitative Egorov and
dominated convergence bounds from it, and checks every bound exactly against
finite probability spaces in rational arithmetic.

Example:

    >>> from metastab import *
    >>> trace = compute_bound(from_expr('F(0)+2'), Budget('1/2', '1/4'))
    >>> trace.m_prime
    16

"""

# process wide overrides for the defaults (query_guard, node_guard,
# depth_guard, enumeration_budget)
settings = {}

from .functional_dsl import *
from .bar_engine import *
from .measure_model import *
from .derived_bounds import *
from .modes import *
from .campaigns import *

__version__ = '0.1.0'
