import math
import unittest
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from metastab.functional_dsl import Iter, Const, from_expr, constant, eval_total, parse_oracle
from metastab.bar_engine import Budget, compute_bound
from metastab.measure_model import uniform_space, FiniteProbSpace, SetSeq, FuncSeq, measure, hypothesis_holds
from metastab.derived_bounds import (monotone_bound, monotone_check, EgorovInput, egorov_functional,
                                     egorov_bound, egorov_check, dct_check, lp_check, pointwise_bound_holds,
                                     pointwise_bound_witness, linear_net, net_reduce, net_conclusion_check,
                                     NetReduction, ffn_recurrence, bound_table, SearchBudget, lower_bound_search,
                                     lower_bound_reference)
from naive import naive_n


class TestMonotone(unittest.TestCase):

    def test_bound(self):
        self.assertEqual(monotone_bound('1/2'), Iter(3, Const(0)))
        self.assertEqual(monotone_bound(1), Iter(2, Const(0)))
        self.assertEqual(monotone_bound('1/3'), Iter(4, Const(0)))
        with self.assertRaises(ValueError):
            monotone_bound(0)

    def test_check(self):
        succ = parse_oracle('succ')
        self.assertEqual(eval_total(from_expr(monotone_bound('1/2')), succ)[0], 3)
        self.assertEqual(monotone_check([0, '1/2'], '1/2', succ), 1)
        self.assertEqual(monotone_check([0, '1/4', '1/2', '3/4', 1], '1/2', succ), 0)
        # F(1) = 0 gives an empty interval at m = 1
        self.assertEqual(monotone_check([0, 1], '1/2', parse_oracle('table:1,0')), 1)

    @settings(max_examples=80)
    @given(st.lists(st.integers(min_value=0, max_value=8), min_size=1, max_size=10),
           st.sampled_from(['1', '1/2', '1/4']),
           st.lists(st.integers(min_value=0, max_value=4), min_size=30, max_size=30))
    def test_every_function(self, steps, epsilon, offsets):
        values = [Fraction(v, 8) for v in sorted(steps)]
        table = parse_oracle('table:' + ','.join(str(m + k) for m, k in enumerate(offsets)))
        self.assertIsNotNone(monotone_check(values, epsilon, table))


class TestEgorov(unittest.TestCase):

    def setUp(self):
        self.budget = Budget('1/2', '1/4')

    def test_input(self):
        with self.assertRaises(ValueError):
            EgorovInput(constant(1), 0, self.budget)
        with self.assertRaises(ValueError):
            EgorovInput(from_expr('F(0)'), '0.5', self.budget)

    def test_functional(self):
        inp = EgorovInput(from_expr('F(0)'), '1/2', self.budget)
        f = egorov_functional(inp, parse_oracle('succ'))
        self.assertEqual(eval_total(f, parse_oracle('const:2')), (3, frozenset({0})))
        self.assertTrue(f.monotone)
        inp = EgorovInput(from_expr('F(0)+1'), '1/2', self.budget)
        self.assertEqual(eval_total(egorov_functional(inp, parse_oracle('double')), parse_oracle('const:1'))[0], 3)
        inp = EgorovInput(constant(7), '1/2', self.budget)
        self.assertEqual(eval_total(egorov_functional(inp, parse_oracle('id')), parse_oracle('id')), (7, frozenset()))

    def test_empty_interval(self):
        # F(0) = 0 < 3: the interval counts as {3}
        inp = EgorovInput(from_expr('F(3)'), '1/2', self.budget)
        f = egorov_functional(inp, parse_oracle('double'))
        self.assertEqual(eval_total(f, parse_oracle('const:0'))[0], 6)

    def test_bound(self):
        self.assertEqual(egorov_bound(EgorovInput(constant(0), '1/2', self.budget), parse_oracle('id'))[0], 0)
        self.assertEqual(egorov_bound(EgorovInput(constant(4), '1/2', self.budget), parse_oracle('succ'))[0], 4)
        inp = EgorovInput(from_expr('F(0)+1'), '1/2', self.budget)
        m2, trace = egorov_bound(inp, parse_oracle('id'))
        self.assertEqual(m2, naive_n(egorov_functional(inp, parse_oracle('id')), (), Fraction(1, 2), Fraction(1, 4)))
        self.assertEqual(m2, 8)
        self.assertTrue(trace.description.startswith('egorov('))

    def test_checks(self):
        space = uniform_space(2)
        steady = FuncSeq([], ('1/2', 1))
        inp = EgorovInput(constant(0), '1/2', self.budget)
        self.assertEqual(egorov_check(space, steady, inp, parse_oracle('succ')), 0)
        self.assertEqual(dct_check(space, steady, inp, parse_oracle('succ')), 0)
        self.assertEqual(lp_check(space, steady, inp, parse_oracle('succ'), 2), 0)

    def test_stabilizing(self):
        space = FiniteProbSpace(('1/4', '3/4'))
        fs = FuncSeq([(0, 1), (1, 0), (0, 1)], (1, 1))
        inp = EgorovInput(constant(3), '1/2', self.budget)
        for text in ['id', 'succ', 'double', 'const:0', 'table:5,0,2']:
            oracle = parse_oracle(text)
            m2 = egorov_bound(inp, oracle)[0]
            self.assertEqual(m2, 3)
            self.assertIsNotNone(egorov_check(space, fs, inp, oracle, m2=m2))
            self.assertIsNotNone(dct_check(space, fs, inp, oracle, m2=m2))
            for p in (1, 2, 3):
                self.assertIsNotNone(lp_check(space, fs, inp, oracle, p, m2=m2))

    def test_dct_alternating(self):
        # the integrals of (1, 0) and (0, 1) agree although the functions differ everywhere
        space = uniform_space(2)
        fs = FuncSeq([(1, 0), (0, 1), (1, 0), (0, 1)], (0, 1))
        inp = EgorovInput(constant(0), '1/4', Budget('1/8', '1/16'))
        self.assertEqual(dct_check(space, fs, inp, parse_oracle('shift:3'), m2=0), 0)
        self.assertIsNone(lp_check(space, fs, inp, parse_oracle('shift:3'), 1, m2=0))
        self.assertIsNone(egorov_check(space, fs, inp, parse_oracle('shift:3'), m2=0))

    def test_pointwise_bound(self):
        space = uniform_space(2)
        fs = FuncSeq([(0, 1), (1, 1)], (1, 1))
        self.assertTrue(pointwise_bound_holds(space, fs, constant(2), '1/2', '1/4'))
        witness = pointwise_bound_witness(space, fs, constant(0), '1/2', '1/4')
        self.assertEqual(witness['m'], 0)
        self.assertEqual(witness['measure'], Fraction(1, 2))
        self.assertTrue(pointwise_bound_holds(space, fs, from_expr('F(0)+1'), '1/2', '1/4'))


class TestNets(unittest.TestCase):

    def test_reduce(self):
        seq = SetSeq([{0}, {1}, {2}], set())
        reduced = net_reduce(seq, linear_net(2))
        self.assertEqual(reduced.term(0), {0, 1, 2})
        self.assertEqual(reduced.term(1), {2})
        self.assertEqual(reduced.stab_index, 2)
        reduced = net_reduce(seq, linear_net(1))
        self.assertEqual([reduced.term(n) for n in range(4)], [{0, 1}, {1, 2}, {2}, frozenset()])

    def test_invalid(self):
        with self.assertRaises(ValueError):
            linear_net(0)
        with self.assertRaises(ValueError):
            net_reduce(SetSeq([{0}, {1}, {2}], set()), NetReduction(lambda n: 1))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=1, max_value=3),
           st.lists(st.frozensets(st.integers(min_value=0, max_value=2)), max_size=5),
           st.frozensets(st.integers(min_value=0, max_value=2)),
           st.integers(min_value=1, max_value=3))
    def test_bookkeeping_and_soundness(self, offset, prefix, tail, step):
        space = uniform_space(3)
        seq = SetSeq(prefix, tail)
        net = linear_net(step, offset)
        reduced = net_reduce(seq, net)
        for n in range(reduced.stab_index + 1):
            for i in range(net(n), net(n + 1) + 1):
                self.assertTrue(measure(space, reduced.term(n)) >= measure(space, seq.term(i)))
        f = from_expr('F(0)+1')
        budget = Budget('2/3', '1/3')
        if hypothesis_holds(space, reduced, f, budget.lam_prime):
            m_prime = compute_bound(f, budget).m_prime
            self.assertIsNotNone(net_conclusion_check(space, seq, net, budget.lam, m_prime))


class TestTable(unittest.TestCase):

    def test_recurrence(self):
        self.assertEqual(ffn_recurrence(1, Budget('3/2', '1/2'), 2), [1, 4, 32])
        values = ffn_recurrence(3, Budget('1/2', '1/4'), 3)
        self.assertEqual(values[:2], [3, 3 * 64])
        self.assertTrue(isinstance(values[3], str))

    def test_table(self):
        frame = bound_table([1, 2, 3], [Budget('1/2', '1/4'), Budget(1, '1/2')], nested=False)
        self.assertEqual(len(frame), 12)
        self.assertTrue(frame['match'].all())
        rows = frame[(frame.n == 2) & (frame['lambda'] == '1/2')]
        self.assertEqual(list(rows.engine_m_prime), [16, 8])
        rows = frame[(frame.n == 1) & (frame['lambda'] == '1')]
        self.assertEqual(list(rows.engine_m_prime), [4, 2])

    def test_nested_rows(self):
        frame = bound_table([1, 2], [Budget('3/2', '1/2'), Budget('1/2', '1/4')], node_guard=2000)
        nested = frame[frame.expr.str.startswith('F(F(0))')]
        self.assertEqual(len(nested), 4)
        self.assertTrue(nested['match'].isnull().all())
        self.assertEqual(list(nested[nested['lambda'] == '3/2'].engine_m_prime), ['4', '16'])
        self.assertEqual(list(nested[nested['lambda'] == '3/2'].note),
                         ['recursion yields m_1 = 4', 'recursion yields m_1 = 16'])
        self.assertEqual(list(nested[nested['lambda'] == '1/2'].engine_m_prime), ['exhausted', 'exhausted'])


class TestLowerBound(unittest.TestCase):

    def test_reference(self):
        self.assertEqual(lower_bound_reference(1, Budget('1/2', '1/4')), 2)
        self.assertEqual(lower_bound_reference(2, Budget(1, '1/2')), 0)

    def test_empty_search(self):
        report = lower_bound_search(1, Budget('1/2', '1/4'), SearchBudget(max_instances=0))
        self.assertIsNone(report.instance)
        self.assertIsNone(report.least_index)
        self.assertEqual(report.searched, 0)

    def test_search(self):
        budget = Budget('1/2', '1/4')
        report = lower_bound_search(1, budget, SearchBudget(max_points=2, max_stab=2, max_instances=200))
        self.assertTrue(report.least_index >= 1)
        self.assertEqual(report.m_prime, 8)
        self.assertTrue(report.least_index <= report.m_prime)
        self.assertTrue(hypothesis_holds(report.instance.space, report.instance.sets, from_expr('F(0)+1'),
                                         budget.lam_prime))

    def test_search_budget_exhausted(self):
        report = lower_bound_search(1, Budget('1/2', '1/4'), SearchBudget(2, 2, 50), enumeration_budget=1)
        self.assertEqual(report.searched, 50)
        self.assertTrue(0 < report.undecided <= 50)
        self.assertEqual(report.reference, 2)

    def test_default_search_limits(self):
        self.assertEqual(SearchBudget(), SearchBudget(max_points=3, max_stab=4, max_instances=10000))


if __name__ == "__main__":
    unittest.main()
