import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

import pandas as pd

from metastab import campaigns
from metastab.cli import main, parse_args, parse_range, EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_EXHAUSTED
from metastab.measure_model import Instance, FuncSeq, SetSeq, uniform_space, save_instance


def _violate(data):
    return campaigns.VIOLATION, 'stub'


def run(*argv):
    out = io.StringIO()
    err = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue()


def as_mapping(text):
    return dict(line.split('=', 1) for line in text.splitlines() if '=' in line)


class TestArguments(unittest.TestCase):

    def test_parse_args(self):
        config = parse_args(['bound', '--expr', 'F(0)', '--lambda', '1/2', '--lambda-prime', '1/4', '--budget', '9'])
        self.assertEqual((config.command, config.lam, config.lam_prime), ('bound', '1/2', '1/4'))
        self.assertEqual(config.guards(), {'enumeration_budget': 9})

    def test_budget_variable(self):
        with mock.patch.dict(os.environ, {'METASTABLE_BUDGET': '123'}):
            self.assertEqual(parse_args(['verify']).budget, 123)
            self.assertEqual(parse_args(['verify', '--budget', '5']).budget, 5)
        with mock.patch.dict(os.environ, {'METASTABLE_BUDGET': 'many'}):
            self.assertEqual(run('verify', '--size', '0')[0], EXIT_USAGE)

    def test_parse_range(self):
        self.assertEqual(parse_range('1..3'), [1, 2, 3])
        self.assertEqual(parse_range('2,5'), [2, 5])
        for text in ['', '3..1', 'a..b', '-1']:
            with self.assertRaises(ValueError):
                parse_range(text)


class TestBound(unittest.TestCase):

    def test_closed_form(self):
        code, out = run('bound', '--expr', 'F(0)+2', '--lambda', '1/2', '--lambda-prime', '1/4')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(as_mapping(out)['m_prime'], '16')

    def test_constant(self):
        code, out = run('bound', '--expr', '5', '--lambda', '1/2', '--lambda-prime', '1/4')
        self.assertEqual(as_mapping(out)['m_prime'], '5')

    def test_json_and_schedule(self):
        code, out = run('bound', '--expr', 'F(0)+3', '--lambda', '1/2', '--lambda-prime', '1/4',
                        '--schedule', 'concentrated', '--format', 'json')
        data = json.loads(out)
        self.assertEqual(data['m_prime'], 12)
        self.assertEqual(data['schedule'], 'concentrated')
        self.assertEqual(data['nodes'][0]['children'], [0, 3, 6, 9, 12])

    def test_nested(self):
        code, out = run('bound', '--expr', 'F(F(0))+1', '--lambda', '3/2', '--lambda-prime', '1/2')
        self.assertEqual(as_mapping(out)['m_prime'], '4')
        code, out = run('bound', '--expr', 'F(F(0))+1', '--lambda', '3/4', '--lambda-prime', '1/4',
                        '--node-guard', '1000')
        self.assertEqual(code, EXIT_EXHAUSTED)

    def test_out_file(self):
        with tempfile.TemporaryDirectory() as folder:
            location = os.path.join(folder, 'trace.json')
            code, out = run('bound', '--expr', 'F(0)+1', '--lambda', '1', '--lambda-prime', '1/2',
                            '--format', 'csv', '--out', location)
            self.assertEqual(out, '')
            frame = pd.read_csv(location)
            self.assertEqual(len(frame), 5)

    def test_usage_errors(self):
        self.assertEqual(run('bound', '--expr', 'F(0)+2')[0], EXIT_USAGE)
        self.assertEqual(run('bound', '--expr', 'F(0', '--lambda', '1/2', '--lambda-prime', '1/4')[0], EXIT_USAGE)
        self.assertEqual(run('bound', '--expr', 'F(0)', '--lambda', '0.5', '--lambda-prime', '1/4')[0], EXIT_USAGE)
        self.assertEqual(run('bound', '--expr', 'F(0)', '--lambda', '1/4', '--lambda-prime', '1/2')[0], EXIT_USAGE)
        self.assertEqual(run('nothing')[0], EXIT_USAGE)
        self.assertEqual(run('bound', '--expr', 'F(0)', '--lambda', '1/2', '--lambda-prime', '1/4',
                             '--schedule', '/does/not/exist.json')[0], EXIT_USAGE)

    def test_modulus_tree(self):
        code, out = run('bound', '--expr', 'F(0)+1', '--lambda', '1/2', '--lambda-prime', '1/4',
                        '--tree', 'modulus', '--modulus', '1', '--format', 'json')
        self.assertEqual(code, EXIT_OK)
        data = json.loads(out)
        self.assertEqual((data['m_prime'], data['max_depth'], data['modulus']), (8, 2, '1'))
        self.assertEqual(data['nodes_visited'], 137)
        self.assertEqual(run('bound', '--expr', 'F(0)+1', '--lambda', '1/2', '--lambda-prime', '1/4',
                             '--tree', 'modulus')[0], EXIT_USAGE)
        self.assertEqual(run('bound', '--expr', 'F(1)', '--lambda', '1/2', '--lambda-prime', '1/4',
                             '--tree', 'modulus', '--modulus', '0')[0], EXIT_USAGE)

    def test_deep_expression(self):
        deep = 'F(' * 400 + '0' + ')' * 400
        self.assertEqual(run('bound', '--expr', deep, '--lambda', '1/2', '--lambda-prime', '1/4')[0], EXIT_USAGE)
        long_sum = '+'.join(['F(0)'] * 400)
        self.assertEqual(run('bound', '--expr', long_sum, '--lambda', '1/2', '--lambda-prime', '1/4')[0],
                         EXIT_USAGE)


class TestVerify(unittest.TestCase):

    def test_vacuous(self):
        code, out = run('verify', '--size', '0')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(as_mapping(out)['instances'], '0')

    def test_campaign(self):
        code, out = run('verify', '--theorem', 'dct', '--seed', '4', '--size', '20')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(as_mapping(out)['violation'], '0')

    def test_stub_violation(self):
        with mock.patch.dict(campaigns.CHECKS, {'bound': _violate}):
            code, out = run('verify', '--theorem', 'bound', '--size', '2')
        self.assertEqual(code, EXIT_VIOLATION)
        self.assertTrue('violating instance: {' in out)

    def test_deterministic(self):
        first = run('verify', '--theorem', 'bound', '--seed', '9', '--size', '10', '--format', 'json')[1]
        second = run('verify', '--theorem', 'bound', '--seed', '9', '--size', '10', '--format', 'json')[1]
        self.assertEqual(first, second)

    def test_replay(self):
        code, out = run('verify', '--theorem', 'egorov', '--seed', '2', '--size', '3', '--format', 'json')
        with tempfile.TemporaryDirectory() as folder:
            location = os.path.join(folder, 'report.jsonl')
            with open(location, 'w') as handle:
                handle.write(out)
            code, out = run('verify', '--replay', location)
            self.assertEqual(code, EXIT_OK)
            self.assertEqual(as_mapping(out)['ok'], '3')
            self.assertEqual(as_mapping(out)['theorem'], 'egorov')

    def test_monotone_epsilon(self):
        code, out = run('verify', '--theorem', 'monotone', '--epsilon', '1/2', '--size', '5', '--format', 'json')
        self.assertEqual(code, EXIT_OK)
        rows = [json.loads(line) for line in out.splitlines() if line.strip()]
        self.assertEqual(len(rows), 5)
        self.assertEqual({json.loads(row['instance'])['epsilon'] for row in rows}, {'1/2'})


class TestDerivedCommands(unittest.TestCase):

    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.steady = os.path.join(self.folder.name, 'steady.json')
        save_instance(Instance(uniform_space(2), funcs=FuncSeq([], ('1/2', 1))), self.steady)
        self.moving = os.path.join(self.folder.name, 'moving.json')
        save_instance(Instance(uniform_space(2), funcs=FuncSeq([(0, 1), (1, 0)], (1, 1))), self.moving)
        self.sets = os.path.join(self.folder.name, 'sets.json')
        save_instance(Instance(uniform_space(2), SetSeq([{0}], set())), self.sets)

    def tearDown(self):
        self.folder.cleanup()

    def test_table(self):
        code, out = run('table', '--n', '1..3', '--lambda', '1/2,1', '--lambda-prime', '1/4,1/2', '--no-nested',
                        '--format', 'csv')
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(io.StringIO(out))
        # the pairs (1/2, 1/4), (1, 1/4) and (1, 1/2)
        self.assertEqual(len(frame), 18)
        self.assertTrue(frame['match'].all())

    def test_egorov(self):
        code, out = run('egorov', '--instance', self.moving, '--epsilon', '1/2', '--lambda', '1/2',
                        '--lambda-prime', '1/4', '--oracle', 'succ', '--strict')
        self.assertEqual(code, EXIT_OK)
        data = as_mapping(out)
        self.assertEqual(data['m2'], '2')
        self.assertEqual(data['pointwise_bound'], 'True')
        self.assertNotEqual(data['m'], 'None')
        code, out = run('egorov', '--expr', 'F(0)+1', '--epsilon', '1/2', '--lambda', '1/2',
                        '--lambda-prime', '1/4', '--oracle', 'id', '--format', 'json')
        self.assertEqual(json.loads(out)['m2'], 8)
        self.assertEqual(run('egorov', '--epsilon', '1/2', '--lambda', '1/2', '--lambda-prime', '1/4',
                             '--oracle', 'id')[0], EXIT_USAGE)

    def test_dct(self):
        code, out = run('dct', '--instance', self.steady, '--epsilon', '1/2', '--lambda', '1/2',
                        '--lambda-prime', '1/4', '--oracle', 'double')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(as_mapping(out)['m'], '0')
        code, out = run('dct', '--instance', self.moving, '--epsilon', '1/2', '--lambda', '1/2',
                        '--lambda-prime', '1/4', '--oracle', 'double', '--p', '2', '--format', 'json')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(json.loads(out)['p'], 2)
        self.assertEqual(run('dct', '--instance', self.sets, '--epsilon', '1/2', '--lambda', '1/2',
                             '--lambda-prime', '1/4', '--oracle', 'id')[0], EXIT_USAGE)

    def test_modes(self):
        code, out = run('modes', '--family', 'tail_indicator', '--epsilon', '1/2', '--lambda', '1', '--window', '20',
                        '--format', 'json')
        self.assertEqual(code, EXIT_OK)
        data = json.loads(out)
        self.assertEqual((data['aum'], data['aum_prime']), ('holds', 'fails'))
        self.assertEqual(data['window'], 20)
        code, out = run('modes', '--family', 'all', '--window', '10', '--format', 'json')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(out.splitlines()), 3)
        code, out = run('modes', '--instance', self.moving, '--format', 'csv')
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(pd.read_csv(io.StringIO(out))['aum_prime'][0], 'holds-on-finite-model')
        self.assertEqual(run('modes', '--family', 'alt_tail', '--window', '0')[0], EXIT_USAGE)


if __name__ == "__main__":
    unittest.main()
