import json
import unittest

from metastab import campaigns
from metastab.campaigns import (OK, VIOLATION, UNDECIDED, SKIPPED, VACUOUS, THEOREMS, COLUMNS, generate_instance,
                                check_instance, run_campaign, summarize, replay_instance)
from metastab.measure_model import instance_from_dict


def _violate(data):
    return VIOLATION, 'stub'


class TestGeneration(unittest.TestCase):

    def test_deterministic(self):
        for theorem in THEOREMS:
            self.assertEqual(generate_instance(theorem, 5, 3), generate_instance(theorem, 5, 3))
        self.assertNotEqual(generate_instance('egorov', 5, 3), generate_instance('egorov', 5, 4))

    def test_limits(self):
        for instance_id in range(30):
            data = generate_instance('bound', 1, instance_id)
            instance = instance_from_dict(data)
            self.assertTrue(instance.space.size <= 4)
            self.assertTrue(instance.sets.stab_index <= 6)
            data = generate_instance('dct', 1, instance_id, points=2, stab=1)
            instance = instance_from_dict(data)
            self.assertTrue(instance.space.size <= 2)
            self.assertTrue(instance.funcs.stab_index <= 1)

    def test_unknown(self):
        with self.assertRaises(ValueError):
            generate_instance('9.9', 1, 0)
        with self.assertRaises(ValueError):
            run_campaign('9.9', 1, 3)
        with self.assertRaises(ValueError):
            run_campaign('bound', 1, -1)


class TestCampaigns(unittest.TestCase):

    def _assert_sound(self, theorem, size, **kwargs):
        frame = run_campaign(theorem, 1, size, **kwargs)
        self.assertEqual(list(frame.columns), COLUMNS)
        self.assertEqual(list(frame.id), list(range(size)))
        counts = summarize(frame)
        self.assertEqual(counts[VIOLATION], 0, list(frame[frame.status == VIOLATION].detail))
        return counts

    def test_bound(self):
        counts = self._assert_sound('bound', 1000)
        self.assertTrue(counts[OK] > 0)

    def test_bound_exact(self):
        counts = self._assert_sound('bound-exact', 100)
        self.assertTrue(counts[OK] > 0)

    def test_conditions(self):
        self.assertTrue(self._assert_sound('conditions', 500)[OK] > 0)

    def test_egorov(self):
        counts = self._assert_sound('egorov', 500)
        self.assertEqual(counts[UNDECIDED], 0)
        self.assertTrue(counts[OK] >= 475, counts)

    def test_dct(self):
        counts = self._assert_sound('dct', 500)
        self.assertEqual(counts[UNDECIDED], 0)
        self.assertTrue(counts[OK] >= 475, counts)

    def test_lp(self):
        counts = self._assert_sound('lp', 500)
        self.assertEqual(counts[UNDECIDED], 0)
        self.assertTrue(counts[OK] >= 475, counts)

    def test_monotone(self):
        for epsilon in ('1', '1/2', '1/4'):
            frame = run_campaign('monotone', 1, 200, epsilon=epsilon)
            self.assertEqual(summarize(frame)[OK], 200, epsilon)
            self.assertEqual({json.loads(text)['epsilon'] for text in frame.instance}, {epsilon})

    def test_empty(self):
        frame = run_campaign('bound', 1, 0)
        self.assertEqual(len(frame), 0)
        self.assertEqual(summarize(frame), {OK: 0, VIOLATION: 0, UNDECIDED: 0, SKIPPED: 0, VACUOUS: 0})

    def test_parallel_matches_serial(self):
        serial = run_campaign('dct', 7, 12)
        parallel = run_campaign('dct', 7, 12, jobs=2)
        self.assertTrue(serial.equals(parallel))

    def test_stub_violation(self):
        frame = run_campaign('egorov', 1, 4, checks={'egorov': _violate})
        self.assertEqual(summarize(frame)[VIOLATION], 4)

    def test_undecided(self):
        data = generate_instance('bound-exact', 3, 0)
        data['enumeration_budget'] = 0
        data['expr'] = 'F(0)'
        self.assertEqual(check_instance(data)[0], UNDECIDED)

    def test_skipped(self):
        data = generate_instance('bound', 3, 0)
        data.update({'weights': ['1'], 'sets': {'prefix': [], 'tail': [], 'stab': 0}, 'expr': 'F(F(0))+3',
                     'lambda': '1/2', 'lambda_prime': '1/4', 'node_guard': 50})
        self.assertEqual(check_instance(data)[0], SKIPPED)

    def test_replay(self):
        frame = run_campaign('lp', 2, 3)
        for row in frame.itertuples():
            self.assertEqual(replay_instance(row.instance), (row.status, row.detail))
        data = json.loads(frame.instance[0])
        self.assertEqual(replay_instance(data, checks={'lp': _violate})[0], VIOLATION)


if __name__ == "__main__":
    unittest.main()
