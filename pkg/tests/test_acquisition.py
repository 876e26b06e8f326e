"""Batch selection policies: deterministic cases plus seeded sweeps."""

from __future__ import annotations

import pytest

from ecalib.core import AcquisitionPolicy, AcquisitionSpec
from ecalib.acquisition import select_batch
from ecalib.rng import TAG_ACQ, MixStream


def stream(*parts):
    return MixStream(TAG_ACQ, *parts)


def coin_for(parts) -> float:
    return MixStream(TAG_ACQ, *parts).uniform()


class TestFullBatch:
    def test_tests_everything_every_round(self):
        spec = AcquisitionSpec(AcquisitionPolicy.FULL_BATCH, batch_size=2)
        for t in (1, 5):
            got = select_batch(spec, [0.0] * 4, frozenset({1}), stream(0, 0, t), t)
            assert got == (0, 1, 2, 3)


class TestRoundRobin:
    def test_rotates_with_wraparound(self):
        spec = AcquisitionSpec(AcquisitionPolicy.ROUND_ROBIN, batch_size=2)
        w = [0.0] * 5
        rounds = [select_batch(spec, w, frozenset(), stream(0, 0, t), t) for t in (1, 2, 3, 4)]
        assert rounds[0] == (0, 1)
        assert rounds[1] == (2, 3)
        assert rounds[2] == (0, 4)  # wraps: offset 6 % 5 = 1... ids 4 and 0
        assert rounds[3] == (1, 2)

    def test_covers_all_ids(self):
        spec = AcquisitionSpec(AcquisitionPolicy.ROUND_ROBIN, batch_size=3)
        seen = set()
        for t in range(1, 8):
            seen.update(select_batch(spec, [0.0] * 7, frozenset(), stream(0, 0, t), t))
        assert seen == set(range(7))


class TestUniformAll:
    def test_draws_from_everyone_even_certified(self):
        spec = AcquisitionSpec(AcquisitionPolicy.UNIFORM_ALL, batch_size=3)
        seen = set()
        for t in range(1, 200):
            got = select_batch(spec, [0.0] * 6, frozenset({0, 1, 2, 3, 4}), stream(1, 0, t), t)
            assert len(got) == 3
            assert len(set(got)) == 3
            seen.update(got)
        assert seen == set(range(6))

    def test_deterministic_for_fixed_key(self):
        spec = AcquisitionSpec(AcquisitionPolicy.UNIFORM_ALL, batch_size=2)
        a = select_batch(spec, [0.0] * 9, frozenset(), stream(7, 3, 11), 11)
        b = select_batch(spec, [0.0] * 9, frozenset(), stream(7, 3, 11), 11)
        assert a == b


class TestEpsGreedy:
    def find_keys(self, epsilon, n_keys=2):
        """Round keys whose first uniform lands on each side of epsilon."""
        explore, exploit = [], []
        t = 1
        while len(explore) < n_keys or len(exploit) < n_keys:
            (explore if coin_for((5, 0, t)) < epsilon else exploit).append(t)
            t += 1
        return explore[:n_keys], exploit[:n_keys]

    def test_exploit_takes_the_wealth_leader(self):
        spec = AcquisitionSpec(AcquisitionPolicy.EPS_GREEDY, epsilon=0.3, batch_size=1)
        _, exploit = self.find_keys(0.3)
        t = exploit[0]
        got = select_batch(spec, [0.1, 0.9, 0.5], frozenset(), stream(5, 0, t), t)
        assert got == (1,)

    def test_exploit_ties_break_by_id(self):
        spec = AcquisitionSpec(AcquisitionPolicy.EPS_GREEDY, epsilon=0.3, batch_size=1)
        _, exploit = self.find_keys(0.3)
        t = exploit[0]
        got = select_batch(spec, [0.5, 0.5, 0.5], frozenset(), stream(5, 0, t), t)
        assert got == (0,)

    def test_certified_are_not_retested(self):
        spec = AcquisitionSpec(AcquisitionPolicy.EPS_GREEDY, epsilon=0.3, batch_size=1)
        explore, exploit = self.find_keys(0.3, n_keys=30)
        for t in explore + exploit:
            got = select_batch(spec, [0.9, 0.8, 0.1], frozenset({0}), stream(5, 0, t), t)
            assert 0 not in got

    def test_exploit_top_k_for_larger_batches(self):
        spec = AcquisitionSpec(AcquisitionPolicy.EPS_GREEDY, epsilon=0.3, batch_size=2)
        _, exploit = self.find_keys(0.3)
        t = exploit[0]
        got = select_batch(spec, [0.1, 0.9, 0.5, 0.2], frozenset(), stream(5, 0, t), t)
        assert got == (1, 2)

    def test_explore_draws_within_the_pool(self):
        spec = AcquisitionSpec(AcquisitionPolicy.EPS_GREEDY, epsilon=0.3, batch_size=2)
        explore, _ = self.find_keys(0.3, n_keys=40)
        seen = set()
        for t in explore:
            got = select_batch(spec, [9.0, 0.0, 0.0, 0.0, 0.0], frozenset({1}), stream(5, 0, t), t)
            assert len(got) == 2
            assert 1 not in got
            seen.update(got)
        # exploration reaches low-wealth ids that greed would never touch
        assert seen == {0, 2, 3, 4}

    def test_empty_pool_signals_exhaustion(self):
        spec = AcquisitionSpec(AcquisitionPolicy.EPS_GREEDY, epsilon=0.5, batch_size=1)
        got = select_batch(spec, [0.5, 0.5], frozenset({0, 1}), stream(5, 0, 1), 1)
        assert got == ()

    def test_pool_smaller_than_batch_returned_whole(self):
        spec = AcquisitionSpec(AcquisitionPolicy.EPS_GREEDY, epsilon=0.3, batch_size=3)
        explore, exploit = self.find_keys(0.3)
        for t in (explore[0], exploit[0]):
            got = select_batch(spec, [0.5, 0.4, 0.3], frozenset({1}), stream(5, 0, t), t)
            assert got == (0, 2)

    @pytest.mark.parametrize("epsilon", [0.0, 1.0])
    def test_epsilon_extremes(self, epsilon):
        spec = AcquisitionSpec(AcquisitionPolicy.EPS_GREEDY, epsilon=epsilon, batch_size=1)
        picks = {
            select_batch(spec, [0.0, 0.0, 3.0], frozenset(), stream(8, 0, t), t)[0]
            for t in range(1, 120)
        }
        if epsilon == 0.0:
            assert picks == {2}  # pure greed never leaves the leader
        else:
            assert picks == {0, 1, 2}  # pure exploration hits everyone
