import random
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_target, random_dag
from fuzzsched import suites
from fuzzsched.coverage import Branch, SeedCoverage, canonical_payload
from fuzzsched.errors import UsageError
from fuzzsched.runtime.base import FuzzerStatus, Outcome
from fuzzsched.runtime.simulated import LocalCoverage, SimulatedFuzzer, sim_one_cycle
from fuzzsched.seed_pool import SeedPool


def fuzzer_for(target, seed=0, index=0, **kw):
    return SimulatedFuzzer(index, target, random.Random(seed), **kw)


class TestRunCycles:
    def test_nothing_to_discover(self):
        target = make_target([], {0: 1.0}, cycle_ms={0: 700})
        result = fuzzer_for(target).run_cycles(3, timeout_ms=10**9)
        assert result.new_seeds == []
        assert result.duration == 2100
        assert result.cycles_completed == 3

    def test_certain_success(self):
        target = make_target([(0, 1)], {0: 1.0})
        result = fuzzer_for(target).run_cycles(1, timeout_ms=10**9)
        assert len(result.new_seeds) == 1
        assert result.new_seeds[0][1].branches == (Branch(0, 1),)

    def test_geometric_waiting_time(self):
        target = make_target([(0, 1)], {0: 0.5})
        waits = []
        for seed in range(10_000):
            local = LocalCoverage(target)
            rng = random.Random(seed)
            cycles = 1
            while not sim_one_cycle(target, 0, local, rng)[0]:
                cycles += 1
            waits.append(cycles)
        assert 1.94 <= statistics.fmean(waits) <= 2.06

    def test_chain_is_gated_by_reachability(self, chain_target):
        f = fuzzer_for(chain_target)
        first = f.run_cycles(1, 10**9)
        assert [s.branches for _, s in first.new_seeds] == [(Branch(0, 1),)]
        second = f.run_cycles(1, 10**9)
        assert [s.branches for _, s in second.new_seeds] == [(Branch(0, 1), Branch(1, 2))]

    def test_seed_payload_is_canonical_path(self, chain_target):
        f = fuzzer_for(chain_target)
        result = f.run_cycles(2, 10**9)
        payload, cov = result.new_seeds[-1]
        assert payload == canonical_payload(cov.branches)

    def test_breakthrough_only_unlocked_by_capable_fuzzer(self):
        target = suites.breakthrough_example()
        gate = Branch(0, 1)
        capable_wins = weak_wins = 0
        trials = 200
        for seed in range(trials):
            strong = fuzzer_for(target, seed=seed, index=1)
            weak = fuzzer_for(target, seed=seed, index=0)
            strong.run_cycles(500, 10**12)
            weak.run_cycles(500, 10**12)
            capable_wins += gate in strong.local.branches and len(strong.local.branches) == 21
            weak_wins += gate in weak.local.branches
        assert capable_wins / trials >= 0.99
        assert (trials - weak_wins) / trials >= 0.99

    def test_same_seed_same_discoveries(self):
        target = suites.breakthrough_suite(1)[0]
        a = fuzzer_for(target, seed=4).run_cycles(30, 10**12)
        b = fuzzer_for(target, seed=4).run_cycles(30, 10**12)
        assert a.new_seeds == b.new_seeds


class TestSimulationProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0.05, 1.0))
    def test_seeds_are_new_and_reachable(self, seed, p):
        rng = random.Random(seed)
        edges = random_dag(rng, 15, 25)
        target = make_target(edges, {0: p})
        local = LocalCoverage(target)
        for _ in range(8):
            before = set(local.branches)
            reachable_blocks = set(local.blocks)
            seeds, _ = sim_one_cycle(target, 0, local, rng)
            for _, cov in seeds:
                new = [b for b in cov.branches if b not in before]
                assert len(new) == 1
                assert new[0].pred in reachable_blocks
                # the rest of the seed is the locally known path to that pred
                assert set(cov.branches) - {new[0]} <= before
            for _, cov in seeds:
                local.add(cov.branches)


class TestImport:
    @pytest.fixture
    def pool_records(self, chain_target):
        pool = SeedPool()
        covs = [((0, 1),), ((0, 1), (1, 2))]
        cands = [(canonical_payload(Branch(*b) for b in c), SeedCoverage.of(None, c)) for c in covs]
        return pool.merge(cands, 0, 1)

    def test_import_extends_local_state(self, chain_target, pool_records):
        f = fuzzer_for(chain_target)
        f.import_seeds(pool_records)
        assert f.local_hashes == {r.content_hash for r in pool_records}
        assert f.local.branches == {Branch(0, 1), Branch(1, 2)}

    def test_import_is_idempotent_and_empty_is_noop(self, chain_target, pool_records):
        f = fuzzer_for(chain_target)
        f.import_seeds([])
        assert f.local_hashes == set()
        f.import_seeds(pool_records)
        snapshot = (set(f.local_hashes), set(f.local.branches))
        f.import_seeds(pool_records)
        assert (f.local_hashes, f.local.branches) == snapshot


class TestFaultsAndStatus:
    @pytest.fixture
    def busy_target(self):
        return make_target([(0, 1), (1, 2), (2, 3), (3, 4)], {0: 1.0}, cycle_ms={0: 100})

    def test_timeout_skips_with_partial_result(self, busy_target):
        f = fuzzer_for(busy_target)
        result = f.run_cycles(10, timeout_ms=250)
        assert result.outcome == Outcome.SKIPPED
        assert result.cycles_completed == 3
        assert f.status == FuzzerStatus.SKIPPED
        f.settle()
        assert f.status == FuzzerStatus.IDLE
        assert f.run_cycles(1, 10**9).outcome == Outcome.COMPLETED

    def test_hang_is_cut_at_timeout(self, busy_target):
        f = fuzzer_for(busy_target, faults={1: "hang"})
        result = f.run_cycles(5, timeout_ms=360)
        assert result.outcome == Outcome.SKIPPED
        assert result.duration == 360
        assert len(result.new_seeds) == 1

    def test_crash_delivers_partial_seeds_and_restarts(self, busy_target):
        f = fuzzer_for(busy_target, faults={2: "crash"})
        f.run_cycles(1, 10**9)
        result = f.run_cycles(5, 10**9)
        assert result.outcome == Outcome.CRASHED
        assert result.cycles_completed == 1
        assert len(result.new_seeds) == 1
        assert f.status == FuzzerStatus.CRASHED
        f.watchdog_restart()
        assert (f.status, f.restarts) == (FuzzerStatus.IDLE, 1)
        assert Branch(1, 2) in f.local.branches  # local queue survives

    def test_wrong_state_transitions_rejected(self, busy_target):
        f = fuzzer_for(busy_target)
        with pytest.raises(UsageError):
            f.watchdog_skip()
        with pytest.raises(UsageError):
            f.watchdog_restart()
        with pytest.raises(UsageError):
            f.run_cycles(0, 100)
        f.mark_crashed()
        with pytest.raises(UsageError):
            f.run_cycles(1, 100)
        with pytest.raises(UsageError):
            f.import_seeds([])
