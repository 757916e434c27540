"""Deterministic simulated fuzzer over a ``SyntheticTarget``.

Each cycle makes one Bernoulli attempt per locally reachable, locally
uncovered branch. Reachability is fixed at cycle start, so a chain A->B->C is
discovered one edge per cycle. Time is virtual: a cycle costs ``cycle_ms``.
"""

from __future__ import annotations

import random
from typing import Iterable

from fuzzsched.coverage import Branch, SeedCoverage, canonical_payload, content_hash
from fuzzsched.runtime.base import CycleResult, Fuzzer
from fuzzsched.runtime.target import SyntheticTarget
from fuzzsched.seed_pool import SeedRecord

HANG = "hang"
CRASH = "crash"


class LocalCoverage:
    """Branches held by one fuzzer's local pool and what they make reachable."""

    def __init__(self, target: SyntheticTarget):
        self.target = target
        self.entries = frozenset(target.entries)
        self.branches: set[Branch] = set()
        self.blocks: set[int] = set()
        self.parent: dict[int, Branch] = {}
        self.frontier: set[Branch] = set()
        self._cover_blocks(target.entries)

    def _cover_blocks(self, blocks: Iterable[int]) -> None:
        for blk in blocks:
            if blk in self.blocks:
                continue
            self.blocks.add(blk)
            for e in self.target.out_edges.get(blk, ()):
                if e not in self.branches:
                    self.frontier.add(e)

    def add(self, branches: Iterable[Branch]) -> None:
        new_blocks = []
        for b in sorted(set(branches)):
            if b in self.branches:
                continue
            self.branches.add(b)
            self.frontier.discard(b)
            if b.succ not in self.parent and b.succ not in self.entries:
                self.parent[b.succ] = b
            new_blocks.append(b.pred)
            new_blocks.append(b.succ)
        self._cover_blocks(new_blocks)

    def path_to(self, block: int) -> list[Branch]:
        """Locally covered branches leading from an entry block to ``block``."""
        path = []
        seen = set()
        while block in self.parent and block not in seen:
            seen.add(block)
            b = self.parent[block]
            path.append(b)
            block = b.pred
        path.reverse()
        return path


def sim_one_cycle(
    target: SyntheticTarget,
    fuzzer: int,
    local: LocalCoverage,
    rng: random.Random,
    round_no: int = 0,
    seed_prefix: str = "",
) -> tuple[list[tuple[bytes, SeedCoverage]], int]:
    """One fuzzing cycle. Does not mutate ``local``; the caller applies the seeds."""
    table = target.table(fuzzer, round_no)
    seeds = []
    for b in sorted(local.frontier):
        p = table.get(b)
        if p <= 0.0 or rng.random() >= p:
            continue
        cov = local.path_to(b.pred)
        cov.append(b)
        payload = canonical_payload(cov)
        seeds.append((payload, SeedCoverage.of(f"{seed_prefix}{len(seeds)}", cov)))
    return seeds, target.cycle_time(fuzzer)


class SimulatedFuzzer(Fuzzer):
    """In-process fuzzer whose duration is virtual.

    ``faults`` maps a 1-based selection count to ``"hang"`` or ``"crash"``;
    the fault hits the second cycle of that run (the first if only one runs),
    so partial results from the first cycle are delivered.
    """

    kind = "simulated"

    def __init__(
        self,
        index: int,
        target: SyntheticTarget,
        rng: random.Random,
        name: str | None = None,
        faults: dict[int, str] | None = None,
    ):
        super().__init__(index, name)
        self.target = target
        self.rng = rng
        self.local = LocalCoverage(target)
        self.faults = dict(faults or {})
        self.selections = 0
        self.restarts = 0
        self._emitted = 0

    def _run(self, n: int, timeout_ms: int, round_no: int) -> CycleResult:
        self.selections += 1
        fault = self.faults.get(self.selections)
        fault_at = min(1, n - 1)
        result = CycleResult(duration=0)
        elapsed = 0
        for j in range(n):
            if elapsed >= timeout_ms:
                self.watchdog_skip()
                break
            if fault and j == fault_at:
                if fault == HANG:
                    # the cycle never finishes; the watchdog cuts it at the deadline
                    elapsed = max(elapsed, timeout_ms)
                    self.watchdog_skip()
                else:
                    self.mark_crashed()
                break
            seeds, d = sim_one_cycle(
                self.target, self.index, self.local, self.rng, round_no, f"{self.index}:{self._emitted}:"
            )
            self._emitted += 1
            for payload, cov in seeds:
                self.local.add(cov.branches)
                self.local_hashes.add(content_hash(payload))
            result.new_seeds.extend(seeds)
            elapsed += d
            result.cycles_completed += 1
        result.duration = max(1, elapsed)
        return result

    def _import(self, records: list[SeedRecord]) -> None:
        for r in records:
            self.local.add(r.coverage.branches)

    def _restart(self) -> None:
        self.restarts += 1
