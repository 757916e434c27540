"""Builtin synthetic targets used by the examples and the experiment harness.

Targets are built from a few shapes:

* a *gate ladder*: a sequence of hard branches ("gates"), each unlocking a
  subtree of easy branches that contains the pred block of the next gate;
* a *dribble chain*: a long linear chain where each branch is moderately easy,
  so a fuzzer working on it finds one new branch per cycle or so but never
  anything else.

Ordinary branches get a per-branch base probability drawn log-uniformly from
``[0.02, 0.6]``; a fuzzer's solve probability is that base scaled by its
``easy`` skill. Gates and chain links use the fuzzer's flat ``gate`` and
``chain`` probabilities. All construction is driven by a seeded
``random.Random`` so every builtin target is reproducible.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from fuzzsched.coverage import Branch
from fuzzsched.runtime.target import Phase, ProbTable, SyntheticTarget

ENTRY = 0
EASY_RANGE = (0.02, 0.6)


@dataclass(frozen=True)
class Skill:
    gate: float
    easy: float
    chain: float = 0.0
    alt_gate: float | None = None  # probability on odd (alternate-kind) gates

    @property
    def odd_gate(self) -> float:
        return self.gate if self.alt_gate is None else self.alt_gate


class _Builder:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.next_block = 1
        self.branches: list[Branch] = []
        self.gates: list[Branch] = []
        self.odd_gates: set[Branch] = set()
        self.chain: list[Branch] = []
        self.base: dict[Branch, float] = {}

    def block(self) -> int:
        b = self.next_block
        self.next_block += 1
        return b

    def edge(self, pred: int, succ: int) -> Branch:
        b = Branch(pred, succ)
        self.branches.append(b)
        lo, hi = EASY_RANGE
        self.base[b] = math.exp(self.rng.uniform(math.log(lo), math.log(hi)))
        return b

    def subtree(self, root: int, size: int) -> list[int]:
        nodes = [root]
        for _ in range(size):
            parent = self.rng.choice(nodes)
            child = self.block()
            self.edge(parent, child)
            nodes.append(child)
        return nodes

    def gate_ladder(self, start: int, gates: int, subtree: int) -> None:
        anchor = start
        for k in range(gates):
            root = self.block()
            gate = self.edge(anchor, root)
            self.gates.append(gate)
            if k % 2:
                self.odd_gates.add(gate)
            nodes = self.subtree(root, subtree)
            anchor = self.rng.choice(nodes[len(nodes) // 2 :])

    def dribble_chain(self, start: int, length: int) -> None:
        prev = start
        for _ in range(length):
            nxt = self.block()
            self.chain.append(self.edge(prev, nxt))
            prev = nxt

    def tables(self, skills: list[Skill]) -> dict[int, ProbTable]:
        out = {}
        for i, s in enumerate(skills):
            explicit = {b: min(1.0, p * s.easy) for b, p in self.base.items()}
            explicit.update({g: s.odd_gate if g in self.odd_gates else s.gate for g in self.gates})
            explicit.update({c: s.chain for c in self.chain})
            out[i] = ProbTable(default=0.0, explicit=explicit)
        return out


def gate_ladder_target(
    skills: list[Skill],
    cycle_ms: list[int],
    gates: int = 12,
    subtree: int = 12,
    shallow: int = 8,
    chain: int = 0,
    ladders: int = 1,
    seed: int = 0,
    name: str = "ladder",
) -> SyntheticTarget:
    """Entry -> shallow easy region; gate ladders and an optional dribble chain hang off it."""
    b = _Builder(seed)
    root = b.block()
    first = b.edge(ENTRY, root)
    nodes = b.subtree(root, shallow)
    for _ in range(ladders):
        b.gate_ladder(b.rng.choice(nodes), gates, subtree)
    if chain:
        b.dribble_chain(b.rng.choice(nodes), chain)
    return SyntheticTarget(
        entries=(ENTRY,),
        branches=tuple(b.branches),
        solve_prob=b.tables(skills),
        cycle_ms={i: ms for i, ms in enumerate(cycle_ms)},
        corpus=[(first,)],
        name=name,
    )


def breakthrough_example(seed: int = 0) -> SyntheticTarget:
    """One gate ``g`` (hard for fuzzer 0, moderate for fuzzer 1) guarding a 20-branch subtree."""
    b = _Builder(seed)
    g = b.edge(ENTRY, b.block())
    b.subtree(g.succ, 20)
    tables = {
        0: ProbTable(default=0.5, explicit={g: 1e-6}),
        1: ProbTable(default=0.5, explicit={g: 0.2}),
    }
    return SyntheticTarget((ENTRY,), tuple(b.branches), tables, {0: 1000, 1: 1000}, name="breakthrough")


# -- experiment suites -------------------------------------------------------

STRONG = Skill(gate=0.05, easy=1.0)
MEDIUM = Skill(gate=0.015, easy=0.4)
WEAK = Skill(gate=0.002, easy=0.12)
# complementary pair: each is good at the gates the other cannot open
LEAD = Skill(gate=0.05, easy=1.0, alt_gate=0.001)
PARTNER = Skill(gate=0.001, easy=0.8, alt_gate=0.05)


def breakthrough_suite(n: int = 3, seed: int = 0) -> list[SyntheticTarget]:
    """Five-fuzzer gate ladders: two complementary gate specialists, three weak fuzzers.

    Consecutive gates of a ladder alternate between the specialists, so a
    ladder is only climbed quickly when seeds flow between them. The
    specialists' roster positions rotate across targets.
    """
    out = []
    for i in range(n):
        skills = [WEAK] * 5
        lead = (2 * i + 1) % 5
        skills[lead] = LEAD
        skills[(lead + 2) % 5] = PARTNER
        cycle = [20_000, 15_000, 25_000, 20_000, 30_000]
        out.append(
            gate_ladder_target(skills, cycle, gates=8, subtree=12, ladders=4, seed=seed * 100 + i, name=f"breakthrough{i}")
        )
    return out


def heterogeneous_suite(n: int = 3, seed: int = 0) -> list[SyntheticTarget]:
    """Targets mixing a long dribble chain with a gate ladder.

    Fuzzer 0 crawls the chain (frequent, cheap, low-interval finds); fuzzer 1
    opens gates (rare, high-interval finds that unlock subtrees) but is poor
    at easy branches; fuzzer 2 is mediocre at everything.
    """
    out = []
    for i in range(n):
        skills = [
            Skill(gate=0.001, easy=0.5, chain=0.6),
            Skill(gate=0.08, easy=0.2),
            Skill(gate=0.005, easy=0.3, chain=0.1),
        ]
        out.append(
            gate_ladder_target(
                skills,
                [15_000, 20_000, 20_000],
                gates=14,
                subtree=12,
                chain=200,
                seed=seed * 100 + 50 + i,
                name=f"heterogeneous{i}",
            )
        )
    return out


def nonstationary_target(switch_round: int, seed: int = 0) -> SyntheticTarget:
    """Two useful fuzzers whose skills swap at ``switch_round``, plus a weak one."""
    skills = [STRONG, WEAK, WEAK]
    base = gate_ladder_target(skills, [20_000, 20_000, 20_000], gates=20, subtree=10, seed=seed + 900, name="nonstationary")
    swapped = {0: base.solve_prob[1], 1: base.solve_prob[0]}
    return SyntheticTarget(
        entries=base.entries,
        branches=base.branches,
        solve_prob=base.solve_prob,
        cycle_ms=base.cycle_ms,
        phase_schedule=[Phase(switch_round, swapped)],
        corpus=base.corpus,
        name=base.name,
    )


def builtin(name: str) -> SyntheticTarget:
    """Look up a builtin target by name, e.g. ``breakthrough-0`` or ``heterogeneous-2``."""
    family, _, idx = name.partition("-")
    i = int(idx or 0)
    if family == "breakthrough":
        return breakthrough_suite(i + 1)[i]
    if family == "heterogeneous":
        return heterogeneous_suite(i + 1)[i]
    if family == "nonstationary":
        return nonstationary_target(switch_round=i or 300)
    if family == "example":
        return breakthrough_example()
    raise KeyError(f"unknown builtin target {name!r}")
