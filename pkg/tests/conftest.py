from __future__ import annotations

import random

import pytest

from fuzzsched.coverage import Branch
from fuzzsched.runtime.target import ProbTable, SyntheticTarget

ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def make_target(edges, probs, cycle_ms=None, entries=(0,), corpus=(), name="t", phases=()):
    """Small target from ``[(pred, succ)]`` and ``{fuzzer: default_p or ProbTable}``."""
    tables = {f: p if isinstance(p, ProbTable) else ProbTable(default=p) for f, p in probs.items()}
    return SyntheticTarget(
        entries=tuple(entries),
        branches=tuple(Branch(*e) for e in edges),
        solve_prob=tables,
        cycle_ms=cycle_ms or {f: 1000 for f in probs},
        phase_schedule=list(phases),
        corpus=[tuple(Branch(*b) for b in seed) for seed in corpus],
        name=name,
    )


def random_dag(rng: random.Random, n_blocks: int, n_branches: int) -> list[tuple[int, int]]:
    """Random acyclic branch list over blocks 0..n_blocks-1 where every pred is reachable from 0."""
    edges = set()
    for b in range(1, n_blocks):
        edges.add((rng.randrange(b), b))
    while len(edges) < n_branches:
        a, b = sorted(rng.sample(range(n_blocks), 2))
        edges.add((a, b))
    return sorted(edges)


@pytest.fixture
def chain_target():
    """A -> B -> C, solved with certainty by its only fuzzer."""
    return make_target([(0, 1), (1, 2)], {0: 1.0})


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = marker.args
    status = "PASS" if rep.passed else "FAIL"
    detail = getattr(item, "criterion_detail", "")
    ACCEPTANCE[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[number]
        line = f"criterion {number:2d} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
