"""Fuzzer selection policies. ``ts`` is the real one; the rest are baselines."""

from __future__ import annotations

from fuzzsched import bandit
from fuzzsched.bandit import BanditState

SCHEDULERS = ("ts", "random", "greedy", "round_robin")


def select_fuzzer(kind: str, state: BanditState, round_no: int) -> int:
    if kind == "ts":
        return bandit.select(state)
    if kind == "random":
        return state.rng.randrange(state.k)
    if kind == "greedy":
        return bandit.argmax_random_tie([a.mean for a in state.arms], state.rng)
    if kind == "round_robin":
        return (round_no - 1) % state.k
    raise ValueError(f"unknown scheduler {kind!r}")
