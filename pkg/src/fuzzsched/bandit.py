"""Thompson sampling over Beta-Bernoulli arms, with binary reward discretization
and a full reset of the posterior.

All randomness comes from an explicit ``random.Random``. Beta draws use
``Random.betavariate`` (gamma-ratio method from the standard library), one draw
per arm in index order; ties draw one extra ``Random.choice``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence


@dataclass
class ArmState:
    alpha: float = 1.0
    beta: float = 1.0

    @property
    def updates(self) -> int:
        return round(self.alpha + self.beta - 2)

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def __str__(self) -> str:
        return f"{self.alpha:g},{self.beta:g}"


@dataclass
class BanditState:
    arms: list[ArmState]
    rng: random.Random = field(default_factory=random.Random)

    @classmethod
    def create(cls, k: int, seed: int | None = None) -> "BanditState":
        if k < 1:
            raise ValueError("a bandit needs at least one arm")
        return cls([ArmState() for _ in range(k)], random.Random(seed))

    @property
    def k(self) -> int:
        return len(self.arms)


def argmax_random_tie(values: Sequence[float], rng: random.Random) -> int:
    best = max(values)
    tied = [i for i, v in enumerate(values) if v == best]
    if len(tied) == 1:
        return tied[0]
    return rng.choice(tied)


def sample_thetas(state: BanditState) -> list[float]:
    return [state.rng.betavariate(arm.alpha, arm.beta) for arm in state.arms]


def select(state: BanditState) -> int:
    """Sample every arm's posterior and return the index of the largest draw."""
    return argmax_random_tie(sample_thetas(state), state.rng)


def discretize(r: float, rng: random.Random) -> int:
    """Bernoulli(r) draw turning a continuous reward into 0 or 1."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"reward {r} outside [0, 1]")
    return 1 if rng.random() < r else 0


def clamp_unit(r: float) -> float:
    return min(1.0, max(0.0, r))


def update(state: BanditState, arm: int, r_hat: int) -> BanditState:
    if not 0 <= arm < state.k:
        raise IndexError(f"arm {arm} out of range for {state.k} arms")
    if r_hat not in (0, 1):
        raise ValueError(f"discretized reward must be 0 or 1, got {r_hat}")
    a = state.arms[arm]
    a.alpha += r_hat
    a.beta += 1 - r_hat
    return state


def reset(state: BanditState) -> BanditState:
    for a in state.arms:
        a.alpha = 1.0
        a.beta = 1.0
    return state
