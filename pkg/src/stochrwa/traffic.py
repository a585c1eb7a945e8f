"""Random traffic generation: arrival batches, holding times, scenario samples.

Batch sizes are Poisson, requests are spread uniformly over ordered node
pairs, and holding times are exponential, rounded up to whole stages (adds
and drops happen at stage boundaries).  All samplers are pure functions of
``(params, rng)``; callers pass explicitly seeded, counter-based generators
(see :func:`make_rng`) so every experiment is replayable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

Pair = tuple[int, int]


@dataclass(frozen=True)
class TrafficParams:
    """Traffic distribution parameters.

    ``arrival_rate`` is the mean batch size per stage (Poisson).
    ``holding_rate`` parameterizes the exponential holding time, whose mean
    is ``1 / holding_rate`` stages before rounding up.  Requests are spread
    uniformly over ordered node pairs (s, d), s != d.
    """

    arrival_rate: float
    holding_rate: float

    def __post_init__(self) -> None:
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate must be positive")
        if self.holding_rate <= 0:
            raise ValueError("holding_rate must be positive")

    @property
    def mean_holding_stages(self) -> float:
        return 1.0 / self.holding_rate


@dataclass(frozen=True)
class DemandMatrix:
    """Requested-lightpath counts per ordered node pair.

    Pairs with zero count are not stored; the support is exactly the set of
    pairs with at least one request.
    """

    counts: tuple[tuple[Pair, int], ...]

    @classmethod
    def from_mapping(cls, counts: dict[Pair, int] | Iterable[tuple[Pair, int]]) -> "DemandMatrix":
        items = dict(counts)
        for (s, d), c in items.items():
            if s == d:
                raise ValueError(f"demand pair ({s},{d}) has equal endpoints")
            if c < 0:
                raise ValueError(f"negative demand for pair ({s},{d})")
        return cls(tuple(sorted((pair, c) for pair, c in items.items() if c > 0)))

    def as_dict(self) -> dict[Pair, int]:
        return dict(self.counts)

    @property
    def pairs(self) -> tuple[Pair, ...]:
        return tuple(pair for pair, _ in self.counts)

    def count(self, pair: Pair) -> int:
        return dict(self.counts).get(pair, 0)

    @property
    def total(self) -> int:
        return sum(c for _, c in self.counts)

    def __bool__(self) -> bool:
        return bool(self.counts)


@dataclass(frozen=True)
class ScenarioSample:
    """An i.i.d. Monte Carlo sample of future one-stage demand batches."""

    scenarios: tuple[DemandMatrix, ...]
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def to_json(self, stream: IO[str] | None = None) -> str:
        payload = {
            "seed": self.seed,
            "scenarios": [
                {f"{s},{d}": c for (s, d), c in matrix.counts} for matrix in self.scenarios
            ],
        }
        text = json.dumps(payload, indent=2, sort_keys=True)
        if stream is not None:
            stream.write(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSample":
        payload = json.loads(text)
        scenarios = []
        for entry in payload["scenarios"]:
            counts: dict[Pair, int] = {}
            for key, c in entry.items():
                s, d = key.split(",")
                counts[(int(s), int(d))] = int(c)
            scenarios.append(DemandMatrix.from_mapping(counts))
        return cls(tuple(scenarios), payload.get("seed"))


def make_rng(*entropy: int) -> np.random.Generator:
    """Counter-based generator keyed by an explicit entropy tuple.

    Philox is counter-based, so disjoint keys give statistically independent,
    replayable streams; there is no global RNG anywhere in the package.
    """
    return np.random.Generator(np.random.Philox(key=np.random.SeedSequence(entropy).generate_state(2, np.uint64)))


def _random_pair(num_nodes: int, rng: np.random.Generator) -> Pair:
    s = int(rng.integers(num_nodes))
    d = int(rng.integers(num_nodes - 1))
    if d >= s:
        d += 1
    return s, d


def sample_batch(params: TrafficParams, num_nodes: int, rng: np.random.Generator) -> DemandMatrix:
    """One stage's arrival batch, aggregated into a demand matrix.

    Draws the batch size from Poisson(``arrival_rate``), then assigns each
    request to a uniformly random ordered pair.
    """
    if num_nodes < 2:
        raise ValueError("need at least two nodes to draw node pairs")
    n = int(rng.poisson(params.arrival_rate))
    counts: dict[Pair, int] = {}
    for _ in range(n):
        pair = _random_pair(num_nodes, rng)
        counts[pair] = counts.get(pair, 0) + 1
    return DemandMatrix.from_mapping(counts)


def sample_requests(
    params: TrafficParams, num_nodes: int, rng: np.random.Generator
) -> list[tuple[Pair, int]]:
    """One stage's arrivals as individual ``(pair, holding_stages)`` requests.

    Same arrival law as :func:`sample_batch` but keeps per-request identity,
    which simulations need to attach holding times at arrival time.
    """
    if num_nodes < 2:
        raise ValueError("need at least two nodes to draw node pairs")
    n = int(rng.poisson(params.arrival_rate))
    return [(_random_pair(num_nodes, rng), sample_holding(params, rng)) for _ in range(n)]


def sample_holding(params: TrafficParams, rng: np.random.Generator) -> int:
    """Holding time in whole stages: ``ceil`` of an exponential draw, >= 1."""
    draw = rng.exponential(1.0 / params.holding_rate)
    return max(1, int(np.ceil(draw)))


def sample_scenarios(
    params: TrafficParams,
    num_nodes: int,
    count: int,
    rng: np.random.Generator,
    seed: int | None = None,
) -> ScenarioSample:
    """``count`` independent one-stage demand batches."""
    if count < 1:
        raise ValueError("scenario count must be >= 1")
    return ScenarioSample(
        tuple(sample_batch(params, num_nodes, rng) for _ in range(count)), seed
    )


def ceil_exponential_mean(rate: float) -> float:
    """Exact mean of ``ceil(Exp(rate))``: sum_k k (e^{-r(k-1)} - e^{-rk})."""
    return 1.0 / (1.0 - np.exp(-rate))
