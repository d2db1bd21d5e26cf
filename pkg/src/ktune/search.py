"""Search strategies: full, random, simulated annealing and discrete PSO.

Every strategy drives an ``evaluator(config) -> float`` callback returning the
execution time in milliseconds, or ``math.inf`` when the configuration failed.
Evaluations are cached per run; only first-time evaluations consume budget.
"""

from __future__ import annotations

import math
import random
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptySpace, InvalidProbabilities, InvalidStrategy, NonPositiveTemperature
from .space import Configuration, SearchSpace

Evaluator = Callable[[Configuration], float]

STRATEGIES = ("full", "random", "annealing", "pso")

# Hard cap on total steps (cached revisits included), as a multiple of budget.
STEP_CAP_FACTOR = 50

# Cooling never takes the temperature below this fraction of its start value.
MIN_TEMPERATURE_FRACTION = 0.05

PSO_REDRAWS = 100


def as_fraction(value) -> Fraction:
    """Accept ``Fraction``, ints, floats or strings like ``"1/32"``."""
    if isinstance(value, float):
        return Fraction(value).limit_denominator(1 << 20)
    return Fraction(value)


def budget(space_size: int, fraction) -> int:
    if space_size < 1:
        raise EmptySpace("space has no valid configurations")
    return max(1, math.floor(space_size * as_fraction(fraction)))


def sa_acceptance(t: float, t_prime: float, temperature: float) -> float:
    """Probability of moving from a configuration timed ``t`` to one timed ``t_prime``."""
    if not temperature > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    if t_prime < t:
        return 1.0
    return math.exp(-(t_prime - t) / temperature)


def annealing_temperature(initial: float, evaluated: int, budget_: int) -> float:
    """Linear cooling over the unique-evaluation budget, floored."""
    return max(initial * (1 - evaluated / budget_), MIN_TEMPERATURE_FRACTION * initial)


@dataclass(frozen=True)
class StrategySpec:
    kind: str = "full"
    fraction: Fraction = Fraction(1)
    temperature: float = 4.0
    alpha: float = 0.4
    beta: float = 0.0
    gamma: float = 0.4
    swarm_size: int = 3

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise InvalidStrategy(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        object.__setattr__(self, "fraction", as_fraction(self.fraction))
        if not 0 < self.fraction <= 1:
            raise InvalidStrategy(f"fraction must be in (0, 1], got {self.fraction}")
        if self.kind == "annealing" and not self.temperature > 0:
            raise NonPositiveTemperature(f"temperature must be positive, got {self.temperature}")
        if self.kind == "pso":
            _check_probabilities(self.alpha, self.beta, self.gamma)
            if self.swarm_size < 1:
                raise InvalidStrategy("swarm size must be at least 1")


def _check_probabilities(alpha: float, beta: float, gamma: float):
    if any(not 0 <= p <= 1 for p in (alpha, beta, gamma)) or alpha + beta + gamma > 1 + 1e-12:
        raise InvalidProbabilities(
            f"need alpha, beta, gamma in [0, 1] with sum <= 1, got {alpha}, {beta}, {gamma}"
        )


@dataclass(frozen=True)
class TraceEntry:
    step: int
    config: Configuration
    time: float  # math.inf for failed evaluations
    best_so_far: float
    particle: int | None = None

    @property
    def failed(self) -> bool:
        return math.isinf(self.time)


@dataclass
class SearchOutcome:
    best: Configuration | None
    best_time: float
    trace: list[TraceEntry]
    budget: int
    steps: int

    @property
    def unique(self) -> int:
        return len(self.trace)

    @property
    def failures(self) -> int:
        return sum(e.failed for e in self.trace)


class _Session:
    """Evaluation cache, trace and budget accounting shared by all strategies."""

    def __init__(self, evaluator: Evaluator, budget_: int):
        self.evaluator = evaluator
        self.budget = budget_
        self.cache: dict[Configuration, float] = {}
        self.trace: list[TraceEntry] = []
        self.best: Configuration | None = None
        self.best_time = math.inf
        self.steps = 0

    @property
    def unique(self) -> int:
        return len(self.trace)

    @property
    def exhausted(self) -> bool:
        return self.unique >= self.budget or self.steps >= STEP_CAP_FACTOR * self.budget

    def measure(self, config: Configuration, particle: int | None = None) -> float:
        if config in self.cache:
            return self.cache[config]
        t = float(self.evaluator(config))
        if math.isnan(t) or t <= 0:
            t = math.inf
        self.cache[config] = t
        # Strict comparison: the earliest of equal times stays best.
        if t < self.best_time:
            self.best, self.best_time = config, t
        self.trace.append(TraceEntry(len(self.trace), config, t, self.best_time, particle))
        return t

    def outcome(self) -> SearchOutcome:
        return SearchOutcome(self.best, self.best_time, self.trace, self.budget, self.steps)


def _space_size(space: SearchSpace) -> int:
    return space.count() if space.enumerable else space.raw_size


def _check_nonempty(space: SearchSpace):
    if space.enumerable and space.count() == 0:
        raise EmptySpace("search space has no valid configurations")


def run_full(space: SearchSpace, evaluator: Evaluator) -> SearchOutcome:
    valid = space.enumerate_valid()
    if not valid:
        raise EmptySpace("search space has no valid configurations")
    session = _Session(evaluator, len(valid))
    for config in valid:
        session.steps += 1
        session.measure(config)
    return session.outcome()


def run_random(space: SearchSpace, evaluator: Evaluator, fraction, seed: int) -> SearchOutcome:
    _check_nonempty(space)
    n = budget(_space_size(space), fraction)
    rng = random.Random(seed)
    session = _Session(evaluator, n)
    for config in space.sample_unique(n, rng):
        session.steps += 1
        session.measure(config)
    return session.outcome()


def run_annealing(
    space: SearchSpace, evaluator: Evaluator, temperature: float, fraction, seed: int
) -> SearchOutcome:
    if not temperature > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    _check_nonempty(space)
    n = budget(_space_size(space), fraction)
    rng = random.Random(seed)
    session = _Session(evaluator, n)

    current = space.random_valid(rng)
    session.steps += 1
    t = session.measure(current)
    while not session.exhausted:
        session.steps += 1
        candidate = space.random_neighbor(current, rng)
        t_new = session.measure(candidate)
        if math.isinf(t):
            p = 1.0  # a failed current state is always left
        elif math.isinf(t_new):
            p = 0.0
        else:
            p = sa_acceptance(t, t_new, annealing_temperature(temperature, session.unique, n))
        if rng.random() < p:
            current, t = candidate, t_new
    return session.outcome()


def pso_move(
    x: Mapping[str, int],
    p: Mapping[str, int],
    g: Mapping[str, int],
    alpha: float,
    beta: float,
    gamma: float,
    space: SearchSpace,
    rng: random.Random,
) -> Configuration:
    """Discrete accelerated-PSO position update, applied per parameter.

    Each dimension independently takes a random value (alpha), the personal
    best (beta), the swarm best (gamma) or keeps its current value. Invalid
    composites are redrawn; after ``PSO_REDRAWS`` redraws ``x`` is returned.
    """
    _check_probabilities(alpha, beta, gamma)
    x = space.configuration(x)
    ab = alpha + beta
    abg = ab + gamma
    for _ in range(PSO_REDRAWS + 1):
        values = []
        for param in space.parameters:
            u = rng.random()
            if u < alpha:
                values.append(param.values[rng.randrange(len(param.values))])
            elif u < ab:
                values.append(p[param.name])
            elif u < abg:
                values.append(g[param.name])
            else:
                values.append(x[param.name])
        candidate = Configuration(space.names, tuple(values))
        if space.satisfies(candidate):
            return candidate
    return x


def run_pso(
    space: SearchSpace,
    evaluator: Evaluator,
    swarm_size: int,
    alpha: float,
    beta: float,
    gamma: float,
    fraction,
    seed: int,
) -> SearchOutcome:
    if swarm_size < 1:
        raise InvalidStrategy("swarm size must be at least 1")
    _check_probabilities(alpha, beta, gamma)
    _check_nonempty(space)
    n = budget(_space_size(space), fraction)
    rng = random.Random(seed)
    session = _Session(evaluator, n)

    positions = [space.random_valid(rng) for _ in range(swarm_size)]
    personal: list[Configuration | None] = [None] * swarm_size
    personal_time = [math.inf] * swarm_size
    while not session.exhausted:
        i = session.steps % swarm_size
        session.steps += 1
        x = positions[i]
        t = session.measure(x, particle=i)
        if t < personal_time[i]:
            personal[i], personal_time[i] = x, t
        g = session.best if session.best is not None else x
        p = personal[i] if personal[i] is not None else x
        positions[i] = pso_move(x, p, g, alpha, beta, gamma, space, rng)
    return session.outcome()


def run_search(space: SearchSpace, evaluator: Evaluator, spec: StrategySpec, seed: int = 0):
    if spec.kind == "full":
        return run_full(space, evaluator)
    if spec.kind == "random":
        return run_random(space, evaluator, spec.fraction, seed)
    if spec.kind == "annealing":
        return run_annealing(space, evaluator, spec.temperature, spec.fraction, seed)
    return run_pso(
        space, evaluator, spec.swarm_size, spec.alpha, spec.beta, spec.gamma, spec.fraction, seed
    )
