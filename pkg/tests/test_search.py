import math
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ktune.backend import SyntheticModelSpec, synthetic_time
from ktune.errors import (
    BudgetExceedsSpace,
    EmptySpace,
    InvalidProbabilities,
    InvalidStrategy,
    NonPositiveTemperature,
)
from ktune.search import (
    StrategySpec,
    annealing_temperature,
    budget,
    pso_move,
    run_annealing,
    run_full,
    run_pso,
    run_random,
    run_search,
    sa_acceptance,
)
from ktune.space import SearchSpace

HASH = SyntheticModelSpec("hash-random", noise_seed=11)


def small_space():
    space = SearchSpace()
    space.add_parameter("A", [1, 2, 4, 8, 16]).add_parameter("B", [1, 2, 4, 8])
    space.add_parameter("C", [0, 1, 2]).add_parameter("D", [1, 3, 5, 7, 9])
    space.add_constraint("A * B <= 64")
    return space


def model(config):
    return synthetic_time(config, HASH)


def test_budget_examples():
    assert budget(3424, Fraction(1, 32)) == 107
    assert budget(241600, "1/2048") == 117
    assert budget(10, 1) == 10
    assert budget(5, Fraction(1, 100)) == 1


def test_sa_acceptance_examples():
    assert sa_acceptance(10, 8, 4) == 1
    assert abs(sa_acceptance(8, 10, 2) - math.exp(-1)) < 1e-12
    assert sa_acceptance(8, 8, 4) == 1
    with pytest.raises(NonPositiveTemperature):
        sa_acceptance(8, 10, 0)


@given(st.floats(0.01, 1e3), st.floats(0.01, 1e3), st.floats(0.01, 100))
def test_sa_acceptance_range(t, tp, T):
    p = sa_acceptance(t, tp, T)
    assert 0 < p <= 1 or (p == 0 and (tp - t) / T > 700)
    assert (p == 1) == (tp <= t) or (tp > t and (tp - t) / T < 1e-15)


def test_cooling_schedule():
    assert annealing_temperature(4, 0, 100) == 4
    assert annealing_temperature(4, 50, 100) == pytest.approx(2)
    assert annealing_temperature(4, 100, 100) == pytest.approx(0.2)


def test_strategy_spec_validation():
    with pytest.raises(InvalidStrategy):
        StrategySpec("genetic")
    with pytest.raises(InvalidProbabilities):
        StrategySpec("pso", alpha=0.6, gamma=0.6)
    with pytest.raises(NonPositiveTemperature):
        StrategySpec("annealing", temperature=-1)


def test_pso_move_degenerate_branches():
    space = small_space()
    rng = random.Random(0)
    x, p, g = space.enumerate_valid()[0], space.enumerate_valid()[5], space.enumerate_valid()[-1]
    for _ in range(50):
        assert pso_move(x, p, g, 0, 0, 0, space, rng) == x
        assert pso_move(x, p, g, 0, 0, 1, space, rng) == g
        assert pso_move(x, p, g, 0, 1, 0, space, rng) == p
    with pytest.raises(InvalidProbabilities):
        pso_move(x, p, g, 0.5, 0.3, 0.3, space, rng)


def test_pso_move_frequencies_match_mixture():
    n = 8
    space = SearchSpace().add_parameter("V", list(range(n)))
    x, g = {"V": 0}, {"V": 7}
    rng = random.Random(42)
    trials = 20000
    counts = Counter(pso_move(x, x, g, 0.4, 0, 0.4, space, rng)["V"] for _ in range(trials))
    # random branch picks any value, including x's and g's
    assert abs(counts[7] / trials - (0.4 + 0.4 / n)) < 0.015
    assert abs(counts[0] / trials - (0.2 + 0.4 / n)) < 0.015
    for v in range(1, 7):
        assert abs(counts[v] / trials - 0.4 / n) < 0.01


def test_pso_move_returns_x_when_redraws_fail():
    space = SearchSpace().add_parameter("A", [1, 2]).add_parameter("B", [1, 2])
    space.add_constraint("A == B")
    x, g = {"A": 1, "B": 1}, {"A": 2, "B": 2}
    # Mixing one dimension from each is invalid, so gamma=0.5 often has to redraw.
    rng = random.Random(1)
    outs = {pso_move(x, x, g, 0, 0, 0.5, space, rng).encode() for _ in range(200)}
    assert outs <= {"A=1;B=1", "A=2;B=2"}


def test_full_search_is_brute_force_minimum():
    space = small_space()
    out = run_full(space, model)
    brute = min(model(c) for c in space.enumerate_valid())
    assert out.best_time == brute
    assert out.unique == space.count() == len(out.trace)


def test_full_search_all_failed():
    space = small_space()
    out = run_full(space, lambda c: math.inf)
    assert out.best is None and out.failures == space.count()


def test_random_full_fraction_matches_full():
    space = small_space()
    assert run_random(space, model, 1, seed=3).best_time == run_full(space, model).best_time


def test_random_budget_exceeds_space_surfaces():
    space = SearchSpace().add_parameter("A", [1, 2, 3])
    with pytest.raises(BudgetExceedsSpace):
        space.sample_unique(4, random.Random(0))


def test_empty_space_raises():
    space = SearchSpace().add_parameter("A", [1, 2]).add_constraint("A > 5")
    for spec in (StrategySpec("full"), StrategySpec("random"), StrategySpec("annealing"), StrategySpec("pso")):
        with pytest.raises(EmptySpace):
            run_search(space, model, spec, 0)


def test_annealing_budget_one():
    space = small_space()
    out = run_annealing(space, model, 4, Fraction(1, space.count()), seed=9)
    assert out.unique == 1 and out.best_time == out.trace[0].time


def test_annealing_finds_needle_with_full_fraction():
    space = SearchSpace().add_parameter("A", list(range(6))).add_parameter("B", list(range(5)))
    needle = {"A": 4, "B": 1}

    def ev(c):
        return 1.0 if dict(c) == needle else 100.0

    for seed in range(5):
        assert run_annealing(space, ev, 4, 1, seed).best_time == 1.0


def test_annealing_escapes_failed_start():
    space = SearchSpace().add_parameter("A", list(range(10)))
    out = run_annealing(space, lambda c: math.inf if c["A"] < 5 else float(c["A"]), 2, 1, seed=0)
    assert out.best_time == 5.0


def test_pso_particles_share_budget():
    space = SearchSpace().add_parameter("A", list(range(30))).add_parameter("B", list(range(30)))
    out = run_pso(space, model, 3, 0.4, 0, 0.4, Fraction(9, 900), seed=2)
    assert out.unique == 9
    assert {e.particle for e in out.trace} == {0, 1, 2}


def test_pso_single_particle_random_walk_covers_budget():
    space = small_space()
    out = run_pso(space, model, 1, 1.0, 0, 0, Fraction(1, 2), seed=0)
    assert out.unique == budget(space.count(), Fraction(1, 2))


@pytest.mark.parametrize("kind", ["random", "annealing", "pso"])
def test_deterministic_per_seed(kind):
    space = small_space()
    spec = StrategySpec(kind, fraction=Fraction(1, 4))
    a = run_search(space, model, spec, 17)
    b = run_search(space, model, spec, 17)
    assert [(e.config, e.time) for e in a.trace] == [(e.config, e.time) for e in b.trace]


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["random", "annealing", "pso"]),
    st.integers(0, 10**6),
    st.sampled_from([Fraction(1, 20), Fraction(1, 4), Fraction(1, 2), Fraction(1)]),
)
def test_search_invariants(kind, seed, fraction):
    space = small_space()
    calls = Counter()

    def ev(c):
        calls[c] += 1
        return math.inf if c["C"] == 2 and c["D"] == 9 else model(c)

    out = run_search(space, ev, StrategySpec(kind, fraction=fraction, swarm_size=3), seed)
    n = budget(space.count(), fraction)
    assert max(calls.values()) == 1
    assert out.unique <= n
    if kind == "random":
        assert out.unique == n
    bests = [e.best_so_far for e in out.trace]
    assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))
    assert all(space.is_valid(e.config) for e in out.trace)
    finite = [e.time for e in out.trace if math.isfinite(e.time)]
    assert out.best_time == (min(finite) if finite else math.inf)
    assert out.steps <= 50 * n + 3
