"""Tunable parameters, configurations and constrained search spaces."""

from __future__ import annotations

import math
import random
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Callable

from .errors import (
    BudgetExceedsSpace,
    DuplicateParameter,
    EmptySpace,
    EmptyValueList,
    ExplicitEnumerationTooLarge,
    InvalidConfiguration,
    InvalidParameter,
)
from .expr import IDENTIFIER, Constraint

# Raw Cartesian size above which full enumeration is refused.
MAX_ENUMERATION = 10**7

# Attempts for rejection sampling on spaces too large to enumerate.
_REJECTION_ATTEMPTS = 200_000


@dataclass(frozen=True)
class Parameter:
    name: str
    values: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not IDENTIFIER.fullmatch(self.name):
            raise InvalidParameter(f"invalid parameter name {self.name!r}")
        if not self.values:
            raise EmptyValueList(self.name)
        if len(set(self.values)) != len(self.values):
            raise InvalidParameter(f"{self.name}: values must be distinct")
        if any(not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in self.values):
            raise InvalidParameter(f"{self.name}: values must be non-negative integers")
        if self.labels is not None and len(self.labels) != len(self.values):
            raise InvalidParameter(f"{self.name}: one label per value required")

    def label(self, value: int) -> str:
        if self.labels is None:
            return str(value)
        return self.labels[self.values.index(value)]


class Configuration(Mapping):
    """Immutable, hashable assignment of one value to every parameter."""

    __slots__ = ("_names", "_index", "_values", "_hash")

    def __init__(self, names: tuple[str, ...], values: tuple[int, ...], index=None):
        self._names = names
        self._values = values
        self._index = index if index is not None else {n: i for i, n in enumerate(names)}
        self._hash = None

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, int]) -> "Configuration":
        names = tuple(mapping)
        return cls(names, tuple(int(mapping[n]) for n in names))

    @property
    def values_tuple(self) -> tuple[int, ...]:
        return self._values

    def __getitem__(self, name: str) -> int:
        return self._values[self._index[name]]

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(zip(self._names, self._values)))
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, Configuration) and other._names == self._names:
            return other._values == self._values
        return Mapping.__eq__(self, other)

    def replace(self, **changes: int) -> "Configuration":
        values = list(self._values)
        for name, value in changes.items():
            values[self._index[name]] = value
        return Configuration(self._names, tuple(values), self._index)

    def encode(self) -> str:
        """Canonical text form: ``name=value`` sorted by name, joined by ``;``."""
        return ";".join(f"{n}={self[n]}" for n in sorted(self._names))

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}={v}" for n, v in zip(self._names, self._values))
        return f"Configuration({inner})"


@dataclass(frozen=True)
class Predicate:
    """A constraint given as a Python callable over the named parameters."""

    names: tuple[str, ...]
    fn: Callable[[Mapping[str, int]], bool]
    label: str = "predicate"

    def __call__(self, config: Mapping[str, int]) -> bool:
        return bool(self.fn(config))

    def __str__(self) -> str:
        return self.label


def decode_configuration(text: str) -> dict[str, int]:
    """Inverse of :meth:`Configuration.encode`."""
    out = {}
    for item in text.split(";"):
        name, sep, value = item.partition("=")
        if not sep or not IDENTIFIER.fullmatch(name.strip()):
            raise ValueError(f"bad configuration item {item!r}")
        out[name.strip()] = int(value)
    return out


@dataclass
class SearchSpace:
    parameters: list[Parameter] = field(default_factory=list)
    constraints: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for p in self.parameters:
            if p.name in seen:
                raise DuplicateParameter(p.name)
            seen.add(p.name)
        self._valid: list[Configuration] | None = None

    # --- construction -------------------------------------------------------

    def add_parameter(self, name: str, values: Sequence[int], labels=None) -> "SearchSpace":
        if name in self.names:
            raise DuplicateParameter(name)
        if not values:
            raise EmptyValueList(name)
        self.parameters.append(
            Parameter(name, tuple(values), tuple(labels) if labels is not None else None)
        )
        self._valid = None
        return self

    def add_constraint(self, constraint) -> "SearchSpace":
        """Add a constraint given as text, a parsed Constraint or a Predicate."""
        if isinstance(constraint, str):
            constraint = Constraint(constraint, self.names)
        else:
            unknown = set(constraint.names) - set(self.names)
            if unknown:
                from .errors import UnknownParameter

                raise UnknownParameter(sorted(unknown)[0])
        self.constraints.append(constraint)
        self._valid = None
        return self

    def parse(self, text: str) -> Constraint:
        return Constraint(text, self.names)

    def with_constraints(self, extra) -> "SearchSpace":
        space = SearchSpace(list(self.parameters), list(self.constraints))
        for c in extra:
            space.add_constraint(c)
        return space

    # --- basic properties ---------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def parameter(self, name: str) -> Parameter:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def raw_size(self) -> int:
        return math.prod(len(p.values) for p in self.parameters)

    @property
    def enumerable(self) -> bool:
        return self.raw_size <= MAX_ENUMERATION

    def configuration(self, mapping: Mapping[str, int] | None = None, **kw: int) -> Configuration:
        """Build a Configuration in parameter order; checks membership only."""
        values = dict(mapping or {}, **kw)
        if set(values) != set(self.names):
            raise InvalidConfiguration(
                f"expected parameters {sorted(self.names)}, got {sorted(values)}"
            )
        for p in self.parameters:
            if values[p.name] not in p.values:
                raise InvalidConfiguration(f"{p.name}={values[p.name]} not in {list(p.values)}")
        return Configuration(self.names, tuple(values[n] for n in self.names))

    def satisfies(self, config: Mapping[str, int]) -> bool:
        return all(c(config) for c in self.constraints)

    def is_valid(self, config: Mapping[str, int]) -> bool:
        try:
            config = self.configuration(config)
        except InvalidConfiguration:
            return False
        return self.satisfies(config)

    # --- enumeration --------------------------------------------------------

    def enumerate_valid(self) -> list[Configuration]:
        """All valid configurations in lexicographic (parameter, value-list) order."""
        if self._valid is None:
            if not self.parameters:
                raise InvalidConfiguration("search space has no parameters")
            if not self.enumerable:
                raise ExplicitEnumerationTooLarge(self.raw_size, MAX_ENUMERATION)
            self._valid = list(self._backtrack())
        return self._valid

    def count(self) -> int:
        return len(self.enumerate_valid())

    def _backtrack(self) -> Iterator[Configuration]:
        names = self.names
        index = {n: i for i, n in enumerate(names)}
        # Each constraint is checked as soon as its last parameter is bound.
        checks: list[list] = [[] for _ in names]
        for c in self.constraints:
            depth = max((index[n] for n in c.names), default=0)
            checks[depth].append(c)
        value_lists = [p.values for p in self.parameters]
        partial: dict[str, int] = {}
        last = len(names) - 1

        def rec(depth: int):
            name = names[depth]
            for v in value_lists[depth]:
                partial[name] = v
                if all(c(partial) for c in checks[depth]):
                    if depth == last:
                        yield Configuration(names, tuple(partial[n] for n in names), index)
                    else:
                        yield from rec(depth + 1)
            del partial[name]

        yield from rec(0)

    # --- sampling -----------------------------------------------------------

    def _random_raw(self, rng: random.Random) -> Configuration:
        return Configuration(self.names, tuple(rng.choice(p.values) for p in self.parameters))

    def random_valid(self, rng: random.Random) -> Configuration:
        """Uniform random valid configuration."""
        if self.enumerable:
            valid = self.enumerate_valid()
            if not valid:
                raise EmptySpace("no valid configurations")
            return valid[rng.randrange(len(valid))]
        for _ in range(_REJECTION_ATTEMPTS):
            config = self._random_raw(rng)
            if self.satisfies(config):
                return config
        raise EmptySpace("rejection sampling found no valid configuration")

    def random_neighbor(self, config: Mapping[str, int], rng: random.Random) -> Configuration:
        """A valid configuration one value-index step away in one parameter.

        Falls back to a uniform random other configuration when no such
        neighbour exists, or returns ``config`` when it is the only one.
        """
        config = self.configuration(config)
        if not self.satisfies(config):
            raise InvalidConfiguration(f"{config!r} violates the space constraints")
        neighbors = []
        for p in self.parameters:
            i = p.values.index(config[p.name])
            for j in (i - 1, i + 1):
                if 0 <= j < len(p.values):
                    candidate = config.replace(**{p.name: p.values[j]})
                    if self.satisfies(candidate):
                        neighbors.append(candidate)
        if neighbors:
            return neighbors[rng.randrange(len(neighbors))]
        if self.enumerable:
            others = [c for c in self.enumerate_valid() if c != config]
            return others[rng.randrange(len(others))] if others else config
        for _ in range(_REJECTION_ATTEMPTS):
            candidate = self._random_raw(rng)
            if candidate != config and self.satisfies(candidate):
                return candidate
        return config

    def sample_unique(self, n: int, rng: random.Random) -> list[Configuration]:
        """``n`` distinct valid configurations drawn uniformly without replacement."""
        if self.enumerable:
            valid = self.enumerate_valid()
            if n > len(valid):
                raise BudgetExceedsSpace(n, len(valid))
            return rng.sample(valid, n)
        seen: dict[Configuration, None] = {}
        attempts = 0
        while len(seen) < n:
            attempts += 1
            if attempts > _REJECTION_ATTEMPTS + 100 * n:
                raise BudgetExceedsSpace(n, len(seen))
            config = self._random_raw(rng)
            if config not in seen and self.satisfies(config):
                seen[config] = None
        return list(seen)
