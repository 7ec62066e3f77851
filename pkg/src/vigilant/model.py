"""Core domain types: weak orders, instances, allocations, and dominance relations.

All numeric data is kept as exact rationals (fractions.Fraction); agents and
objects are referenced by dense 0-based indices, with string ids kept only for
I/O. Every type here is immutable and safe to share.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

Rational = Union[int, str, Fraction]


def as_fraction(value: Rational) -> Fraction:
    """Convert ints, Fractions, or 'num/den' strings to Fraction, rejecting floats."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if any(ch in text for ch in ".eE"):
            raise ValueError(f"rational literal must be 'num/den' or integer, got {value!r}")
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as an exact rational (floats are rejected)")


@dataclass(frozen=True)
class WeakOrder:
    """An ordered partition of items into indifference classes, best first.

    Used both for an agent's preference over objects and for an object's
    priority over agents. The classes must partition range(n_items) exactly.
    """

    classes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for cls in self.classes:
            if not cls:
                raise ValueError("weak order contains an empty indifference class")
            for item in cls:
                if item in seen:
                    raise ValueError(f"item {item} appears in more than one class")
                seen.add(item)
        n = len(seen)
        if seen != set(range(n)):
            raise ValueError("classes must partition a dense 0-based item universe")
        object.__setattr__(self, "classes", tuple(tuple(sorted(c)) for c in self.classes))
        ranks = [0] * n
        for k, cls in enumerate(self.classes):
            for item in cls:
                ranks[item] = k
        object.__setattr__(self, "_ranks", tuple(ranks))

    @staticmethod
    def from_lists(classes: Iterable[Iterable[int]]) -> "WeakOrder":
        return WeakOrder(tuple(tuple(c) for c in classes))

    @staticmethod
    def strict(order: Iterable[int]) -> "WeakOrder":
        """A linear order given as a sequence of items, most preferred first."""
        return WeakOrder(tuple((item,) for item in order))

    @staticmethod
    def flat(n_items: int) -> "WeakOrder":
        """Total indifference over n_items items."""
        return WeakOrder((tuple(range(n_items)),))

    @property
    def n_items(self) -> int:
        return len(self._ranks)  # type: ignore[attr-defined]

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def is_strict(self) -> bool:
        return all(len(c) == 1 for c in self.classes)

    @property
    def is_flat(self) -> bool:
        return len(self.classes) == 1

    def rank_of(self, item: int) -> int:
        """Index of the class containing item (0 = most preferred)."""
        return self._ranks[item]  # type: ignore[attr-defined]

    def upper_contour(self, item: int, strict: bool = False) -> tuple[int, ...]:
        """Items weakly (or strictly) preferred to item."""
        r = self.rank_of(item)
        bound = r if strict else r + 1
        return tuple(i for k in range(bound) for i in self.classes[k])

    def prefix_items(self, depth: int) -> tuple[int, ...]:
        """Items in the top `depth` classes."""
        return tuple(i for k in range(depth) for i in self.classes[k])

    def prefers(self, a: int, b: int) -> bool:
        """Strict preference a over b."""
        return self.rank_of(a) < self.rank_of(b)

    def indifferent(self, a: int, b: int) -> bool:
        return self.rank_of(a) == self.rank_of(b)


@dataclass(frozen=True)
class Instance:
    """An allocation problem: agents with preferences over objects, optional
    object priorities over agents, integer capacities and rational supplies."""

    preferences: tuple[WeakOrder, ...]
    priorities: Optional[tuple[WeakOrder, ...]] = None
    capacities: tuple[int, ...] = ()
    supplies: tuple[Fraction, ...] = ()
    agent_ids: tuple[str, ...] = ()
    object_ids: tuple[str, ...] = ()
    complete: bool = True

    def __post_init__(self):
        n = len(self.preferences)
        if n == 0:
            raise ValueError("instance needs at least one agent")
        m = self.preferences[0].n_items
        for pref in self.preferences:
            if pref.n_items != m:
                raise ValueError("every preference must rank all objects")
        if self.priorities is not None:
            if len(self.priorities) != m:
                raise ValueError("need one priority order per object")
            for prio in self.priorities:
                if prio.n_items != n:
                    raise ValueError("every priority must rank all agents")
        caps = self.capacities or tuple([1] * n)
        if len(caps) != n or any(c < 1 for c in caps):
            raise ValueError("capacities must be positive, one per agent")
        sups = tuple(as_fraction(s) for s in (self.supplies or [1] * m))
        if len(sups) != m or any(s <= 0 for s in sups):
            raise ValueError("supplies must be positive, one per object")
        a_ids = self.agent_ids or tuple(f"a{i}" for i in range(n))
        o_ids = self.object_ids or tuple(f"o{j}" for j in range(m))
        if len(a_ids) != n or len(o_ids) != m:
            raise ValueError("id lists must match agent/object counts")
        object.__setattr__(self, "capacities", tuple(caps))
        object.__setattr__(self, "supplies", sups)
        object.__setattr__(self, "agent_ids", tuple(a_ids))
        object.__setattr__(self, "object_ids", tuple(o_ids))

    @property
    def n_agents(self) -> int:
        return len(self.preferences)

    @property
    def n_objects(self) -> int:
        return self.preferences[0].n_items

    def cap(self, i: int) -> int:
        return self.capacities[i]

    def supply(self, o: int) -> Fraction:
        return self.supplies[o]

    def require_priorities(self) -> tuple[WeakOrder, ...]:
        if self.priorities is None:
            raise ValueError("this operation needs object priorities")
        return self.priorities

    def var(self, i: int, o: int) -> int:
        """Row-major index of the allocation variable p(i, o)."""
        return i * self.n_objects + o


def make_instance(
    prefs: Sequence[Sequence[Sequence[int]] | Sequence[int]],
    priorities: Optional[Sequence[Sequence[Sequence[int]] | Sequence[int]]] = None,
    capacities: Optional[Sequence[int]] = None,
    supplies: Optional[Sequence[Rational]] = None,
    complete: bool = True,
    agent_ids: Sequence[str] = (),
    object_ids: Sequence[str] = (),
) -> Instance:
    """Convenience factory: each order is either a strict list of items or a
    list of indifference classes (lists of items)."""

    def to_order(spec) -> WeakOrder:
        items = list(spec)
        if items and isinstance(items[0], (list, tuple)):
            return WeakOrder.from_lists(items)
        return WeakOrder.strict(items)

    return Instance(
        preferences=tuple(to_order(p) for p in prefs),
        priorities=None if priorities is None else tuple(to_order(p) for p in priorities),
        capacities=tuple(capacities) if capacities else (),
        supplies=tuple(as_fraction(s) for s in supplies) if supplies else (),
        agent_ids=tuple(agent_ids),
        object_ids=tuple(object_ids),
        complete=complete,
    )


@dataclass(frozen=True)
class Allocation:
    """An n-by-m matrix of exact rationals; rows are agents, columns objects."""

    entries: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("allocation must have at least one row")
        width = len(self.entries[0])
        rows = []
        for row in self.entries:
            if len(row) != width:
                raise ValueError("ragged allocation matrix")
            vals = tuple(as_fraction(v) for v in row)
            if any(v < 0 for v in vals):
                raise ValueError("allocation entries must be nonnegative")
            rows.append(vals)
        object.__setattr__(self, "entries", tuple(rows))

    @staticmethod
    def from_rows(rows: Sequence[Sequence[Rational]]) -> "Allocation":
        return Allocation(tuple(tuple(as_fraction(v) for v in row) for row in rows))

    @staticmethod
    def zeros(n_agents: int, n_objects: int) -> "Allocation":
        zero = Fraction(0)
        return Allocation(tuple(tuple([zero] * n_objects) for _ in range(n_agents)))

    @property
    def n_agents(self) -> int:
        return len(self.entries)

    @property
    def n_objects(self) -> int:
        return len(self.entries[0])

    def __getitem__(self, key: tuple[int, int]) -> Fraction:
        i, o = key
        return self.entries[i][o]

    def row(self, i: int) -> tuple[Fraction, ...]:
        return self.entries[i]

    def column(self, o: int) -> tuple[Fraction, ...]:
        return tuple(row[o] for row in self.entries)

    def row_sum(self, i: int) -> Fraction:
        return sum(self.entries[i], Fraction(0))

    def column_sum(self, o: int) -> Fraction:
        return sum((row[o] for row in self.entries), Fraction(0))

    def class_sums(self, i: int, pref: WeakOrder) -> tuple[Fraction, ...]:
        """Probability mass agent i holds in each of her indifference classes."""
        row = self.entries[i]
        return tuple(sum((row[o] for o in cls), Fraction(0)) for cls in pref.classes)

    @property
    def is_deterministic(self) -> bool:
        return all(v == 0 or v == 1 for row in self.entries for v in row)

    def is_complete(self, inst: Instance) -> bool:
        return all(self.column_sum(o) == inst.supply(o) for o in range(self.n_objects))

    def validate(self, inst: Instance, complete: Optional[bool] = None) -> None:
        """Raise if the matrix is not a valid allocation for the instance."""
        if self.n_agents != inst.n_agents or self.n_objects != inst.n_objects:
            raise ValueError("allocation shape does not match instance")
        for o in range(self.n_objects):
            col = self.column_sum(o)
            if col > inst.supply(o):
                raise ValueError(f"column {o} exceeds supply")
            if (inst.complete if complete is None else complete) and col != inst.supply(o):
                raise ValueError(f"column {o} is not fully allocated")
        for i in range(self.n_agents):
            if self.row_sum(i) > inst.cap(i):
                raise ValueError(f"row {i} exceeds capacity")
        if any(v > 1 for row in self.entries for v in row):
            raise ValueError("allocation probabilities cannot exceed 1")

    def as_vector(self) -> tuple[Fraction, ...]:
        """Row-major flattening, matching Instance.var indexing."""
        return tuple(v for row in self.entries for v in row)

    def pretty(self, inst: Optional[Instance] = None) -> str:
        header = ""
        if inst is not None:
            header = "# " + " ".join(inst.object_ids) + "\n"
        body = "\n".join(" ".join(str(v) for v in row) for row in self.entries)
        return header + body


class Dominance(enum.Enum):
    """Outcome of a dominance comparison of x against y."""

    STRICT = "strict"
    TIE = "tie"  # identical class sums: x and y are sd- and dl-equivalent
    NONE = "none"


def _check_same_universe(x: Sequence[Fraction], y: Sequence[Fraction], pref: WeakOrder) -> None:
    if len(x) != len(y) or len(x) != pref.n_items:
        raise ValueError("allotments and preference must cover the same objects")


def sd_dominates(x: Sequence[Rational], y: Sequence[Rational], pref: WeakOrder) -> Dominance:
    """First-order stochastic dominance of allotment x over y under pref.

    STRICT: every upper-contour prefix sum of x-y is >= 0 and some is > 0.
    TIE: all class sums agree. NONE: x does not weakly dominate y.
    """
    xs = [as_fraction(v) for v in x]
    ys = [as_fraction(v) for v in y]
    _check_same_universe(xs, ys, pref)
    prefix = Fraction(0)
    strict = False
    for cls in pref.classes:
        prefix += sum(xs[o] - ys[o] for o in cls)
        if prefix < 0:
            return Dominance.NONE
        if prefix > 0:
            strict = True
    return Dominance.STRICT if strict else Dominance.TIE


def dl_dominates(x: Sequence[Rational], y: Sequence[Rational], pref: WeakOrder) -> Dominance:
    """Lexicographic dominance: decided by the most preferred class where the
    class sums differ. TIE when all class sums agree."""
    xs = [as_fraction(v) for v in x]
    ys = [as_fraction(v) for v in y]
    _check_same_universe(xs, ys, pref)
    for cls in pref.classes:
        diff = sum(xs[o] - ys[o] for o in cls)
        if diff > 0:
            return Dominance.STRICT
        if diff < 0:
            return Dominance.NONE
    return Dominance.TIE


@dataclass(frozen=True)
class GuaranteeTable:
    """Per-agent, per-indifference-class probability lower bounds (the eating
    state); values is ragged: values[i][k] bounds agent i's k-th class."""

    values: tuple[tuple[Fraction, ...], ...]

    @staticmethod
    def zeros(prefs: Sequence[WeakOrder]) -> "GuaranteeTable":
        zero = Fraction(0)
        return GuaranteeTable(tuple(tuple([zero] * p.num_classes) for p in prefs))

    def get(self, agent: int, class_index: int) -> Fraction:
        return self.values[agent][class_index]

    def bump(self, agent: int, class_index: int, delta: Fraction) -> "GuaranteeTable":
        rows = [list(r) for r in self.values]
        rows[agent][class_index] += delta
        return GuaranteeTable(tuple(tuple(r) for r in rows))

    def dominates(self, other: "GuaranteeTable") -> bool:
        """Entrywise >= (guarantees only ever grow across rounds)."""
        return all(
            a >= b
            for ra, rb in zip(self.values, other.values)
            for a, b in zip(ra, rb)
        )


@dataclass(frozen=True)
class SignatureVector:
    """All cumulative upper-contour probabilities t_i^j of an allocation,
    together with their sorted (non-decreasing) multiset."""

    entries: tuple[tuple[int, int, Fraction], ...]  # (agent, prefix depth j >= 1, value)

    @property
    def sorted_values(self) -> tuple[Fraction, ...]:
        return tuple(sorted(v for _, _, v in self.entries))

    def per_agent(self, agent: int) -> tuple[Fraction, ...]:
        return tuple(v for a, _, v in self.entries if a == agent)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignatureVector):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def same_multiset(self, other: "SignatureVector") -> bool:
        return self.sorted_values == other.sorted_values


def signature(p: Allocation, prefs: Sequence[WeakOrder]) -> SignatureVector:
    """Signature vector of p: t_i^j = mass agent i gets from her top j classes."""
    if len(prefs) != p.n_agents:
        raise ValueError("need one preference per agent")
    entries = []
    for i, pref in enumerate(prefs):
        total = Fraction(0)
        for j, cls in enumerate(pref.classes, start=1):
            total += sum((p.entries[i][o] for o in cls), Fraction(0))
            entries.append((i, j, total))
    return SignatureVector(tuple(entries))
