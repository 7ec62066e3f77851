"""Builders that translate constraint specifications into unions of polytopes.

Every member polytope lives over the row-major allocation variables p(i, o)
(possibly followed by auxiliary lifting variables) and embeds the base
allocation constraints: column sums bounded by (or equal to) supplies, row
sums bounded by capacities, entries in [0, 1]. The specific builders add
quota, endowment, or probabilistic-stability constraints on top.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .lp import EQ, GE, LE, LinearConstraint, Polytope, lp_max
from .model import Allocation, Instance, Rational, WeakOrder, as_fraction


class EmptyFeasibleSet(Exception):
    """The requested feasible set contains no allocation."""


class BudgetExceeded(Exception):
    pass


class EnumerationBudgetExceeded(BudgetExceeded):
    pass


class BranchBudgetExceeded(BudgetExceeded):
    pass


@dataclass(frozen=True)
class FeasibleSet:
    """A finite union of polytopes over allocation variables.

    The first n_agents * n_objects variables of every member are the
    allocation entries; members may append lifting variables after those.
    base_counts[k] is the number of leading base rows in member k, used to
    seed lazy row activation in the solvers.
    """

    n_agents: int
    n_objects: int
    members: tuple[Polytope, ...]
    notes: tuple[str, ...] = ()
    base_counts: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.members:
            raise EmptyFeasibleSet("a feasible set needs at least one member polytope")
        if not self.base_counts:
            object.__setattr__(self, "base_counts", tuple([0] * len(self.members)))
        if not self.notes:
            object.__setattr__(self, "notes", tuple([""] * len(self.members)))

    @property
    def n_vars(self) -> int:
        return self.n_agents * self.n_objects

    def var(self, i: int, o: int) -> int:
        return i * self.n_objects + o

    def member_contains(self, idx: int, alloc: Allocation) -> bool:
        member = self.members[idx]
        vec = alloc.as_vector()
        if member.num_vars == self.n_vars:
            return member.contains(vec)
        pins = tuple(
            LinearConstraint(((v, Fraction(1)),), EQ, vec[v]) for v in range(self.n_vars)
        )
        lifted = member.with_extra(pins)
        return lp_max(lifted, {}).is_optimal

    def contains(self, alloc: Allocation) -> tuple[bool, Optional[int]]:
        """Exact membership test; returns (found, index of first member)."""
        for idx in range(len(self.members)):
            if self.member_contains(idx, alloc):
                return True, idx
        return False, None


# ---------------------------------------------------------------------------
# Constraint specifications (tagged union)


class ConstraintSpec:
    pass


@dataclass(frozen=True)
class Unconstrained(ConstraintSpec):
    pass


@dataclass(frozen=True)
class CustomLinear(ConstraintSpec):
    rows: tuple[LinearConstraint, ...]


@dataclass(frozen=True)
class QuotaBound:
    agents: tuple[int, ...]
    objects: tuple[int, ...]
    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        lo, up = as_fraction(self.lower), as_fraction(self.upper)
        if not 0 <= lo <= up:
            raise ValueError("quota bounds need 0 <= lower <= upper")
        object.__setattr__(self, "agents", tuple(sorted(set(self.agents))))
        object.__setattr__(self, "objects", tuple(sorted(set(self.objects))))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)


@dataclass(frozen=True)
class Quotas(ConstraintSpec):
    items: tuple[QuotaBound, ...]


@dataclass(frozen=True)
class IndividualRationality(ConstraintSpec):
    endowment: Allocation


@dataclass(frozen=True)
class ClaimwiseStable(ConstraintSpec):
    pass


@dataclass(frozen=True)
class FractionallyStable(ConstraintSpec):
    pass


@dataclass(frozen=True)
class ExPostStable(ConstraintSpec):
    pass


@dataclass(frozen=True)
class ExAnteStable(ConstraintSpec):
    pass


@dataclass(frozen=True)
class DeterministicOnly(ConstraintSpec):
    base: ConstraintSpec = field(default_factory=Unconstrained)


STABILITY_SPECS = {
    "claimwise": ClaimwiseStable,
    "fractional": FractionallyStable,
    "expost": ExPostStable,
    "exante": ExAnteStable,
}


# ---------------------------------------------------------------------------
# Base allocation constraints


def base_rows(inst: Instance) -> list[LinearConstraint]:
    n, m = inst.n_agents, inst.n_objects
    rows: list[LinearConstraint] = []
    for o in range(m):
        rows.append(
            LinearConstraint.make(
                {inst.var(i, o): 1 for i in range(n)},
                EQ if inst.complete else LE,
                inst.supply(o),
                label=f"supply[{inst.object_ids[o]}]",
            )
        )
    for i in range(n):
        rows.append(
            LinearConstraint.make(
                {inst.var(i, o): 1 for o in range(m)},
                LE,
                inst.cap(i),
                label=f"cap[{inst.agent_ids[i]}]",
            )
        )
    for o in range(m):
        if inst.supply(o) > 1:
            for i in range(n):
                rows.append(
                    LinearConstraint.make({inst.var(i, o): 1}, LE, 1, label="prob<=1")
                )
    return rows


def _single(inst: Instance, extra: Iterable[LinearConstraint], note: str) -> FeasibleSet:
    base = base_rows(inst)
    member = Polytope(inst.n_agents * inst.n_objects, tuple(base) + tuple(extra))
    return FeasibleSet(
        inst.n_agents, inst.n_objects, (member,), (note,), (len(base),)
    )


# ---------------------------------------------------------------------------
# Stability polytopes


def claimwise_polytope(inst: Instance) -> FeasibleSet:
    """One constraint per (i, j, o) with i above j in o's priority: j's share
    of o may not exceed i's mass on objects she weakly prefers to o (o aside)."""
    prios = inst.require_priorities()
    rows = []
    for o in range(inst.n_objects):
        prio = prios[o]
        for i in range(inst.n_agents):
            upper = [inst.var(i, oo) for oo in inst.preferences[i].upper_contour(o) if oo != o]
            for j in range(inst.n_agents):
                if not prio.prefers(i, j):
                    continue
                coeffs = {v: Fraction(1) for v in upper}
                jv = inst.var(j, o)
                coeffs[jv] = coeffs.get(jv, Fraction(0)) - 1
                rows.append(
                    LinearConstraint.make(
                        coeffs, GE, 0,
                        label=f"claim[{inst.agent_ids[i]}>{inst.agent_ids[j]}@{inst.object_ids[o]}]",
                    )
                )
    return _single(inst, rows, "claimwise stability")


def fractional_polytope(inst: Instance) -> FeasibleSet:
    """The linear stability inequalities, one per agent-object pair."""
    prios = inst.require_priorities()
    rows = []
    for i in range(inst.n_agents):
        pref = inst.preferences[i]
        for o in range(inst.n_objects):
            coeffs: dict[int, Fraction] = {}
            for oo in pref.upper_contour(o):
                if oo != o:
                    coeffs[inst.var(i, oo)] = Fraction(1)
            cap = Fraction(inst.cap(i))
            for j in range(inst.n_agents):
                if prios[o].rank_of(j) <= prios[o].rank_of(i):
                    v = inst.var(j, o)
                    coeffs[v] = coeffs.get(v, Fraction(0)) + cap
            rows.append(
                LinearConstraint.make(
                    coeffs, GE, cap,
                    label=f"frac[{inst.agent_ids[i]}@{inst.object_ids[o]}]",
                )
            )
    return _single(inst, rows, "fractional stability")


def _deterministic_complete_assignments(inst: Instance, budget: int):
    """Yield all complete 0/1 allocations (respecting caps and integral
    supplies) as tuples of per-object agent subsets, in lexicographic order."""
    n, m = inst.n_agents, inst.n_objects
    supplies = []
    for o in range(m):
        s = inst.supply(o)
        if s.denominator != 1:
            return  # no deterministic allocation can fully allocate o
        supplies.append(int(s))
    if sum(supplies) > sum(inst.capacities):
        return
    counter = [0]

    def rec(o: int, remaining_cap: list[int], chosen: list[tuple[int, ...]]):
        if o == m:
            counter[0] += 1
            if counter[0] > budget:
                raise EnumerationBudgetExceeded(
                    f"more than {budget} deterministic allocations to scan"
                )
            yield tuple(chosen)
            return
        for subset in itertools.combinations(range(n), supplies[o]):
            if any(remaining_cap[i] == 0 for i in subset):
                continue
            for i in subset:
                remaining_cap[i] -= 1
            chosen.append(subset)
            yield from rec(o + 1, remaining_cap, chosen)
            chosen.pop()
            for i in subset:
                remaining_cap[i] += 1

    yield from rec(0, list(inst.capacities), [])


def _assignment_to_allocation(inst: Instance, chosen: Sequence[tuple[int, ...]]) -> Allocation:
    rows = [[Fraction(0)] * inst.n_objects for _ in range(inst.n_agents)]
    for o, subset in enumerate(chosen):
        for i in subset:
            rows[i][o] = Fraction(1)
    return Allocation.from_rows(rows)


def is_deterministic_stable(alloc: Allocation, inst: Instance) -> bool:
    """Pairwise stability of a deterministic allocation: every agent-object
    pair either has the agent's capacity filled with weakly better objects or
    every recipient of the object carries weakly higher priority."""
    prios = inst.require_priorities()
    n, m = inst.n_agents, inst.n_objects
    for i in range(n):
        pref = inst.preferences[i]
        contour = Fraction(0)
        for k, cls in enumerate(pref.classes):
            contour += sum((alloc[i, o] for o in cls), Fraction(0))
            if contour == inst.cap(i):
                break
            for o in cls:
                # i has spare demand at o's level; nobody below i may hold o
                prio = prios[o]
                for j in range(n):
                    if alloc[j, o] > 0 and prio.prefers(i, j):
                        return False
    return True


def enumerate_deterministic_stable(inst: Instance, budget: int = 10**7) -> list[Allocation]:
    """All deterministic complete stable allocations, in lexicographic order of
    their per-object assignment vectors."""
    inst.require_priorities()
    out = []
    for chosen in _deterministic_complete_assignments(inst, budget):
        alloc = _assignment_to_allocation(inst, chosen)
        if is_deterministic_stable(alloc, inst):
            out.append(alloc)
    return out


def expost_hull(inst: Instance, budget: int = 10**7) -> FeasibleSet:
    """Lifted convex hull of the deterministic stable allocations: variables
    (p, lambda) with p = sum(lambda_k q_k), lambda in the simplex."""
    stable = enumerate_deterministic_stable(inst, budget)
    if not stable:
        raise EmptyFeasibleSet("no deterministic stable allocation exists")
    n_vars = inst.n_agents * inst.n_objects
    K = len(stable)
    base = base_rows(inst)
    rows = list(base)
    for v in range(n_vars):
        i, o = divmod(v, inst.n_objects)
        coeffs: dict[int, Fraction] = {v: Fraction(1)}
        for k, q in enumerate(stable):
            if q[i, o]:
                coeffs[n_vars + k] = -q[i, o]
        rows.append(LinearConstraint.make(coeffs, EQ, 0, label="hull-mix"))
    rows.append(
        LinearConstraint.make({n_vars + k: 1 for k in range(K)}, EQ, 1, label="hull-simplex")
    )
    member = Polytope(n_vars + K, tuple(rows))
    return FeasibleSet(
        inst.n_agents,
        inst.n_objects,
        (member,),
        (f"ex-post stability (hull of {K} stable allocations)",),
        (len(base),),
    )


def _exante_nontrivial_pairs(inst: Instance) -> int:
    prios = inst.require_priorities()
    count = 0
    for o in range(inst.n_objects):
        top = prios[o].classes[0]
        count += inst.n_agents - len(top)
    return count


def exante_union(inst: Instance, pair_cap: int = 20, member_cap: int = 4096) -> FeasibleSet:
    """Union of polytopes covering ex-ante stability.

    Per object o with priority classes B_1 > ... > B_s, an ex-ante stable
    allocation admits a threshold t: agents below class t get none of o and
    agents above class t fill their capacity with objects they weakly prefer
    to o. One member polytope per threshold profile across objects; infeasible
    branches are pruned eagerly.
    """
    prios = inst.require_priorities()
    n, m = inst.n_agents, inst.n_objects
    if _exante_nontrivial_pairs(inst) > pair_cap:
        raise BranchBudgetExceeded(
            f"more than {pair_cap} nontrivial priority pairs for ex-ante branching"
        )
    base = base_rows(inst)

    def branch_rows(o: int, t: int) -> list[LinearConstraint]:
        prio = prios[o]
        rows = []
        for cls in prio.classes[t:]:
            for j in cls:
                rows.append(
                    LinearConstraint.make(
                        {inst.var(j, o): 1}, EQ, 0,
                        label=f"exante-zero[{inst.agent_ids[j]}@{inst.object_ids[o]}]",
                    )
                )
        for cls in prio.classes[: t - 1]:
            for j in cls:
                coeffs = {inst.var(j, oo): Fraction(1) for oo in inst.preferences[j].upper_contour(o)}
                rows.append(
                    LinearConstraint.make(
                        coeffs, EQ, inst.cap(j),
                        label=f"exante-full[{inst.agent_ids[j]}@{inst.object_ids[o]}]",
                    )
                )
        return rows

    members: list[Polytope] = []
    notes: list[str] = []

    def feasible(rows: list[LinearConstraint]) -> bool:
        return lp_max(Polytope(n * m, tuple(base) + tuple(rows)), {}).is_optimal

    def rec(o: int, acc: list[LinearConstraint], thresholds: list[int]):
        if o == m:
            members.append(Polytope(n * m, tuple(base) + tuple(acc)))
            notes.append(
                "ex-ante stability branch t=" + ",".join(str(t) for t in thresholds)
            )
            if len(members) > member_cap:
                raise BranchBudgetExceeded(
                    f"ex-ante union exceeds {member_cap} member polytopes"
                )
            return
        s = prios[o].num_classes
        for t in range(1, s + 1):
            rows = branch_rows(o, t)
            if s > 1 and not feasible(acc + rows):
                continue
            thresholds.append(t)
            rec(o + 1, acc + rows, thresholds)
            thresholds.pop()

    rec(0, [], [])
    if not members:
        raise EmptyFeasibleSet("no ex-ante stable allocation exists")
    return FeasibleSet(
        inst.n_agents,
        inst.n_objects,
        tuple(members),
        tuple(notes),
        tuple([len(base)] * len(members)),
    )


# ---------------------------------------------------------------------------
# Non-stability constraint families


def ir_polytope(inst: Instance, endowment: Allocation) -> FeasibleSet:
    """Allocations that stochastically dominate the endowment agentwise."""
    endowment.validate(inst, complete=False)
    rows = []
    for i in range(inst.n_agents):
        pref = inst.preferences[i]
        running: dict[int, Fraction] = {}
        target = Fraction(0)
        for k, cls in enumerate(pref.classes):
            for o in cls:
                running[inst.var(i, o)] = Fraction(1)
                target += endowment[i, o]
            if target > 0:
                rows.append(
                    LinearConstraint.make(
                        dict(running), GE, target,
                        label=f"ir[{inst.agent_ids[i]}:{k}]",
                    )
                )
    return _single(inst, rows, "individual rationality")


def quota_rows(inst: Instance, items: Sequence[QuotaBound]) -> list[LinearConstraint]:
    rows = []
    seen = set()
    for q in items:
        key = (q.agents, q.objects)
        coeffs = {inst.var(i, o): 1 for i in q.agents for o in q.objects}
        if (key, "lo", q.lower) not in seen and q.lower > 0:
            seen.add((key, "lo", q.lower))
            rows.append(LinearConstraint.make(coeffs, GE, q.lower, label="quota-lower"))
        if (key, "hi", q.upper) not in seen:
            seen.add((key, "hi", q.upper))
            rows.append(LinearConstraint.make(coeffs, LE, q.upper, label="quota-upper"))
    return rows


def deterministic_only(base_set: FeasibleSet, inst: Instance, budget: int = 10**7) -> FeasibleSet:
    """Union of singleton polytopes, one per deterministic point of base_set."""
    base = base_rows(inst)
    members = []
    notes = []
    for chosen in _deterministic_complete_assignments(inst, budget):
        alloc = _assignment_to_allocation(inst, chosen)
        found, _ = base_set.contains(alloc)
        if not found:
            continue
        pins = tuple(
            LinearConstraint.make({inst.var(i, o): 1}, EQ, alloc[i, o])
            for i in range(inst.n_agents)
            for o in range(inst.n_objects)
        )
        members.append(Polytope(inst.n_agents * inst.n_objects, tuple(base) + pins))
        notes.append("deterministic point")
    if not members:
        raise EmptyFeasibleSet("no deterministic allocation is feasible for the base set")
    return FeasibleSet(
        inst.n_agents,
        inst.n_objects,
        tuple(members),
        tuple(notes),
        tuple([len(base)] * len(members)),
    )


# ---------------------------------------------------------------------------
# Dispatcher


def build(spec: ConstraintSpec, inst: Instance, budget: int = 10**7) -> FeasibleSet:
    """Build the feasible set for a constraint specification.

    Raises EmptyFeasibleSet when a feasibility probe of every member fails
    (the eating rules require a nonempty feasible set).
    """
    if isinstance(spec, Unconstrained):
        fs = _single(inst, (), "base allocation polytope")
    elif isinstance(spec, CustomLinear):
        fs = _single(inst, spec.rows, "custom linear constraints")
    elif isinstance(spec, Quotas):
        fs = _single(inst, quota_rows(inst, spec.items), "group quotas")
    elif isinstance(spec, IndividualRationality):
        fs = ir_polytope(inst, spec.endowment)
    elif isinstance(spec, ClaimwiseStable):
        fs = claimwise_polytope(inst)
    elif isinstance(spec, FractionallyStable):
        fs = fractional_polytope(inst)
    elif isinstance(spec, ExPostStable):
        fs = expost_hull(inst, budget)
    elif isinstance(spec, ExAnteStable):
        fs = exante_union(inst)
    elif isinstance(spec, DeterministicOnly):
        fs = deterministic_only(build(spec.base, inst, budget), inst, budget)
    else:
        raise TypeError(f"unknown constraint spec {spec!r}")

    alive = [
        idx
        for idx, member in enumerate(fs.members)
        if lp_max(member, {}).is_optimal
    ]
    if not alive:
        raise EmptyFeasibleSet("every member polytope is empty")
    if len(alive) < len(fs.members):
        fs = FeasibleSet(
            fs.n_agents,
            fs.n_objects,
            tuple(fs.members[k] for k in alive),
            tuple(fs.notes[k] for k in alive),
            tuple(fs.base_counts[k] for k in alive),
        )
    return fs
