"""Exact-rational linear programming over polytopes and unions of polytopes.

Maximization over {x >= 0 : constraints} via two-phase primal simplex.
Everything is exact: returned points satisfy every constraint under rational
comparison, with no tolerances anywhere. The pivot rule is Dantzig's with an
automatic switch to Bland's rule after a run of degenerate pivots, which keeps
termination guaranteed; all tie-breaks are by lowest index, so results are
deterministic.

Two interchangeable backends solve the scaled integer form: a GMP-backed C++
core (vigilant._ratlp, built by setup.py) and a pure-Python mirror of the same
pivoting rules. The core is used when importable; set VIGILANT_PURE_LP=1 to
force the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, Optional, Sequence, Union

from .model import Rational, as_fraction

LE, GE, EQ = "<=", ">=", "="
_REL_CODE = {LE: -1, EQ: 0, GE: 1}

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"
POSITIVE = "positive"  # early exit: feasible point with objective > 0, not a max

try:  # compiled core is optional
    from . import _ratlp  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover
    _ratlp = None

_use_core = _ratlp is not None and os.environ.get("VIGILANT_PURE_LP") != "1"


@dataclass(frozen=True)
class LinearConstraint:
    """Sparse linear constraint sum(coeff * x_var) rel rhs."""

    terms: tuple[tuple[int, Fraction], ...]
    rel: str
    rhs: Fraction
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.rel not in _REL_CODE:
            raise ValueError(f"relation must be one of {LE!r}, {GE!r}, {EQ!r}")
        merged: dict[int, Fraction] = {}
        for var, coeff in self.terms:
            if var < 0:
                raise ValueError("variable indices must be nonnegative")
            merged[var] = merged.get(var, Fraction(0)) + as_fraction(coeff)
        terms = tuple(sorted((v, c) for v, c in merged.items() if c != 0))
        if not terms:
            raise ValueError("constraint needs at least one nonzero coefficient")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "rhs", as_fraction(self.rhs))

    @staticmethod
    def make(coeffs: Mapping[int, Rational], rel: str, rhs: Rational, label: str = "") -> "LinearConstraint":
        return LinearConstraint(
            tuple((v, as_fraction(c)) for v, c in coeffs.items()), rel, as_fraction(rhs), label
        )

    def evaluate(self, point: Sequence[Fraction]) -> Fraction:
        return sum((c * point[v] for v, c in self.terms), Fraction(0))

    def satisfied_by(self, point: Sequence[Fraction]) -> bool:
        lhs = self.evaluate(point)
        if self.rel == LE:
            return lhs <= self.rhs
        if self.rel == GE:
            return lhs >= self.rhs
        return lhs == self.rhs


@dataclass(frozen=True)
class Polytope:
    """x in R^num_vars with x >= 0 and the listed linear constraints."""

    num_vars: int
    constraints: tuple[LinearConstraint, ...]

    def __post_init__(self):
        for c in self.constraints:
            if any(v >= self.num_vars for v, _ in c.terms):
                raise ValueError("constraint references a variable beyond num_vars")

    def contains(self, point: Sequence[Rational]) -> bool:
        vals = [as_fraction(v) for v in point]
        if len(vals) != self.num_vars:
            raise ValueError("point dimension mismatch")
        if any(v < 0 for v in vals):
            return False
        return all(c.satisfied_by(vals) for c in self.constraints)

    def with_extra(self, extra: Iterable[LinearConstraint]) -> "Polytope":
        return Polytope(self.num_vars, self.constraints + tuple(extra))


@dataclass(frozen=True)
class LpResult:
    status: str
    objective: Optional[Fraction] = None
    point: Optional[tuple[Fraction, ...]] = None

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def is_feasible(self) -> bool:
        return self.status in (OPTIMAL, POSITIVE)


def _scaled_row(terms: Sequence[tuple[int, Fraction]], rhs: Fraction) -> tuple[list[tuple[int, int]], int]:
    """Multiply a rational row by the LCM of its denominators."""
    denom = rhs.denominator
    for _, c in terms:
        denom = denom * c.denominator // gcd(denom, c.denominator)
    return [(v, int(c * denom)) for v, c in terms], int(rhs * denom)


class _PySimplex:
    """Pure-Python mirror of the C++ core: identical pivoting, identical vertices."""

    def __init__(self, num_vars: int, rows, objective, stop_when_positive=False,
                 threshold: Fraction = Fraction(0)):
        self.n = num_vars
        self.rows_in = rows
        self.obj_in = objective
        self.stop_positive = stop_when_positive
        self.threshold = threshold

    def solve(self):
        F0, F1 = Fraction(0), Fraction(1)
        n = self.n
        n_slack = sum(1 for _, rel, _ in self.rows_in if rel != 0)
        slack_start, art_start = n, n + n_slack

        rows: list[list[Fraction]] = []
        rhs: list[Fraction] = []
        basis: list[int] = []
        slack_idx = 0
        needs_art = []
        for terms, rel, b in self.rows_in:
            b = Fraction(b)
            sign = -1 if rel == 1 else 1
            row = [F0] * art_start
            for var, coeff in terms:
                row[var] += sign * coeff
            b *= sign
            my_slack = -1
            if rel != 0:
                my_slack = slack_start + slack_idx
                slack_idx += 1
                row[my_slack] = F1
            if b < 0:
                row = [-v for v in row]
                b = -b
                my_slack = -1
            rows.append(row)
            rhs.append(b)
            basis.append(my_slack)
            needs_art.append(my_slack < 0)

        n_art = sum(needs_art)
        ncols = art_start + n_art
        art_idx = 0
        for r, row in enumerate(rows):
            row.extend([F0] * n_art)
            if needs_art[r]:
                a = art_start + art_idx
                art_idx += 1
                row[a] = F1
                basis[r] = a

        state = {"red": [F0] * ncols, "value": F0}

        def pivot(prow: int, pcol: int):
            P = rows[prow]
            piv = P[pcol]
            if piv != 1:
                inv = F1 / piv
                for j in range(ncols):
                    if P[j]:
                        P[j] *= inv
                rhs[prow] *= inv
            nz = [j for j in range(ncols) if P[j]]
            pr = rhs[prow]
            for r, R in enumerate(rows):
                if r == prow:
                    continue
                f = R[pcol]
                if f:
                    for j in nz:
                        R[j] -= f * P[j]
                    if pr:
                        rhs[r] -= f * pr
            red = state["red"]
            f = red[pcol]
            if f:
                for j in nz:
                    red[j] -= f * P[j]
                if pr:
                    state["value"] += f * pr
            basis[prow] = pcol

        def entering_bland(limit: int) -> int:
            red = state["red"]
            for j in range(limit):
                if red[j] > 0:
                    return j
            return -1

        def entering_dantzig(limit: int) -> int:
            red = state["red"]
            best = -1
            for j in range(limit):
                if red[j] > 0 and (best < 0 or red[j] > red[best]):
                    best = j
            return best

        def leaving(pcol: int) -> int:
            best, best_ratio = -1, None
            for r, R in enumerate(rows):
                a = R[pcol]
                if a <= 0:
                    continue
                ratio = rhs[r] / a
                if best < 0 or ratio < best_ratio or (ratio == best_ratio and basis[r] < basis[best]):
                    best, best_ratio = r, ratio
            return best

        def optimize(limit: int, stop_positive: bool) -> bool:
            bland = False
            degen = 0
            degen_limit = 10 + len(rows)
            if stop_positive and state["value"] > self.threshold:
                return True
            while True:
                pcol = entering_bland(limit) if bland else entering_dantzig(limit)
                if pcol < 0:
                    return True
                prow = leaving(pcol)
                if prow < 0:
                    return False
                before = state["value"]
                pivot(prow, pcol)
                if state["value"] > before:
                    degen = 0
                    bland = False
                else:
                    degen += 1
                    if degen > degen_limit:
                        bland = True
                if stop_positive and state["value"] > self.threshold:
                    return True

        if n_art:
            red = state["red"]
            for r in range(len(rows)):
                if basis[r] >= art_start:
                    R = rows[r]
                    for j in range(ncols):
                        red[j] += R[j]
                    state["value"] -= rhs[r]
            for j in range(art_start, ncols):
                red[j] -= 1
            optimize(ncols, False)
            if state["value"] != 0:
                return INFEASIBLE, None
            for r in range(len(rows) - 1, -1, -1):
                if basis[r] < art_start:
                    continue
                pcol = next((j for j in range(art_start) if rows[r][j]), -1)
                if pcol >= 0:
                    state["red"] = [F0] * ncols
                    state["value"] = F0
                    pivot(r, pcol)
                else:
                    del rows[r], rhs[r], basis[r]

        cost = [F0] * ncols
        for var, coeff in self.obj_in:
            cost[var] += coeff
        state["red"] = list(cost)
        state["value"] = F0
        for r in range(len(rows)):
            cb = cost[basis[r]]
            if cb:
                R = rows[r]
                red = state["red"]
                for j in range(ncols):
                    red[j] -= cb * R[j]
                state["value"] += cb * rhs[r]
        if not optimize(art_start, self.stop_positive):
            return UNBOUNDED, None

        point = [F0] * n
        for r in range(len(rows)):
            if basis[r] < n:
                point[basis[r]] = rhs[r]
        status = (
            POSITIVE
            if self.stop_positive
            and state["value"] > self.threshold
            and entering_dantzig(art_start) >= 0
            else OPTIMAL
        )
        return status, point


_LP_CALLS = [0]  # per-process counter used by the eating-rule call budget checks


def lp_call_count() -> int:
    return _LP_CALLS[0]


def _solve_scaled(num_vars: int, rows, obj_terms, stop_when_positive: bool, threshold: Fraction):
    _LP_CALLS[0] += 1
    if _use_core:
        status, nums, dens = _ratlp.solve(
            num_vars, rows, obj_terms, stop_when_positive,
            threshold.numerator, threshold.denominator,
        )
        if status == 1:
            return INFEASIBLE, None
        if status == 2:
            return UNBOUNDED, None
        point = tuple(Fraction(a, b) for a, b in zip(nums, dens))
        return (POSITIVE if status == 3 else OPTIMAL), point
    status, raw = _PySimplex(num_vars, rows, obj_terms, stop_when_positive, threshold).solve()
    return status, None if raw is None else tuple(raw)


def _presolve(poly: Polytope):
    """Turn singleton rows into variable fixings / lower bounds.

    Returns (None, infeasible_marker) when a contradiction is already visible,
    otherwise (kept rows rewritten over shifted surviving variables, fixed
    values, shifts, old->new variable map, surviving count).
    """
    n = poly.num_vars
    fixed: dict[int, Fraction] = {}
    lower = [Fraction(0)] * n
    kept: list[LinearConstraint] = []
    for c in poly.constraints:
        if len(c.terms) == 1:
            v, coef = c.terms[0]
            bound = c.rhs / coef
            if c.rel == EQ:
                if bound < 0 or (v in fixed and fixed[v] != bound):
                    return None
                fixed[v] = bound
                continue
            if (c.rel == GE and coef > 0) or (c.rel == LE and coef < 0):
                if bound > lower[v]:
                    lower[v] = bound
                continue
        kept.append(c)
    for v, value in fixed.items():
        if lower[v] > value:
            return None
        lower[v] = value
    var_map = [-1] * n
    nxt = 0
    for v in range(n):
        if v not in fixed:
            var_map[v] = nxt
            nxt += 1
    rows = []
    for c in kept:
        terms = []
        shift = Fraction(0)
        for v, coef in c.terms:
            shift += coef * lower[v]
            if v not in fixed:
                terms.append((var_map[v], coef))
        rhs = c.rhs - shift
        if not terms:
            ok = rhs >= 0 if c.rel == LE else rhs <= 0 if c.rel == GE else rhs == 0
            if not ok:
                return None
            continue
        rows.append((terms, c.rel, rhs))
    return rows, fixed, lower, var_map, nxt


def lp_max(
    poly: Polytope, objective: Mapping[int, Rational], stop_when_positive: bool = False
) -> LpResult:
    """Maximize a sparse rational objective over the polytope, exactly.

    With stop_when_positive, returns as soon as a feasible point with objective
    value > 0 is found (status POSITIVE); the reported objective is then a
    witness value, not the maximum.
    """
    obj = {v: as_fraction(c) for v, c in objective.items() if as_fraction(c) != 0}
    for v in obj:
        if v >= poly.num_vars:
            raise ValueError("objective references a variable beyond num_vars")
    pre = _presolve(poly)
    if pre is None:
        return LpResult(INFEASIBLE)
    rows_frac, fixed, lower, var_map, n_reduced = pre

    const = sum((c * lower[v] for v, c in obj.items()), Fraction(0))
    reduced_obj = tuple((var_map[v], c) for v, c in sorted(obj.items()) if v not in fixed)

    if n_reduced == 0:
        point = tuple(lower)
        value = sum((c * point[v] for v, c in obj.items()), Fraction(0))
        return LpResult(OPTIMAL, value, point)

    rows = []
    for terms, rel, rhs in rows_frac:
        sterms, srhs = _scaled_row(terms, rhs)
        rows.append((sterms, _REL_CODE[rel], srhs))
    obj_terms, _ = _scaled_row(reduced_obj, Fraction(0))
    # The core maximizes the scaled reduced objective D*(obj - const); the true
    # objective is positive iff the core value exceeds -D*const.
    D = 1
    for _, c in reduced_obj:
        D = D * c.denominator // gcd(D, c.denominator)
    threshold = -D * const
    status, raw = _solve_scaled(n_reduced, rows, obj_terms, stop_when_positive, threshold)
    if raw is None:
        return LpResult(status)
    point = tuple(
        lower[v] + (raw[var_map[v]] if v not in fixed else 0) for v in range(poly.num_vars)
    )
    value = sum((c * point[v] for v, c in obj.items()), Fraction(0))
    return LpResult(status, value, point)


def lp_feasible_point(poly: Polytope) -> Optional[tuple[Fraction, ...]]:
    res = lp_max(poly, {})
    return res.point if res.is_optimal else None


class ScaledSystem:
    """A reusable solving workspace over a fixed set of static constraints.

    Built once per polytope, it pre-scales every row to integers, absorbs
    singleton equalities as fixed variables, and then answers many lp_max-style
    queries that differ only in variable lower bounds, a few dynamic rows, and
    the objective. Static rows are activated lazily: a query is solved over the
    active subset and a solution is only accepted once it satisfies every
    static row (violations activate the row and re-solve). Lower bounds are
    applied as exact variable shifts, so they never become tableau rows.
    """

    def __init__(self, num_vars: int, static_rows: Sequence[LinearConstraint], seed_active: int = 0):
        self.num_vars = num_vars
        self.always_infeasible = False
        fixed: dict[int, Fraction] = {}
        rows: list[LinearConstraint] = []
        for c in static_rows:
            if len(c.terms) == 1 and c.rel == EQ:
                v, coef = c.terms[0]
                val = c.rhs / coef
                if val < 0 or (v in fixed and fixed[v] != val):
                    self.always_infeasible = True
                fixed[v] = val
            else:
                rows.append(c)
        self.fixed = fixed
        self.var_map = [-1] * num_vars
        nxt = 0
        for v in range(num_vars):
            if v not in fixed:
                self.var_map[v] = nxt
                nxt += 1
        self.n_compact = nxt

        # Substitute fixed variables and scale each surviving row to integers.
        self.rows_int: list[tuple[tuple[tuple[int, int], ...], int, int]] = []
        for c in rows:
            terms = []
            shift = Fraction(0)
            for v, coef in c.terms:
                if v in fixed:
                    shift += coef * fixed[v]
                else:
                    terms.append((self.var_map[v], coef))
            rhs = c.rhs - shift
            if not terms:
                ok = rhs >= 0 if c.rel == LE else rhs <= 0 if c.rel == GE else rhs == 0
                if not ok:
                    self.always_infeasible = True
                continue
            sterms, srhs = _scaled_row(terms, rhs)
            self.rows_int.append((tuple(sterms), _REL_CODE[c.rel], srhs))

        self.active: set[int] = set(range(min(seed_active, len(self.rows_int))))
        self.lower: list[Fraction] = [Fraction(0)] * self.n_compact
        self._shift_cache: dict[int, tuple[list[tuple[int, int]], int, int]] = {}

    def set_lower(self, lower_by_var: Mapping[int, Fraction]) -> bool:
        """Install per-variable lower bounds (original indexing). Returns False
        when a bound contradicts a fixed variable."""
        new = [Fraction(0)] * self.n_compact
        for v, b in lower_by_var.items():
            if b <= 0:
                continue
            if v in self.fixed:
                if self.fixed[v] < b:
                    return False
                continue
            cv = self.var_map[v]
            if b > new[cv]:
                new[cv] = b
        if new != self.lower:
            self.lower = new
            self._shift_cache.clear()
        return True

    def _shifted_row(self, idx: int):
        got = self._shift_cache.get(idx)
        if got is not None:
            return got
        terms, rel, rhs = self.rows_int[idx]
        shift = Fraction(0)
        for v, coef in terms:
            lv = self.lower[v]
            if lv:
                shift += coef * lv
        new_rhs = rhs - shift
        if new_rhs.denominator == 1:
            row = (list(terms), rel, new_rhs.numerator)
        else:
            d = new_rhs.denominator
            row = ([(v, coef * d) for v, coef in terms], rel, new_rhs.numerator)
        self._shift_cache[idx] = row
        return row

    def _check_failures(self, compact_point: Sequence[Fraction]) -> list[int]:
        """Indices of inactive static rows violated at the compact-space point."""
        denom = 1
        for x in compact_point:
            denom = denom * x.denominator // gcd(denom, x.denominator)
        ints = [int(x * denom) for x in compact_point]
        bad = []
        for idx, (terms, rel, rhs) in enumerate(self.rows_int):
            if idx in self.active:
                continue
            lhs = 0
            for v, coef in terms:
                xi = ints[v]
                if xi:
                    lhs += coef * xi
            target = rhs * denom
            ok = lhs <= target if rel == -1 else lhs >= target if rel == 1 else lhs == target
            if not ok:
                bad.append(idx)
        return bad

    def solve(
        self,
        dynamic_rows: Sequence[LinearConstraint],
        objective: Mapping[int, Fraction],
        stop_when_positive: bool = False,
    ) -> LpResult:
        """Maximize over static rows + bounds + dynamic rows; exact."""
        if self.always_infeasible:
            return LpResult(INFEASIBLE)
        dyn = []
        for c in dynamic_rows:
            terms = []
            shift = Fraction(0)
            for v, coef in c.terms:
                if v in self.fixed:
                    shift += coef * self.fixed[v]
                else:
                    cv = self.var_map[v]
                    terms.append((cv, coef))
                    if self.lower[cv]:
                        shift += coef * self.lower[cv]
            rhs = c.rhs - shift
            if not terms:
                ok = rhs >= 0 if c.rel == LE else rhs <= 0 if c.rel == GE else rhs == 0
                if not ok:
                    return LpResult(INFEASIBLE)
                continue
            sterms, srhs = _scaled_row(terms, rhs)
            dyn.append((sterms, _REL_CODE[c.rel], srhs))

        obj_compact: dict[int, Fraction] = {}
        const = Fraction(0)
        for v, coef in objective.items():
            coef = as_fraction(coef)
            if coef == 0:
                continue
            if v in self.fixed:
                const += coef * self.fixed[v]
            else:
                cv = self.var_map[v]
                obj_compact[cv] = obj_compact.get(cv, Fraction(0)) + coef
                const += coef * self.lower[cv]
        reduced_obj = tuple(sorted(obj_compact.items()))
        obj_terms, _ = _scaled_row(reduced_obj, Fraction(0))
        D = 1
        for _, c in reduced_obj:
            D = D * c.denominator // gcd(D, c.denominator)
        threshold = -D * const

        if self.n_compact == 0:
            point = tuple(self.fixed[v] for v in range(self.num_vars))
            value = sum((as_fraction(c) * point[v] for v, c in objective.items()), Fraction(0))
            return LpResult(OPTIMAL, value, point)

        while True:
            rows = [self._shifted_row(i) for i in sorted(self.active)] + dyn
            status, raw = _solve_scaled(self.n_compact, rows, obj_terms, stop_when_positive, threshold)
            if raw is None:
                if status == UNBOUNDED and len(self.active) < len(self.rows_int):
                    self.active.update(range(len(self.rows_int)))
                    continue
                return LpResult(status)
            compact = [x + l for x, l in zip(raw, self.lower)]
            violated = self._check_failures(compact)
            if violated:
                self.active.update(violated)
                continue
            point = tuple(
                self.fixed[v] if v in self.fixed else compact[self.var_map[v]]
                for v in range(self.num_vars)
            )
            value = sum((as_fraction(c) * point[v] for v, c in objective.items()), Fraction(0))
            return LpResult(status, value, point)


def union_max(
    polys: Sequence[Polytope], objective: Mapping[int, Rational]
) -> tuple[LpResult, Optional[int]]:
    """Maximize over a union of polytopes: best member optimum wins, lowest
    index breaking ties. Infeasible only when every member is infeasible."""
    if not polys:
        raise ValueError("union_max needs at least one polytope")
    best: Optional[LpResult] = None
    best_idx: Optional[int] = None
    for idx, poly in enumerate(polys):
        res = lp_max(poly, objective)
        if res.status == UNBOUNDED:
            return res, idx
        if not res.is_optimal:
            continue
        if best is None or res.objective > best.objective:  # type: ignore[operator]
            best, best_idx = res, idx
    if best is None:
        return LpResult(INFEASIBLE), None
    return best, best_idx


def backend_name() -> str:
    return "gmp-core" if _use_core else "python"
