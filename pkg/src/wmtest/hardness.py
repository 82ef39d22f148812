"""Reductions from Monotone 1-in-3 SAT to consistency checking.

Two gadget families turn a monotone formula into an abstract execution on
23 threads whose consistency equals 1-in-3 satisfiability:

- the relaxed-acyclic family (14 locations), decided under Relaxed-Acyclic;
- the ra family (26 locations), decided under WRA, RA, SRA, and CM.

A clause with variables j < k < l contributes, per phase, a copy gadget per
step, at-most-one-true gadgets on location pairs a1..a3 for (j,k), (j,l),
(k,l), an at-least-one-true gadget on b, and copy-down gadgets that carry
each step's choice into the next phase.  A satisfying assignment extends
the instance to a concrete execution (witness_extension); a value-bounding
rewrite (bounded_value_transform) replaces the Theta(n*m)-sized value
domain with a constant one while preserving the verdict.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Mapping, Optional

from .decide import TooLarge
from .model import READ, WRITE, AbstractExecution, ConcreteExecution, Relation


class MalformedHeader(ValueError):
    """Formula text whose header or clause lines are not well-formed."""


class IndexOutOfRange(ValueError):
    """A clause mentions a variable outside [1..n]."""


class RepeatedVariableInClause(ValueError):
    """A clause mentions the same variable twice."""


class TooFewClauses(ValueError):
    """Fewer clauses than the header promises (or none at all)."""


class AssignmentNotOneInThree(ValueError):
    """The assignment does not set exactly one variable true per clause."""


class PlanMismatch(ValueError):
    """The execution does not match the plan it is paired with."""


class GadgetFamily(Enum):
    RELAXED_ACYCLIC = "relaxed-acyclic"
    RA_FAMILY = "ra"


THREADS = (
    "t1", "t2", "t3", "t4", "t5", "t6",
    "f1", "f2", "f3", "f4", "f5", "f6",
    "g1", "g2", "g3", "g4", "g5", "g6",
    "h1", "h2", "h3", "p", "q",
)
_T_INDEX = {t: i for i, t in enumerate(THREADS)}

# Location order used when serializing auxiliary blocks; a1..a3 and b are
# handled per phase rather than per step.
_PHASE_LOCATIONS = ("a1", "a2", "a3", "b")
_RLX_LOCATIONS = (
    "x1", "x2", "y1", "y2", "y3", "y4", "z1", "z2", "z3", "z4",
) + _PHASE_LOCATIONS
_RA_LOCATIONS = (
    "x1", "x2",
    "y1", "y2", "y3", "y4", "y5", "y6", "y7", "y8",
    "z1", "z2", "z3", "z4", "z5", "z6", "z7", "z8",
) + _PHASE_LOCATIONS + ("l1", "l2", "l3", "l4")


def family_locations(family: GadgetFamily) -> tuple[str, ...]:
    if family is GadgetFamily.RA_FAMILY:
        return _RA_LOCATIONS
    if family is GadgetFamily.RELAXED_ACYCLIC:
        return _RLX_LOCATIONS
    raise ValueError(f"unknown gadget family {family!r}")


@dataclass(frozen=True)
class Formula:
    """A monotone formula: clauses of three distinct variables in [1..n]."""

    n: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "clauses", tuple(tuple(cl) for cl in self.clauses)
        )
        if self.n < 3:
            raise MalformedHeader(f"need at least 3 variables, got {self.n}")
        if len(self.clauses) < 1:
            raise TooFewClauses("a formula needs at least one clause")
        for cl in self.clauses:
            if len(cl) != 3:
                raise MalformedHeader(f"clause {cl} does not have three variables")
            for v in cl:
                if not isinstance(v, int) or not 1 <= v <= self.n:
                    raise IndexOutOfRange(f"variable {v} outside [1..{self.n}]")
            if len(set(cl)) != 3:
                raise RepeatedVariableInClause(f"clause {cl} repeats a variable")

    @property
    def m(self) -> int:
        return len(self.clauses)


@dataclass(frozen=True)
class Assignment:
    """A truth assignment; the 1-in-3 property is checked where needed."""

    values: Mapping[int, bool]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", dict(self.values))

    def total_on(self, n: int) -> bool:
        return set(self.values) == set(range(1, n + 1))

    def one_in_three(self, f: Formula) -> bool:
        return self.total_on(f.n) and all(
            sum(1 for v in cl if self.values[v]) == 1 for cl in f.clauses
        )


@dataclass(frozen=True)
class GadgetPlan:
    """The per-event (phase, step) layout of a generated instance."""

    formula: Formula
    family: GadgetFamily
    blocks: Mapping[str, tuple[int, int]] = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", dict(self.blocks))


def parse_formula(text: str) -> Formula:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise MalformedHeader("empty formula text")
    head = rows[0].split()
    if len(head) != 2:
        raise MalformedHeader(f"header must be 'n m', got {rows[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise MalformedHeader(f"header must be two integers, got {rows[0]!r}")
    if n < 3:
        raise MalformedHeader(f"need at least 3 variables, got {n}")
    if m < 1:
        raise TooFewClauses(f"header promises {m} clauses")
    body = rows[1:]
    if len(body) < m:
        raise TooFewClauses(f"header promises {m} clauses, found {len(body)}")
    if len(body) > m:
        raise MalformedHeader(f"trailing input after {m} clauses")
    clauses = []
    for k, ln in enumerate(body, start=2):
        parts = ln.split()
        if len(parts) != 3:
            raise MalformedHeader(f"line {k}: expected three variable indices")
        try:
            clauses.append(tuple(int(p) for p in parts))
        except ValueError:
            raise MalformedHeader(f"line {k}: indices must be integers")
    return Formula(n, tuple(clauses))


def brute_force_1in3(f: Formula) -> Optional[Assignment]:
    """First assignment (in bit order, variable v on bit v-1) that sets
    exactly one variable true in every clause, or None."""
    if f.n > 24:
        raise TooLarge(f"{f.n} variables exceeds the 24-variable guard")
    masks = [sum(1 << (v - 1) for v in cl) for cl in f.clauses]
    for bits in range(1 << f.n):
        if all((bits & cm).bit_count() == 1 for cm in masks):
            return Assignment(
                {v: bool((bits >> (v - 1)) & 1) for v in range(1, f.n + 1)}
            )
    return None


def _clause_roles(clause: tuple[int, int, int]):
    """Sorted clause (j, k, l) and the pairs covered by a1, a2, a3."""
    j, k, l = sorted(clause)
    return (j, k, l), ((j, k), (j, l), (k, l))


class _InstanceBuilder:
    def __init__(self) -> None:
        self.rows: dict[str, list[tuple[str, str, int]]] = {t: [] for t in THREADS}
        self.keys: dict[str, list[tuple[int, int]]] = {t: [] for t in THREADS}

    def emit(self, t: str, kind: str, loc: str, val: int, block: tuple[int, int]):
        self.rows[t].append((kind, loc, val))
        self.keys[t].append(block)

    def finish(self, f: Formula, family: GadgetFamily):
        x = AbstractExecution.from_threads(self.rows, order=THREADS)
        blocks = {
            f"{t}.{i}": key
            for t, keys in self.keys.items()
            for i, key in enumerate(keys)
        }
        return x, GadgetPlan(f, family, blocks)


def _build_ra_family(f: Formula):
    n, m = f.n, f.m
    V = lambda i, j: 2 * (i * (n + 1) + j)
    b = _InstanceBuilder()
    for i in range(1, m + 1):
        (c1, c2, c3), pairs = _clause_roles(f.clauses[i - 1])
        members = set(f.clauses[i - 1])
        for j in range(1, n + 1):
            v, vb = V(i, j), V(i, j) + 1
            blk = (i, j)
            b.emit("t1", WRITE, "y1", v, blk)
            b.emit("t1", WRITE, "y1", vb, blk)
            if i >= 2:
                b.emit("t1", WRITE, "z1", v, blk)
                b.emit("t1", WRITE, "z1", vb, blk)
            if j in members:
                b.emit("t1", WRITE, "b", v, blk)
                b.emit("t1", WRITE, "b", vb, blk)
            b.emit("t1", WRITE, "x1", v, blk)
            b.emit("t2", WRITE, "y2", v, blk)
            b.emit("t2", WRITE, "y2", vb, blk)
            if i >= 2:
                b.emit("t2", WRITE, "z2", v, blk)
                b.emit("t2", WRITE, "z2", vb, blk)
            for c in range(3):
                if j in pairs[c]:
                    b.emit("t2", WRITE, f"a{c + 1}", v, blk)
                    b.emit("t2", WRITE, f"a{c + 1}", vb, blk)
            b.emit("t2", WRITE, "x1", v, blk)
            b.emit("t3", READ, "x1", v, blk)
            for y in ("y1", "y2", "y3", "y4"):
                b.emit("t3", READ, y, v, blk)
            if i >= 2:
                for z in ("z1", "z2", "z3", "z4"):
                    b.emit("t3", READ, z, v, blk)
            for c in range(3):
                if j in pairs[c]:
                    b.emit("t3", READ, f"a{c + 1}", v, blk)
            if j in members:
                b.emit("t3", READ, "b", v, blk)
            b.emit("t4", WRITE, "y6", v, blk)
            b.emit("t4", WRITE, "y6", vb, blk)
            if i <= m - 1:
                b.emit("t4", WRITE, "z6", v, blk)
                b.emit("t4", WRITE, "z6", vb, blk)
            b.emit("t4", WRITE, "x2", v, blk)
            b.emit("t5", WRITE, "y8", v, blk)
            b.emit("t5", WRITE, "y8", vb, blk)
            if i <= m - 1:
                b.emit("t5", WRITE, "z8", v, blk)
                b.emit("t5", WRITE, "z8", vb, blk)
            b.emit("t5", WRITE, "x2", v, blk)
            b.emit("t6", READ, "x2", v, blk)
            b.emit("t6", WRITE, "l1", v, blk)
            b.emit("t6", WRITE, "l2", v, blk)
            if i <= m - 1:
                b.emit("t6", WRITE, "l3", v, blk)
                b.emit("t6", WRITE, "l4", v, blk)
            b.emit("f1", READ, "y5", v, blk)
            b.emit("f1", WRITE, "y2", v, blk)
            b.emit("f1", READ, "y6", v, blk)
            b.emit("f2", WRITE, "y3", v, blk)
            b.emit("f2", WRITE, "y3", vb, blk)
            b.emit("f2", WRITE, "y5", v, blk)
            b.emit("f3", READ, "l1", v, blk)
            b.emit("f3", WRITE, "y5", v, blk)
            b.emit("f4", READ, "y7", v, blk)
            b.emit("f4", WRITE, "y1", v, blk)
            b.emit("f4", READ, "y8", v, blk)
            b.emit("f5", WRITE, "y4", v, blk)
            b.emit("f5", WRITE, "y4", vb, blk)
            b.emit("f5", WRITE, "y7", v, blk)
            b.emit("f6", READ, "l2", v, blk)
            b.emit("f6", WRITE, "y7", v, blk)
            if i <= m - 1:
                vp, vpb = V(i + 1, j), V(i + 1, j) + 1
                b.emit("g1", READ, "z5", vp, blk)
                b.emit("g1", WRITE, "z2", vp, blk)
                b.emit("g1", READ, "z6", v, blk)
                b.emit("g2", WRITE, "z3", vp, blk)
                b.emit("g2", WRITE, "z3", vpb, blk)
                b.emit("g2", WRITE, "z5", vp, blk)
                b.emit("g3", READ, "l3", v, blk)
                b.emit("g3", WRITE, "z5", vp, blk)
                b.emit("g4", READ, "z7", vp, blk)
                b.emit("g4", WRITE, "z1", vp, blk)
                b.emit("g4", READ, "z8", v, blk)
                b.emit("g5", WRITE, "z4", vp, blk)
                b.emit("g5", WRITE, "z4", vpb, blk)
                b.emit("g5", WRITE, "z7", vp, blk)
                b.emit("g6", READ, "l4", v, blk)
                b.emit("g6", WRITE, "z7", vp, blk)
        pk = (i, n)
        for c in range(3):
            first, second = pairs[c][1], pairs[c][0]
            b.emit(f"h{c + 1}", WRITE, f"a{c + 1}", V(i, first), pk)
            b.emit(f"h{c + 1}", WRITE, f"a{c + 1}", V(i, second), pk)
        b.emit("p", WRITE, "b", V(i, c3), pk)
        b.emit("p", WRITE, "b", V(i, c1), pk)
        b.emit("q", WRITE, "b", V(i, c3), pk)
        b.emit("q", WRITE, "b", V(i, c2), pk)
    return b.finish(f, GadgetFamily.RA_FAMILY)


def _build_relaxed_acyclic(f: Formula):
    n, m = f.n, f.m
    V = lambda i, j: 2 * (i * (n + 1) + j)
    U = lambda i, j: V(i, j) + 2 * (m + 1) * (n + 1)
    b = _InstanceBuilder()
    for i in range(1, m + 1):
        (c1, c2, c3), pairs = _clause_roles(f.clauses[i - 1])
        members = set(f.clauses[i - 1])
        for j in range(1, n + 1):
            v, vb, u = V(i, j), V(i, j) + 1, U(i, j)
            blk = (i, j)
            b.emit("t1", READ, "y1", v, blk)
            b.emit("t1", READ, "y1", u, blk)
            if i >= 2:
                b.emit("t1", READ, "z1", v, blk)
                b.emit("t1", READ, "z1", u, blk)
            if j in members:
                b.emit("t1", READ, "b", v, blk)
            b.emit("t1", WRITE, "x1", v, blk)
            b.emit("t2", READ, "y2", v, blk)
            b.emit("t2", READ, "y2", u, blk)
            if i >= 2:
                b.emit("t2", READ, "z2", v, blk)
                b.emit("t2", READ, "z2", u, blk)
            for c in range(3):
                if j in pairs[c]:
                    b.emit("t2", READ, f"a{c + 1}", v, blk)
            b.emit("t2", WRITE, "x1", v, blk)
            b.emit("t3", READ, "x1", v, blk)
            b.emit("t3", WRITE, "y1", v, blk)
            b.emit("t3", WRITE, "y2", v, blk)
            if i >= 2:
                b.emit("t3", WRITE, "z1", v, blk)
                b.emit("t3", WRITE, "z2", v, blk)
            for c in range(3):
                if j in pairs[c]:
                    b.emit("t3", WRITE, f"a{c + 1}", v, blk)
            if j in members:
                b.emit("t3", WRITE, "b", v, blk)
            b.emit("t4", READ, "y3", v, blk)
            b.emit("t4", WRITE, "y2", vb, blk)
            if i <= m - 1:
                b.emit("t4", READ, "z3", v, blk)
                b.emit("t4", WRITE, "z2", vb, blk)
            b.emit("t4", WRITE, "x2", v, blk)
            b.emit("t5", READ, "y4", v, blk)
            b.emit("t5", WRITE, "y1", vb, blk)
            if i <= m - 1:
                b.emit("t5", READ, "z4", v, blk)
                b.emit("t5", WRITE, "z1", vb, blk)
            b.emit("t5", WRITE, "x2", v, blk)
            b.emit("t6", READ, "x2", v, blk)
            b.emit("t6", WRITE, "y3", v, blk)
            b.emit("t6", WRITE, "y4", v, blk)
            if i <= m - 1:
                b.emit("t6", WRITE, "z3", v, blk)
                b.emit("t6", WRITE, "z4", v, blk)
            b.emit("f1", WRITE, "y1", vb, blk)
            b.emit("f1", WRITE, "y1", v, blk)
            b.emit("f2", WRITE, "y1", u, blk)
            b.emit("f2", WRITE, "y1", u + 1, blk)
            b.emit("f3", READ, "y1", u + 1, blk)
            b.emit("f3", READ, "y1", vb, blk)
            b.emit("f3", WRITE, "y4", v, blk)
            b.emit("f4", WRITE, "y2", vb, blk)
            b.emit("f4", WRITE, "y2", v, blk)
            b.emit("f5", WRITE, "y2", u, blk)
            b.emit("f5", WRITE, "y2", u + 1, blk)
            b.emit("f6", READ, "y2", u + 1, blk)
            b.emit("f6", READ, "y2", vb, blk)
            b.emit("f6", WRITE, "y3", v, blk)
            if i <= m - 1:
                vp, up = V(i + 1, j), U(i + 1, j)
                b.emit("g1", WRITE, "z1", vb, blk)
                b.emit("g1", WRITE, "z1", vp, blk)
                b.emit("g2", WRITE, "z1", up, blk)
                b.emit("g2", WRITE, "z1", u + 1, blk)
                b.emit("g3", READ, "z1", u + 1, blk)
                b.emit("g3", READ, "z1", vb, blk)
                b.emit("g3", WRITE, "z4", v, blk)
                b.emit("g4", WRITE, "z2", vb, blk)
                b.emit("g4", WRITE, "z2", vp, blk)
                b.emit("g5", WRITE, "z2", up, blk)
                b.emit("g5", WRITE, "z2", u + 1, blk)
                b.emit("g6", READ, "z2", u + 1, blk)
                b.emit("g6", READ, "z2", vb, blk)
                b.emit("g6", WRITE, "z3", v, blk)
        pk = (i, n)
        for c in range(3):
            first, second = pairs[c][1], pairs[c][0]
            b.emit(f"h{c + 1}", WRITE, f"a{c + 1}", V(i, first), pk)
            b.emit(f"h{c + 1}", WRITE, f"a{c + 1}", V(i, second), pk)
        b.emit("p", WRITE, "b", V(i, c3), pk)
        b.emit("p", WRITE, "b", V(i, c1), pk)
        b.emit("q", WRITE, "b", V(i, c3), pk)
        b.emit("q", WRITE, "b", V(i, c2), pk)
    return b.finish(f, GadgetFamily.RELAXED_ACYCLIC)


@lru_cache(maxsize=64)
def _generate(f: Formula, family: GadgetFamily):
    if family is GadgetFamily.RA_FAMILY:
        return _build_ra_family(f)
    if family is GadgetFamily.RELAXED_ACYCLIC:
        return _build_relaxed_acyclic(f)
    raise ValueError(f"unknown gadget family {family!r}")


def generate(f: Formula, family: GadgetFamily) -> AbstractExecution:
    return _generate(f, family)[0]


def gadget_plan(f: Formula, family: GadgetFamily) -> GadgetPlan:
    return _generate(f, family)[1]


# --- witness construction -------------------------------------------------


class _WitnessBuilder:
    def __init__(self, x: AbstractExecution):
        self.x = x
        self.lookup: dict[tuple[str, str, str, int], str] = {}
        for e in x.events:
            key = (e.thread, e.kind, e.location, e.value)
            assert key not in self.lookup, f"ambiguous event {key}"
            self.lookup[key] = e.id
        self.rf: dict[str, str] = {}
        self.mobar: set[tuple[str, str]] = set()

    def read_from(self, wt: str, loc: str, val: int, rt: str, rloc=None, rval=None):
        w = self.lookup[(wt, WRITE, loc, val)]
        r = self.lookup[(rt, READ, rloc or loc, rval if rval is not None else val)]
        prev = self.rf.get(r)
        assert prev is None or prev == w, f"conflicting writers for {r}"
        self.rf[r] = w

    def mo_before(self, at: str, aval: int, bt: str, bval: int, loc: str):
        a = self.lookup[(at, WRITE, loc, aval)]
        b = self.lookup[(bt, WRITE, loc, bval)]
        self.mobar.add((a, b))

    def rf_relation(self) -> Relation:
        universe = frozenset(e.id for e in self.x.events)
        return Relation(
            frozenset((w, r) for r, w in self.rf.items()), universe
        )


def _linear_extension(preferred, edges):
    """Deterministic topological order; preferred-first among ready nodes."""
    pos = {eid: k for k, eid in enumerate(preferred)}
    succ: dict[str, list[str]] = {}
    indeg = {eid: 0 for eid in preferred}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
        indeg[b] += 1
    ready = [pos[e] for e, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        e = preferred[heapq.heappop(ready)]
        out.append(e)
        for s in succ.get(e, ()):
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(ready, pos[s])
    assert len(out) == len(preferred), "cycle in witness order"
    return out


def _total_mo(x: AbstractExecution, order: list[str]) -> Relation:
    rank = {eid: k for k, eid in enumerate(order)}
    pairs = set()
    for loc in x.locations:
        ws = sorted((e.id for e in x.writes_on(loc)), key=rank.__getitem__)
        for a_i in range(len(ws)):
            for b_i in range(a_i + 1, len(ws)):
                pairs.add((ws[a_i], ws[b_i]))
    return Relation(frozenset(pairs), frozenset(e.id for e in x.events))


def _witness_ra_family(f: Formula, asg: Assignment) -> ConcreteExecution:
    n, m = f.n, f.m
    V = lambda i, j: 2 * (i * (n + 1) + j)
    x, _ = _generate(f, GadgetFamily.RA_FAMILY)
    wb = _WitnessBuilder(x)
    truth = asg.values
    for i in range(1, m + 1):
        (c1, c2, c3), pairs = _clause_roles(f.clauses[i - 1])
        for j in range(1, n + 1):
            v, vb = V(i, j), V(i, j) + 1
            wb.read_from("f2", "y3", v, "t3")
            wb.read_from("f5", "y4", v, "t3")
            wb.read_from("t4", "y6", v, "f1")
            wb.read_from("t5", "y8", v, "f4")
            wb.read_from("t6", "l1", v, "f3")
            wb.read_from("t6", "l2", v, "f6")
            if truth[j]:
                wb.read_from("t2", "x1", v, "t3")
                wb.read_from("f1", "y2", v, "t3")
                wb.read_from("f3", "y5", v, "f1")
                wb.read_from("t5", "x2", v, "t6")
                wb.read_from("f5", "y7", v, "f4")
                wb.read_from("t1", "y1", v, "t3")
                wb.mo_before("t2", vb, "f1", v, "y2")
            else:
                wb.read_from("t1", "x1", v, "t3")
                wb.read_from("f4", "y1", v, "t3")
                wb.read_from("f6", "y7", v, "f4")
                wb.read_from("t4", "x2", v, "t6")
                wb.read_from("f2", "y5", v, "f1")
                wb.read_from("t2", "y2", v, "t3")
                wb.mo_before("t1", vb, "f4", v, "y1")
            if i <= m - 1:
                vp, vpb = V(i + 1, j), V(i + 1, j) + 1
                wb.read_from("g2", "z3", vp, "t3")
                wb.read_from("g5", "z4", vp, "t3")
                wb.read_from("t4", "z6", v, "g1")
                wb.read_from("t5", "z8", v, "g4")
                wb.read_from("t6", "l3", v, "g3")
                wb.read_from("t6", "l4", v, "g6")
                if truth[j]:
                    wb.read_from("t2", "x1", vp, "t3")
                    wb.read_from("g1", "z2", vp, "t3")
                    wb.read_from("g3", "z5", vp, "g1")
                    wb.read_from("t5", "x2", v, "t6")
                    wb.read_from("g5", "z7", vp, "g4")
                    wb.read_from("t1", "z1", vp, "t3")
                    wb.mo_before("t2", vpb, "g1", vp, "z2")
                else:
                    wb.read_from("t1", "x1", vp, "t3")
                    wb.read_from("g4", "z1", vp, "t3")
                    wb.read_from("g6", "z7", vp, "g4")
                    wb.read_from("t4", "x2", v, "t6")
                    wb.read_from("g2", "z5", vp, "g1")
                    wb.read_from("t2", "z2", vp, "t3")
                    wb.mo_before("t1", vpb, "g4", vp, "z1")
        for c in range(3):
            ja, ka = pairs[c]
            loc = f"a{c + 1}"
            vj, vk = V(i, ja), V(i, ka)
            hc = f"h{c + 1}"
            if truth[ja]:
                wb.read_from(hc, loc, vj, "t3")
                wb.read_from("t2", loc, vk, "t3")
                wb.mo_before("t2", vj + 1, hc, vj, loc)
                wb.mo_before(hc, vj, "t2", vk, loc)
            elif truth[ka]:
                wb.read_from(hc, loc, vk, "t3")
                wb.read_from("t2", loc, vj, "t3")
                wb.mo_before("t2", vk + 1, hc, vk, loc)
            else:
                wb.read_from("t2", loc, vj, "t3")
                wb.read_from("t2", loc, vk, "t3")
        vj, vk, vl = V(i, c1), V(i, c2), V(i, c3)
        if truth[c3]:
            wb.read_from("p", "b", vj, "t3")
            wb.read_from("q", "b", vk, "t3")
            wb.read_from("t1", "b", vl, "t3")
            wb.mo_before("t1", vj + 1, "p", vj, "b")
            wb.mo_before("p", vj, "q", vk, "b")
            wb.mo_before("t1", vk + 1, "q", vk, "b")
            wb.mo_before("q", vk, "t1", vl, "b")
        elif truth[c2]:
            wb.read_from("p", "b", vj, "t3")
            wb.read_from("t1", "b", vk, "t3")
            wb.read_from("q", "b", vl, "t3")
            wb.mo_before("t1", vj + 1, "p", vj, "b")
            wb.mo_before("p", vj, "t1", vk, "b")
            wb.mo_before("t1", vl + 1, "q", vl, "b")
        else:
            wb.read_from("t1", "b", vj, "t3")
            wb.read_from("q", "b", vk, "t3")
            wb.read_from("p", "b", vl, "t3")
            wb.mo_before("t1", vk + 1, "q", vk, "b")
            wb.mo_before("q", vk, "p", vl, "b")
            wb.mo_before("t1", vl + 1, "p", vl, "b")
    rf_rel = wb.rf_relation()
    hb = x.po.union(rf_rel).transitive_closure()
    # Remaining order between conflicting writes of different blocks: the
    # earlier (phase, step) write, decoded from its value, goes first unless
    # happens-before already relates the pair.  Unread writes of the helper
    # threads stay out: their program order runs against value order, and
    # the linearization places them by program order alone.
    read_writes = set(wb.rf.values())
    helper = {"h1", "h2", "h3", "p", "q"}
    dec = lambda val: divmod(val >> 1, n + 1)
    for loc in x.locations:
        ws = [
            w
            for w in x.writes_on(loc)
            if w.thread not in helper or w.id in read_writes
        ]
        for w1, w2 in itertools.permutations(ws, 2):
            if dec(w1.value) < dec(w2.value) and (w1.id, w2.id) not in hb:
                wb.mobar.add((w1.id, w2.id))
    preferred = [e.id for e in x.events]
    order = _linear_extension(preferred, set(hb.pairs) | wb.mobar)
    return ConcreteExecution(x, rf_rel, _total_mo(x, order))


def _witness_relaxed_acyclic(f: Formula, asg: Assignment) -> ConcreteExecution:
    n, m = f.n, f.m
    V = lambda i, j: 2 * (i * (n + 1) + j)
    U = lambda i, j: V(i, j) + 2 * (m + 1) * (n + 1)
    x, _ = _generate(f, GadgetFamily.RELAXED_ACYCLIC)
    wb = _WitnessBuilder(x)
    truth = asg.values
    for i in range(1, m + 1):
        (c1, c2, c3), pairs = _clause_roles(f.clauses[i - 1])
        for j in range(1, n + 1):
            v, vb, u, ub = V(i, j), V(i, j) + 1, U(i, j), U(i, j) + 1
            wb.read_from("f2", "y1", u, "t1")
            wb.read_from("f5", "y2", u, "t2")
            wb.read_from("f2", "y1", ub, "f3")
            wb.read_from("f5", "y2", ub, "f6")
            if truth[j]:
                wb.read_from("t2", "x1", v, "t3")
                wb.read_from("f4", "y2", v, "t2")
                wb.read_from("t4", "y2", vb, "f6")
                wb.read_from("t6", "y3", v, "t4")
                wb.read_from("t5", "x2", v, "t6")
                wb.read_from("f3", "y4", v, "t5")
                wb.read_from("f1", "y1", vb, "f3")
                wb.read_from("t3", "y1", v, "t1")
            else:
                wb.read_from("t1", "x1", v, "t3")
                wb.read_from("f1", "y1", v, "t1")
                wb.read_from("t5", "y1", vb, "f3")
                wb.read_from("t6", "y4", v, "t5")
                wb.read_from("t4", "x2", v, "t6")
                wb.read_from("f6", "y3", v, "t4")
                wb.read_from("f4", "y2", vb, "f6")
                wb.read_from("t3", "y2", v, "t2")
            if i <= m - 1:
                vp, up = V(i + 1, j), U(i + 1, j)
                wb.read_from("g2", "z1", up, "t1")
                wb.read_from("g5", "z2", up, "t2")
                wb.read_from("g2", "z1", ub, "g3")
                wb.read_from("g5", "z2", ub, "g6")
                if truth[j]:
                    wb.read_from("t2", "x1", vp, "t3")
                    wb.read_from("g4", "z2", vp, "t2")
                    wb.read_from("t4", "z2", vb, "g6")
                    wb.read_from("t6", "z3", v, "t4")
                    wb.read_from("t5", "x2", v, "t6")
                    wb.read_from("g3", "z4", v, "t5")
                    wb.read_from("g1", "z1", vb, "g3")
                    wb.read_from("t3", "z1", vp, "t1")
                else:
                    wb.read_from("t1", "x1", vp, "t3")
                    wb.read_from("g1", "z1", vp, "t1")
                    wb.read_from("t5", "z1", vb, "g3")
                    wb.read_from("t6", "z4", v, "t5")
                    wb.read_from("t4", "x2", v, "t6")
                    wb.read_from("g6", "z3", v, "t4")
                    wb.read_from("g4", "z2", vb, "g6")
                    wb.read_from("t3", "z2", vp, "t2")
        for c in range(3):
            ja, ka = pairs[c]
            loc = f"a{c + 1}"
            vj, vk = V(i, ja), V(i, ka)
            hc = f"h{c + 1}"
            if truth[ja]:
                wb.read_from(hc, loc, vj, "t2")
                wb.read_from("t3", loc, vk, "t2")
            elif truth[ka]:
                wb.read_from(hc, loc, vk, "t2")
                wb.read_from("t3", loc, vj, "t2")
            else:
                wb.read_from("t3", loc, vj, "t2")
                wb.read_from("t3", loc, vk, "t2")
        vj, vk, vl = V(i, c1), V(i, c2), V(i, c3)
        if truth[c3]:
            wb.read_from("p", "b", vj, "t1")
            wb.read_from("q", "b", vk, "t1")
            wb.read_from("t3", "b", vl, "t1")
        elif truth[c2]:
            wb.read_from("p", "b", vj, "t1")
            wb.read_from("t3", "b", vk, "t1")
            wb.read_from("q", "b", vl, "t1")
        else:
            wb.read_from("t3", "b", vj, "t1")
            wb.read_from("q", "b", vk, "t1")
            wb.read_from("p", "b", vl, "t1")
    rf_rel = wb.rf_relation()
    # Conflicting writes read by po-ordered readers of one thread inherit
    # that order.
    readers: dict[str, list[str]] = {}
    for r, w in wb.rf.items():
        readers.setdefault(w, []).append(r)
    by_id = x.by_id
    pos = {e.id: k for t in x.threads for k, e in enumerate(x.events_by_thread[t])}
    for loc in x.locations:
        ws = x.writes_on(loc)
        for w1, w2 in itertools.permutations(ws, 2):
            if w1.thread == w2.thread:
                continue
            hit = any(
                by_id[r1].thread == by_id[r2].thread and pos[r1] < pos[r2]
                for r1 in readers.get(w1.id, ())
                for r2 in readers.get(w2.id, ())
            )
            if hit:
                wb.mobar.add((w1.id, w2.id))
    # Per-location linearization of po, rf, and the forced write order.
    rank: dict[str, int] = {}
    offset = 0
    for loc in x.locations:
        proj = x.project(loc)
        members = [e.id for e in proj.events]
        edges = set(proj.po.pairs)
        edges.update(
            (w, r) for r, w in wb.rf.items() if by_id[r].location == loc
        )
        edges.update(
            (a, b) for a, b in wb.mobar if by_id[a].location == loc
        )
        for k, eid in enumerate(_linear_extension(members, edges)):
            rank[eid] = offset + k
        offset += len(members)
    order = sorted(rank, key=rank.__getitem__)
    return ConcreteExecution(x, rf_rel, _total_mo(x, order))


def witness_extension(
    f: Formula, a: Assignment, family: GadgetFamily
) -> ConcreteExecution:
    if not a.one_in_three(f):
        raise AssignmentNotOneInThree(
            "assignment must set exactly one variable true in every clause"
        )
    if family is GadgetFamily.RA_FAMILY:
        return _witness_ra_family(f, a)
    if family is GadgetFamily.RELAXED_ACYCLIC:
        return _witness_relaxed_acyclic(f, a)
    raise ValueError(f"unknown gadget family {family!r}")


# --- bounded-value rewrite ------------------------------------------------


@lru_cache(maxsize=None)
def _marker_writers(family: GadgetFamily) -> Mapping[str, tuple[str, ...]]:
    # Which threads place marker writes on each location.  Derived from a
    # fixed two-phase reference instance, in which every writing role is
    # active; reusing the same table for every instance keeps the set of
    # marker values (and hence the value universe) independent of the
    # formula's size.
    ref = Formula(3, ((1, 2, 3), (1, 2, 3)))
    x, _ = _generate(ref, family)
    writers: dict[str, set[str]] = {}
    for e in x.events:
        if e.is_write:
            writers.setdefault(e.location, set()).add(e.thread)
    return {
        loc: tuple(t for t in THREADS if t in writers.get(loc, ()))
        for loc in family_locations(family)
    }


def bounded_value_transform(
    x: AbstractExecution, plan: GadgetPlan
) -> AbstractExecution:
    """Rewrite an instance so values range over a fixed finite set.

    Original values collapse to four classes (the two decision polarities
    and the two counting polarities).  To compensate for the lost
    distinctions, every writing thread publishes a parity-tagged marker
    write per written location at the end of each step, and each reading
    thread re-reads, at the end of a step, the markers of exactly those
    threads whose values it consumed during that step.  Reading a marker
    orders the writer's history so far before the reader's subsequent
    steps, which makes superseded earlier writes permanently stale while
    leaving the writer's upcoming writes unconstrained.  Step markers
    alternate between two parities so consecutive markers of one thread
    stay distinguishable; the per-phase locations get per-phase markers
    instead, plus one closing round so both parities occur even in
    single-phase instances.
    """
    expected, eplan = _generate(plan.formula, plan.family)
    if plan != eplan or x != expected:
        raise PlanMismatch("execution does not match the plan's instance")
    writers_by_loc = _marker_writers(plan.family)
    n, m = plan.formula.n, plan.formula.m
    ubase = 2 * (m + 1) * (n + 1)
    core = lambda val: (2 if val >= ubase else 0) + (val & 1)
    aux = lambda t, zeta: 4 + 2 * _T_INDEX[t] + zeta
    sigma1 = family_locations(plan.family)
    step_locs = tuple(l for l in sigma1 if l not in _PHASE_LOCATIONS)

    # Who wrote each exact (location, value) pair, in schedule order.
    writers_of: dict[tuple[str, int], list[str]] = {}
    for t in THREADS:
        for e in x.events_by_thread[t]:
            if e.is_write:
                owners = writers_of.setdefault((e.location, e.value), [])
                if t not in owners:
                    owners.append(t)

    rows: dict[str, list[tuple[str, str, int]]] = {t: [] for t in THREADS}
    for t in THREADS:
        by_block: dict[tuple[int, int], list] = {}
        for e in x.events_by_thread[t]:
            by_block.setdefault(plan.blocks[e.id], []).append(e)
        out = rows[t]

        def marker_writes(locs, zeta):
            for loc in locs:
                if t in writers_by_loc[loc]:
                    out.append((WRITE, loc, aux(t, zeta)))

        def marker_reads(read_events, locs, zeta):
            sources: dict[str, list[str]] = {}
            for e in read_events:
                for t2 in writers_of.get((e.location, e.value), ()):
                    owners = sources.setdefault(e.location, [])
                    if t2 not in owners:
                        owners.append(t2)
            for loc in locs:
                for t2 in sorted(sources.get(loc, ()), key=_T_INDEX.__getitem__):
                    out.append((READ, loc, aux(t2, zeta)))

        for i in range(1, m + 1):
            phase_reads: list = []
            for j in range(1, n + 1):
                step_reads: list = []
                for e in by_block.pop((i, j), ()):
                    out.append((e.kind, e.location, core(e.value)))
                    if not e.is_write:
                        if e.location in _PHASE_LOCATIONS:
                            phase_reads.append(e)
                        else:
                            step_reads.append(e)
                marker_writes(step_locs, j % 2)
                marker_reads(step_reads, step_locs, j % 2)
            marker_writes(_PHASE_LOCATIONS, i % 2)
            marker_reads(phase_reads, _PHASE_LOCATIONS, i % 2)
        # Closing markers: the value universe covers both parities even for
        # instances with a single phase.
        marker_writes(_PHASE_LOCATIONS, (m + 1) % 2)
        assert not by_block, f"events of {t} outside the plan's blocks"
    return AbstractExecution.from_threads(rows, order=THREADS)
