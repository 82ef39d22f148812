"""Consistency axioms, model definitions, and checks over concrete executions.

Each axiom is a predicate on a concrete execution (events, po, rf, mo).
A memory model is a conjunction of axioms; per-location axioms quantify
over all locations.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .model import (
    ConcreteExecution,
    ConflictTriplet,
    Relation,
    conflicting_triplets,
)


class Axiom(Enum):
    WRITE_COHERENCE = "write-coherence"
    STRONG_WRITE_COHERENCE = "strong-write-coherence"
    READ_COHERENCE = "read-coherence"
    WEAK_READ_COHERENCE = "weak-read-coherence"
    PORF_ACYCLICITY = "porf-acyclicity"
    RELAXED_WRITE_COHERENCE = "relaxed-write-coherence"
    RELAXED_READ_COHERENCE = "relaxed-read-coherence"
    OB_ACYCLICITY = "ob-acyclicity"


class MemoryModel(Enum):
    SC = "sc"
    TSO = "tso"
    PSO = "pso"
    RELAXED = "relaxed"
    RELAXED_ACYCLIC = "relaxed-acyclic"
    WRA = "wra"
    RA = "ra"
    SRA = "sra"
    CC = "cc"
    CCV = "ccv"
    CM = "cm"


# cc and ccv are aliases: same axioms, same decisions, bit for bit.
_ALIASES = {MemoryModel.CC: MemoryModel.WRA, MemoryModel.CCV: MemoryModel.SRA}

MODEL_AXIOMS: dict[MemoryModel, tuple[Axiom, ...]] = {
    MemoryModel.RELAXED: (
        Axiom.RELAXED_WRITE_COHERENCE,
        Axiom.RELAXED_READ_COHERENCE,
    ),
    MemoryModel.RELAXED_ACYCLIC: (
        Axiom.RELAXED_WRITE_COHERENCE,
        Axiom.RELAXED_READ_COHERENCE,
        Axiom.PORF_ACYCLICITY,
    ),
    MemoryModel.WRA: (Axiom.PORF_ACYCLICITY, Axiom.WEAK_READ_COHERENCE),
    MemoryModel.RA: (
        Axiom.PORF_ACYCLICITY,
        Axiom.WRITE_COHERENCE,
        Axiom.READ_COHERENCE,
    ),
    MemoryModel.SRA: (Axiom.STRONG_WRITE_COHERENCE, Axiom.READ_COHERENCE),
    MemoryModel.CM: (
        Axiom.PORF_ACYCLICITY,
        Axiom.WEAK_READ_COHERENCE,
        Axiom.OB_ACYCLICITY,
    ),
}

OPERATIONAL_MODELS = (MemoryModel.SC, MemoryModel.TSO, MemoryModel.PSO)


def canonical_model(model: MemoryModel) -> MemoryModel:
    return _ALIASES.get(model, model)


def model_axioms(model: MemoryModel) -> tuple[Axiom, ...]:
    model = canonical_model(model)
    if model in OPERATIONAL_MODELS:
        raise UnsupportedModel(
            f"{model.value} is defined operationally, not by axioms"
        )
    return MODEL_AXIOMS[model]


class UnsupportedModel(Exception):
    """The model has no axiomatic characterization here."""


class MissingModificationOrder(ValueError):
    """An mo-sensitive axiom was evaluated without a total mo for a location."""


@dataclass(frozen=True)
class Violation:
    axiom: Axiom
    location: Optional[str]
    pair: tuple[str, str]


_MO_SENSITIVE = {
    Axiom.WRITE_COHERENCE,
    Axiom.STRONG_WRITE_COHERENCE,
    Axiom.READ_COHERENCE,
    Axiom.RELAXED_WRITE_COHERENCE,
    Axiom.RELAXED_READ_COHERENCE,
}


class _Ctx:
    """Dense-bitmask view of a concrete execution, shared across axioms."""

    def __init__(self, x: ConcreteExecution):
        self.x = x
        self.order = tuple(e.id for e in x.base.events)
        self.idx = {eid: i for i, eid in enumerate(self.order)}
        n = len(self.order)
        self.n = n
        events = x.base.events
        self.loc_of = tuple(e.location for e in events)
        self.is_write = tuple(e.is_write for e in events)
        self.write_mask: dict[str, int] = {}
        for i, e in enumerate(events):
            if e.is_write:
                self.write_mask[e.location] = self.write_mask.get(e.location, 0) | (
                    1 << i
                )
        # Sparse porf edges: immediate po successors plus rf.
        self.po_next: list[list[int]] = [[] for _ in range(n)]
        self.po_rows = [0] * n  # full po successor masks
        for es in x.base.events_by_thread.values():
            idxs = [self.idx[e.id] for e in es]
            for a, b in zip(idxs, idxs[1:]):
                self.po_next[a].append(b)
            suffix = 0
            for i in reversed(idxs):
                self.po_rows[i] = suffix
                suffix |= 1 << i
        self.rf_pairs = sorted(
            (self.idx[w], self.idx[r]) for w, r in x.rf.pairs
        )
        self.hb_rows = self._porf_closure()
        self.hb_anc = self._transpose(self.hb_rows)
        self.mo_by_loc: dict[str, list[tuple[int, int]]] = {}
        for a, b in x.mo.pairs:
            loc = self.loc_of[self.idx[a]]
            self.mo_by_loc.setdefault(loc, []).append((self.idx[a], self.idx[b]))
        for pairs in self.mo_by_loc.values():
            pairs.sort()
        self._triplets: Optional[tuple[ConflictTriplet, ...]] = None

    def _porf_closure(self) -> list[int]:
        n = self.n
        succ: list[list[int]] = [list(s) for s in self.po_next]
        for w, r in self.rf_pairs:
            succ[w].append(r)
        indeg = [0] * n
        for a in range(n):
            for b in succ[a]:
                indeg[b] += 1
        stack = [i for i in range(n) if indeg[i] == 0]
        topo = []
        while stack:
            v = stack.pop()
            topo.append(v)
            for b in succ[v]:
                indeg[b] -= 1
                if indeg[b] == 0:
                    stack.append(b)
        rows = [0] * n
        if len(topo) == n:
            for v in reversed(topo):
                acc = 0
                for b in succ[v]:
                    acc |= rows[b] | (1 << b)
                rows[v] = acc
        else:
            # porf is cyclic; fall back to in-place Warshall.
            for a in range(n):
                acc = 0
                for b in succ[a]:
                    acc |= 1 << b
                rows[a] = acc
            for k in range(n):
                kbit = 1 << k
                krow = rows[k]
                for i in range(n):
                    if rows[i] & kbit:
                        rows[i] |= krow
        return rows

    @staticmethod
    def _transpose(rows: list[int]) -> list[int]:
        n = len(rows)
        anc = [0] * n
        for a in range(n):
            row = rows[a]
            abit = 1 << a
            while row:
                low = row & -row
                anc[low.bit_length() - 1] |= abit
                row ^= low
        return anc

    def hb(self, a: int, b: int) -> bool:
        return bool((self.hb_rows[a] >> b) & 1)

    def po(self, a: int, b: int) -> bool:
        return bool((self.po_rows[a] >> b) & 1)

    def triplets(self) -> tuple[ConflictTriplet, ...]:
        if self._triplets is None:
            self._triplets = conflicting_triplets(self.x)
        return self._triplets

    def require_mo(self, axiom: Axiom) -> None:
        for loc, mask in self.write_mask.items():
            if mask.bit_count() >= 2 and loc not in self.mo_by_loc:
                raise MissingModificationOrder(
                    f"{axiom.value} needs a total modification order on {loc}"
                )

    def thread_last(self) -> dict[str, int]:
        out = {}
        for t, es in self.x.base.events_by_thread.items():
            if es:
                out[t] = self.idx[es[-1].id]
        return out


def _violations(ctx: _Ctx, axiom: Axiom):
    """Yield (location, (a, b)) witnesses falsifying the axiom."""
    x = ctx.x
    if axiom in _MO_SENSITIVE:
        ctx.require_mo(axiom)
    if axiom is Axiom.WRITE_COHERENCE:
        for loc, pairs in ctx.mo_by_loc.items():
            for a, b in pairs:
                if ctx.hb(b, a):
                    yield loc, (ctx.order[a], ctx.order[b])
    elif axiom is Axiom.STRONG_WRITE_COHERENCE:
        n = ctx.n
        rows = [0] * n
        for a in range(n):
            rows[a] = ctx.hb_rows[a]
        for pairs in ctx.mo_by_loc.values():
            for a, b in pairs:
                rows[a] |= 1 << b
        for k in range(n):
            kbit = 1 << k
            krow = rows[k]
            for i in range(n):
                if rows[i] & kbit:
                    rows[i] |= krow
        for a in range(n):
            if (rows[a] >> a) & 1:
                # Report an edge of the union lying on a cycle.
                for loc, pairs in sorted(ctx.mo_by_loc.items()):
                    for u, v in pairs:
                        if (rows[v] >> u) & 1:
                            yield loc, (ctx.order[u], ctx.order[v])
                for u in range(n):
                    for v in range(n):
                        if ctx.hb(u, v) and (rows[v] >> u) & 1:
                            yield None, (ctx.order[u], ctx.order[v])
                return
    elif axiom is Axiom.READ_COHERENCE:
        for w, r in ctx.rf_pairs:
            loc = ctx.loc_of[w]
            for a, b in ctx.mo_by_loc.get(loc, ()):
                if a == w and ctx.hb(b, r):
                    yield loc, (ctx.order[w], ctx.order[r])
                    break
    elif axiom is Axiom.WEAK_READ_COHERENCE:
        for t in ctx.triplets():
            w, r, w2 = ctx.idx[t.write], ctx.idx[t.read], ctx.idx[t.other_write]
            if ctx.hb(w, w2) and ctx.hb(w2, r):
                yield ctx.loc_of[w], (t.write, t.read)
    elif axiom is Axiom.PORF_ACYCLICITY:
        cyclic = [a for a in range(ctx.n) if (ctx.hb_rows[a] >> a) & 1]
        if cyclic:
            for a in range(ctx.n):
                for b in ctx.po_next[a]:
                    if ctx.hb(b, a):
                        yield None, (ctx.order[a], ctx.order[b])
            for w, r in ctx.rf_pairs:
                if ctx.hb(r, w):
                    yield None, (ctx.order[w], ctx.order[r])
    elif axiom is Axiom.RELAXED_WRITE_COHERENCE:
        for loc, pairs in ctx.mo_by_loc.items():
            for a, b in pairs:
                if ctx.po(b, a):
                    yield loc, (ctx.order[a], ctx.order[b])
    elif axiom is Axiom.RELAXED_READ_COHERENCE:
        rf_of_write: dict[int, list[int]] = {}
        for w, r in ctx.rf_pairs:
            rf_of_write.setdefault(w, []).append(r)
        for w, r in ctx.rf_pairs:
            loc = ctx.loc_of[w]
            for a, b in ctx.mo_by_loc.get(loc, ()):
                if a != w:
                    continue
                # The closing step (b, r) ranges over rf? ; po.
                if ctx.po(b, r) or any(
                    ctx.po(r2, r) for r2 in rf_of_write.get(b, ())
                ):
                    yield loc, (ctx.order[w], ctx.order[r])
                    break
    elif axiom is Axiom.OB_ACYCLICITY:
        last_by_thread = ctx.thread_last()
        for t in sorted(last_by_thread):
            last = last_by_thread[t]
            rows = _ob_rows(ctx, last, one_hop=True)
            if all(not (row >> a) & 1 for a, row in rows.items()):
                rows = _ob_rows(ctx, last, one_hop=False)
            for a in sorted(rows):
                if (rows[a] >> a) & 1:
                    yield None, (ctx.order[a], ctx.order[a])
                    break
    else:  # pragma: no cover
        raise AssertionError(axiom)


def _smallest(ctx: _Ctx, axiom: Axiom) -> Optional[Violation]:
    best = None
    for loc, pair in _violations(ctx, axiom):
        key = pair
        if best is None or key < best.pair:
            best = Violation(axiom, loc, pair)
    return best


def evaluate_axiom(x: ConcreteExecution, axiom: Axiom) -> bool:
    """True iff the axiom holds for this concrete execution."""
    ctx = _Ctx(x)
    for _ in _violations(ctx, axiom):
        return False
    return True


def axiom_violation(x: ConcreteExecution, axiom: Axiom) -> Optional[Violation]:
    """The lexicographically smallest witness falsifying the axiom, if any."""
    return _smallest(_Ctx(x), axiom)


def check_concrete(x: ConcreteExecution, model: MemoryModel) -> bool:
    """True iff the concrete execution satisfies every axiom of the model."""
    ctx = _Ctx(x)
    for axiom in model_axioms(model):
        for _ in _violations(ctx, axiom):
            return False
    return True


# --- blocking order -------------------------------------------------------
#
# For an event e, the blocking order ob_e is the smallest transitive relation
# such that (1) every hb-pair among strict hb-predecessors of e is in ob_e,
# and (2) for every conflicting triplet (w, r, w2) with (w2, r) in ob_e and
# r either e itself or po-before e, the pair (w2, w) is in ob_e.  The one-hop
# variant replaces the rule-2 premise with (w2, r) in hb and needs no
# fixpoint iteration.


def _ob_rows(ctx: _Ctx, e: int, one_hop: bool) -> dict[int, int]:
    anc_mask = ctx.hb_anc[e]
    trips = []
    for t in ctx.triplets():
        r = ctx.idx[t.read]
        if r == e or ctx.po(r, e):
            trips.append((ctx.idx[t.write], r, ctx.idx[t.other_write]))
    involved = anc_mask
    for w, _r, w2 in trips:
        involved |= (1 << w) | (1 << w2)
    nodes = []
    m = involved
    while m:
        low = m & -m
        nodes.append(low.bit_length() - 1)
        m ^= low
    rows: dict[int, int] = {}
    anc: dict[int, int] = {}
    for v in nodes:
        vbit = 1 << v
        if anc_mask & vbit:
            rows[v] = ctx.hb_rows[v] & anc_mask
            anc[v] = ctx.hb_anc[v] & anc_mask
        else:
            rows[v] = 0
            anc[v] = 0

    def add_edge(u: int, v: int) -> bool:
        if (rows[u] >> v) & 1:
            return False
        up = anc[u] | (1 << u)
        down = rows[v] | (1 << v)
        m = up
        while m:
            low = m & -m
            rows[low.bit_length() - 1] |= down
            m ^= low
        m = down
        while m:
            low = m & -m
            anc[low.bit_length() - 1] |= up
            m ^= low
        return True

    if one_hop:
        for w, r, w2 in trips:
            if ctx.hb(w2, r):
                add_edge(w2, w)
    else:
        changed = True
        while changed:
            changed = False
            for w, r, w2 in trips:
                if (rows[w2] >> r) & 1 and not (rows[w2] >> w) & 1:
                    add_edge(w2, w)
                    changed = True
    return rows


def _ob_relation(x: ConcreteExecution, event_id: str, one_hop: bool) -> Relation:
    ctx = _Ctx(x)
    rows = _ob_rows(ctx, ctx.idx[event_id], one_hop)
    pairs = set()
    for a, row in rows.items():
        while row:
            low = row & -row
            pairs.add((ctx.order[a], ctx.order[low.bit_length() - 1]))
            row ^= low
    return Relation(frozenset(pairs), frozenset(ctx.order))


def compute_ob(x: ConcreteExecution, event_id: str) -> Relation:
    """The blocking order ob_e for the given event."""
    return _ob_relation(x, event_id, one_hop=False)


def compute_ob_one_hop(x: ConcreteExecution, event_id: str) -> Relation:
    """The one-hop approximation: rule 2 fires on hb instead of ob_e."""
    return _ob_relation(x, event_id, one_hop=True)


def execution_context(x: ConcreteExecution) -> _Ctx:
    """Build the shared dense view once; pass it to ob_rows_for_thread."""
    return _Ctx(x)


def ob_rows_for_thread(
    x: ConcreteExecution,
    thread: str,
    one_hop: bool = False,
    ctx: Optional[_Ctx] = None,
):
    """Index-keyed ob rows for the thread's last event (empty thread: {})."""
    if ctx is None:
        ctx = _Ctx(x)
    es = x.base.events_by_thread.get(thread, ())
    if not es:
        return {}, ctx
    return _ob_rows(ctx, ctx.idx[es[-1].id], one_hop), ctx
