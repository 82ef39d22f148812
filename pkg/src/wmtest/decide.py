"""Decision procedures for abstract executions under eleven memory models.

SC, TSO, and PSO are decided by exploring an operational machine (DFS over
canonicalized states with optional memoization).  Relaxed reduces to
per-location SC.  The WRA/RA/SRA/Relaxed-Acyclic family and CM are decided
by backtracking over reads-from choices with incremental pruning, resolving
modification order at the leaves.  brute_force_decide is the independent
oracle: plain exhaustive enumeration with no shared shortcuts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Union

from .axioms import (
    OPERATIONAL_MODELS,
    MemoryModel,
    canonical_model,
    check_concrete,
    execution_context,
    ob_rows_for_thread,
)
from .model import AbstractExecution, ConcreteExecution, Relation


class TooLarge(Exception):
    """Input exceeds the brute-force size guard."""


class _BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class Stats:
    nodes: int = 0
    memo_hits: int = 0


@dataclass(frozen=True)
class Verdict:
    """consistent is True/False, or None when the node budget ran out."""

    model: MemoryModel
    consistent: Optional[bool]
    witness: Optional[ConcreteExecution] = None
    stats: Stats = Stats()
    reason: str = ""


@dataclass(frozen=True)
class PartialMo:
    """A not-necessarily-total same-location write order."""

    pairs: Relation


@dataclass(frozen=True)
class TsoState:
    """A store-buffer machine state ⟨P, B, M⟩, stored compactly.

    executed[i] counts the executed po-prefix of thread i, which determines
    the set P of executed events; flushed[i] counts how many of thread i's
    executed writes have drained to memory, which determines the FIFO buffer
    B(t) (the executed-but-unflushed writes, in po order); memory holds, per
    location, the id of the last flushed write (None = Initial).
    """

    executed: tuple[int, ...]
    flushed: tuple[int, ...]
    memory: tuple[Optional[str], ...]


@dataclass(frozen=True)
class PsoState:
    """As TsoState, but with one FIFO buffer per (thread, location)."""

    executed: tuple[int, ...]
    flushed: tuple[tuple[int, ...], ...]
    memory: tuple[Optional[str], ...]


def _value_mismatch(x: AbstractExecution) -> Optional[str]:
    """First read whose value is written nowhere on its location."""
    written: dict[str, set[int]] = {}
    for e in x.events:
        if e.is_write:
            written.setdefault(e.location, set()).add(e.value)
    for e in x.events:
        if e.is_read and e.value not in written.get(e.location, ()):
            return e.id
    return None


# --- SC (frontier interleaving search) ------------------------------------

# Thread carrying initial writes; it runs to completion (and, on the
# buffered machines, drains to memory) before any other thread starts.
INIT_THREAD = "init"


def _sc_search(
    x: AbstractExecution,
    memo: bool,
    budget: Optional[int],
    rf_constraint: Optional[dict[str, str]] = None,
    mo_prev: Optional[dict[str, Optional[str]]] = None,
):
    threads = x.threads
    per_thread = [x.events_by_thread[t] for t in threads]
    locs = x.locations
    loc_idx = {loc: i for i, loc in enumerate(locs)}
    total = len(x.events)
    value_of = {e.id: e.value for e in x.events}
    nodes = 0
    hits = 0
    visited: set = set()
    rf_map: dict[str, str] = {}
    write_order: list[str] = []

    exec0 = [0] * len(threads)
    last0: list[Optional[str]] = [None] * len(locs)
    if INIT_THREAD in threads:
        ti = threads.index(INIT_THREAD)
        for e in per_thread[ti]:
            li = loc_idx[e.location]
            if e.is_write:
                if mo_prev is not None and e.id in mo_prev:
                    if mo_prev[e.id] != last0[li]:
                        return "fail", None, None, 1, 0
                last0[li] = e.id
                write_order.append(e.id)
            else:
                w = last0[li]
                if w is None or value_of[w] != e.value:
                    return "fail", None, None, 1, 0
                if rf_constraint is not None and rf_constraint.get(e.id) != w:
                    return "fail", None, None, 1, 0
                rf_map[e.id] = w
        exec0[ti] = len(per_thread[ti])

    def transitions(state):
        execd, last = state
        out = []
        for ti, es in enumerate(per_thread):
            i = execd[ti]
            if i >= len(es):
                continue
            e = es[i]
            li = loc_idx[e.location]
            if e.is_write:
                if mo_prev is not None and e.id in mo_prev:
                    if mo_prev[e.id] != last[li]:
                        continue
                out.append((ti, e, None))
            else:
                w = last[li]
                if w is None or value_of[w] != e.value:
                    continue
                if rf_constraint is not None and rf_constraint.get(e.id) != w:
                    continue
                out.append((ti, e, w))
        return out

    def successor(state, tr):
        execd, last = state
        ti, e, _ = tr
        ex2 = list(execd)
        ex2[ti] += 1
        if e.is_write:
            la2 = list(last)
            la2[loc_idx[e.location]] = e.id
            last = tuple(la2)
        return (tuple(ex2), last)

    init = (tuple(exec0), tuple(last0))
    nodes = 1
    if budget is not None and nodes > budget:
        raise _BudgetExhausted
    if memo:
        visited.add(init)
    # frame: [state, event-or-None, transitions-or-None, next index]
    stack = [[init, None, None, 0]]
    while stack:
        frame = stack[-1]
        state = frame[0]
        if sum(state[0]) == total:
            return "ok", dict(rf_map), list(write_order), nodes, hits
        if frame[2] is None:
            frame[2] = transitions(state)
        if frame[3] >= len(frame[2]):
            stack.pop()
            e = frame[1]
            if e is not None:
                if e.is_write:
                    write_order.pop()
                else:
                    del rf_map[e.id]
            continue
        tr = frame[2][frame[3]]
        frame[3] += 1
        nxt = successor(state, tr)
        if memo and nxt in visited:
            hits += 1
            continue
        if memo:
            visited.add(nxt)
        nodes += 1
        if budget is not None and nodes > budget:
            raise _BudgetExhausted
        _, e, justif = tr
        if e.is_write:
            write_order.append(e.id)
        else:
            rf_map[e.id] = justif
        stack.append([nxt, e, None, 0])
    return "fail", None, None, nodes, hits


def _mo_relation(universe: frozenset, per_loc_orders: Iterable[list[str]]) -> Relation:
    pairs = []
    for ids in per_loc_orders:
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                pairs.append((ids[i], ids[j]))
    return Relation(frozenset(pairs), universe)


def _sc_witness(x: AbstractExecution, rf_map, write_order) -> ConcreteExecution:
    universe = frozenset(e.id for e in x.events)
    by_loc: dict[str, list[str]] = {}
    by_id = x.by_id
    for wid in write_order:
        by_loc.setdefault(by_id[wid].location, []).append(wid)
    rf = Relation(frozenset((w, r) for r, w in rf_map.items()), universe)
    return ConcreteExecution(x, rf, _mo_relation(universe, by_loc.values()))


def decide_sc(
    x: AbstractExecution, budget: Optional[int] = None, memo: bool = True
) -> Verdict:
    bad = _value_mismatch(x)
    if bad is not None:
        return Verdict(
            MemoryModel.SC,
            False,
            reason=f"value mismatch: read {bad} matches no write",
        )
    try:
        status, rf_map, worder, nodes, hits = _sc_search(x, memo, budget)
    except _BudgetExhausted:
        return Verdict(
            MemoryModel.SC, None, reason="budget exhausted", stats=Stats(budget or 0, 0)
        )
    stats = Stats(nodes, hits)
    if status == "ok":
        return Verdict(MemoryModel.SC, True, _sc_witness(x, rf_map, worder), stats)
    return Verdict(MemoryModel.SC, False, stats=stats)


def decide_sc_location(
    x: AbstractExecution, loc: str, budget: Optional[int] = None, memo: bool = True
) -> Verdict:
    return decide_sc(x.project(loc), budget, memo)


def decide_relaxed(
    x: AbstractExecution, budget: Optional[int] = None, memo: bool = True
) -> Verdict:
    """Per-location serializability; the budget applies per location."""
    nodes = 0
    hits = 0
    partial: list[ConcreteExecution] = []
    inconclusive = False
    for loc in x.locations:
        v = decide_sc_location(x, loc, budget, memo)
        nodes += v.stats.nodes
        hits += v.stats.memo_hits
        if v.consistent is False:
            return Verdict(
                MemoryModel.RELAXED,
                False,
                stats=Stats(nodes, hits),
                reason=v.reason or f"location {loc} is not serializable",
            )
        if v.consistent is None:
            inconclusive = True
        else:
            partial.append(v.witness)
    if inconclusive:
        return Verdict(
            MemoryModel.RELAXED, None, stats=Stats(nodes, hits), reason="budget exhausted"
        )
    universe = frozenset(e.id for e in x.events)
    rf = Relation(
        frozenset(p for w in partial for p in w.rf.pairs), universe
    )
    mo = Relation(
        frozenset(p for w in partial for p in w.mo.pairs), universe
    )
    return Verdict(
        MemoryModel.RELAXED,
        True,
        ConcreteExecution(x, rf, mo),
        Stats(nodes, hits),
    )


# --- TSO / PSO (store-buffer machines) ------------------------------------


def _buffered_search(
    x: AbstractExecution,
    pso: bool,
    memo: bool,
    budget: Optional[int],
    rf_constraint: Optional[dict[str, str]] = None,
    mo_prev: Optional[dict[str, Optional[str]]] = None,
    require_full_flush: bool = False,
):
    threads = x.threads
    per_thread = [x.events_by_thread[t] for t in threads]
    locs = x.locations
    loc_idx = {loc: i for i, loc in enumerate(locs)}
    total = len(x.events)
    nt, nl = len(threads), len(locs)

    if pso:
        # writes of thread ti on location li, in po order
        tl_writes = [[[] for _ in range(nl)] for _ in range(nt)]
        # per thread: prefix counts of writes per location
        tl_count = []
        for ti, es in enumerate(per_thread):
            counts = [[0] * nl]
            for e in es:
                row = list(counts[-1])
                if e.is_write:
                    li = loc_idx[e.location]
                    tl_writes[ti][li].append(e)
                    row[li] += 1
                counts.append(row)
            tl_count.append(counts)
    else:
        t_writes = [[e for e in es if e.is_write] for es in per_thread]
        t_count = []
        for es in per_thread:
            counts = [0]
            for e in es:
                counts.append(counts[-1] + (1 if e.is_write else 0))
            t_count.append(counts)

    value_of = {e.id: e.value for e in x.events}

    def pending_tso(execd, flushed, ti):
        return t_writes[ti][flushed[ti] : t_count[ti][execd[ti]]]

    def pending_pso(execd, flushed, ti, li):
        return tl_writes[ti][li][flushed[ti][li] : tl_count[ti][execd[ti]][li]]

    def transitions(state):
        execd, flushed, mem = state
        out = []
        for ti, es in enumerate(per_thread):
            i = execd[ti]
            if i >= len(es):
                continue
            e = es[i]
            li = loc_idx[e.location]
            if e.is_write:
                out.append(("x", ti, e, None))
                continue
            if pso:
                pend = pending_pso(execd, flushed, ti, li)
                latest = pend[-1] if pend else None
            else:
                latest = None
                for w in reversed(pending_tso(execd, flushed, ti)):
                    if loc_idx[w.location] == li:
                        latest = w
                        break
            if latest is not None:
                if latest.value == e.value and (
                    rf_constraint is None or rf_constraint.get(e.id) == latest.id
                ):
                    out.append(("x", ti, e, latest.id))
            else:
                m = mem[li]
                if (
                    m is not None
                    and value_of[m] == e.value
                    and (rf_constraint is None or rf_constraint.get(e.id) == m)
                ):
                    out.append(("x", ti, e, m))
        for ti in range(nt):
            if pso:
                for li in range(nl):
                    pend = pending_pso(execd, flushed, ti, li)
                    if pend and _flush_ok(pend[0], state):
                        out.append(("f", ti, li, pend[0]))
            else:
                pend = pending_tso(execd, flushed, ti)
                if pend and _flush_ok(pend[0], state):
                    out.append(("f", ti, None, pend[0]))
        return out

    def _flush_ok(w, state):
        if mo_prev is None or w.id not in mo_prev:
            return True
        return mo_prev[w.id] == state[2][loc_idx[w.location]]

    def successor(state, tr):
        execd, flushed, mem = state
        if tr[0] == "x":
            _, ti, e, _ = tr
            ex2 = list(execd)
            ex2[ti] += 1
            return (tuple(ex2), flushed, mem)
        _, ti, li, w = tr
        mem2 = list(mem)
        mem2[loc_idx[w.location]] = w.id
        if pso:
            fl2 = [list(row) for row in flushed]
            fl2[ti][li] += 1
            return (execd, tuple(tuple(row) for row in fl2), tuple(mem2))
        fl2 = list(flushed)
        fl2[ti] += 1
        return (execd, tuple(fl2), tuple(mem2))

    def buffers_empty(state):
        execd, flushed, _ = state
        if pso:
            return all(
                flushed[ti][li] == tl_count[ti][execd[ti]][li]
                for ti in range(nt)
                for li in range(nl)
            )
        return all(flushed[ti] == t_count[ti][execd[ti]] for ti in range(nt))

    def accepting(state):
        if sum(state[0]) != total:
            return False
        return buffers_empty(state) if require_full_flush else True

    rf_map: dict[str, str] = {}
    flush_seq: list[str] = []
    exec0 = [0] * nt
    mem0: list[Optional[str]] = [None] * nl
    if INIT_THREAD in threads:
        ti = threads.index(INIT_THREAD)
        for e in per_thread[ti]:
            li = loc_idx[e.location]
            if e.is_write:
                if mo_prev is not None and e.id in mo_prev:
                    if mo_prev[e.id] != mem0[li]:
                        return "fail", None, None, 1, 0
                mem0[li] = e.id
                flush_seq.append(e.id)
            else:
                w = mem0[li]
                if w is None or value_of[w] != e.value:
                    return "fail", None, None, 1, 0
                if rf_constraint is not None and rf_constraint.get(e.id) != w:
                    return "fail", None, None, 1, 0
                rf_map[e.id] = w
        exec0[ti] = len(per_thread[ti])
    if pso:
        flushed0 = tuple(
            tuple(tl_count[ti][exec0[ti]]) for ti in range(nt)
        )
        init = (tuple(exec0), flushed0, tuple(mem0))
    else:
        init = (
            tuple(exec0),
            tuple(t_count[ti][exec0[ti]] for ti in range(nt)),
            tuple(mem0),
        )

    nodes = 1
    hits = 0
    if budget is not None and nodes > budget:
        raise _BudgetExhausted
    visited: set = set()
    if memo:
        visited.add(init)
    stack = [[init, None, None, 0]]
    while stack:
        frame = stack[-1]
        state = frame[0]
        if accepting(state):
            # remaining buffered writes drain deterministically at the end
            tail = list(flush_seq)
            execd, flushed, _ = state
            for ti in range(nt):
                if pso:
                    for li in range(nl):
                        tail.extend(
                            w.id for w in pending_pso(execd, flushed, ti, li)
                        )
                else:
                    tail.extend(w.id for w in pending_tso(execd, flushed, ti))
            return "ok", dict(rf_map), tail, nodes, hits
        if frame[2] is None:
            frame[2] = transitions(state)
        if frame[3] >= len(frame[2]):
            stack.pop()
            tr = frame[1]
            if tr is not None:
                if tr[0] == "x":
                    e = tr[2]
                    if e.is_read:
                        del rf_map[e.id]
                else:
                    flush_seq.pop()
            continue
        tr = frame[2][frame[3]]
        frame[3] += 1
        nxt = successor(state, tr)
        if memo and nxt in visited:
            hits += 1
            continue
        if memo:
            visited.add(nxt)
        nodes += 1
        if budget is not None and nodes > budget:
            raise _BudgetExhausted
        if tr[0] == "x":
            e = tr[2]
            if e.is_read:
                rf_map[e.id] = tr[3]
        else:
            flush_seq.append(tr[3].id)
        stack.append([nxt, tr, None, 0])
    return "fail", None, None, nodes, hits


def _buffered_witness(x, rf_map, flush_seq) -> ConcreteExecution:
    universe = frozenset(e.id for e in x.events)
    by_id = x.by_id
    by_loc: dict[str, list[str]] = {}
    for wid in flush_seq:
        by_loc.setdefault(by_id[wid].location, []).append(wid)
    rf = Relation(frozenset((w, r) for r, w in rf_map.items()), universe)
    return ConcreteExecution(x, rf, _mo_relation(universe, by_loc.values()))


def _decide_buffered(x, pso, budget, memo) -> Verdict:
    model = MemoryModel.PSO if pso else MemoryModel.TSO
    bad = _value_mismatch(x)
    if bad is not None:
        return Verdict(
            model, False, reason=f"value mismatch: read {bad} matches no write"
        )
    try:
        status, rf_map, flushes, nodes, hits = _buffered_search(x, pso, memo, budget)
    except _BudgetExhausted:
        return Verdict(model, None, reason="budget exhausted", stats=Stats(budget or 0, 0))
    stats = Stats(nodes, hits)
    if status == "ok":
        return Verdict(model, True, _buffered_witness(x, rf_map, flushes), stats)
    return Verdict(model, False, stats=stats)


def decide_tso(
    x: AbstractExecution, budget: Optional[int] = None, memo: bool = True
) -> Verdict:
    return _decide_buffered(x, False, budget, memo)


def decide_pso(
    x: AbstractExecution, budget: Optional[int] = None, memo: bool = True
) -> Verdict:
    return _decide_buffered(x, True, budget, memo)


def replay_operational(w: ConcreteExecution, model: MemoryModel) -> bool:
    """Re-run the machine constrained to the witness's rf and mo."""
    model = canonical_model(model)
    if model not in OPERATIONAL_MODELS:
        raise ValueError(f"{model.value} has no operational replay")
    x = w.base
    rf_constraint = {r: wid for wid, r in w.rf.pairs}
    mo_prev: dict[str, Optional[str]] = {}
    for loc in w.mo_locations():
        prev: Optional[str] = None
        for wid in w.mo_order(loc):
            mo_prev[wid] = prev
            prev = wid
    if model is MemoryModel.SC:
        status = _sc_search(x, True, None, rf_constraint, mo_prev)[0]
    else:
        status = _buffered_search(
            x,
            model is MemoryModel.PSO,
            True,
            None,
            rf_constraint,
            mo_prev,
            require_full_flush=True,
        )[0]
    return status == "ok"


# --- minimal coherence ----------------------------------------------------


def _closure_rows(n: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    rows = [0] * n
    for a, b in edges:
        rows[a] |= 1 << b
    for k in range(n):
        kbit = 1 << k
        krow = rows[k]
        for i in range(n):
            if rows[i] & kbit:
                rows[i] |= krow
    return rows


def minimal_coherence_check(
    x: AbstractExecution,
    rf: Relation,
    pmo: Union[PartialMo, Relation],
    flavor: MemoryModel,
) -> bool:
    """Can the partial mo be extended to a total one satisfying the model?

    flavor SRA: (hb ∪ pmo) must be acyclic and every conflicting triplet
    (w, r, w2) safe: (w2, r) not in hb, or (w2, w) in (hb ∪ pmo)+.
    flavor RELAXED_ACYCLIC: po ∪ rf acyclic; per location, the location-
    restricted (po ∪ rf ∪ pmo) must be acyclic and every triplet safe with
    the location-restricted relations instead of hb.
    """
    flavor = canonical_model(flavor)
    if flavor not in (MemoryModel.SRA, MemoryModel.RELAXED_ACYCLIC):
        raise ValueError(f"no minimal-coherence flavor for {flavor.value}")
    pmo_rel = pmo.pairs if isinstance(pmo, PartialMo) else pmo
    events = x.events
    n = len(events)
    idx = {e.id: i for i, e in enumerate(events)}
    covered = {e.id for e in x.reads}
    for wid, rid in rf.pairs:
        covered.discard(rid)
    if covered:
        raise ValueError(f"rf does not cover reads: {sorted(covered)}")
    po_edges = [(idx[a], idx[b]) for a, b in x.po.pairs]
    rf_edges = [(idx[a], idx[b]) for a, b in rf.pairs]
    pmo_edges = [(idx[a], idx[b]) for a, b in pmo_rel.pairs]
    triplets = []
    for wid, rid in sorted(rf.pairs):
        loc = x.by_id[wid].location
        for other in x.writes_on(loc):
            if other.id != wid:
                triplets.append((idx[wid], idx[rid], idx[other.id]))

    if flavor is MemoryModel.SRA:
        hb = _closure_rows(n, po_edges + rf_edges)
        if any((hb[i] >> i) & 1 for i in range(n)):
            return False
        union = _closure_rows(n, po_edges + rf_edges + pmo_edges)
        if any((union[i] >> i) & 1 for i in range(n)):
            return False
        for w, r, w2 in triplets:
            if (hb[w2] >> r) & 1 and not (union[w2] >> w) & 1:
                return False
        return True

    porf = _closure_rows(n, po_edges + rf_edges)
    if any((porf[i] >> i) & 1 for i in range(n)):
        return False
    for loc in x.locations:
        members = {i for i, e in enumerate(events) if e.location == loc}
        loc_po = [(a, b) for a, b in po_edges if a in members and b in members]
        loc_rf = [(a, b) for a, b in rf_edges if a in members and b in members]
        loc_pmo = [(a, b) for a, b in pmo_edges if a in members and b in members]
        base = _closure_rows(n, loc_po + loc_rf)
        union = _closure_rows(n, loc_po + loc_rf + loc_pmo)
        if any((union[i] >> i) & 1 for i in members):
            return False
        for w, r, w2 in triplets:
            if w not in members:
                continue
            if (base[w2] >> r) & 1 and not (union[w2] >> w) & 1:
                return False
    return True


# --- rf backtracking for WRA / RA / SRA / Relaxed-Acyclic / CM ------------

_WRC_PRUNED = {
    MemoryModel.WRA,
    MemoryModel.RA,
    MemoryModel.SRA,
    MemoryModel.CM,
}


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _toposort(members: list[int], succ_rows: dict[int, int]) -> Optional[list[int]]:
    """Deterministic topological order (smallest index first), None on cycle."""
    remaining = set(members)
    out = []
    while remaining:
        pick = None
        for m in sorted(remaining):
            if not any(
                (succ_rows.get(o, 0) >> m) & 1 for o in remaining if o != m
            ):
                pick = m
                break
        if pick is None:
            return None
        out.append(pick)
        remaining.remove(pick)
    return out


class _RfSearch:
    def __init__(self, x: AbstractExecution, model: MemoryModel, budget):
        self.x = x
        self.model = model
        self.budget = budget
        self.nodes = 0
        events = x.events
        self.n = n = len(events)
        self.idx = {e.id: i for i, e in enumerate(events)}
        self.ids = [e.id for e in events]
        self.loc = [e.location for e in events]
        self.wmask: dict[str, int] = {}
        for i, e in enumerate(events):
            if e.is_write:
                self.wmask[e.location] = self.wmask.get(e.location, 0) | (1 << i)
        # po closure
        self.desc = [0] * n
        self.anc = [0] * n
        pos_in_thread = {}
        for t in x.threads:
            idxs = [self.idx[e.id] for e in x.events_by_thread[t]]
            for k, i in enumerate(idxs):
                pos_in_thread[i] = k
            suffix = 0
            for i in reversed(idxs):
                self.desc[i] = suffix
                suffix |= 1 << i
            prefix = 0
            for i in idxs:
                self.anc[i] = prefix
                prefix |= 1 << i
        tindex = {t: k for k, t in enumerate(x.threads)}
        key = lambda i: (tindex[events[i].thread], pos_in_thread[i])
        self.read_order = sorted(
            (i for i, e in enumerate(events) if e.is_read), key=key
        )
        self.po_next = [-1] * n
        for t in x.threads:
            idxs = [self.idx[e.id] for e in x.events_by_thread[t]]
            for a, b in zip(idxs, idxs[1:]):
                self.po_next[a] = b
        self.cand: dict[int, list[int]] = {}
        self.no_writer: Optional[int] = None
        for r in self.read_order:
            e = events[r]
            ws = [
                i
                for i, o in enumerate(events)
                if o.is_write and o.location == e.location and o.value == e.value
            ]
            ws.sort(key=key)
            self.cand[r] = ws
            if not ws and self.no_writer is None:
                self.no_writer = r
        self.rf_of: dict[int, int] = {}
        self.assigned: list[tuple[int, int]] = []  # (read, write)
        self.by_loc_assigned: dict[str, list[tuple[int, int]]] = {}
        self.trail: list[tuple] = []  # undo log behind mark()/rewind()
        # conflict-directed backjumping bookkeeping
        self.cur_level = 0
        self.rf_level: dict[int, int] = {}  # read -> decision level of its edge
        self.rf_branch: set[int] = set()  # reads assigned by branching
        self.fail_reason: Optional[set[int]] = None  # None = blame all levels
        if model is MemoryModel.RELAXED_ACYCLIC:
            self.lmembers: dict[str, list[int]] = {}
            self.ldesc: dict[str, list] = {}
            self.lanc: dict[str, list] = {}
            self.udesc: dict[str, list] = {}
            self.uanc: dict[str, list] = {}
            for loc in x.locations:
                members = [i for i, e in enumerate(events) if e.location == loc]
                self.lmembers[loc] = members
                ld = [0] * n
                la = [0] * n
                member_set = set(members)
                for t in x.threads:
                    idxs = [
                        self.idx[e.id]
                        for e in x.events_by_thread[t]
                        if self.idx[e.id] in member_set
                    ]
                    suffix = 0
                    for i in reversed(idxs):
                        ld[i] = suffix
                        suffix |= 1 << i
                    prefix = 0
                    for i in idxs:
                        la[i] = prefix
                        prefix |= 1 << i
                self.ldesc[loc] = ld
                self.lanc[loc] = la
                self.udesc[loc] = list(ld)
                self.uanc[loc] = list(la)

    def mark(self):
        return (len(self.trail), len(self.assigned))

    def rewind(self, mark) -> None:
        tlen, alen = mark
        trail = self.trail
        while len(trail) > tlen:
            entry = trail.pop()
            kind = entry[0]
            if kind == 0:
                entry[1][entry[2]] = entry[3]
            elif kind == 1:
                r = entry[1]
                del self.rf_of[r]
                self.rf_level.pop(r, None)
                self.rf_branch.discard(r)
            else:
                self.by_loc_assigned[entry[1]].pop()
        del self.assigned[alen:]

    def _edge(self, desc, anc, u, v) -> bool:
        """Insert u->v keeping closure; False if it would close a cycle."""
        if (desc[v] >> u) & 1:
            return False
        if (desc[u] >> v) & 1:
            return True
        up = anc[u] | (1 << u)
        down = desc[v] | (1 << v)
        trail = self.trail
        for a in _bits(up):
            old = desc[a]
            if old | down != old:
                trail.append((0, desc, a, old))
                desc[a] = old | down
        for d in _bits(down):
            old = anc[d]
            if old | up != old:
                trail.append((0, anc, d, old))
                anc[d] = old | up
        return True

    @staticmethod
    def _add_edge(desc, anc, u, v) -> bool:
        """Untracked variant of _edge for throwaway closure copies."""
        if (desc[v] >> u) & 1:
            return False
        if (desc[u] >> v) & 1:
            return True
        up = anc[u] | (1 << u)
        down = desc[v] | (1 << v)
        for a in _bits(up):
            desc[a] |= down
        for d in _bits(down):
            anc[d] |= up
        return True

    def viable(self, r: int, w: int) -> bool:
        if (self.desc[r] >> w) & 1:
            return False
        if self.model in _WRC_PRUNED:
            if self.desc[w] & self.wmask[self.loc[r]] & self.anc[r]:
                return False
        if self.model is MemoryModel.RELAXED_ACYCLIC:
            loc = self.loc[r]
            if (self.udesc[loc][r] >> w) & 1:
                return False
            # each location-porf-ancestor write w2 of r forces mo (w2, w)
            forced = self.lanc[loc][r] & self.wmask[loc] & ~(1 << w)
            if forced & self.udesc[loc][w]:
                return False
        return True

    def assign(self, r: int, w: int, branch: bool = False) -> bool:
        self.nodes += 1
        if self.budget is not None and self.nodes > self.budget:
            raise _BudgetExhausted
        if not self.viable(r, w):
            self.fail_reason = self._explain_nonviable(r, w)
            return False
        up = self.anc[w] | (1 << w)
        down = self.desc[r] | (1 << r)
        ok = self._edge(self.desc, self.anc, w, r)
        assert ok
        self.rf_of[r] = w
        self.trail.append((1, r))
        self.rf_level[r] = self.cur_level
        if branch:
            self.rf_branch.add(r)
        self.assigned.append((r, w))
        loc = self.loc[r]
        self.by_loc_assigned.setdefault(loc, []).append((r, w))
        self.trail.append((2, loc))
        if self.model in _WRC_PRUNED:
            # only pairs whose writer gained descendants or whose read
            # gained ancestors can have turned stale
            for r2, w2 in self.assigned:
                if not ((up >> w2) & 1 or (down >> r2) & 1):
                    continue
                if self.desc[w2] & self.wmask[self.loc[r2]] & self.anc[r2]:
                    self.fail_reason = self._explain_stale_pair(r2, w2)
                    return False
        if self.model is MemoryModel.RELAXED_ACYCLIC:
            ld, la = self.ldesc[loc], self.lanc[loc]
            ud, ua = self.udesc[loc], self.uanc[loc]
            ok = self._edge(ld, la, w, r)
            assert ok  # a loc-porf cycle is a porf cycle
            if not self._edge(ud, ua, w, r):
                self.fail_reason = None
                return False
            # location porf grew: rescan required mo edges for this location
            for r2, w2 in self.by_loc_assigned.get(loc, ()):
                forced = la[r2] & self.wmask[loc] & ~(1 << w2)
                for w3 in _bits(forced):
                    if not self._edge(ud, ua, w3, w2):
                        self.fail_reason = None
                        return False
        return True

    # --- conflict explanations (cold path) --------------------------------
    #
    # A failure explanation is a set of decision levels such that the failed
    # choice stays impossible as long as every one of those levels keeps its
    # assignment.  Edges chosen by branching pin their own level; edges forced
    # by propagation expand recursively into the reasons their sibling
    # candidates were eliminated (the eliminations persist, so the forcing
    # re-derives).  None means "blame everything" and degrades that conflict
    # to chronological backtracking.

    _EXPANDING = object()

    def _blame_read(self, read: int, memo: dict) -> set[int]:
        """Levels the rf edge feeding `read` depends on."""
        if read in self.rf_branch:
            return {self.rf_level[read]}
        got = memo.get(read)
        if got is self._EXPANDING:
            # cycle through this edge: fall back to its whole level prefix
            return set(range(self.rf_level[read] + 1))
        if got is not None:
            return got
        memo[read] = self._EXPANDING
        chosen = self.rf_of[read]
        out: Optional[set[int]] = set()
        for w in self.cand[read]:
            if w == chosen:
                continue
            ex = self._explain_dead_cand(read, w, memo)
            if ex is None:
                out = None
                break
            out |= ex
        if out is None:
            out = set(range(self.rf_level[read] + 1))
        memo[read] = out
        return out

    def _path_levels(self, a: int, b: int, memo: dict) -> Optional[set[int]]:
        """Levels of rf edges along some hb path a -> b, None if no path."""
        readers: dict[int, list[int]] = {}
        for r2, w2 in self.rf_of.items():
            readers.setdefault(w2, []).append(r2)
        parent = {a: a}
        queue = [a]
        while queue:
            nxt = []
            for u in queue:
                succs = readers.get(u, ())
                pn = self.po_next[u]
                for v in itertools.chain((pn,) if pn >= 0 else (), succs):
                    if v not in parent:
                        parent[v] = u
                        if v == b:
                            out: set[int] = set()
                            while v != a:
                                u2 = parent[v]
                                if self.po_next[u2] != v:
                                    out |= self._blame_read(v, memo)
                                v = u2
                            return out
                        nxt.append(v)
            queue = nxt
        return None

    def _explain_dead_cand(self, r: int, w: int, memo: dict) -> Optional[set[int]]:
        if (self.desc[r] >> w) & 1:
            return self._path_levels(r, w, memo)
        if self.model in _WRC_PRUNED:
            blockers = self.desc[w] & self.wmask[self.loc[r]] & self.anc[r]
            if blockers:
                wp = (blockers & -blockers).bit_length() - 1
                a = self._path_levels(w, wp, memo)
                b = self._path_levels(wp, r, memo)
                if a is None or b is None:
                    return None
                return a | b
        return None

    def _explain_nonviable(self, r: int, w: int) -> Optional[set[int]]:
        return self._explain_dead_cand(r, w, {})

    def _explain_stale_pair(self, r2: int, w2: int) -> Optional[set[int]]:
        memo: dict = {}
        blockers = self.desc[w2] & self.wmask[self.loc[r2]] & self.anc[r2]
        wp = (blockers & -blockers).bit_length() - 1
        a = self._path_levels(w2, wp, memo)
        b = self._path_levels(wp, r2, memo)
        if a is None or b is None:
            return None
        return a | b | self._blame_read(r2, memo)

    def _explain_dead_read(self, r: int) -> Optional[set[int]]:
        memo: dict = {}
        out: set[int] = set()
        for w in self.cand[r]:
            ex = self._explain_dead_cand(r, w, memo)
            if ex is None:
                return None
            out |= ex
        return out

    def propagate(self):
        """Assign forced reads; returns ('dead',) | ('leaf',) | ('branch', r, ws)."""
        while True:
            best = None
            progressed = False
            for r in self.read_order:
                if r in self.rf_of:
                    continue
                ws = [w for w in self.cand[r] if self.viable(r, w)]
                if not ws:
                    self.fail_reason = self._explain_dead_read(r)
                    return ("dead",)
                if len(ws) == 1:
                    if not self.assign(r, ws[0]):
                        return ("dead",)
                    progressed = True
                elif best is None or len(ws) < len(best[1]):
                    best = (r, ws)
            if progressed:
                continue
            if best is None:
                return ("leaf",)
            return ("branch", best[0], best[1])

    # --- leaf handling ----------------------------------------------------

    def leaf_mo(self) -> Optional[dict[str, list[str]]]:
        """Per-location witness mo if the model accepts this rf; else None."""
        model = self.model
        if model is MemoryModel.WRA:
            return {}
        if model is MemoryModel.CM:
            return {} if self._cm_leaf_ok() else None
        if model is MemoryModel.RA:
            out = {}
            for loc in sorted(self.wmask):
                ws = list(_bits(self.wmask[loc]))
                if len(ws) < 2:
                    continue
                succ = {a: self.desc[a] & self.wmask[loc] for a in ws}
                for r2, w2 in self.by_loc_assigned.get(loc, ()):
                    for w3 in _bits(self.anc[r2] & self.wmask[loc] & ~(1 << w2)):
                        succ[w3] |= 1 << w2
                order = _toposort(ws, succ)
                if order is None:
                    return None
                out[loc] = [self.ids[i] for i in order]
            return out
        if model is MemoryModel.SRA:
            desc = list(self.desc)
            anc = list(self.anc)
            for loc, pairs in self.by_loc_assigned.items():
                for r2, w2 in pairs:
                    for w3 in _bits(self.anc[r2] & self.wmask[loc] & ~(1 << w2)):
                        if not self._add_edge(desc, anc, w3, w2):
                            return None
            order = self._linearize(range(self.n), anc)
            out = {}
            for loc in sorted(self.wmask):
                ws = [self.ids[i] for i in order if self.loc[i] == loc and (self.wmask[loc] >> i) & 1]
                if len(ws) >= 2:
                    out[loc] = ws
            return out
        if model is MemoryModel.RELAXED_ACYCLIC:
            out = {}
            for loc in sorted(self.wmask):
                if self.wmask[loc].bit_count() < 2:
                    continue
                members = self.lmembers[loc]
                order = self._linearize(members, self.uanc[loc])
                out[loc] = [
                    self.ids[i] for i in order if (self.wmask[loc] >> i) & 1
                ]
            return out
        raise AssertionError(model)

    def _linearize(self, members, anc_rows) -> list[int]:
        members = list(members)
        remaining = 0
        for m in members:
            remaining |= 1 << m
        out = []
        pool = sorted(members)
        while pool:
            for m in pool:
                if not anc_rows[m] & remaining & ~(1 << m):
                    break
            else:
                raise AssertionError("cycle in supposedly acyclic order")
            out.append(m)
            remaining ^= 1 << m
            pool.remove(m)
        return out

    def _cm_leaf_ok(self) -> bool:
        conc = self._concrete({})
        ctx = execution_context(conc)
        for t in self.x.threads:
            rows, ctx = ob_rows_for_thread(conc, t, one_hop=True, ctx=ctx)
            if any((row >> a) & 1 for a, row in rows.items()):
                return False
        for t in self.x.threads:
            rows, ctx = ob_rows_for_thread(conc, t, one_hop=False, ctx=ctx)
            if any((row >> a) & 1 for a, row in rows.items()):
                return False
        return True

    def _concrete(self, mo: dict[str, list[str]]) -> ConcreteExecution:
        universe = frozenset(self.ids)
        rf = Relation(
            frozenset((self.ids[w], self.ids[r]) for r, w in self.rf_of.items()),
            universe,
        )
        return ConcreteExecution(self.x, rf, _mo_relation(universe, mo.values()))

    def run(self) -> Verdict:
        model = self.model
        if self.no_writer is not None:
            return Verdict(
                model,
                False,
                reason=f"no candidate writer for read {self.ids[self.no_writer]}",
            )
        # frame: [mark, read, candidates, current index, conflict levels]
        stack: list[list] = []

        def settle(reason: Optional[set[int]]) -> bool:
            # The top frame's current candidate failed for `reason`.  Try its
            # remaining candidates; once exhausted, jump straight to the
            # deepest decision level the conflicts actually depended on.
            while True:
                if not stack:
                    return False
                frame = stack[-1]
                d = len(stack)
                self.cur_level = d
                cs = frame[4]
                if reason is None:
                    cs.update(range(d))
                else:
                    cs.update(l for l in reason if l < d)
                frame[3] += 1
                while frame[3] < len(frame[2]):
                    self.rewind(frame[0])
                    if self.assign(frame[1], frame[2][frame[3]], branch=True):
                        return True
                    fr = self.fail_reason
                    if fr is None:
                        cs.update(range(d))
                    else:
                        cs.update(l for l in fr if l < d)
                    frame[3] += 1
                # Exhausted.  The frame's candidate list was viability-filtered
                # when the frame was created, and those eliminations depended
                # on decision levels of their own; fold them in, or the jump
                # could skip the level responsible for the filtering.  After
                # rewinding, the state is exactly the creation-time state, so
                # the eliminations re-derive.
                self.rewind(frame[0])
                listed = set(frame[2])
                memo: dict = {}
                for w in self.cand[frame[1]]:
                    if w in listed:
                        continue
                    ex = self._explain_dead_cand(frame[1], w, memo)
                    if ex is None:
                        cs.update(range(d))
                        break
                    cs.update(l for l in ex if l < d)
                if not cs:
                    return False
                h = max(cs)
                if h <= 0:
                    return False
                reason = {l for l in cs if l < h}
                del stack[h:]

        while True:
            self.cur_level = len(stack)
            step = self.propagate()
            if step[0] == "dead":
                if not settle(self.fail_reason):
                    return Verdict(model, False, stats=Stats(self.nodes, 0))
                continue
            if step[0] == "leaf":
                mo = self.leaf_mo()
                if mo is None:
                    if not settle(None):
                        return Verdict(model, False, stats=Stats(self.nodes, 0))
                    continue
                return Verdict(
                    model, True, self._concrete(mo), Stats(self.nodes, 0)
                )
            _, r, ws = step
            stack.append([self.mark(), r, ws, 0, set()])
            self.cur_level = len(stack)
            if not self.assign(r, ws[0], branch=True):
                if not settle(self.fail_reason):
                    return Verdict(model, False, stats=Stats(self.nodes, 0))


def decide_ra_family(
    x: AbstractExecution, model: MemoryModel, budget: Optional[int] = None
) -> Verdict:
    model = canonical_model(model)
    allowed = {
        MemoryModel.WRA,
        MemoryModel.RA,
        MemoryModel.SRA,
        MemoryModel.RELAXED_ACYCLIC,
    }
    if model not in allowed:
        raise ValueError(f"decide_ra_family does not handle {model.value}")
    search = _RfSearch(x, model, budget)
    try:
        return search.run()
    except _BudgetExhausted:
        return Verdict(
            model, None, reason="budget exhausted", stats=Stats(search.nodes, 0)
        )


def decide_cm(x: AbstractExecution, budget: Optional[int] = None) -> Verdict:
    search = _RfSearch(x, MemoryModel.CM, budget)
    try:
        return search.run()
    except _BudgetExhausted:
        return Verdict(
            MemoryModel.CM, None, reason="budget exhausted", stats=Stats(search.nodes, 0)
        )


# --- brute force ----------------------------------------------------------

_MO_FREE = {MemoryModel.WRA, MemoryModel.CM}


def brute_force_decide(x: AbstractExecution, model: MemoryModel) -> Verdict:
    """Independent oracle: plain exhaustive enumeration, 12-event guard."""
    if len(x.events) > 12:
        raise TooLarge(f"{len(x.events)} events exceeds the 12-event guard")
    requested = model
    model = canonical_model(model)
    if model in OPERATIONAL_MODELS:
        bad = _value_mismatch(x)
        # no precheck shortcut: exhaustive exploration decides; mismatch
        # only makes the outcome certain, so it is fine either way
        if model is MemoryModel.SC:
            status, rf_map, worder, nodes, hits = _sc_search(x, False, None)
            witness = _sc_witness(x, rf_map, worder) if status == "ok" else None
        else:
            status, rf_map, flushes, nodes, hits = _buffered_search(
                x, model is MemoryModel.PSO, False, None
            )
            witness = (
                _buffered_witness(x, rf_map, flushes) if status == "ok" else None
            )
        consistent = status == "ok"
        reason = ""
        if not consistent and bad is not None:
            reason = f"value mismatch: read {bad} matches no write"
        return Verdict(requested, consistent, witness, Stats(nodes, hits), reason)

    if model is MemoryModel.RELAXED:
        # This model is per-location serializability; its two axioms cannot
        # see a same-location po u rf cycle that no mo edge witnesses, so
        # enumerating rf x mo against them would accept executions the
        # model's own definition rejects.  Enumerate interleavings instead.
        nodes = 0
        partial = []
        for loc in x.locations:
            proj = x.project(loc)
            status, rf_map, worder, n2, _ = _sc_search(proj, False, None)
            nodes += n2
            if status != "ok":
                return Verdict(requested, False, stats=Stats(nodes, 0))
            partial.append(_sc_witness(proj, rf_map, worder))
        universe = frozenset(e.id for e in x.events)
        rf = Relation(frozenset(p for w in partial for p in w.rf.pairs), universe)
        mo = Relation(frozenset(p for w in partial for p in w.mo.pairs), universe)
        return Verdict(
            requested, True, ConcreteExecution(x, rf, mo), Stats(nodes, 0)
        )

    reads = sorted(x.reads, key=lambda e: e.id)
    cand_lists = []
    for e in reads:
        ws = sorted(
            w.id
            for w in x.writes_on(e.location)
            if w.value == e.value
        )
        if not ws:
            return Verdict(
                requested, False, reason=f"no candidate writer for read {e.id}"
            )
        cand_lists.append(ws)
    universe = frozenset(e.id for e in x.events)
    multi_write_locs = [
        loc for loc in x.locations if len(x.writes_on(loc)) >= 2
    ]
    nodes = 0
    for rf_choice in itertools.product(*cand_lists):
        rf = Relation(
            frozenset(zip(rf_choice, (e.id for e in reads))), universe
        )
        if model in _MO_FREE:
            mo_iter = [()]
        else:
            mo_iter = itertools.product(
                *(
                    itertools.permutations(
                        sorted(w.id for w in x.writes_on(loc))
                    )
                    for loc in multi_write_locs
                )
            )
        for mo_choice in mo_iter:
            nodes += 1
            conc = ConcreteExecution(
                x, rf, _mo_relation(universe, [list(p) for p in mo_choice])
            )
            if check_concrete(conc, model):
                return Verdict(requested, True, conc, Stats(nodes, 0))
    return Verdict(requested, False, stats=Stats(nodes, 0))


# --- dispatcher -----------------------------------------------------------


def decide(
    x: AbstractExecution,
    model: MemoryModel,
    budget: Optional[int] = None,
    memo: bool = True,
) -> Verdict:
    """Decide consistency of x under the model; aliases share code paths."""
    c = canonical_model(model)
    if c is MemoryModel.SC:
        v = decide_sc(x, budget, memo)
    elif c is MemoryModel.TSO:
        v = decide_tso(x, budget, memo)
    elif c is MemoryModel.PSO:
        v = decide_pso(x, budget, memo)
    elif c is MemoryModel.RELAXED:
        v = decide_relaxed(x, budget, memo)
    elif c is MemoryModel.CM:
        v = decide_cm(x, budget)
    else:
        v = decide_ra_family(x, c, budget)
    return replace(v, model=model)
