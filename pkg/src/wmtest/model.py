"""Events, relations, and executions.

An abstract execution is a set of read/write events plus a program order
that is total within each thread.  A concrete execution additionally fixes
a reads-from map and a per-location modification order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Sequence

WRITE = "W"
READ = "R"

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class Event:
    """A single memory access: ``<thread>.<index>`` reading or writing loc."""

    id: str
    thread: str
    kind: str  # WRITE or READ
    location: str
    value: int

    def __post_init__(self) -> None:
        if self.kind not in (WRITE, READ):
            raise ValueError(f"bad event kind {self.kind!r}")

    @property
    def is_write(self) -> bool:
        return self.kind == WRITE

    @property
    def is_read(self) -> bool:
        return self.kind == READ


@dataclass(frozen=True)
class Relation:
    """An immutable binary relation over a fixed universe of event ids."""

    pairs: frozenset[tuple[str, str]]
    universe: frozenset[str]

    def __post_init__(self) -> None:
        for a, b in self.pairs:
            if a not in self.universe or b not in self.universe:
                raise ValueError(f"pair ({a}, {b}) leaves the universe")

    @staticmethod
    def of(pairs: Iterable[tuple[str, str]], universe: Iterable[str]) -> "Relation":
        return Relation(frozenset(pairs), frozenset(universe))

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return pair in self.pairs

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    @cached_property
    def _order(self) -> tuple[str, ...]:
        return tuple(sorted(self.universe))

    @cached_property
    def _index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self._order)}

    @cached_property
    def _rows(self) -> tuple[int, ...]:
        # Dense successor bitmasks, one int per universe element.
        idx = self._index
        rows = [0] * len(self._order)
        for a, b in self.pairs:
            rows[idx[a]] |= 1 << idx[b]
        return tuple(rows)

    @cached_property
    def _closure_rows(self) -> tuple[int, ...]:
        rows = list(self._rows)
        for k in range(len(rows)):
            kbit = 1 << k
            krow = rows[k]
            for i in range(len(rows)):
                if rows[i] & kbit:
                    rows[i] |= krow
        return tuple(rows)

    def transitive_closure(self) -> "Relation":
        order = self._order
        pairs = set()
        for i, row in enumerate(self._closure_rows):
            a = order[i]
            while row:
                low = row & -row
                pairs.add((a, order[low.bit_length() - 1]))
                row ^= low
        return Relation(frozenset(pairs), self.universe)

    def union(self, other: "Relation") -> "Relation":
        return Relation(self.pairs | other.pairs, self.universe | other.universe)

    def inverse(self) -> "Relation":
        return Relation(frozenset((b, a) for a, b in self.pairs), self.universe)

    def compose(self, other: "Relation") -> "Relation":
        succ: dict[str, set[str]] = {}
        for b, c in other.pairs:
            succ.setdefault(b, set()).add(c)
        pairs = {
            (a, c) for a, b in self.pairs for c in succ.get(b, ())
        }
        return Relation(frozenset(pairs), self.universe | other.universe)

    def restrict(self, keep: Iterable[str]) -> "Relation":
        keep = set(keep)
        return Relation(
            frozenset(p for p in self.pairs if p[0] in keep and p[1] in keep),
            self.universe,
        )

    def is_irreflexive(self) -> bool:
        return all(a != b for a, b in self.pairs)

    def is_acyclic(self) -> bool:
        order = self._order
        return all(
            not (row >> i) & 1 for i, row in enumerate(self._closure_rows)
        ) and len(order) >= 0

    def reaches(self, a: str, b: str) -> bool:
        """True iff there is a nonempty path from a to b."""
        return bool((self._closure_rows[self._index[a]] >> self._index[b]) & 1)


def is_acyclic(rel: Relation) -> bool:
    return rel.is_acyclic()


def is_irreflexive(rel: Relation) -> bool:
    return rel.is_irreflexive()


@dataclass(frozen=True)
class AbstractExecution:
    """Events plus program order; threads may be declared yet empty."""

    events: tuple[Event, ...]
    po: Relation
    threads: tuple[str, ...]

    def __post_init__(self) -> None:
        seen = set()
        for e in self.events:
            if e.id in seen:
                raise ValueError(f"duplicate event id {e.id}")
            seen.add(e.id)
            if e.thread not in self.threads:
                raise ValueError(f"event {e.id} on undeclared thread {e.thread}")
            if not (INT64_MIN <= e.value <= INT64_MAX):
                raise ValueError(f"event {e.id} value outside int64")
        by_thread: dict[str, list[Event]] = {t: [] for t in self.threads}
        for e in self.events:
            by_thread[e.thread].append(e)
        # po must be the strict total order given by each thread's event sequence.
        expected = set()
        for es in by_thread.values():
            for i in range(len(es)):
                for j in range(i + 1, len(es)):
                    expected.add((es[i].id, es[j].id))
        if set(self.po.pairs) != expected:
            raise ValueError("po is not the per-thread total order over events")

    @staticmethod
    def from_threads(
        threads: Mapping[str, Sequence[tuple[str, str, int]]],
        order: Optional[Sequence[str]] = None,
    ) -> "AbstractExecution":
        """Build from {thread: [(kind, location, value), ...]}."""
        names = tuple(order) if order is not None else tuple(threads)
        events = []
        pairs = []
        for t in names:
            ids = []
            for i, (kind, loc, val) in enumerate(threads.get(t, ())):
                e = Event(f"{t}.{i}", t, kind, loc, val)
                events.append(e)
                ids.append(e.id)
            for i in range(len(ids)):
                for j in range(i + 1, len(ids)):
                    pairs.append((ids[i], ids[j]))
        universe = frozenset(e.id for e in events)
        return AbstractExecution(
            tuple(events), Relation(frozenset(pairs), universe), names
        )

    @cached_property
    def by_id(self) -> dict[str, Event]:
        return {e.id: e for e in self.events}

    @cached_property
    def events_by_thread(self) -> dict[str, tuple[Event, ...]]:
        out: dict[str, list[Event]] = {t: [] for t in self.threads}
        for e in self.events:
            out[e.thread].append(e)
        return {t: tuple(es) for t, es in out.items()}

    @cached_property
    def reads(self) -> tuple[Event, ...]:
        return tuple(e for e in self.events if e.is_read)

    @cached_property
    def writes(self) -> tuple[Event, ...]:
        return tuple(e for e in self.events if e.is_write)

    @cached_property
    def locations(self) -> tuple[str, ...]:
        return tuple(sorted({e.location for e in self.events}))

    def writes_on(self, loc: str) -> tuple[Event, ...]:
        return tuple(e for e in self.writes if e.location == loc)

    def project(self, loc: str) -> "AbstractExecution":
        """The per-location projection: only events accessing loc."""
        events = tuple(e for e in self.events if e.location == loc)
        keep = {e.id for e in events}
        return AbstractExecution(
            events,
            Relation(
                frozenset(p for p in self.po.pairs if p[0] in keep and p[1] in keep),
                frozenset(keep),
            ),
            self.threads,
        )


@dataclass(frozen=True)
class ConflictTriplet:
    """A read, its writer, and another write on the same location."""

    write: str
    read: str
    other_write: str


@dataclass(frozen=True)
class ConcreteExecution:
    """An abstract execution with reads-from and modification order fixed."""

    base: AbstractExecution
    rf: Relation
    mo: Relation

    def __post_init__(self) -> None:
        by_id = self.base.by_id
        seen_readers: set[str] = set()
        for w, r in self.rf.pairs:
            we, re = by_id[w], by_id[r]
            if not we.is_write or not re.is_read:
                raise ValueError(f"rf pair ({w}, {r}) is not write-to-read")
            if we.location != re.location or we.value != re.value:
                raise ValueError(f"rf pair ({w}, {r}) mismatches location/value")
            if r in seen_readers:
                raise ValueError(f"read {r} has two writers")
            seen_readers.add(r)
        missing = [e.id for e in self.base.reads if e.id not in seen_readers]
        if missing:
            raise ValueError(f"reads without a writer: {missing}")
        # mo: per location, a strict total order over the writes it mentions,
        # and it must mention either none or all of that location's writes.
        per_loc: dict[str, set[str]] = {}
        for a, b in self.mo.pairs:
            ae, be = by_id[a], by_id[b]
            if not ae.is_write or not be.is_write or ae.location != be.location:
                raise ValueError(f"mo pair ({a}, {b}) is not same-location writes")
            per_loc.setdefault(ae.location, set()).update((a, b))
        for loc, ids in per_loc.items():
            all_writes = {e.id for e in self.base.writes_on(loc)}
            if ids != all_writes:
                raise ValueError(f"mo on {loc} does not cover all writes")
            n = len(ids)
            count = sum(
                1 for a, b in self.mo.pairs if by_id[a].location == loc
            )
            if count != n * (n - 1) // 2:
                raise ValueError(f"mo on {loc} is not a strict total order")
            rel = self.mo.restrict(ids)
            if not rel.is_acyclic():
                raise ValueError(f"mo on {loc} is cyclic")

    def mo_locations(self) -> tuple[str, ...]:
        return tuple(sorted({self.base.by_id[a].location for a, _ in self.mo.pairs}))

    def mo_order(self, loc: str) -> tuple[str, ...]:
        """The writes on loc in modification order (empty if mo omits loc)."""
        writes = [e.id for e in self.base.writes_on(loc)]
        if not writes or loc not in self.mo_locations():
            return ()
        pred_count = {w: 0 for w in writes}
        for a, b in self.mo.pairs:
            if b in pred_count and self.base.by_id[a].location == loc:
                pred_count[b] += 1
        return tuple(sorted(writes, key=lambda w: pred_count[w]))

    def writer_of(self, read_id: str) -> str:
        for w, r in self.rf.pairs:
            if r == read_id:
                return w
        raise KeyError(read_id)


def compute_hb(x: ConcreteExecution) -> Relation:
    """happens-before: the transitive closure of po ∪ rf."""
    return x.base.po.union(x.rf).transitive_closure()


def conflicting_triplets(x: ConcreteExecution) -> tuple[ConflictTriplet, ...]:
    """All (writer, read, other same-location write) triples, sorted."""
    out = []
    for w, r in x.rf.pairs:
        loc = x.base.by_id[r].location
        for other in x.base.writes_on(loc):
            if other.id != w:
                out.append(ConflictTriplet(w, r, other.id))
    return tuple(sorted(out, key=lambda t: (t.read, t.other_write)))


def restrict_to_location(rel: Relation, x: AbstractExecution, loc: str) -> Relation:
    """Keep pairs whose both endpoints access loc."""
    keep = {e.id for e in x.events if e.location == loc}
    return Relation(
        frozenset(p for p in rel.pairs if p[0] in keep and p[1] in keep),
        rel.universe,
    )
