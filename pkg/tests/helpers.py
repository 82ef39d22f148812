"""Shared fixtures for the test suite: small hand-checked executions."""

from __future__ import annotations

from typing import Iterable, Mapping, Optional, Sequence

from wmtest.axioms import Axiom
from wmtest.model import AbstractExecution, ConcreteExecution, Relation


def make_concrete(
    threads: Mapping[str, Sequence[tuple[str, str, int]]],
    rf: Iterable[tuple[str, str]] = (),
    mo: Optional[Mapping[str, Sequence[str]]] = None,
    order: Optional[Sequence[str]] = None,
) -> ConcreteExecution:
    """Build a concrete execution; mo maps location -> write ids in order."""
    base = AbstractExecution.from_threads(threads, order)
    universe = frozenset(e.id for e in base.events)
    mo_pairs = []
    for ids in (mo or {}).values():
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                mo_pairs.append((ids[i], ids[j]))
    return ConcreteExecution(
        base,
        Relation(frozenset(rf), universe),
        Relation(frozenset(mo_pairs), universe),
    )


def axiom_matrix() -> dict[str, tuple[ConcreteExecution, Axiom]]:
    """Seven executions, each violating exactly the axiom it is named for."""
    W, R = "W", "R"
    out = {}
    out["a"] = (
        make_concrete(
            {"t1": [(W, "x", 1), (W, "y", 1)], "t2": [(R, "y", 1), (W, "x", 2)]},
            rf=[("t1.1", "t2.0")],
            mo={"x": ["t2.1", "t1.0"]},
        ),
        Axiom.WRITE_COHERENCE,
    )
    out["b"] = (
        make_concrete(
            {"t1": [(W, "y", 1), (W, "x", 1)], "t2": [(W, "x", 2), (W, "y", 2)]},
            mo={"x": ["t1.1", "t2.0"], "y": ["t2.1", "t1.0"]},
        ),
        Axiom.STRONG_WRITE_COHERENCE,
    )
    out["c"] = (
        make_concrete(
            {
                "t1": [(W, "x", 1), (W, "x", 2), (W, "y", 1)],
                "t2": [(R, "y", 1), (R, "x", 1)],
            },
            rf=[("t1.2", "t2.0"), ("t1.0", "t2.1")],
            mo={"x": ["t1.0", "t1.1"]},
        ),
        Axiom.READ_COHERENCE,
    )
    out["d"] = (
        make_concrete(
            {
                "t1": [(W, "x", 1), (W, "y", 1)],
                "t2": [(R, "y", 1), (W, "x", 2), (R, "x", 1)],
            },
            rf=[("t1.1", "t2.0"), ("t1.0", "t2.2")],
        ),
        Axiom.WEAK_READ_COHERENCE,
    )
    out["e"] = (
        make_concrete(
            {"t1": [(R, "x", 1), (W, "y", 1)], "t2": [(R, "y", 1), (W, "x", 1)]},
            rf=[("t1.1", "t2.0"), ("t2.1", "t1.0")],
        ),
        Axiom.PORF_ACYCLICITY,
    )
    out["f"] = (
        make_concrete(
            {"t1": [(W, "x", 1), (W, "x", 2)]},
            mo={"x": ["t1.1", "t1.0"]},
        ),
        Axiom.RELAXED_WRITE_COHERENCE,
    )
    out["g"] = (
        make_concrete(
            {"t1": [(W, "x", 1), (W, "x", 2)], "t2": [(R, "x", 2), (R, "x", 1)]},
            rf=[("t1.1", "t2.0"), ("t1.0", "t2.1")],
            mo={"x": ["t1.0", "t1.1"]},
        ),
        Axiom.RELAXED_READ_COHERENCE,
    )
    return out


def cm_separator() -> ConcreteExecution:
    """Reads x as 1, 2, 1 again: fine without blocking-order, cyclic with it."""
    W, R = "W", "R"
    return make_concrete(
        {
            "t1": [(W, "x", 1)],
            "t2": [(W, "x", 2)],
            "t3": [(R, "x", 1), (R, "x", 2), (R, "x", 1), (W, "z", 1)],
        },
        rf=[("t1.0", "t3.0"), ("t2.0", "t3.1"), ("t1.0", "t3.2")],
    )


def random_executions(
    count: int,
    seed: int,
    max_events: int = 10,
    max_threads: int = 3,
    max_locations: int = 3,
    max_values: int = 3,
) -> list[AbstractExecution]:
    """Seeded corpus of small abstract executions with mostly-satisfiable reads."""
    import random

    rng = random.Random(seed)
    names = ["x", "y", "z", "u", "v"][:max_locations]
    out = []
    for _ in range(count):
        n_threads = rng.randint(1, max_threads)
        total = rng.randint(2, max_events)
        sizes = [0] * n_threads
        for _ in range(total):
            sizes[rng.randrange(n_threads)] += 1
        # pass 1: shapes and write values
        skeleton = []
        written: dict[str, list[int]] = {}
        for ti in range(n_threads):
            row = []
            for _ in range(sizes[ti]):
                loc = rng.choice(names)
                if rng.random() < 0.55:
                    value = rng.randint(1, max_values)
                    written.setdefault(loc, []).append(value)
                    row.append(("W", loc, value))
                else:
                    row.append(("R", loc, None))
            skeleton.append(row)
        # pass 2: read values, biased toward values some write produced
        threads = {}
        for ti, row in enumerate(skeleton):
            events = []
            for kind, loc, value in row:
                if kind == "R":
                    pool = written.get(loc)
                    if pool and rng.random() < 0.8:
                        value = rng.choice(pool)
                    else:
                        value = rng.randint(1, max_values)
                events.append((kind, loc, value))
            threads[f"t{ti + 1}"] = events
        out.append(AbstractExecution.from_threads(threads))
    return out
