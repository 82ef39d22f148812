"""Generator, witness, and value-bounding checks for the SAT reductions."""

import pytest

from wmtest.axioms import MemoryModel, check_concrete
from wmtest.decide import TooLarge, decide_cm, decide_ra_family
from wmtest.hardness import (
    Assignment,
    AssignmentNotOneInThree,
    Formula,
    GadgetFamily,
    IndexOutOfRange,
    MalformedHeader,
    PlanMismatch,
    RepeatedVariableInClause,
    THREADS,
    TooFewClauses,
    bounded_value_transform,
    brute_force_1in3,
    family_locations,
    gadget_plan,
    generate,
    parse_formula,
    witness_extension,
)
from wmtest.model import READ, WRITE

SINGLE = Formula(3, ((1, 2, 3),))
DOUBLE = Formula(3, ((1, 2, 3), (1, 2, 3)))
UNSAT4 = Formula(4, ((1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)))


def test_parse_formula_basic():
    f = parse_formula("3 1\n1 2 3\n")
    assert f == SINGLE
    f = parse_formula("\n5 2\n\n1 2 3\n1 4 5\n\n")
    assert f.n == 5 and f.clauses == ((1, 2, 3), (1, 4, 5))


def test_parse_formula_errors():
    for text in ["", "3", "3 x", "2 1\n1 2 3", "3 1\n1 2\n", "3 1\n1 2 z\n",
                 "3 1\n1 2 3\n1 2 3\n"]:
        with pytest.raises(MalformedHeader):
            parse_formula(text)
    with pytest.raises(TooFewClauses):
        parse_formula("3 0\n")
    with pytest.raises(TooFewClauses):
        parse_formula("3 2\n1 2 3\n")
    with pytest.raises(IndexOutOfRange):
        parse_formula("4 1\n1 2 5\n")
    with pytest.raises(IndexOutOfRange):
        parse_formula("3 1\n0 1 2\n")
    with pytest.raises(RepeatedVariableInClause):
        parse_formula("3 1\n1 2 2\n")


def test_formula_constructor_validation():
    with pytest.raises(MalformedHeader):
        Formula(2, ((1, 2, 3),))
    with pytest.raises(TooFewClauses):
        Formula(3, ())
    with pytest.raises(IndexOutOfRange):
        Formula(3, ((1, 2, 4),))
    with pytest.raises(RepeatedVariableInClause):
        Formula(4, ((1, 4, 4),))


def test_brute_force_first_in_bit_order():
    a = brute_force_1in3(SINGLE)
    assert a is not None and a.values == {1: True, 2: False, 3: False}
    a = brute_force_1in3(Formula(5, ((1, 2, 3), (1, 4, 5))))
    assert a is not None
    assert a.values == {1: True, 2: False, 3: False, 4: False, 5: False}
    assert a.one_in_three(Formula(5, ((1, 2, 3), (1, 4, 5))))


def test_brute_force_unsat_and_guard():
    assert brute_force_1in3(UNSAT4) is None
    with pytest.raises(TooLarge):
        brute_force_1in3(Formula(25, ((1, 2, 3),)))


def test_assignment_one_in_three():
    assert not Assignment({1: True}).one_in_three(SINGLE)
    assert not Assignment({1: True, 2: True, 3: False}).one_in_three(SINGLE)
    assert Assignment({1: False, 2: True, 3: False}).one_in_three(SINGLE)


@pytest.mark.parametrize("family", list(GadgetFamily))
def test_generator_thread_and_location_schedule(family):
    x = generate(DOUBLE, family)
    assert tuple(x.threads) == THREADS
    assert len(x.threads) == 23
    assert set(x.locations) == set(family_locations(family))
    expected = 26 if family is GadgetFamily.RA_FAMILY else 14
    assert len(x.locations) == expected
    # A one-phase instance has no use for the phase-linking locations.
    small = generate(SINGLE, family)
    assert tuple(small.threads) == THREADS
    linking = {loc for loc in family_locations(family) if loc[0] == "z"}
    if family is GadgetFamily.RA_FAMILY:
        linking |= {"l3", "l4"}
    assert set(x.locations) - set(small.locations) == linking


@pytest.mark.parametrize("family", list(GadgetFamily))
def test_event_count_affine_in_clause_count(family):
    counts = [
        len(generate(Formula(3, ((1, 2, 3),) * m), family).events)
        for m in (2, 3, 4)
    ]
    assert counts[1] - counts[0] == counts[2] - counts[1]


@pytest.mark.parametrize("family", list(GadgetFamily))
def test_plan_covers_instance_in_order(family):
    x = gadget_plan(DOUBLE, family)
    inst = generate(DOUBLE, family)
    assert x.formula == DOUBLE and x.family is family
    assert set(x.blocks) == {e.id for e in inst.events}
    for t in inst.threads:
        keys = [x.blocks[e.id] for e in inst.events_by_thread[t]]
        assert keys == sorted(keys)
        for i, j in keys:
            assert 1 <= i <= 2 and 1 <= j <= 3


@pytest.mark.parametrize("family", list(GadgetFamily))
def test_focal_events(family):
    x = generate(DOUBLE, family)
    vals = {2 * (i * 4 + j) for i in (1, 2) for j in (1, 2, 3)}
    for t in ("t1", "t2"):
        ws = [e for e in x.events_by_thread[t] if e.location == "x1"]
        assert {e.value for e in ws} == vals and all(e.is_write for e in ws)
    rs = [e for e in x.events_by_thread["t3"] if e.location == "x1"]
    assert {e.value for e in rs} == vals and all(e.is_read for e in rs)


def _event(x, thread, kind, loc, value):
    hits = [
        e
        for e in x.events_by_thread[thread]
        if e.kind == kind and e.location == loc and e.value == value
    ]
    assert len(hits) == 1
    return hits[0].id


@pytest.mark.parametrize(
    "formula", [SINGLE, DOUBLE, Formula(4, ((1, 2, 4), (2, 3, 4)))]
)
def test_witness_satisfies_target_models(formula):
    assignments = [
        Assignment({v: v == pick for v in range(1, formula.n + 1)})
        for pick in range(1, formula.n + 1)
        if Assignment({v: v == pick for v in range(1, formula.n + 1)}).one_in_three(
            formula
        )
    ]
    assert assignments
    for asg in assignments:
        conc = witness_extension(formula, asg, GadgetFamily.RA_FAMILY)
        for model in (
            MemoryModel.SRA,
            MemoryModel.RA,
            MemoryModel.WRA,
            MemoryModel.CM,
        ):
            assert check_concrete(conc, model), f"{model} rejects {asg.values}"
        conc = witness_extension(formula, asg, GadgetFamily.RELAXED_ACYCLIC)
        assert check_concrete(conc, MemoryModel.RELAXED_ACYCLIC)


def test_witness_rejects_bad_assignment():
    with pytest.raises(AssignmentNotOneInThree):
        witness_extension(
            SINGLE, Assignment({1: True, 2: True, 3: True}), GadgetFamily.RA_FAMILY
        )
    with pytest.raises(AssignmentNotOneInThree):
        witness_extension(SINGLE, Assignment({1: True}), GadgetFamily.RELAXED_ACYCLIC)


def test_witness_pinned_choice_edges():
    # With only variable 1 true: t3 takes the focal write of t2 at step 1
    # and of t1 elsewhere; the at-most-one order puts the stale t2 write
    # before the helper's on a1.
    asg = Assignment({1: True, 2: False, 3: False})
    x = generate(SINGLE, GadgetFamily.RA_FAMILY)
    conc = witness_extension(SINGLE, asg, GadgetFamily.RA_FAMILY)
    v = lambda j: 2 * (4 + j)
    rf = dict((r, w) for w, r in conc.rf.pairs)
    assert rf[_event(x, "t3", READ, "x1", v(1))] == _event(x, "t2", WRITE, "x1", v(1))
    assert rf[_event(x, "t3", READ, "x1", v(2))] == _event(x, "t1", WRITE, "x1", v(2))
    # The writer chain flips on step 1 only for the x2 mirror.
    assert rf[_event(x, "t6", READ, "x2", v(1))] == _event(x, "t5", WRITE, "x2", v(1))
    assert rf[_event(x, "t6", READ, "x2", v(2))] == _event(x, "t4", WRITE, "x2", v(2))
    order = conc.mo_order("a1")
    stale = _event(x, "t2", WRITE, "a1", v(1) + 1)
    active = _event(x, "h1", WRITE, "a1", v(1))
    later = _event(x, "t2", WRITE, "a1", v(2))
    assert order.index(stale) < order.index(active) < order.index(later)
    # b carries the at-least-one resolution: variable 1 true means t1's
    # write is the one read at step 1.
    assert rf[_event(x, "t3", READ, "b", v(1))] == _event(x, "t1", WRITE, "b", v(1))
    assert rf[_event(x, "t3", READ, "b", v(2))] == _event(x, "q", WRITE, "b", v(2))
    assert rf[_event(x, "t3", READ, "b", v(3))] == _event(x, "p", WRITE, "b", v(3))


def test_witness_rf_stays_inside_block():
    for family in GadgetFamily:
        conc = witness_extension(
            DOUBLE, Assignment({1: False, 2: True, 3: False}), family
        )
        base = conc.base
        for w, r in conc.rf.pairs:
            assert base.by_id[w].value == base.by_id[r].value


@pytest.mark.parametrize(
    "formula,expect", [(SINGLE, True), (DOUBLE, True), (UNSAT4, False)]
)
def test_round_trip_small(formula, expect):
    budget = 10**7
    sat = brute_force_1in3(formula) is not None
    assert sat is expect
    rlx = generate(formula, GadgetFamily.RELAXED_ACYCLIC)
    v = decide_ra_family(rlx, MemoryModel.RELAXED_ACYCLIC, budget)
    assert v.consistent is expect
    ra = generate(formula, GadgetFamily.RA_FAMILY)
    for model in (MemoryModel.WRA, MemoryModel.RA, MemoryModel.SRA):
        v = decide_ra_family(ra, model, budget)
        assert v.consistent is expect, f"{model} on {formula}"
    assert decide_cm(ra, budget).consistent is expect


@pytest.mark.parametrize("family", list(GadgetFamily))
def test_transform_value_domain_constant(family):
    core = 2 if family is GadgetFamily.RA_FAMILY else 4
    writers = 22 if family is GadgetFamily.RA_FAMILY else 23
    seen = []
    for f in (SINGLE, DOUBLE, Formula(4, ((1, 2, 3), (2, 3, 4)))):
        tx = bounded_value_transform(generate(f, family), gadget_plan(f, family))
        vals = {e.value for e in tx.events}
        assert len(vals) == core + 2 * writers
        seen.append(vals)
    assert seen[0] == seen[1] == seen[2]


def test_transform_rejects_foreign_pairs():
    x = generate(SINGLE, GadgetFamily.RA_FAMILY)
    with pytest.raises(PlanMismatch):
        bounded_value_transform(x, gadget_plan(SINGLE, GadgetFamily.RELAXED_ACYCLIC))
    with pytest.raises(PlanMismatch):
        bounded_value_transform(x, gadget_plan(DOUBLE, GadgetFamily.RA_FAMILY))


def test_transform_preserves_verdict_small():
    budget = 10**7
    tx = bounded_value_transform(
        generate(SINGLE, GadgetFamily.RELAXED_ACYCLIC),
        gadget_plan(SINGLE, GadgetFamily.RELAXED_ACYCLIC),
    )
    v = decide_ra_family(tx, MemoryModel.RELAXED_ACYCLIC, budget)
    assert v.consistent is True
    tx = bounded_value_transform(
        generate(SINGLE, GadgetFamily.RA_FAMILY),
        gadget_plan(SINGLE, GadgetFamily.RA_FAMILY),
    )
    v = decide_ra_family(tx, MemoryModel.WRA, budget)
    assert v.consistent is True
