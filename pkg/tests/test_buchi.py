"""Automaton construction: language correctness, witnesses, determinism."""

import numpy as np
import pytest

from surplan.buchi import (
    BuchiAutomaton,
    find_accepting_lasso_run,
    lasso_acceptance_table,
    lasso_accepts,
    to_buchi,
)
from surplan.errors import ContractError
from surplan.ltl import (
    enumerate_lassos,
    formula_satisfied_on_lasso,
    parse,
    semantic_lasso_table,
)

from conftest import random_formula


def all_lassos(props, max_stem=2, max_loop=2):
    return list(enumerate_lassos(props, max_stem, max_loop))


def assert_language_matches(formula, props, max_stem=2, max_loop=2):
    ba = to_buchi(formula, props)
    for stem, loop in all_lassos(props, max_stem, max_loop):
        expect = formula_satisfied_on_lasso(formula, stem, loop)
        got = lasso_accepts(ba, stem, loop)
        assert got == expect, f"{formula} on stem={stem} loop={loop}: {got} != {expect}"


def test_languages_of_basic_formulas():
    for text in ("a", "!a", "X a", "F a", "G a", "a U b", "G F a", "F G a", "true"):
        assert_language_matches(parse(text), ["a", "b"])


def test_languages_of_compound_formulas():
    for text in (
        "G F a & G F b",
        "G (a -> X b)",
        "a U (b U a)",
        "G (a -> X (!a U b))",
        "F (a & X a)",
        "X X a",
        "G !a | F b",
    ):
        assert_language_matches(parse(text), ["a", "b"])


def test_next_of_until_language():
    # nested strength test: the until must start holding one step in
    assert_language_matches(parse("G X (a U b)"), ["a", "b"], max_stem=2, max_loop=3)


def test_unsatisfiable_and_trivial_formulas():
    empty = to_buchi(parse("a & !a"), ["a"])
    for stem, loop in all_lassos(["a"]):
        assert not lasso_accepts(empty, stem, loop)
    trivial = to_buchi(parse("true"), ["a"])
    for stem, loop in all_lassos(["a"]):
        assert lasso_accepts(trivial, stem, loop)


def test_witness_replay_is_a_valid_run():
    rng = np.random.default_rng(12)
    checked = 0
    for _ in range(20):
        f = random_formula(rng, ["a", "b"], int(rng.integers(0, 4)))
        ba = to_buchi(f, ["a", "b"])
        for stem, loop in all_lassos(["a", "b"]):
            witness = find_accepting_lasso_run(ba, stem, loop)
            if witness is None:
                continue
            path, cycle = witness
            word = list(stem) + list(loop)
            n = len(word)
            wrap = len(stem)

            def letter_at(pos):
                return word[pos] if pos < n else word[wrap + (pos - wrap) % len(loop)]

            assert path[0][0] == ba.initial and path[0][1] == 0
            trail = path + cycle[1:]
            for (s, pos), (s2, pos2) in zip(trail, trail[1:]):
                assert s2 in ba.successors(s, letter_at(pos))
                assert pos2 == (pos + 1 if pos + 1 < n else wrap)
            assert cycle[0] == path[-1] == cycle[-1]
            assert any(s in ba.accepting for s, _ in cycle[:-1])
            checked += 1
    assert checked > 30


def test_empty_loop_rejected():
    ba = to_buchi(parse("F a"), ["a"])
    with pytest.raises(ContractError):
        lasso_accepts(ba, [frozenset()], [])


def test_bulk_table_matches_per_lasso_runs():
    rng = np.random.default_rng(21)
    for _ in range(12):
        f = random_formula(rng, ["a", "b"], int(rng.integers(0, 4)))
        ba = to_buchi(f, ["a", "b"])
        lassos = all_lassos(["a", "b"])
        table = lasso_acceptance_table(ba, 2, 2)
        assert table.shape == (len(lassos),)
        for idx, (stem, loop) in enumerate(lassos):
            assert bool(table[idx]) == lasso_accepts(ba, stem, loop)


def test_bulk_table_matches_semantics():
    rng = np.random.default_rng(31)
    for _ in range(25):
        f = random_formula(rng, ["a", "b"], int(rng.integers(0, 5)))
        ba = to_buchi(f, ["a", "b"])
        got = lasso_acceptance_table(ba, 2, 2)
        expect = semantic_lasso_table(f, ["a", "b"], 2, 2)
        assert np.array_equal(got, expect), str(f)


def test_construction_is_deterministic():
    f = parse("G (a -> X (!a U b)) & G F b")
    first = to_buchi(f, ["a", "b"])
    second = to_buchi(f, ["a", "b"])
    assert first.n_states == second.n_states
    assert first.initial == second.initial
    assert first.transitions == second.transitions
    assert first.accepting == second.accepting
    assert first.to_text() == second.to_text()


def test_propositions_beyond_atoms_widen_alphabet():
    ba = to_buchi(parse("F a"), ["a", "b"])
    assert ba.propositions == {"a", "b"}
    # a letter containing only b must behave like the empty letter for F a
    assert lasso_accepts(ba, [frozenset("b")], [frozenset("a")])
    assert not lasso_accepts(ba, [], [frozenset("b")])


def test_automaton_validation():
    with pytest.raises(Exception):
        BuchiAutomaton(
            n_states=1,
            initial=0,
            propositions=["a"],
            transitions=[(0, frozenset("a"), 3)],
            accepting=[0],
        )
    with pytest.raises(Exception):
        BuchiAutomaton(
            n_states=1,
            initial=0,
            propositions=[],
            transitions=[(0, frozenset("z"), 0)],
            accepting=[0],
        )


def test_mission_shape_has_surveillance_guarded_acceptance():
    from surplan.product import check_accepting_label_condition

    f = parse("G (a -> X (!a U b)) & G (b -> X (!b U a)) & G !u & G F sur")
    ba = to_buchi(f, ["a", "b", "u", "sur"])
    assert check_accepting_label_condition(ba, "sur")
    # every transition into an accepting state reads a surveillance letter
    for _, letter, t in ba.transitions:
        if t in ba.accepting:
            assert "sur" in letter
