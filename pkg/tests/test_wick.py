import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fieldport.wick import (
    INTRA_PAIR_DOUBLING,
    OperatorWord,
    PairingTerm,
    PointLabel,
    annihilate,
    brute_force_vev,
    classify_terms,
    collapse_repeated_labels,
    create,
    evaluate_expansion,
    ideal_teleportation_expansion,
    mode_contraction,
    tagged_weights,
    teleportation_word,
    vacuum_expectation_symbolic,
)
from helpers import random_word_case

A, B, C, D = (PointLabel(s) for s in "abcd")


def test_two_point():
    exp = vacuum_expectation_symbolic(OperatorWord((annihilate(A), create(B))))
    assert len(exp.terms) == 1 and exp.terms[0].pairs == ((B, A),)


def test_unbalanced_word_vanishes():
    assert vacuum_expectation_symbolic(OperatorWord((annihilate(A), create(B), create(C)))).terms == ()


def test_rejects_non_normal_order():
    with pytest.raises(ValueError, match="normal form"):
        vacuum_expectation_symbolic(OperatorWord((create(A), annihilate(B))))


def test_number_of_matchings_is_factorial():
    word = OperatorWord(tuple(annihilate(PointLabel(f"a{i}")) for i in range(4)) + tuple(create(PointLabel(f"c{i}")) for i in range(4)))
    assert vacuum_expectation_symbolic(word).total_multiplicity == 24


def test_collapse_merges_multiplicities():
    word = OperatorWord((annihilate(A), annihilate(B), create(C), create(D)))
    exp = collapse_repeated_labels(vacuum_expectation_symbolic(word), {D: C})
    assert len(exp.terms) == 1 and exp.terms[0].multiplicity == 2


@pytest.mark.parametrize("seed", range(12))
def test_symbolic_equals_brute_force(seed):
    rng = np.random.default_rng(seed)
    word, modes, assignment = random_word_case(rng)
    exp = vacuum_expectation_symbolic(word)
    sym = evaluate_expansion(exp, mode_contraction(assignment))
    bf = brute_force_vev(word, modes, 3, assignment)
    assert bf.reliable
    assert abs(sym - bf.value) <= 1e-10 * max(1.0, abs(bf.value))


def test_brute_force_flags_truncation():
    u = {A: np.array([1.0])}
    word = OperatorWord((annihilate(A), annihilate(A), create(A), create(A)))
    assert brute_force_vev(word, 1, 2, u).value == pytest.approx(2.0)
    assert brute_force_vev(word, 1, 1, u).truncated


def test_brute_force_limits():
    with pytest.raises(ValueError):
        brute_force_vev(OperatorWord(()), 7, 2, {})


def test_teleportation_word_roles():
    word, roles = teleportation_word()
    assert word.is_normal_form()
    assert len(word.annihilators) == len(word.creators) == 3
    assert roles["packet_label"] in word.creators


def test_teleportation_six_pairings_and_tags():
    word, roles = teleportation_word()
    full = vacuum_expectation_symbolic(word)
    assert len(full.terms) == 6
    ideal, _ = ideal_teleportation_expansion()
    assert ideal.weights_by_tag() == {"parasitic": 2, "teleport_direct": 2, "teleport_exchange": 2}
    w = tagged_weights(ideal)
    assert (w["teleport_direct"], w["teleport_exchange"], w["parasitic"]) == (2, 2, 4)
    assert Fraction(w["parasitic"], sum(w.values())) == Fraction(1, 2)
    assert INTRA_PAIR_DOUBLING == {"parasitic": 2}


def test_parasitic_pairs_pair_with_itself():
    ideal, roles = ideal_teleportation_expansion()
    x1 = roles["epr_labels"][0]
    for t in ideal.terms:
        if t.tag == "parasitic":
            assert t.partner(x1) in roles["measurement_labels"]
            assert t.partner(roles["packet_label"]) == roles["output_label"]


def test_classify_rejects_unknown_label():
    word, roles = teleportation_word()
    exp = vacuum_expectation_symbolic(word)
    bad = dict(roles, output_label=PointLabel("nowhere"))
    with pytest.raises(ValueError):
        classify_terms(exp, **bad)


def test_json_is_deterministic():
    a, _ = ideal_teleportation_expansion()
    b, _ = ideal_teleportation_expansion()
    assert a.to_json() == b.to_json()
    assert json.loads(a.to_json())[0]["multiplicity"] >= 1


def test_pairing_term_validation():
    with pytest.raises(ValueError):
        PairingTerm(((A, B),), multiplicity=0)
    with pytest.raises(ValueError):
        PairingTerm(((A, B),), tag="other")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_expansion_linear_in_scaling(seed):
    # scaling one mode vector by s scales the VEV by s^(occurrences)
    rng = np.random.default_rng(seed)
    word, modes, assignment = random_word_case(rng, max_n=2)
    lab = word.creators[0]
    k = sum(1 for f in word.factors if f.label == lab)
    scaled = dict(assignment)
    scaled[lab] = 2.0 * assignment[lab]
    f = mode_contraction(assignment)
    g = mode_contraction(scaled)
    exp = vacuum_expectation_symbolic(word)
    assert evaluate_expansion(exp, g) == pytest.approx(2.0**k * evaluate_expansion(exp, f), rel=1e-10, abs=1e-12)
