"""Tests for automaton representation, generation, interchange and connectivity"""

import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from automaton import (
    Dfa,
    Rng,
    apply_word,
    cerny_dfa,
    derive_seed,
    disconnected_singleton_count,
    disconnected_singleton_probability,
    forward_closure,
    image,
    image_of_word,
    is_weakly_connected,
    minimal_closed_components,
    mix64,
    parse_dfa,
    random_dfa,
    serialize_dfa,
    single_disconnected_state,
)
from exceptions import InvalidArgumentError, ParseError
from strategies import dfas
from sync_oracle import decide_exact

C4_TEXT = '{"n":4,"k":2,"delta":[[1,2,3,0],[0,1,2,0]]}'


###################################################################################################
# Construction and generation
###################################################################################################

def test_dfa_rejects_bad_tables():
    with pytest.raises(InvalidArgumentError):
        Dfa(n=0, k=1, delta=((),))
    with pytest.raises(InvalidArgumentError):
        Dfa(n=2, k=2, delta=((0, 1),))
    with pytest.raises(InvalidArgumentError):
        Dfa(n=2, k=1, delta=((0, 2),))
    with pytest.raises(InvalidArgumentError):
        Dfa(n=2, k=1, delta=((0,),))


def test_cerny_matches_interchange_document(c4):
    assert c4 == parse_dfa(C4_TEXT)


def test_random_dfa_single_state():
    d = random_dfa(1, 2, Rng(123))
    assert d.delta == ((0,), (0,))


def test_random_dfa_is_deterministic():
    assert random_dfa(4, 2, Rng(42)) == random_dfa(4, 2, Rng(42))
    assert random_dfa(50, 3, Rng.derive(7, 50, 3)) == random_dfa(50, 3, Rng.derive(7, 50, 3))


def test_random_dfa_rejects_empty_sizes():
    with pytest.raises(InvalidArgumentError):
        random_dfa(0, 2, Rng(1))
    with pytest.raises(InvalidArgumentError):
        random_dfa(3, 0, Rng(1))


def test_rng_bounded_draws_are_uniform():
    """Each of the 27 maps of a 3-state letter appears with frequency 1/27"""
    draws = Rng(2024).below(3, size=(10 ** 6, 3))
    codes = draws[:, 0] * 9 + draws[:, 1] * 3 + draws[:, 2]
    freq = np.bincount(codes, minlength=27) / len(codes)
    assert np.all(np.abs(freq - 1 / 27) < 0.002)


def test_random_dfa_entry_frequency():
    rng = Rng(99)
    hits = sum(random_dfa(5, 2, rng).delta[0][0] == 0 for _ in range(100000))
    assert abs(hits / 100000 - 0.2) < 0.006


def test_random_dfa_map_frequencies():
    rng = Rng(5)
    counts = Counter(random_dfa(3, 1, rng).delta[0] for _ in range(100000))
    assert len(counts) == 27
    for c in counts.values():
        assert abs(c / 100000 - 1 / 27) < 0.004


@pytest.mark.slow
def test_random_dfa_map_frequencies_full_scale():
    rng = Rng(6)
    counts = Counter(random_dfa(3, 1, rng).delta[0] for _ in range(10 ** 6))
    for c in counts.values():
        assert abs(c / 10 ** 6 - 1 / 27) < 0.002


def test_derived_seeds_depend_on_every_key():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert derive_seed(1, 2, 3) != derive_seed(2, 2, 3)
    assert 0 <= mix64(12345) < 2 ** 64


def test_rng_rejects_empty_range():
    with pytest.raises(InvalidArgumentError):
        Rng(0).below(0)


###################################################################################################
# JSON interchange
###################################################################################################

def test_parse_cerny_document():
    d = parse_dfa(C4_TEXT)
    assert (d.n, d.k) == (4, 2)
    assert d.delta == ((1, 2, 3, 0), (0, 1, 2, 0))


def test_serialize_round_trip(c4):
    text = serialize_dfa(c4)
    assert parse_dfa(text) == c4
    assert json.loads(text) == json.loads(C4_TEXT)


@given(dfas())
def test_parse_inverts_serialize(d):
    assert parse_dfa(serialize_dfa(d)) == d


def test_parse_out_of_range_entry():
    with pytest.raises(ParseError) as excinfo:
        parse_dfa('{"n":2,"k":1,"delta":[[0,2]]}')
    assert "entry 2 out of range" in str(excinfo.value)


def test_parse_dimension_mismatch():
    with pytest.raises(ParseError) as excinfo:
        parse_dfa('{"n":3,"k":1,"delta":[[0,1]]}')
    assert "expected n=3" in str(excinfo.value)
    with pytest.raises(ParseError) as excinfo:
        parse_dfa('{"n":2,"k":2,"delta":[[0,1]]}')
    assert "expected k=2" in str(excinfo.value)


@pytest.mark.parametrize("text,field", [
    ('{"n":"2","k":1,"delta":[[0,1]]}', "n"),
    ('{"n":2,"k":1.0,"delta":[[0,1]]}', "k"),
    ('{"n":2,"k":1,"delta":[["0",1]]}', "delta.0.0"),
    ('{"n":2,"k":1,"delta":[[0,true]]}', "delta.0.1"),
])
def test_parse_rejects_non_integer_entries(text, field):
    with pytest.raises(ParseError) as excinfo:
        parse_dfa(text)
    assert excinfo.value.field == field


def test_parse_missing_field_names_it():
    with pytest.raises(ParseError) as excinfo:
        parse_dfa('{"n":2,"k":1}')
    assert excinfo.value.field == "delta"


def test_parse_malformed_json_names_line():
    with pytest.raises(ParseError) as excinfo:
        parse_dfa('{"n": 2,\n "k": 1,\n "delta": [[0, 1]')
    assert excinfo.value.line == 3


###################################################################################################
# Word action
###################################################################################################

def test_apply_word(c4):
    assert apply_word(c4, 0, [0, 0, 0, 0]) == 0
    assert apply_word(c4, 3, [1]) == 0
    assert apply_word(c4, 2, []) == 2


def test_apply_word_range_checks(c4):
    with pytest.raises(InvalidArgumentError):
        apply_word(c4, 4, [])
    with pytest.raises(InvalidArgumentError):
        apply_word(c4, 0, [2])


@given(dfas(), st.data())
def test_apply_word_composes(d, data):
    letters = st.lists(st.integers(0, d.k - 1), max_size=6)
    u, v = data.draw(letters), data.draw(letters)
    q = data.draw(st.integers(0, d.n - 1))
    assert apply_word(d, q, u + v) == apply_word(d, apply_word(d, q, u), v)


def test_image(c4):
    assert image(c4, {0, 1, 2, 3}, 1) == {0, 1, 2}
    assert image(c4, set(), 0) == frozenset()
    assert image(c4, {3}, 1) == {0}


@given(dfas(), st.data())
def test_image_never_expands(d, data):
    s = data.draw(st.sets(st.integers(0, d.n - 1)))
    x = data.draw(st.integers(0, d.k - 1))
    assert len(image(d, s, x)) <= len(s)


def test_image_of_word(c4):
    assert image_of_word(c4, range(4), [1, 0, 0, 0, 1]) == {0, 1}


###################################################################################################
# Connectivity and closed components
###################################################################################################

def test_weak_connectivity_examples(c4, identity2):
    assert is_weakly_connected(c4)[0]
    connected, labels = is_weakly_connected(identity2)
    assert not connected
    assert labels == (0, 1)
    connected, labels = is_weakly_connected(Dfa.from_rows([[0, 1, 2], [0, 1, 2]]))
    assert not connected
    assert len(set(labels)) == 3


@given(dfas(min_n=2))
def test_weak_disconnection_rules_out_synchronization(d):
    if not is_weakly_connected(d)[0]:
        assert not decide_exact(d).synchronizing


def test_minimal_closed_components_examples(c4, identity2):
    assert minimal_closed_components(c4).components == (frozenset({0, 1, 2, 3}),)
    sink = minimal_closed_components(Dfa.from_rows([[0, 0], [0, 0]]))
    assert sink.components == (frozenset({0}),)
    assert sink.sizes == (1,)
    assert minimal_closed_components(identity2).components == (frozenset({0}), frozenset({1}))


@given(dfas())
@settings(max_examples=200)
def test_closed_components_are_closed_and_reachable(d):
    mcc = minimal_closed_components(d)
    seen = set()
    for component in mcc.components:
        assert not (component & seen)
        seen |= component
        for row in d.delta:
            assert all(row[q] in component for q in component)
        # strongly connected: every member reaches the whole component
        for q in component:
            assert forward_closure(d, [q]) == component
    for q in d.states:
        closure = forward_closure(d, [q])
        assert any(component <= closure for component in mcc.components)


def test_forward_closure(c4):
    assert forward_closure(c4, [2]) == {0, 1, 2, 3}
    assert forward_closure(Dfa.from_rows([[1, 1, 2], [1, 1, 1]]), [0]) == {0, 1}


###################################################################################################
# Single disconnected state
###################################################################################################

def test_disconnected_singleton_probability():
    assert disconnected_singleton_probability(3) == pytest.approx(1 / 27)
    assert disconnected_singleton_probability(4) == pytest.approx(1 / 32)
    n = 10 ** 6
    assert abs(n * disconnected_singleton_probability(n) - math.exp(-2)) < 1e-5


def test_disconnected_singleton_probability_needs_three_states():
    with pytest.raises(InvalidArgumentError):
        disconnected_singleton_probability(2)
    with pytest.raises(InvalidArgumentError):
        disconnected_singleton_count(2)


def test_disconnected_singleton_count_matches_probability():
    for n in range(3, 8):
        assert disconnected_singleton_count(n) / n ** (2 * n) == pytest.approx(disconnected_singleton_probability(n))
    assert disconnected_singleton_count(3) == 27


def test_single_disconnected_state():
    assert single_disconnected_state(Dfa.from_rows([[1, 0, 2], [0, 0, 2]])) == 2
    # 2 is fixed but state 1 enters it
    assert single_disconnected_state(Dfa.from_rows([[1, 2, 2], [0, 2, 2]])) is None
    # two states fixed by every letter
    assert single_disconnected_state(Dfa.from_rows([[0, 1, 2], [0, 1, 2]])) is None
