import os

import pytest

from automaton import Dfa, cerny_dfa
from config import reset_settings


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Every test starts from default settings"""
    for name in list(os.environ):
        if name.startswith("SYNCLAB_"):
            monkeypatch.delenv(name)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def c4() -> Dfa:
    return cerny_dfa(4)


@pytest.fixture
def identity2() -> Dfa:
    return Dfa.from_rows([[0, 1], [0, 1]])


@pytest.fixture
def swap2() -> Dfa:
    """Both letters permute the two states"""
    return Dfa.from_rows([[0, 1], [1, 0]])


@pytest.fixture
def const_b2() -> Dfa:
    """Letter 0 is the identity, letter 1 sends both states to 0"""
    return Dfa.from_rows([[0, 1], [0, 0]])
