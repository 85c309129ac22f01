#!/usr/bin/env python3
"""
Automaton core: representation, uniform random generation, JSON interchange,
word action, weak connectivity and minimal closed components.

States and letters are 0-based. The transition table is stored letter-major,
delta[letter][state], so that each letter's map is one contiguous row.
"""

import json
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from exceptions import InvalidArgumentError, ParseError

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

Word = Tuple[int, ...]


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mixing function"""
    z = (z + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Fold keys into a seed with mix64; the same inputs always give the same 64-bit seed"""
    z = mix64(seed & MASK64)
    for key in keys:
        z = mix64(z ^ (key & MASK64))
    return z


class Rng:
    """
    Seedable 64-bit generator.

    Wraps numpy's PCG64 bit generator. Bounded draws go through
    Generator.integers, which uses rejection sampling, so draws in [0, n)
    are exactly uniform. A generator has a single owner; parallel code
    derives one per task with Rng.derive instead of sharing.
    """

    algorithm = "PCG64"

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @classmethod
    def derive(cls, seed: int, *keys: int) -> "Rng":
        """Independent generator for (seed, keys...), e.g. (seed, n, trial index)"""
        return cls(derive_seed(seed, *keys))

    def below(self, n: int, size: Optional[int] = None):
        """Uniform draw(s) from [0, n)"""
        if n < 1:
            raise InvalidArgumentError(f"bound must be >= 1, got {n}")
        if size is None:
            return int(self._gen.integers(0, n))
        return self._gen.integers(0, n, size=size)


@dataclass(frozen=True)
class Dfa:
    """Complete deterministic automaton with n states over k letters"""
    n: int
    k: int
    delta: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgumentError(f"state count must be >= 1, got {self.n}")
        if self.k < 1:
            raise InvalidArgumentError(f"alphabet size must be >= 1, got {self.k}")
        if len(self.delta) != self.k:
            raise InvalidArgumentError(f"delta has {len(self.delta)} rows, expected k={self.k}")
        for x, row in enumerate(self.delta):
            if len(row) != self.n:
                raise InvalidArgumentError(f"delta[{x}] has {len(row)} entries, expected n={self.n}")
            if min(row) < 0 or max(row) >= self.n:
                bad = next(v for v in row if v < 0 or v >= self.n)
                raise InvalidArgumentError(f"entry {bad} out of range in delta[{x}]")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "Dfa":
        rows = tuple(tuple(int(v) for v in row) for row in rows)
        if not rows:
            raise InvalidArgumentError("delta must have at least one row")
        return cls(n=len(rows[0]), k=len(rows), delta=rows)

    @property
    def states(self) -> range:
        return range(self.n)

    def check_state(self, q: int) -> None:
        if not 0 <= q < self.n:
            raise InvalidArgumentError(f"state {q} out of range [0, {self.n})")

    def check_letter(self, x: int) -> None:
        if not 0 <= x < self.k:
            raise InvalidArgumentError(f"letter {x} out of range [0, {self.k})")


def cerny_dfa(n: int) -> Dfa:
    """
    The Cerny automaton C_n: letter 0 is the cycle q -> q+1 mod n,
    letter 1 sends n-1 to 0 and fixes every other state.
    """
    if n < 1:
        raise InvalidArgumentError(f"state count must be >= 1, got {n}")
    a = tuple((q + 1) % n for q in range(n))
    b = tuple(0 if q == n - 1 else q for q in range(n))
    return Dfa(n=n, k=2, delta=(a, b))


def random_dfa(n: int, k: int, rng: Rng) -> Dfa:
    """
    Draw a uniformly random complete automaton.

    Args:
        n: State count (>= 1)
        k: Alphabet size (>= 1)
        rng: Generator, advanced by exactly k*n bounded draws

    Returns:
        Dfa whose every entry is an independent uniform draw from [0, n)
    """
    if n < 1 or k < 1:
        raise InvalidArgumentError(f"random_dfa needs n >= 1 and k >= 1, got n={n}, k={k}")
    table = rng.below(n, size=(k, n))
    return Dfa(n=n, k=k, delta=tuple(tuple(row) for row in table.tolist()))


class DfaDocument(BaseModel):
    """Automaton JSON interchange document"""
    # no coercion: "2" and true are not states
    model_config = ConfigDict(strict=True)

    n: int = Field(..., ge=1, description="State count")
    k: int = Field(..., ge=1, description="Alphabet size")
    delta: List[List[int]] = Field(..., description="delta[letter][state] = successor state, 0-based")

    @model_validator(mode="after")
    def check_table(self) -> "DfaDocument":
        if len(self.delta) != self.k:
            raise ValueError(f"delta has {len(self.delta)} rows, expected k={self.k}")
        for x, row in enumerate(self.delta):
            if len(row) != self.n:
                raise ValueError(f"delta[{x}] has {len(row)} entries, expected n={self.n}")
            for q, v in enumerate(row):
                if not 0 <= v < self.n:
                    raise ValueError(f"entry {v} out of range at delta[{x}][{q}]")
        return self


def parse_dfa(text: str) -> Dfa:
    """
    Parse an automaton JSON document.

    Raises:
        ParseError naming the offending field (or line for malformed JSON)
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"Malformed automaton JSON: {e.msg} at line {e.lineno}")
        raise ParseError(f"malformed JSON: {e.msg}", line=e.lineno)
    try:
        doc = DfaDocument.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first.get("loc", ())) or None
        message = first["msg"].removeprefix("Value error, ")
        logger.error(f"Invalid automaton document: {message}")
        raise ParseError(message, field=field)
    return Dfa(n=doc.n, k=doc.k, delta=tuple(tuple(row) for row in doc.delta))


def serialize_dfa(d: Dfa) -> str:
    """Compact JSON text for d; parse_dfa(serialize_dfa(d)) == d"""
    return DfaDocument(n=d.n, k=d.k, delta=[list(row) for row in d.delta]).model_dump_json()


def apply_word(d: Dfa, q: int, w: Iterable[int]) -> int:
    """q.w, letters applied left to right"""
    d.check_state(q)
    for x in w:
        d.check_letter(x)
        q = d.delta[x][q]
    return q


def image(d: Dfa, s: Iterable[int], x: int) -> FrozenSet[int]:
    """{q.x : q in s}"""
    d.check_letter(x)
    row = d.delta[x]
    out = set()
    for q in s:
        d.check_state(q)
        out.add(row[q])
    return frozenset(out)


def image_of_word(d: Dfa, s: Iterable[int], w: Iterable[int]) -> FrozenSet[int]:
    """S.w computed by iterating images"""
    current = frozenset(s)
    for x in w:
        current = image(d, current, x)
    return current


class UnionFind:
    """Disjoint sets with union by size and path compression; counts find/union calls"""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.weight = [1] * size
        self.operations = 0

    def find(self, i: int) -> int:
        self.operations += 1
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> bool:
        i = self.find(i)
        j = self.find(j)
        if i == j:
            return False
        if self.weight[i] < self.weight[j]:
            i, j = j, i
        self.parent[j] = i
        self.weight[i] += self.weight[j]
        return True

    def labels(self) -> Tuple[int, ...]:
        """Component index per element, numbered by first appearance"""
        index: Dict[int, int] = {}
        out = []
        for q in range(len(self.parent)):
            root = self.find(q)
            if root not in index:
                index[root] = len(index)
            out.append(index[root])
        return tuple(out)


def is_weakly_connected(d: Dfa, uf: Optional[UnionFind] = None) -> Tuple[bool, Tuple[int, ...]]:
    """
    Weak connectivity of the underlying digraph.

    Args:
        d: Automaton
        uf: Optional union-find to use, so callers can read its operation counter

    Returns:
        (connected, labels) where labels[q] is the weak component index of q
    """
    if uf is None:
        uf = UnionFind(d.n)
    components = d.n
    for row in d.delta:
        for q in range(d.n):
            if uf.union(q, row[q]):
                components -= 1
    labels = uf.labels()
    return components == 1, labels


@dataclass(frozen=True)
class ClosedComponents:
    """Minimal subautomata: terminal strongly connected components"""
    components: Tuple[FrozenSet[int], ...]
    sizes: Tuple[int, ...]


def transition_digraph(d: Dfa) -> nx.DiGraph:
    """Underlying digraph with arcs q -> delta[x][q] (parallel arcs collapsed)"""
    g = nx.DiGraph()
    g.add_nodes_from(range(d.n))
    for row in d.delta:
        g.add_edges_from(zip(range(d.n), row))
    return g


def minimal_closed_components(d: Dfa) -> ClosedComponents:
    """Terminal SCCs of the transition digraph, ordered by smallest member"""
    condensed = nx.condensation(transition_digraph(d))
    terminal = [
        frozenset(condensed.nodes[c]["members"])
        for c in condensed.nodes
        if condensed.out_degree(c) == 0
    ]
    terminal.sort(key=min)
    return ClosedComponents(components=tuple(terminal), sizes=tuple(len(c) for c in terminal))


def forward_closure(d: Dfa, states: Iterable[int]) -> FrozenSet[int]:
    """All states reachable from the given states by some word (including the empty word)"""
    seen = set()
    stack = []
    for q in states:
        d.check_state(q)
        if q not in seen:
            seen.add(q)
            stack.append(q)
    while stack:
        q = stack.pop()
        for row in d.delta:
            r = row[q]
            if r not in seen:
                seen.add(r)
                stack.append(r)
    return frozenset(seen)


def disconnected_singleton_count(n: int) -> int:
    """n * (n(n-2))^(n-1) two-letter automata with a single disconnected state"""
    if n < 3:
        raise InvalidArgumentError(f"the disconnected-state count needs n >= 3, got {n}")
    return n * (n * (n - 2)) ** (n - 1)


def disconnected_singleton_probability(n: int) -> float:
    """(1/n) * (1 - 2/n)^(n-1), the probability of the counted family for a uniform 2-letter automaton"""
    if n < 3:
        raise InvalidArgumentError(f"the disconnected-state probability needs n >= 3, got {n}")
    return (1.0 / n) * (1.0 - 2.0 / n) ** (n - 1)


def single_disconnected_state(d: Dfa) -> Optional[int]:
    """
    The disconnected state of d, if d belongs to the counted family.

    A state s qualifies when it is the only state fixed by every letter and
    no other state has a transition into s.

    Returns:
        s, or None when d is outside the family
    """
    fixed = [q for q in range(d.n) if all(row[q] == q for row in d.delta)]
    if len(fixed) != 1:
        return None
    s = fixed[0]
    for row in d.delta:
        for q in range(d.n):
            if q != s and row[q] == s:
                return None
    return s
