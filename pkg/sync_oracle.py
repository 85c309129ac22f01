#!/usr/bin/env python3
"""
Exact synchronizability oracle.

Works on the pair automaton: unordered pairs {p, q} of distinct states with
{p, q}.x = {p.x, q.x}. A pair is mergeable when some word sends it to the
diagonal, deadlock otherwise, and stable when no word leads it to a deadlock
pair. An automaton is synchronizing iff it has no deadlock pair.

Pairs p < q are stored in a triangular array at index q*(q-1)/2 + p.
"""

import itertools
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from automaton import Dfa, UnionFind, Word, image_of_word, is_weakly_connected
from config import get_settings
from exceptions import CapacityError, InvalidArgumentError

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]

DEADLOCK = -1


def pair_index(p: int, q: int) -> int:
    if p > q:
        p, q = q, p
    return q * (q - 1) // 2 + p


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def preimages(d: Dfa) -> List[List[List[int]]]:
    """pre[x][r] = states q with q.x = r, bucketed in one pass per letter"""
    pre = []
    for row in d.delta:
        buckets: List[List[int]] = [[] for _ in range(d.n)]
        for q, r in enumerate(row):
            buckets[r].append(q)
        pre.append(buckets)
    return pre


def _check_pair_capacity(d: Dfa) -> None:
    limit = get_settings().pair_table_limit
    if d.n > limit:
        logger.error(f"Refusing quadratic pair table for n={d.n} (limit {limit})")
        raise CapacityError("pair table", d.n, limit)


@dataclass(frozen=True)
class MergeTable:
    """
    Shortest merge lengths of all pairs.

    dist[i] is the length of a shortest merging word for pair i, or DEADLOCK;
    first_letter[i] is the first letter of one such word.
    """
    n: int
    dist: List[int] = field(repr=False)
    first_letter: List[int] = field(repr=False)
    steps: int

    def distance(self, p: int, q: int) -> int:
        return self.dist[pair_index(p, q)]

    def is_mergeable(self, p: int, q: int) -> bool:
        return p == q or self.dist[pair_index(p, q)] != DEADLOCK

    def word_for(self, d: Dfa, p: int, q: int) -> Optional[Word]:
        """A shortest word merging p and q, read off the table"""
        w = []
        while p != q:
            i = pair_index(p, q)
            if self.dist[i] == DEADLOCK:
                return None
            x = self.first_letter[i]
            w.append(x)
            p, q = d.delta[x][p], d.delta[x][q]
        return tuple(w)

    def first_deadlock(self) -> Optional[Pair]:
        for q in range(1, self.n):
            base = q * (q - 1) // 2
            for p in range(q):
                if self.dist[base + p] == DEADLOCK:
                    return (p, q)
        return None


def mergeable_table(d: Dfa, pre: Optional[List[List[List[int]]]] = None) -> MergeTable:
    """
    Backward breadth-first search from the diagonal over reversed pair edges.

    The queue starts with every pair merged by a single letter; then each
    popped pair {p, q} reaches the pairs {p', q'} with p'.x = p, q'.x = q.
    Every generated pair edge is charged one step.
    """
    _check_pair_capacity(d)
    n = d.n
    pre = preimages(d) if pre is None else pre
    dist = [DEADLOCK] * pair_count(n)
    first_letter = [-1] * pair_count(n)
    queue = deque()
    steps = 0

    for x in range(d.k):
        for bucket in pre[x]:
            if len(bucket) < 2:
                continue
            for i in range(len(bucket)):
                for j in range(i + 1, len(bucket)):
                    steps += 1
                    idx = pair_index(bucket[i], bucket[j])
                    if dist[idx] == DEADLOCK:
                        dist[idx] = 1
                        first_letter[idx] = x
                        queue.append((bucket[i], bucket[j]))

    while queue:
        p, q = queue.popleft()
        nd = dist[pair_index(p, q)] + 1
        for x in range(d.k):
            pre_x = pre[x]
            for a in pre_x[p]:
                for b in pre_x[q]:
                    steps += 1
                    idx = pair_index(a, b)
                    if dist[idx] == DEADLOCK:
                        dist[idx] = nd
                        first_letter[idx] = x
                        queue.append((a, b))

    return MergeTable(n=n, dist=dist, first_letter=first_letter, steps=steps)


@dataclass(frozen=True)
class PairGraphResult:
    """Mergeable, deadlock and stable classification of all state pairs"""
    n: int
    table: MergeTable = field(repr=False)
    stable: bytearray = field(repr=False)
    steps: int

    def is_mergeable(self, p: int, q: int) -> bool:
        return self.table.is_mergeable(p, q)

    def is_deadlock(self, p: int, q: int) -> bool:
        return not self.table.is_mergeable(p, q)

    def is_stable(self, p: int, q: int) -> bool:
        return p == q or bool(self.stable[pair_index(p, q)])

    @property
    def mergeable(self) -> List[bool]:
        return [v != DEADLOCK for v in self.table.dist]

    @property
    def deadlock_pairs(self) -> List[Pair]:
        return [pair for pair in all_pairs(self.n) if self.table.dist[pair_index(*pair)] == DEADLOCK]

    @property
    def stable_pairs(self) -> List[Pair]:
        return [pair for pair in all_pairs(self.n) if self.stable[pair_index(*pair)]]

    @property
    def synchronizing(self) -> bool:
        return DEADLOCK not in self.table.dist


def all_pairs(n: int) -> Iterable[Pair]:
    """Pairs p < q in triangular index order"""
    for q in range(1, n):
        for p in range(q):
            yield (p, q)


def pair_graph_analysis(d: Dfa) -> PairGraphResult:
    """
    Classify every pair of distinct states.

    Mergeable pairs come from the backward search from the diagonal. A pair
    is unstable when a deadlock pair is forward-reachable from it, so the
    unstable set is the backward closure of the deadlock pairs; the rest are
    stable. Both passes cost O(k * n^2).
    """
    pre = preimages(d)
    table = mergeable_table(d, pre)
    unstable = bytearray(pair_count(d.n))
    queue = deque()
    for pair in all_pairs(d.n):
        if table.dist[pair_index(*pair)] == DEADLOCK:
            unstable[pair_index(*pair)] = 1
            queue.append(pair)
    steps = table.steps
    while queue:
        p, q = queue.popleft()
        for x in range(d.k):
            pre_x = pre[x]
            for a in pre_x[p]:
                for b in pre_x[q]:
                    steps += 1
                    idx = pair_index(a, b)
                    if not unstable[idx]:
                        unstable[idx] = 1
                        queue.append((a, b))
    stable = bytearray(1 - v for v in unstable)
    logger.debug(f"Pair analysis n={d.n}: {steps} steps")
    return PairGraphResult(n=d.n, table=table, stable=stable, steps=steps)


class Verdict(BaseModel):
    """Decision outcome with a machine-checkable certificate"""
    synchronizing: bool = Field(..., description="Whether the automaton has a reset word")
    certificate_type: Literal["reset_word", "disconnected", "deadlock_pair"] = Field(
        ..., description="Kind of certificate")
    certificate: List[int] = Field(
        ..., description="Reset word letters, weak component label per state, or the deadlock pair [p, q]")
    method: Literal["exact", "fast"] = Field(..., description="Pipeline that produced the verdict")
    steps: int = Field(0, description="Charged elementary operations")
    fallback: bool = Field(False, description="Whether the fast pipeline fell back to the exact oracle")
    budget: Optional[int] = Field(None, description="Total step allowance of the fast pipeline")

    @property
    def word(self) -> Optional[Word]:
        return tuple(self.certificate) if self.certificate_type == "reset_word" else None


def _greedy_from_table(d: Dfa, table: MergeTable) -> Optional[Word]:
    dist = np.asarray(table.dist, dtype=np.int64)
    current = np.arange(d.n, dtype=np.int64)
    word: List[int] = []
    while len(current) > 1:
        i, j = np.triu_indices(len(current), 1)
        p, q = current[i], current[j]
        idx = q * (q - 1) // 2 + p
        lengths = dist[idx]
        if (lengths == DEADLOCK).any():
            return None
        # shortest merge first, ties to the smallest pair index
        best = np.lexsort((idx, lengths))[0]
        w = table.word_for(d, int(p[best]), int(q[best]))
        word.extend(w)
        for x in w:
            current = np.unique(np.asarray(d.delta[x], dtype=np.int64)[current])
    return tuple(word)


def greedy_reset_word(d: Dfa, table: Optional[MergeTable] = None) -> Optional[Word]:
    """
    Greedy pair-merging reset word.

    Starting from S = Q, repeatedly merges the pair of S with the shortest
    merging word and replaces S by its image, until |S| = 1.

    Returns:
        The concatenated word, or None when d is not synchronizing
    """
    table = mergeable_table(d) if table is None else table
    return _greedy_from_table(d, table)


def decide_exact(d: Dfa) -> Verdict:
    """
    Exact decision: synchronizing iff no deadlock pair.

    NO answers carry a disconnection when weak connectivity already fails,
    otherwise the first deadlock pair; YES answers carry a greedy reset word.
    """
    if d.n == 1:
        return Verdict(synchronizing=True, certificate_type="reset_word", certificate=[], method="exact")
    uf = UnionFind(d.n)
    connected, labels = is_weakly_connected(d, uf)
    if not connected:
        return Verdict(synchronizing=False, certificate_type="disconnected", certificate=list(labels),
                       method="exact", steps=uf.operations)
    table = mergeable_table(d)
    steps = uf.operations + table.steps
    deadlock = table.first_deadlock()
    if deadlock is not None:
        return Verdict(synchronizing=False, certificate_type="deadlock_pair", certificate=list(deadlock),
                       method="exact", steps=steps)
    word = _greedy_from_table(d, table)
    return Verdict(synchronizing=True, certificate_type="reset_word", certificate=list(word),
                   method="exact", steps=steps)


PairSearchStatus = Literal["merged", "deadlock", "exhausted"]


def forward_pair_search(
    d: Dfa,
    p: int,
    q: int,
    budget: Optional[int] = None,
) -> Tuple[PairSearchStatus, Optional[Word], int]:
    """
    Breadth-first search in the pair automaton from {p, q}.

    Each generated pair edge costs one step. The search stops before an edge
    would exceed the budget.

    Returns:
        (status, word, steps): "merged" with a shortest merging word,
        "deadlock" when the reachable pair set was fully explored without
        merging, "exhausted" when the budget ran out first
    """
    if p == q:
        raise InvalidArgumentError(f"pair search needs distinct states, got {p} twice")
    d.check_state(p)
    d.check_state(q)
    start = (min(p, q), max(p, q))
    parent: Dict[Pair, Tuple[Optional[Pair], int]] = {start: (None, -1)}
    queue = deque([start])
    steps = 0
    while queue:
        pair = queue.popleft()
        a, b = pair
        for x in range(d.k):
            if budget is not None and steps >= budget:
                return "exhausted", None, steps
            steps += 1
            row = d.delta[x]
            na, nb = row[a], row[b]
            if na == nb:
                w = [x]
                while parent[pair][0] is not None:
                    pair, letter = parent[pair]
                    w.append(letter)
                return "merged", tuple(reversed(w)), steps
            nxt = (na, nb) if na < nb else (nb, na)
            if nxt not in parent:
                parent[nxt] = (pair, x)
                queue.append(nxt)
    return "deadlock", None, steps


def merge_word(d: Dfa, p: int, q: int) -> Optional[Word]:
    """Shortest word w with p.w = q.w, or None when {p, q} is deadlock"""
    status, word, _ = forward_pair_search(d, p, q)
    return word if status == "merged" else None


def shortest_reset_word(d: Dfa) -> Optional[Word]:
    """
    Minimum-length reset word by breadth-first search in the subset automaton.

    Raises:
        CapacityError when n exceeds the subset-search limit
    """
    limit = get_settings().subset_limit
    if d.n > limit:
        raise CapacityError("subset search", d.n, limit)
    n = d.n
    full = (1 << n) - 1
    if n == 1:
        return ()
    # image of a subset, assembled from per-byte lookup tables
    chunks = (n + 7) // 8
    tables = []
    for row in d.delta:
        per_letter = []
        for c in range(chunks):
            lookup = [0] * 256
            for byte in range(256):
                img = 0
                for bit in range(8):
                    q = c * 8 + bit
                    if byte >> bit & 1 and q < n:
                        img |= 1 << row[q]
                lookup[byte] = img
            per_letter.append(lookup)
        tables.append(per_letter)

    def step(mask: int, x: int) -> int:
        img = 0
        for c, lookup in enumerate(tables[x]):
            img |= lookup[(mask >> (8 * c)) & 0xFF]
        return img

    parent: Dict[int, Tuple[int, int]] = {full: (-1, -1)}
    queue = deque([full])
    while queue:
        mask = queue.popleft()
        for x in range(d.k):
            img = step(mask, x)
            if img in parent:
                continue
            parent[img] = (mask, x)
            if img & (img - 1) == 0:
                w = []
                while img != full:
                    img, letter = parent[img]
                    w.append(letter)
                return tuple(reversed(w))
            queue.append(img)
    return None


@dataclass(frozen=True)
class FCliqueSet:
    """All maximum cliques of the deadlock-pair graph"""
    cliques: Tuple[FrozenSet[int], ...]
    size: int


def f_cliques(d: Dfa, pgr: Optional[PairGraphResult] = None) -> FCliqueSet:
    """
    F-cliques: maximum-size sets whose pairs are all deadlock.

    Maximal cliques come from networkx's pivoting Bron-Kerbosch search; only
    those of maximum size are kept. Without deadlock pairs every singleton
    is an F-clique of size 1.
    """
    limit = get_settings().clique_limit
    if d.n > limit:
        raise CapacityError("F-clique search", d.n, limit)
    pgr = pair_graph_analysis(d) if pgr is None else pgr
    g = nx.Graph()
    g.add_nodes_from(range(d.n))
    g.add_edges_from(pgr.deadlock_pairs)
    maximal = [frozenset(c) for c in nx.find_cliques(g)]
    size = max(len(c) for c in maximal)
    cliques = sorted((c for c in maximal if len(c) == size), key=lambda c: sorted(c))
    return FCliqueSet(cliques=tuple(cliques), size=size)


def reachable_from_f_cliques(d: Dfa, fcs: FCliqueSet) -> FrozenSet[int]:
    """
    States lying in some image F.w of an F-clique F.

    Images of F-cliques are F-cliques, so the search runs over the finite
    family of F-cliques reachable from the given ones.
    """
    seen = set(fcs.cliques)
    queue = deque(fcs.cliques)
    while queue:
        clique = queue.popleft()
        for row in d.delta:
            img = frozenset(row[q] for q in clique)
            if img not in seen:
                seen.add(img)
                queue.append(img)
    return frozenset(q for clique in seen for q in clique)


@dataclass(frozen=True)
class EnumerationSummary:
    n: int
    k: int
    visited: int
    counts: Dict[str, int]


Visitor = Callable[[Dfa], Optional[Mapping[str, int]]]


def enumerate_all(n: int, k: int, visitor: Visitor, prefix: Sequence[int] = ()) -> EnumerationSummary:
    """
    Visit every automaton with n states and k letters in lexicographic order
    of the flattened table delta[0][0], delta[0][1], ..., delta[k-1][n-1].

    Args:
        n: State count
        k: Alphabet size
        visitor: Called once per automaton; returned counts are summed
        prefix: Fixed leading table entries, for sharding the enumeration

    Returns:
        EnumerationSummary with the number visited and the summed counts
    """
    if n < 1 or k < 1:
        raise InvalidArgumentError(f"enumeration needs n >= 1 and k >= 1, got n={n}, k={k}")
    total = n ** (k * n)
    limit = get_settings().enumeration_limit
    if total > limit:
        raise CapacityError("enumeration", total, limit)
    prefix = tuple(prefix)
    if len(prefix) > k * n or any(not 0 <= v < n for v in prefix):
        raise InvalidArgumentError(f"invalid enumeration prefix {prefix}")
    counts: Counter = Counter()
    visited = 0
    for tail in itertools.product(range(n), repeat=k * n - len(prefix)):
        flat = prefix + tail
        d = Dfa(n=n, k=k, delta=tuple(flat[x * n:(x + 1) * n] for x in range(k)))
        visited += 1
        result = visitor(d)
        if result:
            counts.update(result)
    logger.info(f"Enumerated {visited} automata with n={n}, k={k}")
    return EnumerationSummary(n=n, k=k, visited=visited, counts=dict(counts))


def propagate_pairs(d: Dfa, seed: Pair, x: int, length: int) -> List[Pair]:
    """
    The chain {p, q}, {p.x, q.x}, ..., {p.x^length, q.x^length}, cut before
    the first step where the two states coincide.
    """
    p, q = seed
    if p == q:
        raise InvalidArgumentError(f"seed pair must have distinct states, got {seed}")
    d.check_state(p)
    d.check_state(q)
    d.check_letter(x)
    row = d.delta[x]
    chain = [(p, q)]
    for _ in range(length):
        p, q = row[p], row[q]
        if p == q:
            break
        chain.append((p, q))
    return chain


def is_synchronizable_set(
    d: Dfa,
    states: Iterable[int],
    table: Optional[MergeTable] = None,
) -> Tuple[bool, Optional[Word]]:
    """
    Whether the set can be sent to a single state.

    Merges pairs of the current image greedily. Once the image contains a
    deadlock pair no word can collapse it, so the answer is NO.

    Returns:
        (True, word) with |states.word| = 1, or (False, None)
    """
    current = frozenset(states)
    for q in current:
        d.check_state(q)
    table = mergeable_table(d) if table is None else table
    word: List[int] = []
    while len(current) > 1:
        ordered = sorted(current)
        p, q = ordered[0], ordered[1]
        w = table.word_for(d, p, q)
        if w is None:
            return False, None
        word.extend(w)
        current = image_of_word(d, current, w)
    return True, tuple(word)


def verify_reset_word(d: Dfa, w: Iterable[int]) -> bool:
    """|Q.w| = 1, by image iteration"""
    return len(image_of_word(d, range(d.n), w)) == 1
