#!/usr/bin/env python3
"""
Functional-graph decomposition of a single letter.

Every letter x is a map Q -> Q. Its graph splits into clusters (weak
components); each cluster has exactly one cycle, and every other state sits
in a tree hanging off a cyclic vertex. This module computes that
decomposition in linear time and the statistics built on it: cycle counts,
highest-tree statistics, the big/small cluster partition, eventual cycle
vertices (sigma-classes) and cluster connectivity through a set of pairs.
"""

import logging
from collections import Counter, deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from automaton import Dfa, UnionFind
from exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

DEFAULT_THETA = 0.45


@dataclass(frozen=True)
class ClusterInfo:
    """One cluster: its size and its cycle in cyclic order (cycle_states[i].x == cycle_states[i+1])"""
    size: int
    cycle_length: int
    cycle_states: Tuple[int, ...]


@dataclass(frozen=True)
class LetterGraph:
    """
    Decomposition of one letter's functional graph.

    Per-state arrays are indexed by state. root[q] is the cyclic vertex whose
    tree contains q (q itself when q is cyclic); cycle_pos[q] is the index of
    a cyclic q inside its cluster's cycle_states, -1 for non-cyclic states.
    tree_heights is the multiset of tree heights, one entry per cyclic vertex,
    sorted in decreasing order; root_height[c] is the height of the tree at a
    cyclic c (-1 for non-cyclic states).
    """
    n: int
    letter: int
    image: Tuple[int, ...]
    cluster_id: Tuple[int, ...]
    is_cyclic: Tuple[bool, ...]
    level: Tuple[int, ...]
    root: Tuple[int, ...]
    cycle_pos: Tuple[int, ...]
    clusters: Tuple[ClusterInfo, ...]
    tree_heights: Tuple[int, ...]
    root_height: Tuple[int, ...]

    @property
    def cyclic_count(self) -> int:
        return len(self.tree_heights)

    @property
    def max_level(self) -> int:
        return self.tree_heights[0]


@dataclass(frozen=True)
class HighTreeStats:
    """Highest-tree statistics; h2 is -1 when the letter has a single tree"""
    h1: int
    h2: int
    unique_highest: bool
    margin: int
    n1: int
    n2: int


@dataclass(frozen=True)
class ClusterPartition:
    """Clusters larger than n^theta (S_x) versus the states of the remaining clusters (T_x)"""
    threshold_exponent: float
    threshold: int
    big_clusters: Tuple[int, ...]
    small_states: FrozenSet[int]
    small_count: int


def decompose_map(f: Sequence[int], letter: int = 0) -> LetterGraph:
    """
    Decompose an arbitrary map f: [0, n) -> [0, n).

    Cycles are found by pointer chasing with visitation marks; levels, roots
    and cluster labels by a reverse breadth-first pass from the cycles.
    """
    n = len(f)
    UNSEEN, ON_PATH, DONE = 0, 1, 2
    mark = [UNSEEN] * n
    path_index = [-1] * n
    is_cyclic = [False] * n
    cycle_pos = [-1] * n
    cluster_id = [-1] * n
    cycles: List[Tuple[int, ...]] = []

    for start in range(n):
        if mark[start] != UNSEEN:
            continue
        path = []
        q = start
        while mark[q] == UNSEEN:
            mark[q] = ON_PATH
            path_index[q] = len(path)
            path.append(q)
            q = f[q]
        if mark[q] == ON_PATH:
            cycle = path[path_index[q]:]
            # rotate so the cycle starts at its smallest state
            lowest = cycle.index(min(cycle))
            cycle = cycle[lowest:] + cycle[:lowest]
            cid = len(cycles)
            for i, c in enumerate(cycle):
                is_cyclic[c] = True
                cycle_pos[c] = i
                cluster_id[c] = cid
            cycles.append(tuple(cycle))
        for p in path:
            mark[p] = DONE

    preimage: List[List[int]] = [[] for _ in range(n)]
    for q in range(n):
        if not is_cyclic[q]:
            preimage[f[q]].append(q)

    level = [0] * n
    root = list(range(n))
    queue = deque(c for cycle in cycles for c in cycle)
    while queue:
        u = queue.popleft()
        for child in preimage[u]:
            level[child] = level[u] + 1
            root[child] = root[u]
            cluster_id[child] = cluster_id[u]
            queue.append(child)

    sizes = Counter(cluster_id)
    clusters = tuple(
        ClusterInfo(size=sizes[cid], cycle_length=len(cycle), cycle_states=cycle)
        for cid, cycle in enumerate(cycles)
    )
    root_height = [0 if is_cyclic[q] else -1 for q in range(n)]
    for q in range(n):
        if level[q] > root_height[root[q]]:
            root_height[root[q]] = level[q]

    return LetterGraph(
        n=n,
        letter=letter,
        image=tuple(f),
        cluster_id=tuple(cluster_id),
        is_cyclic=tuple(is_cyclic),
        level=tuple(level),
        root=tuple(root),
        cycle_pos=tuple(cycle_pos),
        clusters=clusters,
        tree_heights=tuple(sorted((h for h in root_height if h >= 0), reverse=True)),
        root_height=tuple(root_height),
    )


def analyze_letter(d: Dfa, x: int) -> LetterGraph:
    """Decomposition of letter x of d"""
    d.check_letter(x)
    return decompose_map(d.delta[x], letter=x)


def cycle_count(lg: LetterGraph) -> int:
    """Number of clusters (equivalently, of cycles)"""
    return len(lg.clusters)


def high_tree_stats(lg: LetterGraph) -> HighTreeStats:
    """
    Heights of the two highest trees and the level counts around them.

    n1 counts states at level h2+1 and n2 states at level >= h2+2, with the
    convention h2 = -1 when there is a single tree.
    """
    heights = lg.tree_heights
    h1 = heights[0]
    h2 = heights[1] if len(heights) > 1 else -1
    unique_highest = len(heights) == 1 or heights[1] < h1
    n1 = 0
    n2 = 0
    for lv in lg.level:
        if lv == h2 + 1:
            n1 += 1
        elif lv >= h2 + 2:
            n2 += 1
    return HighTreeStats(h1=h1, h2=h2, unique_highest=unique_highest, margin=h1 - h2, n1=n1, n2=n2)


def high_vertices(lg: LetterGraph) -> FrozenSet[int]:
    """States above the second-highest tree: {q : level(q) >= h2+1}"""
    h2 = high_tree_stats(lg).h2
    return frozenset(q for q, lv in enumerate(lg.level) if lv >= h2 + 1)


@lru_cache(maxsize=4096)
def size_threshold(n: int, theta: float) -> int:
    """
    floor(n^(a/b)), exact, where a/b is theta rounded to the nearest fraction
    with denominator at most 1000.

    Thresholds are therefore exact for thetas such as 0.45 or 1/3 and follow
    the rounded fraction for any other theta. The float estimate is corrected
    with integer powers: the result is the largest t with t^b <= n^a.
    """
    ratio = Fraction(theta).limit_denominator(1000)
    a, b = ratio.numerator, ratio.denominator
    target = n ** a
    t = int(n ** theta)
    while t > 0 and t ** b > target:
        t -= 1
    while (t + 1) ** b <= target:
        t += 1
    return t


def cluster_partition(lg: LetterGraph, theta: float = DEFAULT_THETA) -> ClusterPartition:
    """Split clusters at n^theta: sizes above it are big (S_x), the rest contribute their states to T_x"""
    if not 0 < theta < 1:
        raise InvalidArgumentError(f"theta must lie in (0, 1), got {theta}")
    # size > n^theta  <=>  size > floor(n^theta) for integer sizes
    threshold = size_threshold(lg.n, theta)
    big = tuple(cid for cid, c in enumerate(lg.clusters) if c.size > threshold)
    big_set = set(big)
    small_states = frozenset(q for q in range(lg.n) if lg.cluster_id[q] not in big_set)
    return ClusterPartition(
        threshold_exponent=theta,
        threshold=threshold,
        big_clusters=big,
        small_states=small_states,
        small_count=len(small_states),
    )


def eventual_cycle_vertex(lg: LetterGraph, q: int, t: int) -> int:
    """
    q.x^t for t >= level(q).

    The state reaches its root after level(q) steps, then moves
    (t - level(q)) mod cycle_length positions along the stored cycle.
    """
    if not 0 <= q < lg.n:
        raise InvalidArgumentError(f"state {q} out of range [0, {lg.n})")
    lv = lg.level[q]
    if t < lv:
        raise InvalidArgumentError(f"exponent {t} is below level {lv} of state {q}")
    r = lg.root[q]
    cycle = lg.clusters[lg.cluster_id[r]].cycle_states
    return cycle[(lg.cycle_pos[r] + t - lv) % len(cycle)]


def sigma_classes(lg: LetterGraph, t: Optional[int] = None) -> Dict[int, Tuple[int, ...]]:
    """
    Partition of the states by q.x^t (t = n by default).

    Returns:
        Mapping from cycle vertex to the sorted states that end there
    """
    t = lg.n if t is None else t
    classes: Dict[int, List[int]] = {}
    for q in range(lg.n):
        classes.setdefault(eventual_cycle_vertex(lg, q, t), []).append(q)
    return {v: tuple(states) for v, states in sorted(classes.items())}


def stable_cycle_clusters(lg: LetterGraph, is_stable: Callable[[int, int], bool]) -> Tuple[int, ...]:
    """Clusters whose cycle states are pairwise stable; a one-state cycle qualifies vacuously"""
    out = []
    for cid, cluster in enumerate(lg.clusters):
        cycle = cluster.cycle_states
        if all(is_stable(cycle[i], cycle[j]) for i in range(len(cycle)) for j in range(i + 1, len(cycle))):
            out.append(cid)
    return tuple(out)


def clusters_connected_by_pairs(
    lg: LetterGraph,
    pairs: Iterable[Tuple[int, int]],
    theta: float = DEFAULT_THETA,
) -> bool:
    """
    Whether the big clusters form one connected graph when each pair joins
    the clusters of its endpoints. Pairs touching a small cluster are ignored.
    """
    partition = cluster_partition(lg, theta)
    big = partition.big_clusters
    if len(big) <= 1:
        return True
    slot = {cid: i for i, cid in enumerate(big)}
    uf = UnionFind(len(big))
    components = len(big)
    for p, q in pairs:
        cp = slot.get(lg.cluster_id[p])
        cq = slot.get(lg.cluster_id[q])
        if cp is None or cq is None:
            continue
        if uf.union(cp, cq):
            components -= 1
            if components == 1:
                return True
    return components == 1
