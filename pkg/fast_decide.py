#!/usr/bin/env python3
"""
Fast synchronizability decision.

A budgeted pipeline for random-looking automata that answers with the same
certificates as the exact oracle:

    1. weak connectivity by union-find
    2. highest-tree analysis of each letter and the candidate stable pair
    3. budgeted merge of the candidate pair
    4. collapse: Q.x^n (the cyclic states of x), then budgeted pair merges
    5. exact fallback when any phase runs out of budget

Budget expiry never produces a NO answer: deadlock is reported only after
the reachable pair set was explored completely.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

from automaton import Dfa, UnionFind, Word, image_of_word, is_weakly_connected
from config import Settings, get_settings
from exceptions import InvalidArgumentError
from funcgraph import LetterGraph, analyze_letter, eventual_cycle_vertex, high_tree_stats
from sync_oracle import (
    Pair,
    PairSearchStatus,
    Verdict,
    decide_exact,
    forward_pair_search,
    mergeable_table,
    propagate_pairs,
    verify_reset_word,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidatePair:
    """
    The pair {p_high.x^(h-1), q} built from the unique highest tree of letter x.

    p_high has level h, p is one step above the cycle, and q is the cyclic
    predecessor of the highest tree's root (q.x == root).
    """
    letter: int
    h: int
    p_high: int
    p: int
    q: int
    root: int

    @property
    def pair(self) -> Pair:
        return (self.p, self.q)


class Budget:
    """
    Step allowance of one fast_decide run.

    The structural phases (union-find, letter analysis, the x^n collapse) are
    reserved up front; pair_walk bounds the candidate merge, collapse_pair each
    collapse merge and collapse_total all collapse work together.
    """

    def __init__(self, n: int, k: int, settings: Optional[Settings] = None, scale: float = 1.0):
        settings = settings or get_settings()
        if scale <= 0:
            raise InvalidArgumentError(f"budget scale must be positive, got {scale}")
        # union-find: two finds per union plus one per label; analysis: n per letter; collapse: n
        self.structural = (2 * k + 1) * n + k * n + n
        self.pair_walk = int(scale * settings.budget_c1 * n)
        self.collapse_pair = int(scale * settings.budget_c2 * n)
        self.collapse_total = int(scale * settings.budget_c3 * n ** 1.5)
        self.allowance = self.structural + self.pair_walk + self.collapse_total
        self.consumed = 0
        self.collapse_used = 0

    def charge(self, amount: int) -> None:
        self.consumed += amount

    def charge_collapse(self, amount: int) -> None:
        self.consumed += amount
        self.collapse_used += amount

    @property
    def collapse_remaining(self) -> int:
        return max(0, self.collapse_total - self.collapse_used)


def candidate_stable_pair(
    d: Dfa,
    x: int,
    p_high: Optional[int] = None,
    lg: Optional[LetterGraph] = None,
) -> Optional[CandidatePair]:
    """
    Build the candidate stable pair for letter x.

    Requires a unique highest tree of height h = h1 >= 1 that is strictly
    higher than every other tree.

    Args:
        d: Automaton
        x: Letter
        p_high: A state of level h to start from; defaults to the smallest one
        lg: Precomputed decomposition of x

    Returns:
        CandidatePair, or None when letter x has no such tree
    """
    lg = analyze_letter(d, x) if lg is None else lg
    stats = high_tree_stats(lg)
    h = stats.h1
    if not stats.unique_highest or stats.margin < 1 or h < 1:
        return None
    top = [q for q in range(lg.n) if lg.level[q] == h]
    if p_high is None:
        p_high = top[0]
    elif lg.level[p_high] != h:
        raise InvalidArgumentError(f"state {p_high} has level {lg.level[p_high]}, expected {h}")
    p = p_high
    for _ in range(h - 1):
        p = lg.image[p]
    root = lg.root[p_high]
    cycle = lg.clusters[lg.cluster_id[root]].cycle_states
    q = cycle[(lg.cycle_pos[root] - 1) % len(cycle)]
    return CandidatePair(letter=x, h=h, p_high=p_high, p=p, q=q, root=root)


def budgeted_pair_merge(d: Dfa, pair: Pair, budget: int) -> Tuple[PairSearchStatus, Optional[Word], int]:
    """
    Forward pair search capped at budget pair edges.

    Returns:
        (status, word, steps) as forward_pair_search: "merged" with a word,
        "deadlock" on complete exploration, "exhausted" otherwise
    """
    p, q = pair
    return forward_pair_search(d, p, q, budget=max(0, budget))


def _choose_letter(graphs: List[LetterGraph]) -> Optional[Tuple[int, LetterGraph]]:
    best = None
    best_margin = 0
    for x, lg in enumerate(graphs):
        stats = high_tree_stats(lg)
        if stats.unique_highest and stats.h1 >= 1 and stats.margin > best_margin:
            best, best_margin = (x, lg), stats.margin
    return best


def fast_decide(d: Dfa, budget_scale: float = 1.0, settings: Optional[Settings] = None) -> Verdict:
    """
    Decide synchronizability through the budgeted pipeline.

    Args:
        d: Automaton
        budget_scale: Multiplies every budget factor
        settings: Overrides the process-wide settings

    Returns:
        Verdict with method "fast", or the exact oracle's verdict with
        fallback=True when the pipeline ran out of budget
    """
    budget = Budget(d.n, d.k, settings, budget_scale)

    def verdict(**fields) -> Verdict:
        return Verdict(method="fast", steps=budget.consumed, budget=budget.allowance, **fields)

    if d.n == 1:
        return verdict(synchronizing=True, certificate_type="reset_word", certificate=[])

    uf = UnionFind(d.n)
    connected, labels = is_weakly_connected(d, uf)
    budget.charge(uf.operations)
    if not connected:
        return verdict(synchronizing=False, certificate_type="disconnected", certificate=list(labels))

    graphs = []
    for x in range(d.k):
        graphs.append(analyze_letter(d, x))
        budget.charge(d.n)
    choice = _choose_letter(graphs)
    if choice is None:
        return _fallback(d, budget, "no letter has a unique highest tree")
    x, lg = choice
    candidate = candidate_stable_pair(d, x, lg=lg)

    status, _, spent = budgeted_pair_merge(d, candidate.pair, budget.pair_walk)
    budget.charge(spent)
    if status == "deadlock":
        p, q = sorted(candidate.pair)
        return verdict(synchronizing=False, certificate_type="deadlock_pair", certificate=[p, q])
    if status == "exhausted":
        return _fallback(d, budget, f"candidate pair {candidate.pair} exhausted its walk budget")

    # Q.x^n is exactly the set of cyclic states of x
    current = frozenset(eventual_cycle_vertex(lg, q, d.n) for q in range(d.n))
    budget.charge(d.n)
    word: List[int] = [x] * d.n
    while len(current) > 1:
        ordered = sorted(current)
        allowance = min(budget.collapse_pair, budget.collapse_remaining)
        status, w, spent = budgeted_pair_merge(d, (ordered[0], ordered[1]), allowance)
        budget.charge_collapse(spent)
        if status == "deadlock":
            return verdict(synchronizing=False, certificate_type="deadlock_pair",
                           certificate=[ordered[0], ordered[1]])
        if status == "exhausted":
            return _fallback(d, budget, f"collapse stalled with {len(current)} states left")
        image_cost = len(current) * len(w)
        if image_cost > budget.collapse_remaining:
            return _fallback(d, budget, f"collapse image of {len(current)} states exceeds the remaining allowance")
        budget.charge_collapse(image_cost)
        current = image_of_word(d, current, w)
        word.extend(w)

    logger.debug(f"Fast path reset n={d.n}: |w|={len(word)}, steps={budget.consumed}/{budget.allowance}")
    return verdict(synchronizing=True, certificate_type="reset_word", certificate=word)


def _fallback(d: Dfa, budget: Budget, reason: str) -> Verdict:
    logger.debug(f"Falling back to the exact oracle for n={d.n}: {reason}")
    exact = decide_exact(d)
    return exact.model_copy(update={
        "fallback": True,
        "steps": budget.consumed + exact.steps,
        "budget": budget.allowance,
    })


def harvest_stable_pairs(d: Dfa, seed: Pair, count: int) -> List[Pair]:
    """
    Distinct pairs obtained by chaining the seed under the letters in turn.

    Round r follows every pair found in the previous round along letter
    r mod k. Stability of the output is inherited from the seed; nothing
    here checks it.
    """
    if count <= 0:
        return []
    seen = set()
    out: List[Pair] = []
    frontier = [seed]
    round_no = 0
    while frontier and len(out) < count:
        x = round_no % d.k
        next_frontier = []
        for start in frontier:
            for p, q in propagate_pairs(d, start, x, count):
                key = (p, q) if p < q else (q, p)
                if key in seen:
                    continue
                seen.add(key)
                out.append(key)
                next_frontier.append(key)
                if len(out) >= count:
                    return out
        frontier = next_frontier
        round_no += 1
    return out


def verify_verdict(d: Dfa, verdict: Verdict) -> bool:
    """Re-check a verdict's certificate independently of how it was produced"""
    if verdict.certificate_type == "reset_word":
        if any(not 0 <= x < d.k for x in verdict.certificate):
            return False
        return verdict.synchronizing and verify_reset_word(d, verdict.certificate)
    if verdict.certificate_type == "deadlock_pair":
        if verdict.synchronizing or len(verdict.certificate) != 2:
            return False
        p, q = verdict.certificate
        if p == q or not (0 <= p < d.n and 0 <= q < d.n):
            return False
        return not mergeable_table(d).is_mergeable(p, q)
    labels = verdict.certificate
    if verdict.synchronizing or len(labels) != d.n or len(set(labels)) < 2:
        return False
    return all(labels[q] == labels[row[q]] for row in d.delta for q in range(d.n))
