"""Tests for single-letter functional-graph decomposition"""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from automaton import Dfa, Rng, apply_word
from exceptions import InvalidArgumentError
from funcgraph import (
    analyze_letter,
    cluster_partition,
    clusters_connected_by_pairs,
    cycle_count,
    decompose_map,
    eventual_cycle_vertex,
    high_tree_stats,
    high_vertices,
    sigma_classes,
    size_threshold,
    stable_cycle_clusters,
)
from strategies import dfas, maps
from sync_oracle import pair_graph_analysis

CHAIN = [1, 2, 2]
TWO_TREES = [0, 0, 1, 3, 3]


def test_permutation_letter(c4):
    lg = analyze_letter(c4, 0)
    assert cycle_count(lg) == 1
    assert lg.clusters[0].cycle_length == 4
    assert lg.clusters[0].cycle_states == (0, 1, 2, 3)
    assert lg.level == (0, 0, 0, 0)
    assert lg.tree_heights == (0, 0, 0, 0)


def test_cerny_reset_letter(c4):
    lg = analyze_letter(c4, 1)
    assert cycle_count(lg) == 3
    assert lg.level == (0, 0, 0, 1)
    assert lg.tree_heights == (1, 0, 0)
    cluster = lg.clusters[lg.cluster_id[3]]
    assert cluster.size == 2
    assert cluster.cycle_states == (0,)
    assert lg.cluster_id[0] == lg.cluster_id[3]
    assert sorted(c.size for c in lg.clusters) == [1, 1, 2]


def test_chain_into_fixed_point():
    lg = decompose_map(CHAIN)
    assert cycle_count(lg) == 1
    assert lg.clusters[0].cycle_states == (2,)
    assert lg.level == (2, 1, 0)
    assert lg.tree_heights == (2,)
    assert lg.root == (2, 2, 2)


def test_cycle_count_extremes():
    assert cycle_count(decompose_map(list(range(7)))) == 7
    assert cycle_count(decompose_map([(q + 1) % 7 for q in range(7)])) == 1


def test_analyze_letter_range(c4):
    with pytest.raises(InvalidArgumentError):
        analyze_letter(c4, 2)


@given(maps())
def test_decomposition_invariants(f):
    lg = decompose_map(f)
    n = len(f)
    assert sum(c.size for c in lg.clusters) == n
    assert sum(c.cycle_length for c in lg.clusters) == sum(lg.is_cyclic) == lg.cyclic_count
    for q in range(n):
        assert (lg.level[q] == 0) == lg.is_cyclic[q]
        if lg.level[q] > 0:
            assert lg.level[f[q]] == lg.level[q] - 1
        else:
            assert lg.is_cyclic[f[q]]
        assert lg.cluster_id[f[q]] == lg.cluster_id[q]
    for cluster in lg.clusters:
        cycle = cluster.cycle_states
        assert cycle[0] == min(cycle)
        for i, c in enumerate(cycle):
            assert f[c] == cycle[(i + 1) % len(cycle)]


###################################################################################################
# Highest-tree statistics
###################################################################################################

def test_high_tree_stats_permutation(c4):
    st_ = high_tree_stats(analyze_letter(c4, 0))
    assert (st_.h1, st_.h2, st_.unique_highest, st_.margin) == (0, 0, False, 0)


def test_high_tree_stats_two_trees():
    st_ = high_tree_stats(decompose_map(TWO_TREES))
    assert (st_.h1, st_.h2, st_.unique_highest, st_.margin) == (2, 1, True, 1)
    assert (st_.n1, st_.n2) == (1, 0)


def test_high_tree_stats_single_tree():
    st_ = high_tree_stats(decompose_map(CHAIN))
    assert (st_.h1, st_.h2, st_.unique_highest) == (2, -1, True)
    assert (st_.n1, st_.n2) == (1, 2)
    assert st_.n2 > st_.n1


def test_high_vertices():
    assert high_vertices(decompose_map(TWO_TREES)) == {2}
    assert high_vertices(decompose_map(CHAIN)) == {0, 1, 2}


@given(maps())
def test_high_tree_stats_invariants(f):
    s = high_tree_stats(decompose_map(f))
    assert s.h1 >= s.h2
    assert s.margin >= 0
    assert s.n1 >= 0 and s.n2 >= 0
    if s.unique_highest and s.margin >= 2:
        assert s.n2 >= 1


@given(maps(), st.randoms(use_true_random=False))
def test_high_tree_stats_ignore_relabeling(f, rnd):
    n = len(f)
    perm = list(range(n))
    rnd.shuffle(perm)
    g = [0] * n
    for q in range(n):
        g[perm[q]] = perm[f[q]]
    a = high_tree_stats(decompose_map(f))
    b = high_tree_stats(decompose_map(g))
    assert (a.h1, a.h2, a.unique_highest, a.n1, a.n2) == (b.h1, b.h2, b.unique_highest, b.n1, b.n2)


def _expected_cyclic_count(n: int) -> float:
    total, term = 0.0, 1.0
    for i in range(n):
        term *= (n - i) / n
        total += term
    return total


def test_mean_cyclic_count_of_random_maps():
    n, samples = 1000, 10000
    rng = Rng(31337)
    mean = sum(decompose_map(rng.below(n, size=n).tolist()).cyclic_count for _ in range(samples)) / samples
    assert abs(mean - _expected_cyclic_count(n)) < 0.03 * _expected_cyclic_count(n)
    assert _expected_cyclic_count(n) == pytest.approx(math.sqrt(math.pi * n / 2), rel=0.03)


@pytest.mark.slow
def test_mean_cyclic_count_full_scale():
    n, samples = 1000, 10 ** 5
    rng = Rng(4242)
    mean = sum(decompose_map(rng.below(n, size=n).tolist()).cyclic_count for _ in range(samples)) / samples
    assert abs(mean - math.sqrt(math.pi * n / 2)) < 0.03 * math.sqrt(math.pi * n / 2)


###################################################################################################
# Cluster partition
###################################################################################################

def test_size_threshold_is_exact():
    assert size_threshold(4, 0.5) == 2
    assert size_threshold(8, 0.5) == 2
    assert size_threshold(9, 0.5) == 3
    assert size_threshold(2 ** 20, 0.45) == 512
    assert size_threshold(4, 0.45) == 1


def test_size_threshold_rounds_theta_to_a_small_fraction():
    # 1000 ** (1/3) is 9.999... in floating point
    assert size_threshold(1000, 1 / 3) == 10
    assert size_threshold(64, 1 / 3) == 4
    assert size_threshold(2 ** 20, 0.4500001) == size_threshold(2 ** 20, 0.45) == 512


def test_cluster_partition_cerny(c4):
    part = cluster_partition(analyze_letter(c4, 1), 0.45)
    lg = analyze_letter(c4, 1)
    assert part.big_clusters == (lg.cluster_id[3],)
    assert part.small_states == {1, 2}
    assert part.small_count == 2


def test_cluster_partition_extremes():
    cycle = cluster_partition(decompose_map([(q + 1) % 10 for q in range(10)]), 0.45)
    assert cycle.big_clusters == (0,)
    assert cycle.small_states == frozenset()
    identity = cluster_partition(decompose_map(list(range(100))), 0.45)
    assert identity.big_clusters == ()
    assert identity.small_count == 100


def test_cluster_partition_rejects_theta():
    with pytest.raises(InvalidArgumentError):
        cluster_partition(decompose_map(CHAIN), 1.0)
    with pytest.raises(InvalidArgumentError):
        cluster_partition(decompose_map(CHAIN), 0.0)


###################################################################################################
# Eventual cycle vertex and sigma-classes
###################################################################################################

def test_eventual_cycle_vertex(c4):
    assert eventual_cycle_vertex(decompose_map(CHAIN), 0, 3) == 2
    assert eventual_cycle_vertex(analyze_letter(c4, 0), 1, 4) == 1
    assert eventual_cycle_vertex(analyze_letter(c4, 1), 3, 4) == 0


def test_eventual_cycle_vertex_below_level():
    with pytest.raises(InvalidArgumentError):
        eventual_cycle_vertex(decompose_map(CHAIN), 0, 1)


@given(dfas(max_n=8), st.data())
def test_eventual_cycle_vertex_matches_word_action(d, data):
    x = data.draw(st.integers(0, d.k - 1))
    lg = analyze_letter(d, x)
    for q in d.states:
        assert eventual_cycle_vertex(lg, q, d.n) == apply_word(d, q, [x] * d.n)


def test_sigma_classes(c4):
    assert sigma_classes(analyze_letter(c4, 1)) == {0: (0, 3), 1: (1,), 2: (2,)}
    assert sigma_classes(analyze_letter(c4, 0), 4) == {0: (0,), 1: (1,), 2: (2,), 3: (3,)}


def test_stable_cycle_clusters(c4, identity2):
    pgr = pair_graph_analysis(c4)
    assert stable_cycle_clusters(analyze_letter(c4, 0), pgr.is_stable) == (0,)
    pgr = pair_graph_analysis(identity2)
    assert stable_cycle_clusters(analyze_letter(identity2, 0), pgr.is_stable) == (0, 1)
    both_swap = Dfa.from_rows([[1, 0], [1, 0]])
    pgr = pair_graph_analysis(both_swap)
    assert stable_cycle_clusters(analyze_letter(both_swap, 0), pgr.is_stable) == ()


###################################################################################################
# Cluster connectivity
###################################################################################################

TWO_CYCLES = [1, 2, 3, 0, 5, 6, 7, 4]
TWO_CYCLES_AND_POINT = [1, 2, 3, 0, 5, 6, 7, 4, 8]


def test_one_big_cluster_is_connected():
    assert clusters_connected_by_pairs(decompose_map([(q + 1) % 8 for q in range(8)]), [])


def test_two_big_clusters():
    lg = decompose_map(TWO_CYCLES)
    assert not clusters_connected_by_pairs(lg, [])
    assert clusters_connected_by_pairs(lg, [(0, 4)])
    assert not clusters_connected_by_pairs(lg, [(0, 1), (5, 6)])


def test_pairs_through_small_clusters_are_ignored():
    lg = decompose_map(TWO_CYCLES_AND_POINT)
    assert not clusters_connected_by_pairs(lg, [(0, 8), (8, 4)])
    assert clusters_connected_by_pairs(lg, [(1, 6)])
