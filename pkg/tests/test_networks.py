import logging

import numpy as np
import pytest

from socdiff.errors import EdgeError, NetworkMismatchError
from socdiff.networks import (BipartiteNetwork, build_bipartite, build_social,
                              combine)


def test_bipartite_degrees(small_bip):
    assert small_bip.user_degree.tolist() == [2, 2]
    assert small_bip.item_degree.tolist() == [1, 2, 1]
    assert small_bip.n_links == 4


def test_bipartite_adjacency_lists(small_bip):
    assert sorted(small_bip.user_items[0]) == [0, 1]
    assert sorted(small_bip.user_items[1]) == [1, 2]
    assert sorted(small_bip.item_users[1]) == [0, 1]


def test_empty_bipartite():
    net = build_bipartite([], 3, 2)
    assert net.n_links == 0
    assert net.user_degree.tolist() == [0, 0, 0]
    assert net.item_degree.tolist() == [0, 0]


def test_bipartite_out_of_range_names_pair():
    with pytest.raises(EdgeError) as exc:
        build_bipartite([(0, 0), (5, 1)], 2, 3)
    assert "(5, 1)" in str(exc.value)


def test_bipartite_negative_index_rejected():
    with pytest.raises(EdgeError):
        build_bipartite([(0, -1)], 2, 3)


def test_bipartite_duplicates_collapsed(caplog):
    with caplog.at_level(logging.WARNING):
        net = build_bipartite([(0, 0), (0, 0), (1, 1)], 2, 2)
    assert net.n_links == 2
    assert net.duplicates_collapsed == 1
    assert net.user_degree.tolist() == [1, 1]


def test_social_symmetrized():
    net = build_social([(1, 0)], 3)
    assert net.edges.tolist() == [[0, 1]]
    assert net.social_degree.tolist() == [1, 1, 0]
    assert sorted(net.friends[0]) == [1]
    assert sorted(net.friends[1]) == [0]


def test_social_self_loops_dropped(caplog):
    with caplog.at_level(logging.WARNING):
        net = build_social([(0, 0), (0, 1)], 2)
    assert net.self_loops_dropped == 1
    assert net.n_links == 1


def test_social_reciprocal_pair_collapsed():
    net = build_social([(0, 1), (1, 0)], 2)
    assert net.n_links == 1
    assert net.duplicates_collapsed == 1


def test_social_out_of_range():
    with pytest.raises(EdgeError):
        build_social([(0, 7)], 3)


def test_combine_user_count_mismatch(small_bip):
    with pytest.raises(NetworkMismatchError):
        combine(small_bip, build_social([], 5))


def test_combined_shape(small_social_net):
    assert small_social_net.n_users == 2
    assert small_social_net.n_items == 3


def test_degree_sums_match_link_counts(rng):
    n, m = 40, 60
    pairs = {(int(rng.integers(n)), int(rng.integers(m))) for _ in range(300)}
    bip = build_bipartite(sorted(pairs), n, m)
    assert bip.user_degree.sum() == bip.n_links
    assert bip.item_degree.sum() == bip.n_links

    social_pairs = {(int(a), int(b)) for a, b in rng.integers(0, n, (120, 2))
                    if a != b}
    soc = build_social(sorted(social_pairs), n)
    assert soc.social_degree.sum() == 2 * soc.n_links


def test_csr_transpose_consistency(rng):
    pairs = sorted({(int(rng.integers(15)), int(rng.integers(25)))
                    for _ in range(80)})
    bip = build_bipartite(pairs, 15, 25)
    dense = bip.csr.toarray()
    assert np.array_equal(dense.T, bip.csr_t.toarray())
    assert dense.sum() == bip.n_links


def test_edge_order_does_not_matter():
    a = build_bipartite([(0, 0), (1, 2), (0, 1)], 2, 3)
    b = build_bipartite([(0, 1), (0, 0), (1, 2)], 2, 3)
    assert a == b


def test_isolated_users_retained():
    net = build_bipartite([(0, 0)], 4, 1)
    assert net.user_degree.tolist() == [1, 0, 0, 0]
    soc = build_social([(0, 1)], 4)
    assert soc.social_degree.tolist() == [1, 1, 0, 0]


def test_bipartite_equality_is_structural(small_bip):
    same = build_bipartite([(1, 2), (1, 1), (0, 1), (0, 0)], 2, 3)
    assert small_bip == same
    other = build_bipartite([(0, 0), (0, 1), (1, 1)], 2, 3)
    assert small_bip != other
    assert small_bip != "not a network"


def test_bipartite_type(small_bip):
    assert isinstance(small_bip, BipartiteNetwork)
