import numpy as np
import pytest

from socdiff.diffusion import KernelSpec, md_scores, smd_scores
from socdiff.errors import NotEvaluableError, SplitMismatchError
from socdiff.harness import LinkSplit, split_links, training_network
from socdiff.metrics import (RecommendationList, congestion, coverage,
                             evaluate_all, inter_diversity,
                             intra_diversity_user, item_cosine_similarity,
                             novelty_user, precision_user, ranking_score_user,
                             top_l)

SQ2 = float(np.sqrt(2.0))


def rec(items):
    return RecommendationList(0, np.asarray(items, dtype=np.int64))


# -- recommendation lists --

def test_top_l_excludes_profile(small_bip):
    rl = top_l(md_scores(small_bip, 0), [0, 1], 1)
    assert rl.items.tolist() == [2]
    assert rl.target_user == 0


def test_top_l_tie_goes_to_lower_index():
    rl = top_l(np.zeros(4), [], 2)
    assert rl.items.tolist() == [0, 1]


def test_top_l_orders_by_score(friends_net):
    sv = smd_scores(friends_net, 0, 0.5)   # (0.5, 0.5, 0.0), profile {o0}
    rl = top_l(sv, [0], 1)
    assert rl.items.tolist() == [1]


def test_top_l_rejects_oversized_request(small_bip):
    with pytest.raises(ValueError):
        top_l(md_scores(small_bip, 0), [0, 1], 2)
    with pytest.raises(ValueError):
        top_l(np.zeros(3), [], 0)


def test_top_l_rejects_unknown_tie_rule():
    with pytest.raises(ValueError):
        top_l(np.zeros(3), [], 1, tie_rule="random")


# -- ranking score --

def test_ranking_score_zero_block(friends_net):
    # probe item ties with the one other unscored candidate
    sv = md_scores(friends_net.bipartite, 0)
    assert ranking_score_user(sv, [0], [1]) == pytest.approx(0.75)


def test_ranking_score_best_of_two():
    assert ranking_score_user(np.array([5.0, 1.0]), [], [0]) == pytest.approx(0.5)


def test_ranking_score_top_of_hundred():
    row = np.zeros(100)
    row[7] = 1.0
    assert ranking_score_user(row, [], [7]) == pytest.approx(0.01)


def test_ranking_score_all_zero_midpoint():
    assert ranking_score_user(np.zeros(5), [], [2]) == pytest.approx(0.6)


def test_ranking_score_averages_probe_items():
    row = np.array([4.0, 3.0, 2.0, 1.0])
    # ranks 1 and 3 of 4 -> (0.25 + 0.75) / 2
    assert ranking_score_user(row, [], [0, 2]) == pytest.approx(0.5)


def test_ranking_score_affine_invariant(rng):
    row = rng.random(30)
    base = ranking_score_user(row, [3, 4], [10, 11])
    assert ranking_score_user(2.5 * row + 7.0, [3, 4], [10, 11]) \
        == pytest.approx(base, abs=1e-12)


def test_ranking_score_empty_probe():
    with pytest.raises(NotEvaluableError):
        ranking_score_user(np.zeros(3), [0], [])


def test_ranking_score_rejects_probe_in_profile():
    with pytest.raises(ValueError):
        ranking_score_user(np.zeros(3), [0, 1], [1])


# -- precision --

def test_precision_values():
    rl = rec(range(10))
    assert precision_user(rl, [3]) == pytest.approx(0.1)
    assert precision_user(rl, range(10)) == pytest.approx(1.0)
    assert precision_user(rl, [99]) == 0.0


# -- list diversity and aggregates --

def test_inter_diversity_extremes():
    assert inter_diversity([rec([0, 1]), rec([0, 1])], 2) == pytest.approx(0.0)
    assert inter_diversity([rec([0, 1]), rec([2, 3])], 2) == pytest.approx(1.0)
    assert inter_diversity([rec([0, 1]), rec([1, 2])], 2) == pytest.approx(0.5)


def test_inter_diversity_needs_two_lists():
    with pytest.raises(ValueError):
        inter_diversity([rec([0, 1])], 2)


def test_inter_diversity_sampled_close_to_exact(rng):
    lists = [rec(rng.choice(40, size=5, replace=False)) for _ in range(30)]
    exact = inter_diversity(lists, 5)
    sampled = inter_diversity(lists, 5, max_pairs=300, seed=9)
    assert sampled == pytest.approx(exact, abs=0.15)
    # sampling is seeded, so a rerun reproduces the estimate
    assert inter_diversity(lists, 5, max_pairs=300, seed=9) == sampled


def test_item_cosine_similarity(small_bip):
    assert item_cosine_similarity(small_bip, 0, 1) == pytest.approx(1.0 / SQ2)
    assert item_cosine_similarity(small_bip, 0, 2) == 0.0
    assert item_cosine_similarity(small_bip, 1, 1) == pytest.approx(1.0)


def test_item_cosine_uncollected_item(friends_net):
    assert item_cosine_similarity(friends_net.bipartite, 0, 2) == 0.0


def test_intra_diversity(small_bip):
    assert intra_diversity_user(small_bip, rec([0, 1])) == pytest.approx(1.0 / SQ2)
    assert intra_diversity_user(small_bip, rec([0, 2])) == 0.0
    with pytest.raises(ValueError):
        intra_diversity_user(small_bip, rec([0]))


def test_coverage():
    assert coverage([rec([1]), rec([0])], 3) == pytest.approx(2 / 3)
    assert coverage([rec([0, 1, 2])], 3) == pytest.approx(1.0)
    assert coverage([], 3) == 0.0


def test_novelty(small_bip):
    assert novelty_user(small_bip, rec([0, 1])) == pytest.approx(1.5)
    assert novelty_user(small_bip, rec([1])) == pytest.approx(2.0)


def test_congestion_uniform_is_zero():
    lists = [rec([0]), rec([1]), rec([2]), rec([3])]
    assert congestion(lists, 4) == pytest.approx(0.0, abs=1e-15)


def test_congestion_concentrated():
    assert congestion([rec([3])] * 4, 4) == pytest.approx(0.75)


def test_congestion_mixed_counts():
    lists = [rec([0, 1, 2, 3]), rec([1, 2, 3]), rec([2, 3]), rec([3])]
    assert congestion(lists, 4) == pytest.approx(0.25)


def test_congestion_permutation_invariant():
    a = [rec([0, 1, 2, 3]), rec([1, 2, 3]), rec([2, 3]), rec([3])]
    b = [rec([3, 2, 1, 0]), rec([2, 1, 0]), rec([1, 0]), rec([0])]
    assert congestion(a, 4) == pytest.approx(congestion(b, 4))


def test_congestion_requires_recommendations():
    with pytest.raises(ValueError):
        congestion([], 4)


# -- full report --

def test_evaluate_all_hand_checked(friends_net):
    split = LinkSplit(training=friends_net.bipartite.edges,
                      probe=np.array([[0, 1]], dtype=np.int64), seed=0)
    rep = evaluate_all(friends_net, split, KernelSpec("md"), l=1)
    assert rep.rs == pytest.approx(0.75)
    assert rep.precision == pytest.approx(1.0)
    assert rep.inter_diversity == pytest.approx(1.0)
    assert rep.intra_diversity == 0.0       # length-1 lists have no pairs
    assert rep.coverage == pytest.approx(2 / 3)
    assert rep.novelty == pytest.approx(1.0)
    assert rep.congestion == pytest.approx(1 / 3)
    assert rep.users_evaluated == 1
    assert rep.l == 1


def test_evaluate_all_smd_p1_equals_md(synth_net):
    split = split_links(synth_net.bipartite, 0.2, 77)
    tnet = training_network(synth_net, split)
    md = evaluate_all(tnet, split, KernelSpec("md"), l=5)
    smd = evaluate_all(tnet, split, KernelSpec("smd", p=1.0), l=5)
    for f in type(md).FIELDS:
        assert getattr(md, f) == getattr(smd, f)


def test_evaluate_all_rejects_foreign_split(friends_net, synth_net):
    split = split_links(synth_net.bipartite, 0.2, 77)
    with pytest.raises(SplitMismatchError):
        evaluate_all(friends_net, split, KernelSpec("md"), l=1)


def test_evaluate_all_needs_probe_activity(friends_net):
    split = LinkSplit(training=friends_net.bipartite.edges,
                      probe=np.empty((0, 2), dtype=np.int64), seed=0)
    with pytest.raises(NotEvaluableError):
        evaluate_all(friends_net, split, KernelSpec("md"), l=1)
