"""Evaluation metrics over score vectors, training profiles, and probe links.

Seven aggregate measures: ranking score (lower is better), top-L precision,
inter-user list diversity (Hamming), intra-user list diversity (cosine),
coverage, novelty (mean popularity of recommended items; lower means more
novel), and congestion (Gini over per-item recommendation counts).

Population rules for evaluate_all: ranking score and precision average over
users that have at least one probe link and a non-empty training profile;
the five list-based metrics are computed over the recommendation lists of
all users with a non-empty training profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionEngine, KernelSpec, ScoreVector
from .errors import NotEvaluableError, SplitMismatchError
from .networks import BipartiteNetwork, CombinedNetwork
from .parallel import map_blocks


@dataclass
class RecommendationList:
    target_user: int
    items: np.ndarray  # exactly L items, none from the training profile


@dataclass
class MetricsReport:
    """Aggregated metrics for one method+parameter configuration.

    users_evaluated counts the users entering the rs/precision means
    (probe-active with non-empty training profile, or the selected cold
    users in the cold-start protocol); the list metrics may cover more
    users, per the population rules in the module docstring.
    """

    rs: float
    precision: float
    inter_diversity: float
    intra_diversity: float
    coverage: float
    novelty: float
    congestion: float
    l: int
    users_evaluated: int

    FIELDS = ("rs", "precision", "inter_diversity", "intra_diversity",
              "coverage", "novelty", "congestion")


def _scores_array(scores) -> np.ndarray:
    if isinstance(scores, ScoreVector):
        return scores.scores
    return np.asarray(scores, dtype=np.float64)


def _top_from_row(row: np.ndarray, profile_mask: np.ndarray, l: int) -> np.ndarray:
    candidates = np.flatnonzero(~profile_mask)
    if l > candidates.size:
        raise ValueError(
            f"cannot build a list of {l}: only {candidates.size} items outside "
            "the training profile")
    if l < 1:
        raise ValueError("list length must be >= 1")
    # stable sort on descending score keeps ascending item index within ties
    order = np.argsort(-row[candidates], kind="stable")
    return candidates[order[:l]]


def top_l(scores, training_profile, l: int,
          tie_rule: str = "item-index-ascending") -> RecommendationList:
    """Top-l uncollected items by descending score; ties go to the lower index."""
    if tie_rule != "item-index-ascending":
        raise ValueError(f"unsupported tie rule {tie_rule!r}")
    row = _scores_array(scores)
    mask = np.zeros(row.size, dtype=bool)
    profile = np.asarray(list(training_profile), dtype=np.int64)
    if profile.size:
        mask[profile] = True
    target = scores.target_user if isinstance(scores, ScoreVector) else -1
    return RecommendationList(target, _top_from_row(row, mask, l))


def _rank_scores(row: np.ndarray, profile_mask: np.ndarray,
                 probe: np.ndarray) -> float:
    cand = row[~profile_mask]
    u_count = cand.size
    cs = np.sort(cand)
    s = row[probe]
    right = np.searchsorted(cs, s, side="right")
    left = np.searchsorted(cs, s, side="left")
    greater = u_count - right
    ties = right - left  # includes the probe item itself
    ranks = greater + 0.5 * (ties + 1)
    return float(np.mean(ranks / u_count))


def ranking_score_user(scores, training_profile, probe_items) -> float:
    """Mean normalized rank of the probe items among all uncollected items.

    Tied scores take the mid-rank (average position over the tied block),
    so an all-zero score vector yields (U+1)/(2U) per probe item.
    """
    row = _scores_array(scores)
    profile = np.asarray(list(training_profile), dtype=np.int64)
    probe = np.asarray(list(probe_items), dtype=np.int64)
    if probe.size == 0:
        raise NotEvaluableError("empty probe set for this user")
    if profile.size and np.intersect1d(profile, probe).size:
        raise ValueError("probe items must be disjoint from the training profile")
    mask = np.zeros(row.size, dtype=bool)
    if profile.size:
        mask[profile] = True
    return _rank_scores(row, mask, probe)


def precision_user(rec_list: RecommendationList, probe_items) -> float:
    probe = np.asarray(list(probe_items), dtype=np.int64)
    hits = int(np.isin(rec_list.items, probe).sum())
    return hits / rec_list.items.size


def inter_diversity(lists, l: int, max_pairs=None, seed: int = 0) -> float:
    """Mean Hamming distance 1 - overlap/l over unordered list pairs.

    Exact over all pairs by default (computed through per-item list counts,
    which is algebraically the all-pairs mean). If max_pairs is given and
    the pair count exceeds it, falls back to seeded uniform pair sampling.
    """
    n = len(lists)
    if n < 2:
        raise ValueError("inter-user diversity needs at least two lists")
    rows = np.stack([li.items if isinstance(li, RecommendationList) else np.asarray(li)
                     for li in lists])
    n_pairs = n * (n - 1) // 2
    if max_pairs is not None and n_pairs > max_pairs:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n - 1, size=max_pairs)
        j = j + (j >= i)  # uniform over j != i
        total = 0.0
        for s in range(0, max_pairs, 4096):
            a, b = rows[i[s:s + 4096]], rows[j[s:s + 4096]]
            total += float(np.count_nonzero(a[:, :, None] == b[:, None, :]))
        return 1.0 - total / (max_pairs * l)
    counts = np.bincount(rows.ravel())
    sum_sq = float(np.sum(counts.astype(np.float64) ** 2))
    mean_overlap = (sum_sq - n * l) / (n * (n - 1))
    return 1.0 - mean_overlap / l


def item_cosine_similarity(net: BipartiteNetwork, alpha: int, beta: int) -> float:
    """Collector-overlap cosine; items nobody collected are similar to nothing."""
    ka = net.item_degree[alpha]
    kb = net.item_degree[beta]
    if ka == 0 or kb == 0:
        return 0.0
    common = np.intersect1d(net.item_users[alpha], net.item_users[beta],
                            assume_unique=True).size
    return float(common / np.sqrt(ka * kb))


def _intra_from_items(net: BipartiteNetwork, items: np.ndarray) -> float:
    l = items.size
    sub = net.csr[:, items]
    overlap = (sub.T @ sub).toarray()
    deg = net.item_degree[items].astype(np.float64)
    inv = np.zeros(l)
    nz = deg > 0
    inv[nz] = 1.0 / np.sqrt(deg[nz])
    sims = overlap * np.outer(inv, inv)
    np.fill_diagonal(sims, 0.0)
    return float(sims.sum() / (l * (l - 1)))


def intra_diversity_user(net: BipartiteNetwork, rec_list: RecommendationList) -> float:
    """Mean pairwise cosine similarity inside one list (ordered pairs)."""
    if rec_list.items.size < 2:
        raise ValueError("intra-user diversity needs a list of at least 2 items")
    return _intra_from_items(net, rec_list.items)


def coverage(lists, m: int) -> float:
    if not lists:
        return 0.0
    rows = [li.items if isinstance(li, RecommendationList) else np.asarray(li)
            for li in lists]
    return float(np.unique(np.concatenate(rows)).size / m)


def novelty_user(net_training: BipartiteNetwork, rec_list: RecommendationList) -> float:
    """Mean training-network degree of the recommended items."""
    return float(np.mean(net_training.item_degree[rec_list.items]))


def congestion(lists, m: int) -> float:
    """Gini coefficient of per-item recommendation counts, zeros included."""
    rows = [li.items if isinstance(li, RecommendationList) else np.asarray(li)
            for li in lists]
    counts = np.bincount(np.concatenate(rows), minlength=m) if rows else np.zeros(m, int)
    total = counts.sum()
    if total == 0:
        raise ValueError("congestion undefined: nothing was recommended")
    c_sorted = np.sort(counts).astype(np.float64)
    ranks = np.arange(1, m + 1, dtype=np.float64)
    return float(2.0 * np.sum(ranks * c_sorted) / (m * float(total)) - (m + 1) / m)


@dataclass
class EvaluationDetail:
    """Per-user evaluation products, for bucketed aggregation."""

    users: np.ndarray          # users holding a recommendation list
    train_degree: np.ndarray   # training degree per such user
    rs: np.ndarray             # nan where the user has no probe link
    precision: np.ndarray      # nan likewise
    lists: np.ndarray          # (len(users), l) item indices
    novelty: np.ndarray
    intra: np.ndarray
    l: int
    m: int


def probe_items_by_user(probe_edges: np.ndarray, n_users: int):
    """Group probe edges into per-user item arrays (empty where no probe)."""
    out = [np.empty(0, dtype=np.int64)] * n_users
    if probe_edges.size == 0:
        return out
    order = np.lexsort((probe_edges[:, 1], probe_edges[:, 0]))
    e = probe_edges[order]
    users, starts = np.unique(e[:, 0], return_index=True)
    bounds = np.append(starts, e.shape[0])
    for k, u in enumerate(users):
        out[int(u)] = e[bounds[k]:bounds[k + 1], 1]
    return out


def evaluate_detail(bip_training: BipartiteNetwork, score_fn, users: np.ndarray,
                    probe_by_user, l: int, workers=None) -> EvaluationDetail:
    """Score the given users in blocks and derive per-user metric inputs.

    score_fn(targets) -> (len(targets), m) array. users is the list-metric
    population; rs/precision stay nan for members without probe links.
    """
    m = bip_training.n_items
    count = users.size
    rs = np.full(count, np.nan)
    prec = np.full(count, np.nan)
    lists = np.zeros((count, l), dtype=np.int64)
    novel = np.zeros(count)
    intra = np.zeros(count)

    def block(start, stop):
        tg = users[start:stop]
        scores = score_fn(tg)
        for k in range(start, stop):
            u = int(users[k])
            row = scores[k - start]
            mask = np.zeros(m, dtype=bool)
            profile = bip_training.user_items[u]
            if profile.size:
                mask[profile] = True
            items = _top_from_row(row, mask, l)
            lists[k] = items
            novel[k] = np.mean(bip_training.item_degree[items])
            if l >= 2:
                intra[k] = _intra_from_items(bip_training, items)
            probe = probe_by_user[u]
            if probe.size:
                rs[k] = _rank_scores(row, mask, probe)
                prec[k] = np.isin(items, probe).sum() / l

    map_blocks(block, count, workers)
    return EvaluationDetail(users=users, train_degree=bip_training.user_degree[users],
                            rs=rs, precision=prec, lists=lists, novelty=novel,
                            intra=intra, l=l, m=m)


def report_from_detail(detail: EvaluationDetail) -> MetricsReport:
    active = ~np.isnan(detail.rs)
    n_active = int(np.count_nonzero(active))
    if n_active == 0:
        raise NotEvaluableError(
            "no evaluable users: nobody has both probe links and a usable score source")
    # a single recommendation list has no pair to differ from
    inter = (inter_diversity(list(detail.lists), detail.l)
             if len(detail.lists) >= 2 else 0.0)
    return MetricsReport(
        rs=float(np.mean(detail.rs[active])),
        precision=float(np.mean(detail.precision[active])),
        inter_diversity=inter,
        intra_diversity=float(np.mean(detail.intra)),
        coverage=coverage(list(detail.lists), detail.m),
        novelty=float(np.mean(detail.novelty)),
        congestion=congestion(list(detail.lists), detail.m),
        l=detail.l,
        users_evaluated=n_active,
    )


def evaluate_all(cnet_training: CombinedNetwork, split, spec: KernelSpec,
                 l: int, workers=None) -> MetricsReport:
    """Full seven-metric report for one kernel on one training/probe split."""
    bip = cnet_training.bipartite
    if split.training.shape != bip.edges.shape or not np.array_equal(split.training, bip.edges):
        raise SplitMismatchError(
            "the split's training edges are not the edges of the given network")
    engine = DiffusionEngine(bip, cnet_training.social)
    users = np.flatnonzero(bip.user_degree >= 1)
    probe_by_user = probe_items_by_user(split.probe, bip.n_users)
    detail = evaluate_detail(bip, lambda t: engine.scores_batch(spec, t),
                             users, probe_by_user, l, workers)
    return report_from_detail(detail)
