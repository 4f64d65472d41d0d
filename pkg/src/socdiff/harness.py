"""Experiment orchestration: splits, repeated runs, sweeps, degree buckets,
cold-start comparison, and a synthetic homophilous network generator.

Determinism contract: every number in every result is a pure function of
(master_seed, config). Run seeds derive from (master_seed, run index) so
runs can execute in any order; within a sweep all grid points of a run
share one split (paired comparison).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .diffusion import DiffusionEngine, KernelSpec
from .errors import NotEvaluableError
from .metrics import (MetricsReport, congestion, coverage, evaluate_all,
                      evaluate_detail, inter_diversity, probe_items_by_user,
                      report_from_detail)
from .networks import (BipartiteNetwork, CombinedNetwork, build_bipartite,
                       build_social, combine)

log = logging.getLogger(__name__)

# metric direction conventions, used for improvement reporting
LOWER_IS_BETTER = ("rs", "intra_diversity", "novelty", "congestion")
HIGHER_IS_BETTER = ("precision", "inter_diversity", "coverage")


@dataclass
class LinkSplit:
    """Disjoint training/probe partition of the bipartite edges."""

    training: np.ndarray  # (E_t, 2) canonical order
    probe: np.ndarray     # (E_p, 2) canonical order
    seed: int


@dataclass
class ExperimentConfig:
    kernel: KernelSpec
    master_seed: int = 0
    probe_fraction: float = 0.1
    runs: int = 10
    l: int = 20
    parameter_grid: Optional[list] = None
    degree_buckets: Optional[list] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.probe_fraction < 1.0:
            raise ValueError("probe_fraction must lie strictly between 0 and 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.l < 1:
            raise ValueError("list length must be >= 1")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative integer")
        if self.parameter_grid is not None:
            if len(self.parameter_grid) == 0:
                raise ValueError("parameter grid must not be empty")
            if self.kernel.method not in ("smd", "hybrid"):
                raise ValueError(f"{self.kernel.method} has no sweepable parameter")
            for g in self.parameter_grid:
                if not 0.0 <= g <= 1.0:
                    raise ValueError(f"grid value {g} outside [0, 1]")


@dataclass
class EvaluationResult:
    mean: MetricsReport
    per_run: list
    run_seeds: list


@dataclass
class SweepPoint:
    parameter: float
    mean: MetricsReport
    per_run: list


@dataclass
class SweepResult:
    points: list
    optimal_parameter: float
    run_seeds: list = field(default_factory=list)


@dataclass
class ColdstartComparison:
    """Cold-user evaluation of the social kernel against the popularity baseline."""

    smd: MetricsReport
    grm: MetricsReport
    improvements: dict
    selected_users: np.ndarray
    excluded_no_friends: int
    excluded_no_links: int
    lost_mass: float


def run_seed(master_seed: int, run_index: int) -> int:
    """Stable per-run seed; independent of evaluation order."""
    ss = np.random.SeedSequence([master_seed, run_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def split_links(net: BipartiteNetwork, fraction: float, seed: int) -> LinkSplit:
    """Uniform link-level holdout; |probe| = round(fraction * |E|)."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    edges = net.edges
    e_count = edges.shape[0]
    n_probe = int(math.floor(fraction * e_count + 0.5))
    mask = np.zeros(e_count, dtype=bool)
    if n_probe:
        rng = np.random.default_rng(seed)
        mask[rng.choice(e_count, size=n_probe, replace=False)] = True
    return LinkSplit(training=edges[~mask], probe=edges[mask], seed=int(seed))


def training_network(cnet: CombinedNetwork, split: LinkSplit) -> CombinedNetwork:
    """Combined network whose bipartite part keeps only the training links.

    The index space (and the social graph) is unchanged, so users split down
    to an empty profile stay addressable.
    """
    tb = build_bipartite(split.training, cnet.n_users, cnet.n_items)
    return combine(tb, cnet.social)


def _mean_report(reports) -> MetricsReport:
    vals = {f: float(np.mean([getattr(r, f) for r in reports]))
            for f in MetricsReport.FIELDS}
    return MetricsReport(**vals, l=reports[0].l,
                         users_evaluated=float(np.mean([r.users_evaluated
                                                        for r in reports])))


def run_evaluation(cnet: CombinedNetwork, config: ExperimentConfig) -> EvaluationResult:
    """Repeated-holdout evaluation of config.kernel; arithmetic mean over runs."""
    seeds = [run_seed(config.master_seed, r) for r in range(config.runs)]
    per_run = []
    for s in seeds:
        split = split_links(cnet.bipartite, config.probe_fraction, s)
        tnet = training_network(cnet, split)
        per_run.append(evaluate_all(tnet, split, config.kernel, config.l,
                                    config.workers))
    return EvaluationResult(mean=_mean_report(per_run), per_run=per_run,
                            run_seeds=seeds)


def _kernel_at(kernel: KernelSpec, value: float) -> KernelSpec:
    if kernel.method == "smd":
        return replace(kernel, p=float(value))
    if kernel.method == "hybrid":
        return replace(kernel, lam=float(value))
    raise ValueError(f"{kernel.method} has no sweepable parameter")


def _optimal(points) -> float:
    best_rs = min(pt.mean.rs for pt in points)
    return max(pt.parameter for pt in points if pt.mean.rs == best_rs)


def sweep_parameter(cnet: CombinedNetwork, config: ExperimentConfig) -> SweepResult:
    """Grid search over the kernel parameter, paired splits across points.

    The winning parameter minimizes mean ranking score; exact ties go to
    the larger value.
    """
    if not config.parameter_grid:
        raise ValueError("sweep_parameter needs a non-empty parameter_grid")
    grid = [float(g) for g in config.parameter_grid]
    seeds = [run_seed(config.master_seed, r) for r in range(config.runs)]
    by_param = {g: [] for g in grid}
    for s in seeds:
        split = split_links(cnet.bipartite, config.probe_fraction, s)
        tnet = training_network(cnet, split)
        for g in grid:
            by_param[g].append(evaluate_all(tnet, split, _kernel_at(config.kernel, g),
                                            config.l, config.workers))
    points = [SweepPoint(parameter=g, mean=_mean_report(by_param[g]),
                         per_run=by_param[g]) for g in grid]
    return SweepResult(points=points, optimal_parameter=_optimal(points),
                       run_seeds=seeds)


def degree_group_analysis(cnet: CombinedNetwork, config: ExperimentConfig,
                          buckets) -> dict:
    """Sweep restricted per training-degree bucket.

    buckets: inclusive (lo, hi) ranges of training degree. Ranking score and
    precision average over each bucket's probe-active users; the list
    metrics cover the bucket's lists (single-list buckets report inter
    diversity 0.0). Buckets that never contain a probe-active user are
    omitted from the result. Returns {(lo, hi): SweepResult}.
    """
    buckets = [(int(lo), int(hi)) for lo, hi in buckets]
    grid = ([float(g) for g in config.parameter_grid]
            if config.parameter_grid else [None])
    seeds = [run_seed(config.master_seed, r) for r in range(config.runs)]
    acc = {b: {g: [] for g in grid} for b in buckets}
    for s in seeds:
        split = split_links(cnet.bipartite, config.probe_fraction, s)
        tnet = training_network(cnet, split)
        bip = tnet.bipartite
        engine = DiffusionEngine(bip, tnet.social)
        users = np.flatnonzero(bip.user_degree >= 1)
        probe_by_user = probe_items_by_user(split.probe, bip.n_users)
        for g in grid:
            spec = config.kernel if g is None else _kernel_at(config.kernel, g)
            detail = evaluate_detail(bip, lambda t: engine.scores_batch(spec, t),
                                     users, probe_by_user, config.l, config.workers)
            for b in buckets:
                sub = _restrict_detail(detail, b)
                if sub is not None:
                    acc[b][g].append(sub)
    out = {}
    for b in buckets:
        pts = []
        for g in grid:
            if acc[b][g]:
                pts.append(SweepPoint(parameter=g, mean=_mean_report(acc[b][g]),
                                      per_run=acc[b][g]))
        if pts:
            opt = (_optimal(pts) if grid != [None] else None)
            out[b] = SweepResult(points=pts, optimal_parameter=opt, run_seeds=seeds)
    return out


def _restrict_detail(detail, bucket):
    lo, hi = bucket
    members = (detail.train_degree >= lo) & (detail.train_degree <= hi)
    active = members & ~np.isnan(detail.rs)
    if not active.any():
        return None
    lists = detail.lists[members]
    inter = inter_diversity(list(lists), detail.l) if len(lists) >= 2 else 0.0
    return MetricsReport(
        rs=float(np.mean(detail.rs[active])),
        precision=float(np.mean(detail.precision[active])),
        inter_diversity=inter,
        intra_diversity=float(np.mean(detail.intra[members])),
        coverage=coverage(list(lists), detail.m),
        novelty=float(np.mean(detail.novelty[members])),
        congestion=congestion(list(lists), detail.m),
        l=detail.l,
        users_evaluated=int(np.count_nonzero(active)),
    )


def tercile_buckets(cnet: CombinedNetwork, config: ExperimentConfig):
    """Training-degree tercile ranges of the probe-active users, pooled
    over the config's runs. Handy default buckets for degree analysis."""
    pool = []
    for r in range(config.runs):
        s = run_seed(config.master_seed, r)
        split = split_links(cnet.bipartite, config.probe_fraction, s)
        deg = np.bincount(split.training[:, 0], minlength=cnet.n_users)
        probe_users = np.unique(split.probe[:, 0])
        active = probe_users[deg[probe_users] >= 1]
        pool.append(deg[active])
    pool = np.concatenate(pool)
    if pool.size == 0:
        raise NotEvaluableError("no probe-active users under this configuration")
    q1, q2 = np.quantile(pool, [1.0 / 3.0, 2.0 / 3.0])
    b1 = max(int(math.floor(q1)), 1)
    b2 = max(int(math.floor(q2)), b1 + 1)
    top = max(int(pool.max()), b2 + 1)
    return [(1, b1), (b1 + 1, b2), (b2 + 1, top)]


def improvement_over_baseline(candidate: MetricsReport,
                              baseline: MetricsReport) -> dict:
    """Fractional per-metric improvement, positive = candidate better.

    Signs follow the usual reading: lower rs/intra/novelty/congestion is
    better, higher precision/inter/coverage is better. None where the
    baseline value is 0 (relative change undefined).
    """
    out = {}
    for f in MetricsReport.FIELDS:
        base = getattr(baseline, f)
        val = getattr(candidate, f)
        if base == 0:
            out[f] = None
        elif f in LOWER_IS_BETTER:
            out[f] = (base - val) / base
        else:
            out[f] = (val - base) / base
    return out


def coldstart_experiment(cnet: CombinedNetwork, max_degree: int,
                         config: ExperimentConfig) -> ColdstartComparison:
    """New-user protocol: users with 1..max_degree links get all their links
    moved to the probe side at once, and are scored through their friends
    (config.kernel must be smd) against the popularity baseline.

    A grm kernel runs the baseline against itself (debug mode; improvements
    all zero). Selected users without friends are excluded and counted.
    Deterministic: no sampling is involved.
    """
    kernel = config.kernel
    if kernel.method not in ("smd", "grm"):
        raise ValueError("cold-start comparison needs an smd kernel "
                         "(or grm for a baseline self-check)")
    k_full = cnet.bipartite.user_degree
    k_soc = cnet.social.social_degree
    by_degree = np.flatnonzero((k_full >= 1) & (k_full <= max_degree))
    no_links = int(np.count_nonzero(k_full == 0)) if max_degree >= 0 else 0
    selected = by_degree[k_soc[by_degree] >= 1]
    no_friends = by_degree.size - selected.size
    if no_friends:
        log.warning("excluded %d cold-start candidate(s) without friends", no_friends)
    if selected.size == 0:
        raise NotEvaluableError(
            f"no eligible cold-start users: {by_degree.size} user(s) have "
            f"1..{max_degree} links but none of those have friends "
            f"({no_links} user(s) have no links at all)")
    sel_mask = np.zeros(cnet.n_users, dtype=bool)
    sel_mask[selected] = True
    edges = cnet.bipartite.edges
    is_probe = sel_mask[edges[:, 0]]
    split = LinkSplit(training=edges[~is_probe], probe=edges[is_probe],
                      seed=-1)
    tnet = training_network(cnet, split)
    bip = tnet.bipartite
    probe_by_user = probe_items_by_user(split.probe, cnet.n_users)
    lost = np.zeros(selected.size)

    if kernel.method == "smd":
        engine = DiffusionEngine(bip, tnet.social)
        pos = {int(u): idx for idx, u in enumerate(selected)}

        def cold_fn(targets):
            scores, block_lost = engine.coldstart_batch(
                targets, kernel.p, kernel.social_steps, kernel.friendless_rule)
            for t, lm in zip(targets, block_lost):
                lost[pos[int(t)]] = lm
            return scores
    else:
        def cold_fn(targets):
            row = bip.item_degree.astype(np.float64)
            return np.tile(row, (len(targets), 1))

    grm_row = bip.item_degree.astype(np.float64)
    detail_cand = evaluate_detail(bip, cold_fn, selected, probe_by_user,
                                  config.l, config.workers)
    detail_grm = evaluate_detail(bip, lambda t: np.tile(grm_row, (len(t), 1)),
                                 selected, probe_by_user, config.l, config.workers)
    rep_cand = report_from_detail(detail_cand)
    rep_grm = report_from_detail(detail_grm)
    return ColdstartComparison(
        smd=rep_cand, grm=rep_grm,
        improvements=improvement_over_baseline(rep_cand, rep_grm),
        selected_users=selected,
        excluded_no_friends=no_friends,
        excluded_no_links=no_links,
        lost_mass=float(lost.sum()),
    )


def synth_generate(communities: int, users_per_community: int,
                   items_per_community: int, intra_collect: float,
                   inter_collect: float, intra_friend: float,
                   inter_friend: float, seed: int) -> CombinedNetwork:
    """Planted-partition generator: users and items carry community labels;
    within-community collection/friendship probabilities exceed the
    across-community ones in a homophilous instance. Deterministic per seed.
    """
    if communities < 1 or users_per_community < 1 or items_per_community < 1:
        raise ValueError("communities, users and items per community must be >= 1")
    for name, prob in (("intra_collect", intra_collect), ("inter_collect", inter_collect),
                       ("intra_friend", intra_friend), ("inter_friend", inter_friend)):
        if not 0.0 <= prob <= 1.0:
            raise ValueError(f"{name} must be a probability, got {prob}")
    n = communities * users_per_community
    m = communities * items_per_community
    user_comm = np.repeat(np.arange(communities), users_per_community)
    item_comm = np.repeat(np.arange(communities), items_per_community)
    rng = np.random.default_rng(seed)
    p_collect = np.where(user_comm[:, None] == item_comm[None, :],
                         intra_collect, inter_collect)
    bip_edges = np.argwhere(rng.random((n, m)) < p_collect)
    p_friend = np.where(user_comm[:, None] == user_comm[None, :],
                        intra_friend, inter_friend)
    draw = rng.random((n, n)) < p_friend
    soc_edges = np.argwhere(np.triu(draw, k=1))
    return combine(build_bipartite(bip_edges, n, m), build_social(soc_edges, n))


def degree_distribution(net: BipartiteNetwork) -> dict:
    """Exact user-degree histogram {degree: count}, plot-ready."""
    if net.n_users == 0:
        return {}
    counts = np.bincount(net.user_degree)
    return {int(d): int(c) for d, c in enumerate(counts) if c > 0}
