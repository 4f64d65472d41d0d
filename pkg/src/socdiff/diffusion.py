"""Resource-diffusion scoring kernels over the combined network.

Production scoring runs implicitly as sparse sweeps over the adjacency
(CSR matrix-vector products; never materializes an item-item matrix), in
64-bit floats throughout. A dense item-item transfer matrix built directly
from the per-entry formulas is available as a size-capped oracle for
cross-checking the implicit path.

Kernels:
  md      two-step mass spreading (equal split along each hop)
  hc      the averaging dual of md
  hybrid  one-parameter interpolation between md and hc (``lam``)
  smd     md with interposed social rounds: each user keeps a fraction p
          and spreads 1-p equally to friends
  grm     popularity baseline (item degree, target-independent)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import (NoProfileError, OracleSizeError, UnreachableUserError)
from .networks import BipartiteNetwork, CombinedNetwork, SocialNetwork

METHODS = ("md", "hc", "hybrid", "smd", "grm")
FRIENDLESS_RULES = ("retain", "drop")


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to run and with what parameters.

    ``lam`` is the hybrid mixing exponent (CLI flag --lambda); ``p`` the
    smd retention fraction. Each parameter must be given exactly when its
    method requires it. ``friendless_rule`` decides what a resource-holding
    user with no friends does with the 1-p share during a social round:
    "retain" keeps it (conserves mass, the default), "drop" loses it (the
    literal spreading rule, kept for strict comparison).
    """

    method: str
    lam: Optional[float] = None
    p: Optional[float] = None
    social_steps: int = 1
    friendless_rule: str = "retain"

    def __post_init__(self):
        object.__setattr__(self, "method", str(self.method).lower())
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.friendless_rule not in FRIENDLESS_RULES:
            raise ValueError(f"friendless_rule must be one of {FRIENDLESS_RULES}")
        if self.method == "hybrid":
            if self.lam is None:
                raise ValueError("hybrid requires lam")
            if not 0.0 <= self.lam <= 1.0:
                raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        elif self.lam is not None:
            raise ValueError(f"lam is only valid with hybrid, not {self.method}")
        if self.method == "smd":
            if self.p is None:
                raise ValueError("smd requires p")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"p must be in [0, 1], got {self.p}")
            if not (isinstance(self.social_steps, int) and self.social_steps >= 1):
                raise ValueError("social_steps must be a positive integer")
        else:
            if self.p is not None:
                raise ValueError(f"p is only valid with smd, not {self.method}")
            if self.social_steps != 1:
                raise ValueError("social_steps is only valid with smd")


@dataclass
class ScoreVector:
    """Final per-item resource for one target user.

    lost_mass reports resource that had no outlet (itemless holders in the
    cold-start final hop, or the dropped friendless share under
    friendless_rule="drop"); zero for mass-conserving runs.
    """

    target_user: int
    scores: np.ndarray
    lost_mass: float = 0.0


def kernel_label(spec: KernelSpec) -> str:
    """Canonical name of the operator a spec denotes.

    Settings that collapse to a simpler kernel get that kernel's label, so
    two runs computing the same operator echo the same label in reports.
    """
    if spec.method == "hybrid":
        if spec.lam == 1.0:
            return "md"
        if spec.lam == 0.0:
            return "hc"
        return f"hybrid(lambda={spec.lam:g})"
    if spec.method == "smd":
        if spec.p == 1.0:
            return "md"
        return (f"smd(p={spec.p:g},steps={spec.social_steps},"
                f"friendless={spec.friendless_rule})")
    return spec.method


def _inv(x: np.ndarray) -> np.ndarray:
    # safe reciprocal: 0 stays 0 (no resource can enter or leave a bare node)
    out = np.zeros(len(x), dtype=np.float64)
    nz = x > 0
    out[nz] = 1.0 / x[nz]
    return out


def _masked_pow(k: np.ndarray, exponent: float) -> np.ndarray:
    out = np.zeros(len(k), dtype=np.float64)
    nz = k > 0
    out[nz] = np.power(k[nz].astype(np.float64), exponent)
    return out


class DiffusionEngine:
    """Batch scorer bound to one immutable (training) network.

    All public methods are pure; results are independent of how targets
    are batched, so callers may shard target lists across threads freely.
    """

    def __init__(self, bipartite: BipartiteNetwork, social: SocialNetwork = None):
        self.bipartite = bipartite
        self.social = social
        self._a = bipartite.csr            # n x m
        self._at = bipartite.csr_t         # m x n
        self._inv_ki = _inv(bipartite.user_degree)
        self._inv_ka = _inv(bipartite.item_degree)
        if social is not None:
            if social.n_users != bipartite.n_users:
                raise ValueError("social and bipartite networks disagree on user count")
            self._s = social.csr
            self._inv_kq = _inv(social.social_degree)
            # retain-mode spread: only friends who can forward resource to
            # items may receive; shares addressed to item-less friends stay
            # with the sender (K_q = 0 then retains everything, which covers
            # the friendless case). Keeps the user->item step lossless.
            has_items = (bipartite.user_degree >= 1).astype(np.float64)
            self._s_fwd = sp.diags(has_items) @ self._s
            k_fwd = self._s @ has_items
            self._bounce = 1.0 - k_fwd * self._inv_kq
        else:
            self._s = None

    @classmethod
    def for_network(cls, cnet: CombinedNetwork) -> "DiffusionEngine":
        return cls(cnet.bipartite, cnet.social)

    # -- internal hops (column-per-target orientation) --

    def _initial_columns(self, targets: np.ndarray, item_scale: np.ndarray):
        # unit resource on each collected item, pre-scaled per item
        g = self._a[targets, :].T.tocsc()           # m x b
        return sp.diags(item_scale) @ g

    def _items_to_users(self, g) -> np.ndarray:
        return (self._a @ g).toarray()  # n x b

    def _users_to_items_md(self, u: np.ndarray) -> np.ndarray:
        return self._at @ (u * self._inv_ki[:, None])

    def _require_social(self):
        if self._s is None:
            raise ValueError("this kernel needs a social network; none was provided")

    def _friend_spread(self, u: np.ndarray, friendless_rule: str) -> np.ndarray:
        # one application of the pure spread operator (no retention): every
        # user hands their resource to friends in equal shares. Under drop
        # the split is literal (friendless users lose the share, item-less
        # receivers strand it); under retain undeliverable shares bounce
        # back to the sender, so the operator is column-stochastic.
        if friendless_rule == "drop":
            return self._s @ (u * self._inv_kq[:, None])
        return self._s_fwd @ (u * self._inv_kq[:, None]) + u * self._bounce[:, None]

    def _check_profiles(self, targets: np.ndarray):
        deg = self.bipartite.user_degree[targets]
        if np.any(deg == 0):
            bad = int(targets[np.argmax(deg == 0)])
            raise NoProfileError(
                f"user {bad} has no collected items in the training network; "
                "use coldstart_scores")

    # -- public batch API --

    def scores_batch(self, spec: KernelSpec, targets) -> np.ndarray:
        """Score a batch of targets; returns (len(targets), n_items)."""
        targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
        if targets.size and (targets.min() < 0 or targets.max() >= self.bipartite.n_users):
            raise IndexError("target index out of range")
        m = self.bipartite.n_items
        if targets.size == 0:
            return np.zeros((0, m))
        if spec.method == "grm":
            row = self.bipartite.item_degree.astype(np.float64)
            return np.tile(row, (targets.size, 1))
        self._check_profiles(targets)
        if spec.method == "md":
            u = self._items_to_users(self._initial_columns(targets, self._inv_ka))
            return self._users_to_items_md(u).T
        if spec.method == "hc":
            g = self._a[targets, :].T.tocsc()
            u = self._items_to_users(g) * self._inv_ki[:, None]
            return ((self._at @ u) * self._inv_ka[:, None]).T
        if spec.method == "hybrid":
            in_scale = _masked_pow(self.bipartite.item_degree, -spec.lam)
            out_scale = _masked_pow(self.bipartite.item_degree, -(1.0 - spec.lam))
            u = self._items_to_users(self._initial_columns(targets, in_scale))
            x = self._at @ (u * self._inv_ki[:, None])
            return (x * out_scale[:, None]).T
        # smd: md with social rounds in between. The s-round round operator
        # (keep p, spread 1-p) expands binomially over the pure spread
        # operator, so p enters only through the mixing coefficients; with
        # p=1 the result is the md op sequence exactly.
        self._require_social()
        p, steps = spec.p, spec.social_steps
        u = self._items_to_users(self._initial_columns(targets, self._inv_ka))
        coeff = [math.comb(steps, j) * p ** (steps - j) * (1.0 - p) ** j
                 for j in range(steps + 1)]
        acc = None
        for j in range(steps + 1):
            if coeff[j] != 0.0:
                term = coeff[j] * self._users_to_items_md(u)
                acc = term if acc is None else acc + term
            if j < steps and any(c != 0.0 for c in coeff[j + 1:]):
                u = self._friend_spread(u, spec.friendless_rule)
        return acc.T

    def coldstart_batch(self, targets, p: float, social_steps: int = 1,
                        friendless_rule: str = "retain"):
        """Score profile-less targets through their friends.

        One unit starts on the target user node and is handed out whole to
        the target's friends (no retained share: a profileless target's
        retained resource could never reach an item). Rounds after the
        first follow the standard keep-p rule. Returns (scores, lost_mass)
        where lost_mass[t] is resource stranded on item-less holders.
        """
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {p}")
        if not (isinstance(social_steps, int) and social_steps >= 1):
            raise ValueError("social_steps must be a positive integer")
        if friendless_rule not in FRIENDLESS_RULES:
            raise ValueError(f"friendless_rule must be one of {FRIENDLESS_RULES}")
        self._require_social()
        targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
        if targets.size and (targets.min() < 0 or targets.max() >= self.bipartite.n_users):
            raise IndexError("target index out of range")
        kq = self.social.social_degree[targets]
        if np.any(kq == 0):
            bad = int(targets[np.argmax(kq == 0)])
            if self.bipartite.user_degree[bad] == 0:
                raise UnreachableUserError(
                    f"user {bad} has neither items nor friends; "
                    "only the popularity baseline can serve them")
            raise ValueError(
                f"user {bad} has no friends; cold-start scoring needs at least one")
        n = self.bipartite.n_users
        u = np.zeros((n, targets.size))
        u[targets, np.arange(targets.size)] = 1.0
        u = self._s @ (u * self._inv_kq[:, None])      # full unit to friends
        for _ in range(social_steps - 1):
            u = p * u + (1.0 - p) * self._friend_spread(u, friendless_rule)
        scores = (self._at @ (u * self._inv_ki[:, None])).T
        itemless = (self.bipartite.user_degree == 0).astype(np.float64)
        lost = (u * itemless[:, None]).sum(axis=0)
        return scores, lost


# -- single-target convenience wrappers --

def md_scores(net: BipartiteNetwork, target: int) -> ScoreVector:
    """Two-step spreading from the target's items; total mass k_target."""
    eng = DiffusionEngine(net)
    return ScoreVector(target, eng.scores_batch(KernelSpec("md"), [target])[0])


def hc_scores(net: BipartiteNetwork, target: int) -> ScoreVector:
    """Averaging dual of md_scores."""
    eng = DiffusionEngine(net)
    return ScoreVector(target, eng.scores_batch(KernelSpec("hc"), [target])[0])


def hybrid_scores(net: BipartiteNetwork, target: int, lam: float) -> ScoreVector:
    eng = DiffusionEngine(net)
    return ScoreVector(target, eng.scores_batch(KernelSpec("hybrid", lam=lam), [target])[0])


def smd_scores(cnet: CombinedNetwork, target: int, p: float,
               social_steps: int = 1, friendless_rule: str = "retain") -> ScoreVector:
    eng = DiffusionEngine.for_network(cnet)
    spec = KernelSpec("smd", p=p, social_steps=social_steps,
                      friendless_rule=friendless_rule)
    scores = eng.scores_batch(spec, [target])[0]
    lost = 0.0
    if friendless_rule == "drop":
        k_t = float(cnet.bipartite.user_degree[target])
        lost = max(0.0, k_t - float(scores.sum()))
    return ScoreVector(target, scores, lost_mass=lost)


def coldstart_scores(cnet: CombinedNetwork, target: int, p: float,
                     social_steps: int = 1, friendless_rule: str = "retain") -> ScoreVector:
    eng = DiffusionEngine.for_network(cnet)
    scores, lost = eng.coldstart_batch([target], p, social_steps, friendless_rule)
    return ScoreVector(target, scores[0], lost_mass=float(lost[0]))


def grm_scores(net: BipartiteNetwork) -> ScoreVector:
    """Popularity baseline: score every item by its collector count.

    Target-independent; the returned vector carries target_user = -1.
    """
    return ScoreVector(-1, net.item_degree.astype(np.float64))


# -- dense oracle --

def transfer_matrix(spec: KernelSpec, cnet, oracle_cap: int = 500) -> np.ndarray:
    """Dense item-to-item transfer matrix W, entry (alpha, beta) = w_{alpha<-beta}.

    Built from the per-entry definitions with plain dense array algebra,
    deliberately sharing no code with the sparse production path; multiplying
    by a target's initial item vector must reproduce the implicit scores.
    Refuses item counts above oracle_cap. grm has no linear transfer form.
    """
    if isinstance(cnet, CombinedNetwork):
        bip, soc = cnet.bipartite, cnet.social
    else:
        bip, soc = cnet, None
    n, m = bip.n_users, bip.n_items
    if m > oracle_cap:
        raise OracleSizeError(
            f"oracle refused: {m} items exceeds the cap of {oracle_cap}")
    if spec.method == "grm":
        raise ValueError("grm is not a linear diffusion; no transfer matrix exists")
    a = np.zeros((n, m))
    if bip.n_links:
        a[bip.edges[:, 0], bip.edges[:, 1]] = 1.0
    k_user = a.sum(axis=1)
    k_item = a.sum(axis=0)
    inv_ki = _inv(k_user)
    inv_ka = _inv(k_item)
    base = np.einsum("ia,ib->ab", a * inv_ki[:, None], a)  # sum_i a_ia a_ib / k_i
    if spec.method == "md":
        return base * inv_ka[None, :]
    if spec.method == "hc":
        return base * inv_ka[:, None]
    if spec.method == "hybrid":
        return (base
                * _masked_pow(k_item, -(1.0 - spec.lam))[:, None]
                * _masked_pow(k_item, -spec.lam)[None, :])
    # smd
    if soc is None:
        raise ValueError("smd transfer matrix needs a social network")
    s_dense = np.zeros((n, n))
    if soc.n_links:
        s_dense[soc.edges[:, 0], soc.edges[:, 1]] = 1.0
        s_dense[soc.edges[:, 1], soc.edges[:, 0]] = 1.0
    k_soc = s_dense.sum(axis=1)
    inv_kq = _inv(k_soc)
    # retain: shares addressed to item-less friends return to the sender
    # (friendless senders, K=0, bounce everything); drop: literal split
    has_items = (k_user >= 1).astype(np.float64)
    bounce = 1.0 - (s_dense @ has_items) * inv_kq
    p = spec.p
    if spec.social_steps == 1:
        social_term = np.einsum("ia,ij,jb->ab",
                                a * inv_ki[:, None],
                                s_dense * inv_kq[None, :],
                                a)
        if spec.friendless_rule == "retain":
            # receiver masking is implicit (item-less receivers have no
            # a_ia row), only the bounced share needs adding back
            social_term = social_term + np.einsum(
                "ja,jb->ab", a * (inv_ki * bounce)[:, None], a)
        return p * (base * inv_ka[None, :]) \
            + (1.0 - p) * (social_term * inv_ka[None, :])
    if spec.friendless_rule == "retain":
        spread = (s_dense * has_items[:, None]) * inv_kq[None, :] + np.diag(bounce)
    else:
        spread = s_dense * inv_kq[None, :]
    round_op = p * np.eye(n) + (1.0 - p) * spread
    w = (a * inv_ki[:, None]).T
    w = w @ np.linalg.matrix_power(round_op, spec.social_steps)
    return w @ (a * inv_ka[None, :])
