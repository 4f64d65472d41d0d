"""Immutable user-item and user-user network containers.

All graphs use dense 0-based integer indices; label mapping is the job of
the dataset loaders. Edges are deduplicated and stored in canonical
(user-major, then item/user) sorted order, so two builds from the same edge
multiset are identical object-for-object regardless of input ordering.
"""

from __future__ import annotations

import logging
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import EdgeError, NetworkMismatchError

log = logging.getLogger(__name__)


def _as_edge_array(edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise EdgeError("edge list must be a sequence of (left, right) pairs")
    return arr


def _adjacency_lists(indptr, indices, n):
    return tuple(indices[indptr[i]:indptr[i + 1]] for i in range(n))


class BipartiteNetwork:
    """User-item collection graph.

    Attributes
    ----------
    n_users, n_items : int
        Side sizes; fixed at construction, isolated nodes are kept.
    user_items, item_users : tuple of int arrays
        Sorted adjacency lists, row and column views of the same edge set.
    user_degree, item_degree : int arrays
        Neighbor counts per user / per item.
    edges : (E, 2) int array
        Canonical deduplicated edge list, sorted by (user, item).
    duplicates_collapsed : int
        How many input pairs were dropped as duplicates.
    """

    def __init__(self, n_users: int, n_items: int, edges: np.ndarray,
                 duplicates_collapsed: int = 0):
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        self.edges = edges
        self.duplicates_collapsed = int(duplicates_collapsed)
        self.user_degree = np.bincount(edges[:, 0], minlength=self.n_users)
        self.item_degree = np.bincount(edges[:, 1], minlength=self.n_items)
        indptr = np.concatenate(([0], np.cumsum(self.user_degree)))
        self.user_items = _adjacency_lists(indptr, edges[:, 1], self.n_users)
        # column view: stable re-sort by (item, user)
        by_item = edges[np.lexsort((edges[:, 0], edges[:, 1]))]
        iptr = np.concatenate(([0], np.cumsum(self.item_degree)))
        self.item_users = _adjacency_lists(iptr, by_item[:, 0], self.n_items)

    @property
    def n_links(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def csr(self) -> sp.csr_matrix:
        """Binary adjacency as CSR, users x items."""
        m = sp.csr_matrix(
            (np.ones(self.n_links), (self.edges[:, 0], self.edges[:, 1])),
            shape=(self.n_users, self.n_items),
        )
        m.sort_indices()
        return m

    @cached_property
    def csr_t(self) -> sp.csr_matrix:
        """Items x users CSR (transpose, materialized once)."""
        m = self.csr.T.tocsr()
        m.sort_indices()
        return m

    def __eq__(self, other):
        return (isinstance(other, BipartiteNetwork)
                and self.n_users == other.n_users
                and self.n_items == other.n_items
                and self.edges.shape == other.edges.shape
                and bool(np.all(self.edges == other.edges)))

    def __repr__(self):
        return (f"BipartiteNetwork(n_users={self.n_users}, "
                f"n_items={self.n_items}, n_links={self.n_links})")


class SocialNetwork:
    """Undirected user-user friendship graph over the same user index space."""

    def __init__(self, n_users: int, edges: np.ndarray,
                 self_loops_dropped: int = 0, duplicates_collapsed: int = 0):
        # edges: canonical undirected list with u < v, sorted
        self.n_users = int(n_users)
        self.edges = edges
        self.self_loops_dropped = int(self_loops_dropped)
        self.duplicates_collapsed = int(duplicates_collapsed)
        both = np.concatenate([edges, edges[:, ::-1]], axis=0)
        self.social_degree = np.bincount(both[:, 0], minlength=self.n_users) \
            if both.size else np.zeros(self.n_users, dtype=np.int64)
        order = np.lexsort((both[:, 1], both[:, 0])) if both.size else []
        both = both[order] if both.size else both.reshape(0, 2)
        indptr = np.concatenate(([0], np.cumsum(self.social_degree)))
        self.friends = _adjacency_lists(indptr, both[:, 1], self.n_users)

    @property
    def n_links(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def csr(self) -> sp.csr_matrix:
        """Symmetric binary adjacency as CSR, users x users."""
        if self.n_links == 0:
            return sp.csr_matrix((self.n_users, self.n_users))
        both = np.concatenate([self.edges, self.edges[:, ::-1]], axis=0)
        m = sp.csr_matrix(
            (np.ones(both.shape[0]), (both[:, 0], both[:, 1])),
            shape=(self.n_users, self.n_users),
        )
        m.sort_indices()
        return m

    def __eq__(self, other):
        return (isinstance(other, SocialNetwork)
                and self.n_users == other.n_users
                and self.edges.shape == other.edges.shape
                and bool(np.all(self.edges == other.edges)))

    def __repr__(self):
        return f"SocialNetwork(n_users={self.n_users}, n_links={self.n_links})"


class CombinedNetwork:
    """Bipartite collection graph plus social graph sharing the user index."""

    def __init__(self, bipartite: BipartiteNetwork, social: SocialNetwork):
        self.bipartite = bipartite
        self.social = social

    @property
    def n_users(self) -> int:
        return self.bipartite.n_users

    @property
    def n_items(self) -> int:
        return self.bipartite.n_items

    def __eq__(self, other):
        return (isinstance(other, CombinedNetwork)
                and self.bipartite == other.bipartite
                and self.social == other.social)

    def __repr__(self):
        return f"CombinedNetwork({self.bipartite!r}, {self.social!r})"


def build_bipartite(edges, n_users: int, n_items: int) -> BipartiteNetwork:
    """Build a BipartiteNetwork from (user, item) index pairs.

    Duplicate pairs collapse to a single unweighted link (adjacency is
    binary); the collapsed count is kept on the result and logged.
    Out-of-range indices raise EdgeError naming the offending pair.
    """
    arr = _as_edge_array(edges)
    if arr.size:
        bad_u = (arr[:, 0] < 0) | (arr[:, 0] >= n_users)
        bad_i = (arr[:, 1] < 0) | (arr[:, 1] >= n_items)
        bad = bad_u | bad_i
        if bad.any():
            pair = tuple(int(x) for x in arr[np.argmax(bad)])
            raise EdgeError(
                f"edge {pair} outside declared range "
                f"(n_users={n_users}, n_items={n_items})", pair=pair)
        unique = np.unique(arr, axis=0)
    else:
        unique = arr
    dups = arr.shape[0] - unique.shape[0]
    if dups:
        log.info("collapsed %d duplicate bipartite edge(s)", dups)
    return BipartiteNetwork(n_users, n_items, unique, duplicates_collapsed=dups)


def build_social(edges, n_users: int) -> SocialNetwork:
    """Build a symmetrized SocialNetwork from (user, user) pairs.

    Each input pair is inserted in both directions; self-loops are dropped
    (counted), duplicates collapsed.
    """
    arr = _as_edge_array(edges)
    if arr.size:
        bad = (arr < 0) | (arr >= n_users)
        if bad.any():
            row = np.argmax(bad.any(axis=1))
            pair = tuple(int(x) for x in arr[row])
            raise EdgeError(
                f"social edge {pair} outside declared range (n_users={n_users})",
                pair=pair)
        loops = arr[:, 0] == arr[:, 1]
        n_loops = int(np.count_nonzero(loops))
        arr = arr[~loops]
    else:
        n_loops = 0
    if arr.size:
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        unique = np.unique(np.stack([lo, hi], axis=1), axis=0)
    else:
        unique = arr.reshape(0, 2)
    dups = arr.shape[0] - unique.shape[0]
    if n_loops:
        log.warning("dropped %d social self-loop(s)", n_loops)
    if dups:
        log.info("collapsed %d duplicate social edge(s)", dups)
    return SocialNetwork(n_users, unique, self_loops_dropped=n_loops,
                         duplicates_collapsed=dups)


def combine(bipartite: BipartiteNetwork, social: SocialNetwork) -> CombinedNetwork:
    """Pair the two graphs; user counts must agree."""
    if bipartite.n_users != social.n_users:
        raise NetworkMismatchError(
            f"user-count mismatch: bipartite has {bipartite.n_users}, "
            f"social has {social.n_users}")
    return CombinedNetwork(bipartite, social)
