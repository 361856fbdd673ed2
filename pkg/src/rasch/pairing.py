"""Compile user-item responses into item-item comparisons.

Two routes are implemented.  The random disjoint route shuffles each user's
responded items, pairs them consecutively (dropping one item when the count is
odd), and keeps a comparison record only when the two responses differ.  Each
response is used at most once per split, which is what makes the resulting
comparison outcomes conditionally independent.  The overlapping route
enumerates every within-user item pair, used by the weighted and plain
pseudo-likelihood estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _rng
from .model import ResponseData, sigmoid

__all__ = [
    "SplitAssignment",
    "PairedComparisons",
    "WeightedPairs",
    "random_split",
    "compile_comparisons",
    "btl_win_prob",
    "disagreement_prob",
    "enumerate_weighted_pairs",
]


@dataclass(frozen=True)
class SplitAssignment:
    """One disjoint random pairing: rows are (user, item_hi, item_lo), item_hi > item_lo.

    ``edge_hi``/``edge_lo`` optionally carry the positions of the paired
    responses in the source data's canonical edge order; `compile_comparisons`
    uses them to skip the binary-search lookup.  Hand-built assignments may
    leave them unset.
    """

    users: np.ndarray
    items_hi: np.ndarray
    items_lo: np.ndarray
    edge_hi: np.ndarray | None = None
    edge_lo: np.ndarray | None = None

    def __post_init__(self):
        for name in ("users", "items_hi", "items_lo"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("edge_hi", "edge_lo"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.int64)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if not np.all(self.items_hi > self.items_lo):
            raise ValueError("pairs must satisfy item_hi > item_lo")

    @property
    def n_pairs(self) -> int:
        return self.users.size

    @property
    def pairs(self) -> list[tuple[int, int, int]]:
        return list(zip(self.users.tolist(), self.items_hi.tolist(), self.items_lo.tolist()))


@dataclass(frozen=True)
class PairedComparisons:
    """Item-item comparison records and their per-edge aggregates.

    A record ``(i, j, t, y)`` with ``i > j`` means user ``t`` had the pair
    selected and responded differently; ``y = 1`` iff ``X_ti < X_tj`` (item j
    "won", i.e. was the harder one).  Aggregates: ``edge_count[e]`` is the
    number of records on edge ``e = (edge_i[e], edge_j[e])`` and
    ``edge_wins_hi[e]`` the number won by the larger-indexed item.
    """

    m: int
    rec_i: np.ndarray
    rec_j: np.ndarray
    rec_t: np.ndarray
    rec_y: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_count: np.ndarray
    edge_wins_hi: np.ndarray

    def __post_init__(self):
        for name in ("rec_i", "rec_j", "rec_t", "rec_y", "edge_i", "edge_j", "edge_count"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        wins = np.asarray(self.edge_wins_hi, dtype=float)
        wins.setflags(write=False)
        object.__setattr__(self, "edge_wins_hi", wins)

    @property
    def n_records(self) -> int:
        return self.rec_i.size

    @property
    def n_edges(self) -> int:
        return self.edge_i.size

    @property
    def total_count(self) -> int:
        """Total number of effective comparisons across all edges."""
        return int(self.edge_count.sum())

    @property
    def records(self) -> list[tuple[int, int, int, int]]:
        return list(zip(self.rec_i.tolist(), self.rec_j.tolist(),
                        self.rec_t.tolist(), self.rec_y.tolist()))

    @property
    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.edge_i.tolist(), self.edge_j.tolist()))

    def degrees(self) -> np.ndarray:
        """Weighted degree of each item: total comparisons it appears in."""
        d = np.zeros(self.m)
        np.add.at(d, self.edge_i, self.edge_count)
        np.add.at(d, self.edge_j, self.edge_count)
        return d

    def count(self, i: int, j: int) -> int:
        """Number of comparison records on the unordered pair {i, j}."""
        hi, lo = max(i, j), min(i, j)
        hit = (self.edge_i == hi) & (self.edge_j == lo)
        return int(self.edge_count[hit].sum())

    def mean_outcome(self, i: int, j: int) -> float:
        """Average of ``Y_ij`` over records on {i, j}: fraction won by ``j``."""
        hi, lo = max(i, j), min(i, j)
        hit = (self.edge_i == hi) & (self.edge_j == lo)
        if not hit.any():
            raise KeyError(f"no comparisons on pair ({i}, {j})")
        n = float(self.edge_count[hit].sum())
        wins_hi = float(self.edge_wins_hi[hit].sum())
        frac_hi = wins_hi / n
        return frac_hi if j > i else 1.0 - frac_hi

    _DENSE_LIMIT = 64

    def count_matrix(self) -> np.ndarray:
        """Dense symmetric L matrix; only for m <= 64."""
        if self.m > self._DENSE_LIMIT:
            raise ValueError(f"dense matrix only supported for m <= {self._DENSE_LIMIT}")
        L = np.zeros((self.m, self.m))
        L[self.edge_i, self.edge_j] = self.edge_count
        L[self.edge_j, self.edge_i] = self.edge_count
        return L

    def mean_matrix(self) -> np.ndarray:
        """Dense matrix of averaged outcomes Y_ij (NaN off the edge set); m <= 64."""
        if self.m > self._DENSE_LIMIT:
            raise ValueError(f"dense matrix only supported for m <= {self._DENSE_LIMIT}")
        Y = np.full((self.m, self.m), np.nan)
        frac_hi = self.edge_wins_hi / self.edge_count
        Y[self.edge_j, self.edge_i] = frac_hi        # Y_ji: fraction won by i = hi
        Y[self.edge_i, self.edge_j] = 1.0 - frac_hi  # Y_ij: fraction won by j = lo
        return Y

    def to_csv(self, path) -> None:
        """Debug export: ``item_i,item_j,wins_ij,losses_ij`` per aggregated edge."""
        with open(path, "w") as fh:
            fh.write("item_i,item_j,wins_ij,losses_ij\n")
            for i, j, n, w in zip(self.edge_i, self.edge_j, self.edge_count, self.edge_wins_hi):
                fh.write(f"{i},{j},{int(w)},{int(n - w)}\n")


@dataclass(frozen=True)
class WeightedPairs:
    """All overlapping within-user comparisons with per-record weights.

    Rows keep only pairs with differing responses (equal responses contribute
    nothing to the pseudo-likelihood or its derivatives).  ``y = 1`` iff the
    smaller-indexed item won.  Weights are ``mt_even / (m_t (m_t - 1))`` for
    the weighted scheme (``mt_even`` = largest even number <= m_t) and 1 for
    the plain one.
    """

    m: int
    users: np.ndarray
    items_hi: np.ndarray
    items_lo: np.ndarray
    y: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for name in ("users", "items_hi", "items_lo", "y"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        w = np.asarray(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_records(self) -> int:
        return self.users.size

    @property
    def records(self) -> list[tuple[int, int, int, int, float]]:
        return list(zip(self.items_hi.tolist(), self.items_lo.tolist(),
                        self.users.tolist(), self.y.tolist(), self.weights.tolist()))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def random_split(data: ResponseData, seed: int, split_index: int = 0) -> SplitAssignment:
    """Disjoint random pairing of each user's responded items.

    Shuffling a user's items and taking consecutive disjoint pairs yields a
    uniformly random perfect matching on a uniformly random even-sized subset
    (the left-over item of an odd count is uniform).  ``split_index`` selects
    an independent sub-stream, so repeated splits of the same data never share
    randomness.
    """
    rng = _rng.substream(seed, _rng.SPLIT, split_index)
    keys = rng.random(data.n_edges)
    # stable grouping by user, random order within each user's block; the
    # combined float key is faster than lexsort and keeps >= 31 bits of key
    # resolution as long as the user-id part stays small
    if data.n_users <= 2**20:
        order = np.argsort(data.user_ids * 2.0 + keys, kind="stable")
    else:
        order = np.lexsort((keys, data.user_ids))
    slots = data._pair_slots
    idx_a = order[slots]
    idx_b = order[slots + 1]
    items_a = data.item_ids[idx_a]
    items_b = data.item_ids[idx_b]
    a_is_hi = items_a >= items_b
    return SplitAssignment(
        users=data.user_ids[idx_a],
        items_hi=np.where(a_is_hi, items_a, items_b),
        items_lo=np.where(a_is_hi, items_b, items_a),
        edge_hi=np.where(a_is_hi, idx_a, idx_b),
        edge_lo=np.where(a_is_hi, idx_b, idx_a),
    )


def _lookup_edges(data: ResponseData, users: np.ndarray, items: np.ndarray) -> np.ndarray:
    """Indices of (user, item) pairs in the data's canonical edge order."""
    key = data.edge_key
    want = users * data.n_items + items
    pos = np.searchsorted(key, want)
    bad = (pos >= key.size) | (key[np.minimum(pos, key.size - 1)] != want)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"split references edge (user {int(users[k])}, item {int(items[k])}) absent from data"
        )
    return pos


def _split_edge_indices(data: ResponseData, split: SplitAssignment) -> tuple[np.ndarray, np.ndarray]:
    if split.edge_hi is not None and split.edge_lo is not None:
        n = data.n_edges
        idx_hi, idx_lo = split.edge_hi, split.edge_lo
        ok = (
            idx_hi.size == split.users.size
            and idx_lo.size == split.users.size
            and (idx_hi < n).all() and (idx_hi >= 0).all()
            and (idx_lo < n).all() and (idx_lo >= 0).all()
            and np.array_equal(data.user_ids[idx_hi], split.users)
            and np.array_equal(data.user_ids[idx_lo], split.users)
            and np.array_equal(data.item_ids[idx_hi], split.items_hi)
            and np.array_equal(data.item_ids[idx_lo], split.items_lo)
        )
        if not ok:
            raise ValueError("split edge indices do not match the given data")
        return idx_hi, idx_lo
    return (_lookup_edges(data, split.users, split.items_hi),
            _lookup_edges(data, split.users, split.items_lo))


def compile_comparisons(data: ResponseData, split: SplitAssignment) -> PairedComparisons:
    """Turn a split into comparison records, dropping pairs with equal responses."""
    idx_hi, idx_lo = _split_edge_indices(data, split)
    x_hi = data.responses[idx_hi]
    x_lo = data.responses[idx_lo]
    keep = x_hi != x_lo
    rec_i = split.items_hi[keep]
    rec_j = split.items_lo[keep]
    rec_t = split.users[keep]
    rec_y = (x_hi[keep] < x_lo[keep]).astype(np.int64)  # Y_ij = 1{X_ti < X_tj}
    return _aggregate(data.n_items, rec_i, rec_j, rec_t, rec_y)


def _aggregate(m, rec_i, rec_j, rec_t, rec_y):
    ekey = rec_i * m + rec_j
    if m * m <= 4_000_000:
        # dense bins beat a sort for the small item counts this package targets
        all_counts = np.bincount(ekey, minlength=m * m)
        uniq = np.flatnonzero(all_counts)
        count = all_counts[uniq]
        wins_hi = np.bincount(ekey, weights=(1 - rec_y).astype(float), minlength=m * m)[uniq]
    else:
        uniq, inverse = np.unique(ekey, return_inverse=True)
        count = np.bincount(inverse, minlength=uniq.size).astype(np.int64)
        wins_hi = np.bincount(inverse, weights=(1 - rec_y).astype(float), minlength=uniq.size)
    return PairedComparisons(
        m=m, rec_i=rec_i, rec_j=rec_j, rec_t=rec_t, rec_y=rec_y,
        edge_i=(uniq // m), edge_j=(uniq % m), edge_count=count, edge_wins_hi=wins_hi,
    )


def btl_win_prob(theta_i: float, theta_j: float):
    """``P[X_ti < X_tj | responses differ] = e^theta_j / (e^theta_i + e^theta_j)``.

    Conditioned on a disagreement, the comparison outcome follows the
    Bradley-Terry-Luce law in the item parameters alone; the user parameter
    cancels.
    """
    return sigmoid(np.asarray(theta_j, float) - np.asarray(theta_i, float))


def disagreement_prob(theta_i: float, theta_j: float, zeta_t: float):
    """``P[X_ti != X_tj]`` for one user responding to both items.

    Closed form ``(e^(a) + e^(b)) / ((1 + e^a)(1 + e^b))`` with
    ``a = theta_i - zeta_t`` and ``b = theta_j - zeta_t``, evaluated in
    logistic form.  Bounded below by ``2*kappa2/(1+kappa2)^2`` whenever both
    offsets are within ``log(kappa2)``.
    """
    a = np.asarray(theta_i, float) - np.asarray(zeta_t, float)
    b = np.asarray(theta_j, float) - np.asarray(zeta_t, float)
    out = sigmoid(a) * sigmoid(-b) + sigmoid(-a) * sigmoid(b)
    return out if np.ndim(out) else float(out)


def enumerate_weighted_pairs(data: ResponseData, scheme: str) -> WeightedPairs:
    """Every within-user item pair with differing responses, weighted per scheme.

    ``scheme="wp"`` uses ``mt_even / (m_t (m_t - 1))``; ``scheme="pmle"`` uses
    unit weights.  Deterministic: no randomness is involved.
    """
    if scheme not in ("wp", "pmle"):
        raise ValueError(f"unknown scheme {scheme!r}; expected 'wp' or 'pmle'")
    indptr = data.user_indptr
    counts = np.diff(indptr)
    idx_a, idx_b = _within_user_pairs(indptr)
    x_a = data.responses[idx_a]
    x_b = data.responses[idx_b]
    keep = x_a != x_b
    idx_a, idx_b, x_a, x_b = idx_a[keep], idx_b[keep], x_a[keep], x_b[keep]
    users = data.user_ids[idx_a]
    items_a = data.item_ids[idx_a]
    items_b = data.item_ids[idx_b]
    hi = np.maximum(items_a, items_b)
    lo = np.minimum(items_a, items_b)
    x_hi = np.where(items_a >= items_b, x_a, x_b)
    y = (x_hi == 0).astype(np.int64)  # lower-indexed item won iff X_hi < X_lo
    if scheme == "wp":
        mt = counts[users].astype(float)
        mt_even = mt - (mt.astype(np.int64) % 2)
        weights = mt_even / (mt * (mt - 1.0))
    else:
        weights = np.ones(users.size)
    return WeightedPairs(m=data.n_items, users=users, items_hi=hi, items_lo=lo,
                         y=y, weights=weights)


def _within_user_pairs(indptr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Global edge-index pairs (a, b), a before b, for all within-user pairs.

    Users are grouped by their response count so each group expands one
    ``triu_indices`` template; cost is linear in the number of emitted pairs.
    """
    counts = np.diff(indptr)
    starts = indptr[:-1]
    out_a, out_b = [], []
    for c in np.unique(counts):
        if c < 2:
            continue
        tri_a, tri_b = np.triu_indices(int(c), k=1)
        s = starts[counts == c]
        out_a.append((s[:, None] + tri_a[None, :]).ravel())
        out_b.append((s[:, None] + tri_b[None, :]).ravel())
    if not out_a:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    return np.concatenate(out_a), np.concatenate(out_b)
