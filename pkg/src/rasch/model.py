"""Ground-truth parameters, Rasch response sampling, and condition numbers.

The generative model: user ``t`` responds to item ``i`` with a binary outcome
``X_ti`` where ``P[X_ti = 1] = sigma(theta_i - zeta_t)``.  ``X_ti = 1`` is the
negative response (the user "loses to" the item), so larger ``theta_i`` means
a harder item.  Item parameters are identified only up to a shift; the whole
package works with the zero-mean representative of ``theta``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _rng
from .errors import DataFormatError

__all__ = [
    "GroundTruth",
    "ConditionNumbers",
    "ResponseData",
    "sigmoid",
    "sigmoid_deriv",
    "log1pexp",
    "sample_ground_truth",
    "rasch_response_prob",
    "sample_responses",
    "condition_numbers",
]


# ---------------------------------------------------------------------------
# Stable logistic primitives (shared by the whole package)
# ---------------------------------------------------------------------------

def sigmoid(x):
    """Logistic function ``1 / (1 + exp(-x))``, branch-stable for |x| large."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def sigmoid_deriv(x):
    """Derivative of the logistic: ``exp(-|x|) / (1 + exp(-|x|))^2``.

    Equals ``e^a e^b / (e^a + e^b)^2`` for ``x = a - b``; maximum 1/4 at 0.
    """
    x = np.asarray(x, dtype=float)
    t = np.exp(-np.abs(x))
    out = t / (1.0 + t) ** 2
    return out if out.ndim else float(out)


def log1pexp(x):
    """``log(1 + exp(x))`` without overflow."""
    return np.logaddexp(0.0, x)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroundTruth:
    """True item parameters ``theta_star`` (zero mean) and user parameters
    ``zeta_star``.

    ``theta_star`` is mean-shifted at construction: every downstream identity
    (loss gradients, Laplacian null space, confidence intervals) assumes the
    zero-sum representative.  ``zeta_star`` is stored as given.
    """

    theta_star: np.ndarray
    zeta_star: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float)
        zeta = np.asarray(self.zeta_star, dtype=float)
        if theta.ndim != 1 or zeta.ndim != 1 or theta.size < 1 or zeta.size < 1:
            raise ValueError("theta_star and zeta_star must be non-empty 1-d vectors")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(zeta))):
            raise ValueError("parameters must be finite")
        theta = theta - theta.mean()
        theta.setflags(write=False)
        zeta = zeta.copy()
        zeta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "zeta_star", zeta)

    @property
    def m(self) -> int:
        return self.theta_star.size

    @property
    def n(self) -> int:
        return self.zeta_star.size

    def to_json(self) -> str:
        return json.dumps({"theta": self.theta_star.tolist(), "zeta": self.zeta_star.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        obj = json.loads(text)
        return cls(np.asarray(obj["theta"], float), np.asarray(obj["zeta"], float))


@dataclass(frozen=True)
class ConditionNumbers:
    """Exponentials of the parameter ranges.

    ``kappa1 = exp(max_ij |theta_i - theta_j|)`` measures the item spread,
    ``kappa2 = exp(max_ti |zeta_t - theta_i|)`` the user-item spread, and
    ``kappa = max(kappa1, kappa2)``.  All are >= 1.
    """

    kappa1: float
    kappa2: float
    kappa: float


@dataclass(frozen=True)
class ResponseData:
    """Sparse binary user-item responses.

    Edges are stored as parallel arrays sorted by ``(user_id, item_id)`` with
    no duplicate pairs.  ``responses`` holds ``X_ti`` in {0, 1} with the
    negative-response convention of the model.
    """

    n_users: int
    n_items: int
    user_ids: np.ndarray
    item_ids: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        users = np.asarray(self.user_ids, dtype=np.int64)
        items = np.asarray(self.item_ids, dtype=np.int64)
        resp = np.asarray(self.responses, dtype=np.int64)
        if not (users.shape == items.shape == resp.shape) or users.ndim != 1:
            raise ValueError("edge arrays must be 1-d and of equal length")
        if users.size:
            if users.min() < 0 or users.max() >= self.n_users:
                raise ValueError("user_id out of range")
            if items.min() < 0 or items.max() >= self.n_items:
                raise ValueError("item_id out of range")
            if not np.isin(resp, (0, 1)).all():
                raise ValueError("responses must be 0 or 1")
            order = np.lexsort((items, users))
            users, items, resp = users[order], items[order], resp[order]
            key = users * self.n_items + items
            if np.any(np.diff(key) == 0):
                raise ValueError("duplicate (user, item) pair")
        for name, arr in (("user_ids", users), ("item_ids", items), ("responses", resp)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_edges(self) -> int:
        return self.user_ids.size

    @property
    def edges(self) -> list[tuple[int, int, int]]:
        """Edge list as (user_id, item_id, response) tuples.  O(n_edges)."""
        return list(zip(self.user_ids.tolist(), self.item_ids.tolist(), self.responses.tolist()))

    @cached_property
    def user_indptr(self) -> np.ndarray:
        """CSR-style offsets: edges of user ``t`` live in ``[indptr[t], indptr[t+1])``."""
        counts = np.bincount(self.user_ids, minlength=self.n_users)
        return np.concatenate(([0], np.cumsum(counts)))

    @cached_property
    def edge_key(self) -> np.ndarray:
        """Sorted combined key ``user * n_items + item`` for fast edge lookup."""
        return self.user_ids * self.n_items + self.item_ids

    @cached_property
    def _pair_slots(self) -> np.ndarray:
        """Positions (in any per-user ordering) where consecutive pairing starts.

        Within each user's block of length L these are offsets 0, 2, ... below
        2*floor(L/2); the mask depends only on block sizes, so it is shared by
        every random split of this data.
        """
        counts = np.diff(self.user_indptr)
        local = np.arange(self.n_edges) - np.repeat(self.user_indptr[:-1], counts)
        blocklen = np.repeat(counts, counts)
        return np.flatnonzero((local % 2 == 0) & (local + 1 < blocklen))

    def user_degrees(self) -> np.ndarray:
        """Number of responses per user (``m_t``)."""
        return np.diff(self.user_indptr)

    # -- serialization ------------------------------------------------------

    CSV_HEADER = "user_id,item_id,response"

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for t, i, x in zip(self.user_ids, self.item_ids, self.responses):
                fh.write(f"{t},{i},{x}\n")

    @classmethod
    def from_csv(cls, path, n_users: int | None = None, n_items: int | None = None) -> "ResponseData":
        """Parse the ``user_id,item_id,response`` format written by `to_csv`.

        A ``correct`` third column is also accepted and inverted into the
        model's negative-response convention (``X = 1 - correct``).
        Dimensions default to ``max id + 1``.
        """
        users, items, resp = [], [], []
        with open(path) as fh:
            header = fh.readline().strip()
            cols = header.split(",")
            if len(cols) != 3 or cols[:2] != ["user_id", "item_id"] or cols[2] not in ("response", "correct"):
                raise DataFormatError(f"unrecognized header {header!r}", line=1)
            invert = cols[2] == "correct"
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != 3:
                    raise DataFormatError(f"expected 3 fields, got {len(parts)}", line=lineno)
                try:
                    t, i, x = int(parts[0]), int(parts[1]), int(parts[2])
                except ValueError:
                    raise DataFormatError(f"non-integer field in {line!r}", line=lineno) from None
                if x not in (0, 1):
                    raise DataFormatError(f"response must be 0 or 1, got {x}", line=lineno)
                users.append(t)
                items.append(i)
                resp.append(1 - x if invert else x)
        if n_users is None:
            n_users = max(users, default=-1) + 1
        if n_items is None:
            n_items = max(items, default=-1) + 1
        try:
            return cls(n_users, n_items,
                       np.asarray(users, np.int64), np.asarray(items, np.int64),
                       np.asarray(resp, np.int64))
        except ValueError as exc:
            raise DataFormatError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def _parse_spec(spec):
    """Normalize a distribution spec.

    Accepted forms: ``"standard-normal"``, ``"all-zeros"``, ``"uniform:HIGH"``
    (uniform on [0, HIGH], HIGH = log kappa), ``"explicit:v1,v2,..."``, or a
    sequence of floats (treated as explicit).
    """
    if isinstance(spec, str):
        if spec == "standard-normal":
            return ("normal",)
        if spec == "all-zeros":
            return ("zeros",)
        if spec.startswith("uniform:"):
            high = float(spec.split(":", 1)[1])
            if not (np.isfinite(high) and high >= 0):
                raise ValueError(f"uniform spec needs a finite upper bound >= 0, got {high}")
            return ("uniform", high)
        if spec.startswith("explicit:"):
            values = np.asarray([float(v) for v in spec.split(":", 1)[1].split(",")], float)
            return ("explicit", values)
        raise ValueError(f"unknown distribution spec {spec!r}")
    values = np.asarray(spec, dtype=float)
    if values.ndim != 1:
        raise ValueError("explicit spec must be a 1-d vector")
    return ("explicit", values)


def _draw(parsed, size, rng):
    kind = parsed[0]
    if kind == "normal":
        return rng.standard_normal(size)
    if kind == "zeros":
        return np.zeros(size)
    if kind == "uniform":
        return rng.uniform(0.0, parsed[1], size)
    values = parsed[1]
    if values.size != size:
        raise ValueError(f"explicit vector has length {values.size}, expected {size}")
    return values.copy()


def sample_ground_truth(n: int, m: int, spec, seed: int = 0, zeta_spec=None) -> GroundTruth:
    """Draw item and user parameters and shift both to zero mean.

    ``spec`` applies to both vectors unless ``zeta_spec`` overrides the user
    side.  Draw order (theta first, then zeta) is part of the seed contract.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 users and m >= 1 items")
    theta_parsed = _parse_spec(spec)
    zeta_parsed = theta_parsed if zeta_spec is None else _parse_spec(zeta_spec)
    rng = _rng.substream(seed, _rng.GROUND_TRUTH)
    theta = _draw(theta_parsed, m, rng)
    zeta = _draw(zeta_parsed, n, rng)
    return GroundTruth(theta, zeta - zeta.mean())


def rasch_response_prob(theta_i: float, zeta_t: float):
    """``P[X_ti = 1] = e^theta_i / (e^zeta_t + e^theta_i)``, i.e. ``sigma(theta_i - zeta_t)``."""
    return sigmoid(np.asarray(theta_i, float) - np.asarray(zeta_t, float))


def sample_responses(gt: GroundTruth, p: float, seed: int = 0, mode: str = "bernoulli") -> ResponseData:
    """Sample the bipartite response graph and the binary responses.

    ``mode="bernoulli"``: each (user, item) pair is observed independently
    with probability ``p``.  ``mode="uniform-mp"``: each user responds to
    exactly ``m*p`` items chosen uniformly at random (``m*p`` must be a
    positive integer).  Pure function of ``(gt, p, seed, mode)``.
    """
    n, m = gt.n, gt.m
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    edge_rng = _rng.substream(seed, _rng.EDGES)
    if mode == "bernoulli":
        mask = edge_rng.random((n, m)) < p
        users, items = np.nonzero(mask)
    elif mode == "uniform-mp":
        mp = m * p
        mp_int = int(round(mp))
        if abs(mp - mp_int) > 1e-9 or not 1 <= mp_int <= m:
            raise ValueError(f"uniform-mp mode needs m*p a positive integer <= m, got {mp}")
        # argsort of i.i.d. keys = uniform sample of mp items per user
        chosen = np.argsort(edge_rng.random((n, m)), axis=1)[:, :mp_int]
        chosen = np.sort(chosen, axis=1)
        users = np.repeat(np.arange(n, dtype=np.int64), mp_int)
        items = chosen.ravel().astype(np.int64)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    resp_rng = _rng.substream(seed, _rng.RESPONSES)
    probs = sigmoid(gt.theta_star[items] - gt.zeta_star[users])
    responses = (resp_rng.random(users.size) < probs).astype(np.int64)
    return ResponseData(n, m, users.astype(np.int64), items.astype(np.int64), responses)


def condition_numbers(gt: GroundTruth) -> ConditionNumbers:
    """Compute ``kappa1``, ``kappa2``, and their maximum."""
    theta, zeta = gt.theta_star, gt.zeta_star
    k1 = float(np.exp(theta.max() - theta.min())) if theta.size > 1 else 1.0
    k2 = float(np.exp(max(zeta.max() - theta.min(), theta.max() - zeta.min(), 0.0)))
    return ConditionNumbers(kappa1=k1, kappa2=k2, kappa=max(k1, k2))
