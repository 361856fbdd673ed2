"""Negative log-likelihood of aggregated pairwise comparisons and its minimizers.

The objective lives on the zero-sum subspace: each term couples one item pair
through the difference ``theta_i - theta_j``, so the loss is invariant to a
common shift and its Hessian is a weighted graph Laplacian.  The default
minimizer is a damped Newton iteration with the rank-completion trick
(``H + 11^T/m`` is positive definite whenever the comparison graph is
connected); a preconditioned gradient descent is kept as an alternative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedGraphError, DivergenceError
from .laplacian import WeightedLaplacian, _from_edges, connected_components, pseudo_inverse
from .model import log1pexp, sigmoid
from .pairing import PairedComparisons, WeightedPairs

__all__ = [
    "BtlObjective",
    "SolverOptions",
    "PgdOptions",
    "SolveResult",
    "nll",
    "gradient",
    "hessian",
    "solve_newton",
    "solve_pgd",
]


@dataclass(frozen=True)
class BtlObjective:
    """Aggregated comparison terms ``(item_i, item_j, weight, wins_i)``.

    One term per unordered item pair with ``item_i > item_j``.  ``weight`` is
    the (possibly weighted) number of comparisons on the pair and ``wins_i``
    the weighted number won by ``item_i``; ``0 <= wins_i <= weight``.
    """

    m: int
    item_i: np.ndarray
    item_j: np.ndarray
    weight: np.ndarray
    wins_i: np.ndarray

    def __post_init__(self):
        item_i = np.asarray(self.item_i, np.int64)
        item_j = np.asarray(self.item_j, np.int64)
        weight = np.asarray(self.weight, float)
        wins = np.asarray(self.wins_i, float)
        if not (item_i.shape == item_j.shape == weight.shape == wins.shape):
            raise ValueError("term arrays must have equal shapes")
        if item_i.size:
            if not np.all(item_i > item_j):
                raise ValueError("terms must satisfy item_i > item_j")
            if item_i.max() >= self.m or item_j.min() < 0:
                raise ValueError("item index out of range")
            if not np.all(weight > 0):
                raise ValueError("weights must be positive")
            if np.any(wins < -1e-12) or np.any(wins > weight + 1e-12):
                raise ValueError("wins_i must lie in [0, weight]")
        for name, arr in (("item_i", item_i), ("item_j", item_j),
                          ("weight", weight), ("wins_i", wins)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_terms(self) -> int:
        return self.item_i.size

    def components(self) -> list[list[int]]:
        return connected_components(self.m, self.item_i, self.item_j)

    @classmethod
    def from_comparisons(cls, pc: PairedComparisons) -> "BtlObjective":
        return cls(m=pc.m, item_i=pc.edge_i, item_j=pc.edge_j,
                   weight=pc.edge_count.astype(float), wins_i=pc.edge_wins_hi)

    @classmethod
    def from_weighted_pairs(cls, wp: WeightedPairs) -> "BtlObjective":
        key = wp.items_hi * wp.m + wp.items_lo
        uniq, inverse = np.unique(key, return_inverse=True)
        weight = np.bincount(inverse, weights=wp.weights, minlength=uniq.size)
        wins_hi = np.bincount(inverse, weights=wp.weights * (1 - wp.y), minlength=uniq.size)
        return cls(m=wp.m, item_i=uniq // wp.m, item_j=uniq % wp.m,
                   weight=weight, wins_i=wins_hi)


@dataclass(frozen=True)
class SolverOptions:
    """Newton stopping rules.

    ``divergence_bound`` caps the fitted parameter spread (max minus min) and
    flags a nonexistent MLE (all-wins or all-losses item).  Such an item
    drifts until float64 saturates the logistic, which happens once its gap
    to every opponent reaches ``log(weight/tol) >= 23``, so the iterates must
    cross the default bound of 20 on the way; legitimate fits stay well below
    it (true spreads in this package's experiments are at most log-kappa =
    10).  Raise the bound when fitting wider parameter ranges.
    """

    tol: float = 1e-10
    max_iter: int = 100
    divergence_bound: float = 20.0


@dataclass(frozen=True)
class PgdOptions:
    eta: float | None = None  # None: 1 / lambda_1 of the preconditioned curvature bound
    tol: float = 1e-10
    max_iter: int = 20000
    divergence_bound: float = 20.0


@dataclass(frozen=True)
class SolveResult:
    theta_hat: np.ndarray
    grad_inf_norm: float
    iterations: int
    converged: bool
    diverged: bool = False

    def __post_init__(self):
        theta = np.asarray(self.theta_hat, float)
        theta.setflags(write=False)
        object.__setattr__(self, "theta_hat", theta)


def nll(obj: BtlObjective, theta: np.ndarray) -> float:
    """``sum_e (-wins_i * (theta_i - theta_j) + weight * log(1 + e^(theta_i - theta_j)))``."""
    diff = _diff(obj, theta)
    return float(np.sum(-obj.wins_i * diff + obj.weight * log1pexp(diff)))


def gradient(obj: BtlObjective, theta: np.ndarray) -> np.ndarray:
    """Analytic gradient; orthogonal to the all-ones vector by construction."""
    diff = _diff(obj, theta)
    g_edge = obj.weight * sigmoid(diff) - obj.wins_i
    g = np.zeros(obj.m)
    np.add.at(g, obj.item_i, g_edge)
    np.add.at(g, obj.item_j, -g_edge)
    return g


def hessian(obj: BtlObjective, theta: np.ndarray) -> WeightedLaplacian:
    """Hessian as a weighted Laplacian with weights ``weight * sigma'(diff)``."""
    diff = _diff(obj, theta)
    s = sigmoid(diff)
    return _from_edges(obj.m, obj.item_i, obj.item_j, obj.weight * s * (1.0 - s))


def _diff(obj: BtlObjective, theta) -> np.ndarray:
    theta = np.asarray(theta, float)
    if theta.shape != (obj.m,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({obj.m},)")
    return theta[obj.item_i] - theta[obj.item_j]


def _check_connected(obj: BtlObjective) -> None:
    comps = obj.components()
    if len(comps) != 1:
        raise DisconnectedGraphError(comps)


def _init(obj: BtlObjective, start) -> np.ndarray:
    if start is None:
        return np.zeros(obj.m)
    theta = np.asarray(start, float).copy()
    if theta.shape != (obj.m,):
        raise ValueError(f"start has shape {theta.shape}, expected ({obj.m},)")
    return theta - theta.mean()


def solve_newton(obj: BtlObjective, opts: SolverOptions | None = None,
                 start: np.ndarray | None = None) -> SolveResult:
    """Damped Newton on the zero-sum subspace.

    Steps solve ``(H + 11^T/m) d = -g`` and are projected back to the
    zero-sum subspace, with an Armijo backtracking line search on the loss.
    Stops when the gradient sup-norm drops below ``opts.tol``.  Raises
    `DivergenceError` once the fitted spread exceeds ``divergence_bound``,
    the practical signature of a nonexistent MLE.
    """
    opts = opts or SolverOptions()
    _check_connected(obj)
    theta = _init(obj, start)
    J = np.full((obj.m, obj.m), 1.0 / obj.m)
    g = gradient(obj, theta)
    gnorm = float(np.abs(g).max())
    iterations = 0
    while gnorm > opts.tol and iterations < opts.max_iter:
        H = hessian(obj, theta).matrix + J
        step = np.linalg.solve(H, -g)
        step -= step.mean()
        f0 = nll(obj, theta)
        slope = float(g @ step)
        t = 1.0
        while t > 1e-12 and nll(obj, theta + t * step) > f0 + 1e-4 * t * slope:
            t *= 0.5
        theta = theta + t * step
        theta -= theta.mean()
        iterations += 1
        spread = float(theta.max() - theta.min())
        if spread > opts.divergence_bound:
            raise DivergenceError(spread, iterations)
        g = gradient(obj, theta)
        gnorm = float(np.abs(g).max())
    return SolveResult(theta_hat=theta, grad_inf_norm=gnorm,
                       iterations=iterations, converged=gnorm <= opts.tol)


def _default_eta(obj: BtlObjective, precond_pinv: np.ndarray) -> float:
    """Globally safe step: 1 / lambda_1 of the preconditioned curvature bound.

    The per-term curvature never exceeds ``weight / 4``, so the Hessian is
    dominated by the quarter-weighted count Laplacian at every point.
    """
    bound = _from_edges(obj.m, obj.item_i, obj.item_j, obj.weight / 4.0).matrix
    lam1 = float(np.max(np.abs(np.linalg.eigvals(precond_pinv @ bound))))
    return 1.0 / max(lam1, 1e-12)


def solve_pgd(obj: BtlObjective, precond: WeightedLaplacian,
              opts: PgdOptions | None = None,
              start: np.ndarray | None = None) -> SolveResult:
    """Preconditioned gradient descent ``theta <- theta - eta * P^+ grad``.

    ``precond`` is a Laplacian on the same items (typically the curvature
    Laplacian at the truth or at an estimate).  Starting point defaults to
    zero; pass ``start`` to begin elsewhere, e.g. at the ground truth when
    replaying the fixed-point analysis.  Non-convergence within ``max_iter``
    is reported via ``converged=False`` together with the final gradient
    norm, not raised.
    """
    opts = opts or PgdOptions()
    _check_connected(obj)
    if precond.m != obj.m:
        raise ValueError("preconditioner dimension mismatch")
    P = pseudo_inverse(precond)
    eta = _default_eta(obj, P) if opts.eta is None else float(opts.eta)
    theta = _init(obj, start)
    g = gradient(obj, theta)
    gnorm = float(np.abs(g).max())
    iterations = 0
    while gnorm > opts.tol and iterations < opts.max_iter:
        if eta == 0.0:
            break
        theta = theta - eta * (P @ g)
        theta -= theta.mean()
        iterations += 1
        spread = float(theta.max() - theta.min())
        if spread > opts.divergence_bound:
            raise DivergenceError(spread, iterations)
        g = gradient(obj, theta)
        gnorm = float(np.abs(g).max())
    return SolveResult(theta_hat=theta, grad_inf_norm=gnorm,
                       iterations=iterations, converged=gnorm <= opts.tol)
