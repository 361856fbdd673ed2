"""Item-parameter estimators and top-K selection.

Four methods share one solver.  ``rp`` pairs each user's responses once at
random and maximizes the resulting comparison likelihood; ``mrp`` repeats the
split ``n_split`` times with independent sub-streams and averages the
estimates; ``wp`` and ``pmle`` skip the splitting and use every within-user
pair, with and without the per-user reweighting.  Split ``k`` of seed ``s``
always draws from the same sub-stream, so ``mrp`` with ``n_split=1``
reproduces ``rp`` exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError
from .model import ResponseData
from .pairing import compile_comparisons, enumerate_weighted_pairs, random_split
from .solver import BtlObjective, SolveResult, SolverOptions, solve_newton

__all__ = [
    "EstimatorConfig",
    "ItemEstimate",
    "estimate",
    "rp_mle",
    "mrp_mle",
    "wp_mle",
    "pmle",
    "top_k",
    "top_k_recovery_rate",
]

METHODS = ("rp", "mrp", "wp", "pmle")


@dataclass(frozen=True)
class EstimatorConfig:
    """Method selection plus the knobs shared by all estimators.

    ``n_split`` only matters for ``mrp``; ``keep_split_estimates`` controls
    whether the per-split vectors are retained on the result.
    """

    method: str = "mrp"
    seed: int = 0
    n_split: int = 1
    solver: SolverOptions = field(default_factory=SolverOptions)
    keep_split_estimates: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.n_split < 1:
            raise ValueError("n_split must be >= 1")


@dataclass(frozen=True)
class ItemEstimate:
    """Zero-mean estimate with fit metadata.

    ``per_split_estimates`` (splits x m) and ``split_objectives`` are present
    for the split-based methods; the objectives let the inference module reuse
    the exact per-split Hessians without regenerating the pairings.
    """

    theta_hat: np.ndarray
    method: str
    seed: int | None
    n_split: int | None
    per_split_estimates: np.ndarray | None = None
    split_objectives: tuple = field(default=(), repr=False)
    solve_results: tuple = field(default=(), repr=False)

    def __post_init__(self):
        theta = np.asarray(self.theta_hat, float)
        theta.setflags(write=False)
        object.__setattr__(self, "theta_hat", theta)

    @property
    def m(self) -> int:
        return self.theta_hat.size

    @property
    def report(self) -> dict:
        """Connectivity/convergence summary of the underlying solves."""
        return {
            "solves": len(self.solve_results),
            "converged": all(r.converged for r in self.solve_results),
            "max_grad_inf_norm": max((r.grad_inf_norm for r in self.solve_results), default=0.0),
            "total_iterations": sum(r.iterations for r in self.solve_results),
        }

    def to_json(self) -> str:
        return json.dumps({
            "method": self.method,
            "theta_hat": self.theta_hat.tolist(),
            "n_split": self.n_split,
            "seed": self.seed,
        })

    @classmethod
    def from_json(cls, text: str) -> "ItemEstimate":
        obj = json.loads(text)
        return cls(theta_hat=np.asarray(obj["theta_hat"], float), method=obj["method"],
                   seed=obj["seed"], n_split=obj["n_split"])


def _solve_split(data: ResponseData, seed: int, k: int,
                 opts: SolverOptions) -> tuple[BtlObjective, SolveResult]:
    split = random_split(data, seed, split_index=k)
    pc = compile_comparisons(data, split)
    obj = BtlObjective.from_comparisons(pc)
    return obj, solve_newton(obj, opts)


def rp_mle(data: ResponseData, cfg: EstimatorConfig | None = None) -> ItemEstimate:
    """Single random pairing followed by the comparison MLE."""
    cfg = cfg or EstimatorConfig(method="rp")
    obj, res = _solve_split(data, cfg.seed, 0, cfg.solver)
    return ItemEstimate(
        theta_hat=res.theta_hat, method="rp", seed=cfg.seed, n_split=1,
        per_split_estimates=res.theta_hat[None, :] if cfg.keep_split_estimates else None,
        split_objectives=(obj,), solve_results=(res,),
    )


def mrp_mle(data: ResponseData, cfg: EstimatorConfig) -> ItemEstimate:
    """Average of ``n_split`` independent random-pairing estimates.

    Splits are solved in index order and any failure (disconnected comparison
    graph, diverging MLE) aborts the whole estimate with the failing split
    index attached: silently skipping a split would bias the average.
    """
    objectives = []
    results = []
    estimates = np.empty((cfg.n_split, data.n_items))
    for k in range(cfg.n_split):
        try:
            obj, res = _solve_split(data, cfg.seed, k, cfg.solver)
        except EstimationError as exc:
            exc.split_index = k
            raise
        objectives.append(obj)
        results.append(res)
        estimates[k] = res.theta_hat
    theta = estimates.mean(axis=0)
    theta -= theta.mean()
    return ItemEstimate(
        theta_hat=theta, method="mrp", seed=cfg.seed, n_split=cfg.n_split,
        per_split_estimates=estimates if cfg.keep_split_estimates else None,
        split_objectives=tuple(objectives), solve_results=tuple(results),
    )


def _pseudo(data: ResponseData, cfg: EstimatorConfig, scheme: str) -> ItemEstimate:
    wp = enumerate_weighted_pairs(data, scheme)
    obj = BtlObjective.from_weighted_pairs(wp)
    res = solve_newton(obj, cfg.solver)
    return ItemEstimate(theta_hat=res.theta_hat, method=scheme, seed=cfg.seed,
                        n_split=None, solve_results=(res,))


def wp_mle(data: ResponseData, cfg: EstimatorConfig | None = None) -> ItemEstimate:
    """Weighted pseudo-likelihood over all within-user pairs; deterministic."""
    return _pseudo(data, cfg or EstimatorConfig(method="wp"), "wp")


def pmle(data: ResponseData, cfg: EstimatorConfig | None = None) -> ItemEstimate:
    """Unweighted pseudo-likelihood over all within-user pairs; deterministic."""
    return _pseudo(data, cfg or EstimatorConfig(method="pmle"), "pmle")


def estimate(data: ResponseData, cfg: EstimatorConfig) -> ItemEstimate:
    """Dispatch on ``cfg.method``."""
    if cfg.method == "rp":
        return rp_mle(data, cfg)
    if cfg.method == "mrp":
        return mrp_mle(data, cfg)
    if cfg.method == "wp":
        return wp_mle(data, cfg)
    return pmle(data, cfg)


def top_k(est: ItemEstimate, K: int) -> set[int]:
    """Indices (0-based) of the K largest entries; ties broken by lowest index."""
    m = est.m
    if not 1 <= K <= m:
        raise ValueError(f"K must be in [1, {m}], got {K}")
    order = np.lexsort((np.arange(m), -est.theta_hat))
    return set(order[:K].tolist())


def top_k_recovery_rate(est: ItemEstimate, true_top: set[int]) -> float:
    """Fraction of the true top set recovered by `top_k` (same tie rule)."""
    true_top = set(true_top)
    if not true_top:
        raise ValueError("true_top must be non-empty")
    selected = top_k(est, len(true_top))
    return len(true_top & selected) / len(true_top)
