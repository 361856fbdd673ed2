"""Exception hierarchy shared across the estimation pipeline."""

from __future__ import annotations


class EstimationError(Exception):
    """Base class for data or estimation failures (CLI exit code 3)."""


class DataFormatError(EstimationError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DisconnectedGraphError(EstimationError):
    """Comparison graph is not connected, so the MLE is not identified.

    ``components`` holds the vertex partition (list of item-id lists);
    ``split_index`` is set when the failure happened inside a multi-split run.
    """

    def __init__(self, components, split_index: int | None = None):
        self.components = [sorted(c) for c in components]
        self.split_index = split_index
        where = "" if split_index is None else f" (split {split_index})"
        sizes = sorted((len(c) for c in self.components), reverse=True)
        super().__init__(
            f"comparison graph is disconnected{where}: "
            f"{len(self.components)} components of sizes {sizes}"
        )


class DivergenceError(EstimationError):
    """Solver iterates left the trust region: the MLE does not exist.

    Typical cause is an item that won or lost every one of its comparisons,
    which sends the fitted parameter spread (max minus min) to infinity.
    """

    def __init__(self, spread: float, iterations: int, split_index: int | None = None):
        self.spread = spread
        self.iterations = iterations
        self.split_index = split_index
        where = "" if split_index is None else f" (split {split_index})"
        super().__init__(
            f"solver diverged{where}: parameter spread {spread:.3g} "
            f"after {iterations} iterations; an item likely has an all-wins "
            f"or all-losses record"
        )
