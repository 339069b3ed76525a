"""Softmax confidence as a function of flip distance.

With delta the distance to the nearest decision boundary and r a pairwise
row-difference norm of the reduced head matrix, the top softmax entry obeys

    lower:  exp(delta r) / (exp(delta r) + (n - 1))   with r = rho, the
            smallest pairwise norm (class-agnostic form)
    upper:  exp(delta r') / (exp(delta r') + 1)       with r' = rho_max,
            the largest pairwise norm, when some boundary is within delta

and the lower bound inverts in closed form to the distance needed for a
target confidence tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRows, TauOutOfRange
from .features import ReducedSpace


@dataclass
class BoundParams:
    """Pairwise row-difference norms of the reduced head."""

    pair_norms: np.ndarray    # (n, n) symmetric, zero diagonal
    rho_min: float
    rho_max: float
    n_classes: int

    def min_norm_from(self, i: int) -> float:
        """Smallest row-difference norm among pairs involving class i."""
        row = np.delete(self.pair_norms[i], i)
        return float(row.min())


def compute_bound_params(space: ReducedSpace) -> BoundParams:
    hm = space.head_matrix
    n = hm.shape[0]
    diff = hm[:, None, :] - hm[None, :, :]
    norms = np.sqrt((diff ** 2).sum(axis=2))
    off = norms[~np.eye(n, dtype=bool)]
    rho = float(off.min())
    if rho < 1e-12:
        raise DegenerateRows("two head rows coincide, pairwise norms collapse")
    return BoundParams(norms, rho, float(off.max()), n)


def confidence_lower_bound(delta: float, norm: float, n: int) -> float:
    """Least possible top softmax when every boundary is at least delta away."""
    if delta < 0:
        raise TauOutOfRange(f"distance must be nonnegative, got {delta}")
    if n < 2:
        raise TauOutOfRange(f"need at least two classes, got {n}")
    # 1 / (1 + (n-1) exp(-delta norm)), stable for large exponents
    return 1.0 / (1.0 + (n - 1) * math.exp(-delta * norm))


def confidence_upper_bound(delta: float, norm: float) -> float:
    """Greatest possible top softmax when some boundary is within delta."""
    if delta < 0:
        raise TauOutOfRange(f"distance must be nonnegative, got {delta}")
    return 1.0 / (1.0 + math.exp(-delta * norm))


def delta_for_confidence(tau: float, norm: float, n: int) -> float:
    """Boundary clearance that guarantees top softmax >= tau.

    Inverse of the lower bound; tau must lie strictly between 1/n and 1.
    """
    if n < 2:
        raise TauOutOfRange(f"need at least two classes, got {n}")
    if not (1.0 / n < tau < 1.0):
        raise TauOutOfRange(f"tau must lie in (1/{n}, 1), got {tau}")
    if norm <= 0:
        raise DegenerateRows(f"norm must be positive, got {norm}")
    return math.log(tau * (n - 1) / (1.0 - tau)) / norm
