"""SVD reduction of a linear head.

For a head (W, b) with W of shape (n, f), write W = U S V^T. Rotating an
embedding by V^T and keeping the first min(n, f) coordinates loses nothing
the head can see: the remaining directions lie in the null space of W, so
logits computed from the reduced coordinates equal logits computed from the
raw embedding. All geometry in this package runs in the reduced frame,
inside the cube [-a, a]^dim where a bounds the L2 norm of raw embeddings
(max-norm of the rotated vector never exceeds the L2 norm of the original).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import ModelHead
from .errors import DegenerateHead, DomainBoundMissing


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    z = np.asarray(z, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ReducedSpace:
    """A head expressed in its SVD frame plus the working-cube bound.

    ``head_matrix`` is U[:, :dim] * S, shape (n, dim): the head as seen from
    reduced coordinates. ``rotation`` is the full V^T, applied to embeddings
    on the way in. ``domain_bound`` is the half-width a of the working cube;
    geometry that needs the cube calls ``require_bound``.
    """

    head: ModelHead
    left: np.ndarray                 # U, (n, n)
    singular_values: np.ndarray      # (min(n, f),)
    rotation: np.ndarray             # V^T, (f, f)
    dim: int
    domain_bound: float | None = None
    head_matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        self.head_matrix = self.left[:, :self.dim] * self.singular_values[:self.dim]

    @classmethod
    def from_head(cls, head: ModelHead, domain_bound: float | None = None) -> "ReducedSpace":
        w = np.asarray(head.weights, dtype=np.float64)
        if not np.any(w):
            raise DegenerateHead("weight matrix is identically zero")
        u, s, vt = np.linalg.svd(w, full_matrices=True)
        return cls(head, u, s, vt, dim=min(head.n_classes, head.n_features),
                   domain_bound=domain_bound)

    # frame changes

    def to_reduced(self, x: np.ndarray) -> np.ndarray:
        """Rotate embeddings into the reduced frame, keeping dim coordinates."""
        x = np.asarray(x, dtype=np.float64)
        return (x @ self.rotation.T)[..., :self.dim]

    def logits_from_embedding(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.head.weights.T + self.head.bias

    def logits(self, y: np.ndarray) -> np.ndarray:
        """Logits from reduced coordinates."""
        return np.asarray(y, dtype=np.float64) @ self.head_matrix.T + self.head.bias

    def classify(self, y: np.ndarray) -> np.ndarray | int:
        """Argmax class from reduced coordinates; ties go to the smaller id."""
        z = self.logits(y)
        return int(np.argmax(z)) if z.ndim == 1 else np.argmax(z, axis=-1)

    def confidence(self, y: np.ndarray) -> np.ndarray | float:
        """Top softmax entry from reduced coordinates."""
        p = softmax(self.logits(y)).max(axis=-1)
        return float(p) if np.ndim(p) == 0 else p

    # working cube

    def require_bound(self) -> float:
        if self.domain_bound is None:
            raise DomainBoundMissing(
                "no working-cube bound set; pass one or call empirical_bound")
        return float(self.domain_bound)

    def with_bound(self, a: float) -> "ReducedSpace":
        if not np.isfinite(a) or a <= 0:
            raise ValueError(f"domain bound must be positive and finite, got {a}")
        return ReducedSpace(self.head, self.left, self.singular_values,
                            self.rotation, self.dim, float(a))

    @property
    def n_classes(self) -> int:
        return self.head.n_classes


def empirical_bound(*embedding_blocks: np.ndarray, margin: float = 1.1) -> float:
    """Largest embedding L2 norm across the given blocks, times a margin.

    The rotation preserves L2 norms, so this bounds every reduced coordinate
    in absolute value and is a valid working-cube half-width.
    """
    best = 0.0
    for block in embedding_blocks:
        if block is None or len(block) == 0:
            continue
        best = max(best, float(np.linalg.norm(np.asarray(block), axis=-1).max()))
    if best == 0.0:
        raise ValueError("no embeddings given, cannot infer a domain bound")
    return best * margin
