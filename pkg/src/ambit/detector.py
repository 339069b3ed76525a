"""Failure detector over the four ambiguity components.

A small logistic model, trained by Newton steps on standardized features,
separates normal samples from planted failures (OOD, adversarial,
misclassified). The model family is deliberately boring: four weights and
a bias are auditable at a glance, deterministic to train, and already
enough when the geometry separates the populations.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import (ColumnMismatch, DegenerateColumn, EmptyClassSet,
                     SingleClassLabels, ValidationError)

FEATURE_COLUMNS = ("hull_min", "gap", "flip_min", "class_margin")
SENTINEL_CAP = 1e6


@dataclass
class FeatureTable:
    ids: list
    x: np.ndarray                 # (N, 4), sentinel-clamped, finite
    y: np.ndarray | None = None   # (N,), 1 = undesirable

    def __len__(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_profiles(cls, profiles, label: int | None = None,
                      cap: float = SENTINEL_CAP) -> "FeatureTable":
        profiles = list(profiles)
        ids = [p.sample_id for p in profiles]
        rows = np.array([[p.hull_min, p.gap, p.flip_min, p.class_margin]
                         for p in profiles], dtype=np.float64)
        rows = rows.reshape(-1, len(FEATURE_COLUMNS))
        rows = np.where(np.isfinite(rows), rows, cap)
        rows = np.clip(rows, -cap, cap)
        y = None if label is None else np.full(len(profiles), label, np.int64)
        return cls(ids, rows, y)

    def labeled(self, label: int) -> "FeatureTable":
        return FeatureTable(self.ids, self.x,
                            np.full(len(self), label, np.int64))


def split_table(table: FeatureTable, fractions=(0.70, 0.15, 0.15)):
    """Deterministic train/val/test split keyed on sha1 of each row id."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError("split fractions must sum to 1")
    edges = (fractions[0], fractions[0] + fractions[1])
    buckets = ([], [], [])
    for row, sid in enumerate(table.ids):
        h = hashlib.sha1(str(sid).encode("utf-8")).hexdigest()[:8]
        u = int(h, 16) / 2 ** 32
        buckets[0 if u < edges[0] else 1 if u < edges[1] else 2].append(row)
    out = []
    for rows in buckets:
        idx = np.array(rows, dtype=np.int64)
        out.append(FeatureTable(
            [table.ids[r] for r in rows], table.x[idx],
            None if table.y is None else table.y[idx]))
    return tuple(out)


@dataclass
class DetectorModel:
    weights: np.ndarray           # over kept columns
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    kept: list                    # indices into the fixed 4-column layout
    lam: float
    iterations: int
    converged: bool
    dropped: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "weights": self.weights.tolist(), "bias": self.bias,
            "mean": self.mean.tolist(), "scale": self.scale.tolist(),
            "kept": list(self.kept), "dropped": list(self.dropped),
            "lambda": self.lam, "iterations": self.iterations,
            "converged": self.converged,
            "columns": list(FEATURE_COLUMNS),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DetectorModel":
        d = json.loads(text)
        return cls(np.array(d["weights"]), float(d["bias"]),
                   np.array(d["mean"]), np.array(d["scale"]),
                   list(d["kept"]), float(d["lambda"]),
                   int(d["iterations"]), bool(d["converged"]),
                   list(d["dropped"]))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def train_detector(positive: FeatureTable, negative: FeatureTable,
                   lam: float = 1e-4, max_iter: int = 10_000,
                   grad_tol: float = 1e-8) -> DetectorModel:
    """Weighted L2-regularized logistic fit by full Newton steps.

    Standardization is fitted on the union of both tables; zero-variance
    columns are dropped with a DegenerateColumn warning. Class imbalance is
    offset by inverse-frequency sample weights. The bias is unpenalized.
    """
    if len(positive) == 0 or len(negative) == 0:
        raise EmptyClassSet("need at least one row in each class")
    x = np.vstack([positive.x, negative.x])
    y = np.concatenate([np.ones(len(positive)), np.zeros(len(negative))])

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    kept = [c for c in range(x.shape[1]) if std[c] > 1e-12]
    dropped = [c for c in range(x.shape[1]) if std[c] <= 1e-12]
    for c in dropped:
        warnings.warn(f"feature column {FEATURE_COLUMNS[c]!r} is constant; dropped",
                      DegenerateColumn)
    if not kept:
        raise EmptyClassSet("every feature column is constant")
    xs = (x[:, kept] - mean[kept]) / std[kept]

    n = y.size
    s = np.where(y == 1, n / (2.0 * len(positive)), n / (2.0 * len(negative)))
    d = len(kept)
    design = np.hstack([xs, np.ones((n, 1))])
    ridge = np.append(np.full(d, lam), 0.0)

    theta = np.zeros(d + 1)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = _sigmoid(design @ theta)
        grad = design.T @ (s * (p - y)) + ridge * theta
        if float(np.linalg.norm(grad)) <= grad_tol:
            converged = True
            break
        w_h = s * p * (1.0 - p)
        hess = design.T @ (design * w_h[:, None]) + np.diag(ridge + 1e-12)
        theta = theta - np.linalg.solve(hess, grad)

    return DetectorModel(theta[:d].copy(), float(theta[d]),
                         mean[kept].copy(), std[kept].copy(),
                         kept, lam, it, converged, dropped)


def detect(model: DetectorModel, table: FeatureTable) -> np.ndarray:
    """Per-row failure score in (0, 1)."""
    if table.x.shape[1] != len(FEATURE_COLUMNS):
        raise ColumnMismatch(
            f"expected {len(FEATURE_COLUMNS)} columns, got {table.x.shape[1]}")
    xs = (table.x[:, model.kept] - model.mean) / model.scale
    return _sigmoid(xs @ model.weights + model.bias)


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank statistic with tie-averaging; 0.5 for indistinguishable scores."""
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabels("AUROC needs both classes present")
    ranks = rankdata(scores, method="average")
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


def fpr_at_tpr(scores: np.ndarray, labels: np.ndarray,
               tpr: float = 0.95) -> float:
    """False-positive rate at the loosest threshold catching tpr positives."""
    pos = np.sort(scores[labels == 1])[::-1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise SingleClassLabels("need both classes present")
    k = int(np.ceil(tpr * pos.size)) - 1
    thresh = pos[max(k, 0)]
    return float((neg >= thresh).mean())


def evaluate(model: DetectorModel, table: FeatureTable) -> dict:
    """AUROC, FPR at 95% TPR, and plain accuracy at the 0.5 cut."""
    if table.y is None:
        raise SingleClassLabels("evaluation needs labels")
    scores = detect(model, table)
    acc = float(((scores >= 0.5).astype(np.int64) == table.y).mean())
    return {"auroc": auroc(scores, table.y),
            "fpr_at_95tpr": fpr_at_tpr(scores, table.y, 0.95),
            "accuracy": acc,
            "n": int(len(table))}
