"""Shared fixture builders for the test suite."""

import numpy as np

from ambit.bundle import EmbeddingSet, ModelBundle, ModelHead
from ambit.features import ReducedSpace
from ambit.hull import TrainingGeometry


def cluster_bundle(rng, n=3, f=3, per_class=300, spread=0.5, sep=6.0,
                   n_eval=180, ood_fraction=0.10, ood_radius=25.0,
                   eval_jitter=1e-5):
    """Gaussian class clusters plus planted far-away evaluation points.

    Returns (bundle, ood_mask) where ood_mask flags the planted rows of the
    eval set. In-distribution eval points are small perturbations of
    training samples: a training point has hull distance and gap exactly 0,
    so train-calibrated thresholds only transfer when fresh points sit at
    gaps well under the score's epsilon floor.
    """
    centers = sep * rng.standard_normal((n, f))
    train_x = np.vstack([
        centers[k] + spread * rng.standard_normal((per_class, f))
        for k in range(n)])
    train_y = np.repeat(np.arange(n), per_class).astype(np.int64)

    # a linear head that separates the clusters: rows point at the centers
    w = centers / np.linalg.norm(centers, axis=1, keepdims=True)
    b = rng.standard_normal(n) * 0.01
    head = ModelHead(w, b, [f"c{k}" for k in range(n)])

    n_ood = int(round(n_eval * ood_fraction))
    n_id = n_eval - n_ood
    which = rng.integers(0, train_x.shape[0], n_id)
    eval_id = train_x[which] + eval_jitter * rng.standard_normal((n_id, f))
    dirs = rng.standard_normal((n_ood, f))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    eval_ood = ood_radius * dirs
    eval_x = np.vstack([eval_id, eval_ood])
    ood_mask = np.zeros(n_eval, dtype=bool)
    ood_mask[n_id:] = True

    bundle = ModelBundle(head, EmbeddingSet(train_x, train_y),
                         EmbeddingSet(eval_x))
    return bundle, ood_mask


def space_and_geometry(bundle, bound=None):
    space = ReducedSpace.from_head(bundle.head)
    if bound is None:
        blocks = [bundle.train.x] + ([bundle.eval.x] if bundle.eval else [])
        bound = 1.1 * max(float(np.linalg.norm(b, axis=1).max()) for b in blocks)
    space = space.with_bound(bound)
    return space, TrainingGeometry.from_bundle(space, bundle)
