"""Pixel-space norm bound for the embedding map.

The auditor wants a radius M with ||phi(x)|| <= M over all legal pixel
inputs. That maximum is nonconcave in general, so no ascent certifies
it; what this module returns is the best value found by multi-restart
projected gradient ascent over the pixel box, times a 1.1 safety
factor, and the bundle manifest flags it as a heuristic. Training
inputs are feasible points of the same maximization, so when a data
split is available its best sample seeds one restart and its empirical
maximum floors the result.
"""

from __future__ import annotations

import torch

from . import data, models
from .extract import ExtractionSpec, _resolve_split, resolve_input_shape
from .probe import HeadTap, embed_batches, locate_head

SAFETY = 1.1


def _norms(model, head, x: torch.Tensor) -> torch.Tensor:
    with HeadTap(head) as tap:
        model(x)
        return tap.value.flatten(1).norm(dim=1)


def _ascend(model, head, x0: torch.Tensor, steps: int, step: float) -> float:
    """Sign-gradient ascent on ||phi(x)||, clipped to [0, 1] each step."""
    x = x0.clone()
    best = None
    for _ in range(steps):
        probe = x.clone().requires_grad_(True)
        vals = _norms(model, head, probe)
        held = vals.detach()
        best = held if best is None else torch.maximum(best, held)
        grad, = torch.autograd.grad(vals.sum(), probe)
        x = (x + step * grad.sign()).clamp_(0.0, 1.0)
    with torch.no_grad():
        final = _norms(model, head, x)
    best = final if best is None else torch.maximum(best, final)
    return float(best.max())


def solve_phi_bound(spec: ExtractionSpec, model=None, head=None,
                    shape=None) -> float:
    """Best embedding norm found over the pixel box, times 1.1."""
    device = torch.device(spec.device)
    if model is None:
        model = models.load_model(spec.model, spec.seed).to(device)

    pre_x = None
    if spec.train is not None:
        pre_x, _ = data.load_split(spec.train)
    if shape is None:
        shape = resolve_input_shape(spec, pre_x)
    train_x, _ = (pre_x, None) if pre_x is not None else \
        _resolve_split(None, shape, spec.n_train, spec.seed)

    if head is None:
        probe = train_x[:2] if train_x is not None \
            else torch.zeros((1, *shape))
        head = locate_head(model, probe.to(device))

    starts = []
    empirical = 0.0
    if train_x is not None and train_x.shape[0] >= 1:
        phi, _ = embed_batches(model, head, train_x, spec.batch_size, device)
        norms = (phi.astype("float64") ** 2).sum(axis=1) ** 0.5
        empirical = float(norms.max())
        starts.append(train_x[int(norms.argmax())].unsqueeze(0))
    gen = torch.Generator().manual_seed(spec.seed + 2)
    starts.append(torch.rand((spec.bound_restarts, *shape), generator=gen))
    x0 = torch.cat(starts).to(device)

    found = _ascend(model, head, x0, spec.bound_steps, spec.bound_step_size)
    return SAFETY * max(found, empirical)
