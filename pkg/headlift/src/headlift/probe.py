"""Locating the classifier head and capturing its input.

The embedding the auditor cares about is whatever feeds the final
affine layer. Rather than trusting module order, every ``nn.Linear``
gets a forward hook and a probe batch is pushed through: the last
linear to fire must emit exactly the model's return value, otherwise
the model shape is unsupported (no linear head, or activations after
it).
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .errors import LayerNotLinear


def locate_head(model: nn.Module, probe: torch.Tensor) -> nn.Linear:
    fired: list[tuple[nn.Linear, torch.Tensor]] = []
    handles = [
        m.register_forward_hook(lambda mod, inp, out: fired.append((mod, out)))
        for m in model.modules() if isinstance(m, nn.Linear)
    ]
    try:
        with torch.no_grad():
            ret = model(probe)
    finally:
        for handle in handles:
            handle.remove()
    if not torch.is_tensor(ret):
        raise LayerNotLinear(f"model returned {type(ret).__name__}, not logits")
    if not fired:
        raise LayerNotLinear("no linear layer fires on the forward path")
    head, out = fired[-1]
    if out.shape != ret.shape or not torch.allclose(out, ret, atol=1e-6, rtol=0.0):
        raise LayerNotLinear("model output is not the last linear layer's output")
    return head


def head_arrays(head: nn.Linear) -> tuple[np.ndarray, np.ndarray]:
    """Head weights (n, f) and bias (n,) as float64 arrays."""
    w = head.weight.detach().cpu().numpy().astype(np.float64)
    if head.bias is None:
        b = np.zeros(w.shape[0], dtype=np.float64)
    else:
        b = head.bias.detach().cpu().numpy().astype(np.float64)
    return w, b


class HeadTap:
    """Context manager holding the head's most recent input batch.

    The captured tensor stays attached to the autograd graph, so the
    same tap serves both plain extraction (under ``no_grad``) and the
    gradient-based searches.
    """

    def __init__(self, head: nn.Linear):
        self._head = head
        self._handle = None
        self.value: torch.Tensor | None = None

    def __enter__(self) -> "HeadTap":
        self._handle = self._head.register_forward_hook(self._grab)
        return self

    def _grab(self, module, inputs, output) -> None:
        self.value = inputs[0]

    def __exit__(self, *exc) -> bool:
        self._handle.remove()
        return False


def embed_batches(model: nn.Module, head: nn.Linear, x: torch.Tensor,
                  batch_size: int, device) -> tuple[np.ndarray, np.ndarray]:
    """Run x through the model; return (embeddings, logits) as arrays."""
    model.eval()
    feats, logits = [], []
    with HeadTap(head) as tap, torch.no_grad():
        for start in range(0, x.shape[0], batch_size):
            batch = x[start:start + batch_size].to(device)
            out = model(batch)
            feats.append(tap.value.detach().cpu().numpy())
            logits.append(out.detach().cpu().numpy())
    return np.concatenate(feats), np.concatenate(logits)
