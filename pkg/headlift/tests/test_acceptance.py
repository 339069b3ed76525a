"""End-to-end acceptance gate for the extractor.

Each test prints one [PASS]/[FAIL] line in the terminal summary via the
conftest hook.
"""

import functools
import json
import math
import time

import numpy as np
import torch
from torch import nn

from ambit import load_bundle, validate_bundle
from headlift import ExtractionSpec, extract_bundle, solve_phi_bound

from conftest import record_acceptance


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                record_acceptance(name, False, str(exc).splitlines()[0][:100])
                raise
            elapsed = time.perf_counter() - start
            record_acceptance(name, True, f"{detail}, {elapsed:.1f}s")
            return None
        return run
    return wrap


@criterion("extractor fidelity: logits within 1e-4; full-size head metadata")
def test_01_extractor_fidelity(tmp_path):
    gen = torch.Generator().manual_seed(41)
    x = torch.rand((100, 3, 16, 16), generator=gen)
    y = torch.arange(100) % 10
    out = extract_bundle(ExtractionSpec("toy-cnn", tmp_path / "toy",
                                        train=(x, y), n_eval=0, seed=7))
    assert validate_bundle(out) == []
    bundle = load_bundle(out)
    from headlift import load_model
    model = load_model("toy-cnn", 7)
    with torch.no_grad():
        ref = model(x).numpy().astype(np.float64)
    rec = bundle.train.x @ bundle.head.weights.T + bundle.head.bias
    worst = float(np.abs(rec - ref).max())
    assert worst <= 1e-4

    big = extract_bundle(ExtractionSpec("swin-class", tmp_path / "swin",
                                        n_train=32, n_eval=0, seed=11,
                                        batch_size=16))
    with open(big + "/meta.json") as fh:
        meta = json.load(fh)
    assert meta["f"] == 1536
    assert meta["n"] == 1000
    return f"toy logit err {worst:.1e}, swin f=1536 n=1000"


@criterion("norm bound: identity feature map returns at least sqrt(d)")
def test_02_identity_bound(tmp_path):
    vals = {}
    val = solve_phi_bound(ExtractionSpec("identity", tmp_path / "a",
                                         n_train=32, seed=3))
    assert val >= math.sqrt(48.0)
    vals[48] = val
    model = nn.Sequential(nn.Flatten(), nn.Linear(192, 5))
    val = solve_phi_bound(ExtractionSpec(model, tmp_path / "b",
                                         input_shape=(3, 8, 8),
                                         n_train=16, seed=3))
    assert val >= math.sqrt(192.0)
    vals[192] = val
    ratios = ", ".join(f"d={d}: {v / math.sqrt(d):.3f}x sqrt(d)"
                       for d, v in vals.items())
    return ratios
