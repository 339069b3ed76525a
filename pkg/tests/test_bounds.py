import math

import numpy as np
import pytest
from conftest import random_space

from ambit.bounds import (compute_bound_params, confidence_lower_bound,
                          confidence_upper_bound, delta_for_confidence)
from ambit.errors import DegenerateRows, TauOutOfRange


# Frozen reference points, computed once by hand from the closed forms:
#   lower(3, 0.876, 10)  = 1/(1 + 9 e^{-2.628})  = 0.60606...
#   delta(0.9, 0.876, 10)= ln(0.9*9/0.1)/0.876   = 5.01649...
#   upper(0.42, 0.9692)  = 1/(1 + e^{-0.407064}) = 0.60038...
def test_lower_bound_reference_value():
    assert confidence_lower_bound(3.0, 0.876, 10) == pytest.approx(
        0.6060588170, abs=1e-9)


def test_delta_reference_value():
    assert delta_for_confidence(0.9, 0.876, 10) == pytest.approx(
        5.0164944688, abs=1e-9)


def test_upper_bound_reference_value():
    assert confidence_upper_bound(0.42, 0.9692) == pytest.approx(
        0.6003836726, abs=1e-9)


def test_lower_and_delta_are_inverses(rng):
    for _ in range(50):
        n = int(rng.integers(2, 12))
        rho = float(rng.uniform(0.1, 3.0))
        tau = float(rng.uniform(1.0 / n + 1e-3, 0.999))
        d = delta_for_confidence(tau, rho, n)
        assert confidence_lower_bound(d, rho, n) == pytest.approx(tau, abs=1e-12)


def test_binary_delta_reduces_to_logit():
    rho = 0.7
    tau = 0.9
    assert delta_for_confidence(tau, rho, 2) == pytest.approx(
        math.log(tau / (1 - tau)) / rho, abs=1e-12)


def test_lower_bound_at_zero_distance_is_uniform():
    for n in (2, 3, 10):
        assert confidence_lower_bound(0.0, 1.0, n) == pytest.approx(1.0 / n)


def test_lower_bound_monotone_in_distance():
    ds = np.linspace(0, 10, 50)
    vals = [confidence_lower_bound(d, 0.5, 4) for d in ds]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_upper_bound_at_zero_distance_is_half():
    assert confidence_upper_bound(0.0, 2.0) == pytest.approx(0.5)


def test_tau_domain_enforced():
    with pytest.raises(TauOutOfRange):
        delta_for_confidence(0.05, 1.0, 10)     # tau <= 1/n
    with pytest.raises(TauOutOfRange):
        delta_for_confidence(1.0, 1.0, 10)
    with pytest.raises(TauOutOfRange):
        confidence_lower_bound(-1.0, 1.0, 3)


def test_zero_norm_rejected():
    with pytest.raises(DegenerateRows):
        delta_for_confidence(0.9, 0.0, 3)


def test_pair_norms_match_direct_computation(rng):
    space = random_space(rng, 4, 6)
    params = compute_bound_params(space)
    hm = space.head_matrix
    for i in range(4):
        for j in range(4):
            expect = float(np.linalg.norm(hm[i] - hm[j]))
            assert params.pair_norms[i, j] == pytest.approx(expect, abs=1e-12)
    offdiag = [params.pair_norms[i, j] for i in range(4) for j in range(4) if i != j]
    assert params.rho_min == pytest.approx(min(offdiag))
    assert params.rho_max == pytest.approx(max(offdiag))
    assert params.min_norm_from(2) == pytest.approx(
        min(params.pair_norms[2, j] for j in range(4) if j != 2))
