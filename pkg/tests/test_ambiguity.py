import json
import math

import numpy as np
import pytest
from helpers import cluster_bundle, space_and_geometry

from ambit.ambiguity import (AmbiguityConfig, Calibration, GeometryProfile,
                             build_calibration, calibrate_threshold,
                             class_margin, explain, infer, percentile_of,
                             profile, rescore, zeta, zeta_bar)
from ambit.errors import (MissingLabels, NoCalibrationStats, TooFewClasses,
                          UncalibratedThreshold, ValidationError)


def make_profile(hull_min=4.0, gap=1.0, flip_min=2.0, margin=2.0):
    hd = np.array([hull_min, hull_min + margin, hull_min + margin + 1.0])
    return GeometryProfile(
        sample_id="s", source=0, source_name="a", hull_distances=hd,
        hull_min=hull_min, class_margin=margin, flip_min=flip_min,
        flip_class=1, gap=gap, zeta=None, zeta_bar=None,
        closest_classes=(0, 1))


# ---------------------------------------------------------------------------
# components

def test_class_margin_basic():
    assert class_margin(np.array([2.0, 5.0, 7.0])) == pytest.approx(3.0)


def test_class_margin_tied_minimum_is_zero():
    assert class_margin(np.array([0.0, 0.0, 4.0])) == pytest.approx(0.0)
    assert class_margin(np.array([3.0, 3.0, 9.0])) == pytest.approx(0.0)


def test_class_margin_needs_two_classes():
    with pytest.raises(TooFewClasses):
        class_margin(np.array([1.0]))


def test_class_margin_rejects_negative():
    with pytest.raises(ValidationError):
        class_margin(np.array([-0.5, 1.0]))


def test_zeta_plain_ratio():
    cfg = AmbiguityConfig(epsilon=1e-12)
    assert zeta(make_profile(), cfg) == pytest.approx(1.0, rel=1e-9)


def test_zeta_epsilon_floor_at_zero_numerator():
    cfg = AmbiguityConfig(epsilon=0.01)
    got = zeta(make_profile(hull_min=0.0, gap=0.0, flip_min=1.0, margin=1.0),
               cfg)
    assert got == pytest.approx(1e-4, rel=1e-12)


def test_zeta_sentinel_on_zero_denominator():
    cfg = AmbiguityConfig()
    assert math.isinf(zeta(make_profile(flip_min=0.0), cfg))
    assert math.isinf(zeta(make_profile(margin=0.0), cfg))


def test_zeta_monotone_in_each_component():
    cfg = AmbiguityConfig()
    base = zeta(make_profile(), cfg)
    assert zeta(make_profile(hull_min=5.0), cfg) > base
    assert zeta(make_profile(gap=2.0), cfg) > base
    assert zeta(make_profile(flip_min=3.0), cfg) < base
    assert zeta(make_profile(margin=3.0), cfg) < base


def test_zeta_alpha_is_order_preserving(rng):
    lo, hi = AmbiguityConfig(alpha=0.5), AmbiguityConfig(alpha=2.0)
    profs = [make_profile(hull_min=float(h), gap=float(g),
                          flip_min=float(f), margin=float(m))
             for h, g, f, m in rng.uniform(0.1, 5.0, (40, 4))]
    a = np.argsort([zeta(p, lo) for p in profs])
    b = np.argsort([zeta(p, hi) for p in profs])
    np.testing.assert_array_equal(a, b)


def test_zeta_bar_variants():
    cfg = AmbiguityConfig(epsilon=1e-12)
    p = make_profile(hull_min=3.0, flip_min=2.0)
    assert zeta_bar(p, cfg, "ratio") == pytest.approx(1.5, rel=1e-9)
    assert zeta_bar(p, cfg, "difference") == pytest.approx(1.0, rel=1e-9)
    assert math.isinf(zeta_bar(make_profile(flip_min=0.0), cfg, "ratio"))
    with pytest.raises(ValidationError):
        zeta_bar(p, cfg, "quotient")


# ---------------------------------------------------------------------------
# profiles against real geometry

def test_profile_fields_consistent(rng):
    bundle, _ = cluster_bundle(rng, per_class=80, n_eval=10)
    space, geom = space_and_geometry(bundle)
    x = bundle.eval.x[0]
    p = profile(space, geom, x, sample_id="e0")
    assert p.sample_id == "e0"
    assert p.source == int(np.argmax(space.logits(x[None]))) \
        if x.ndim == 1 else True
    assert p.hull_min == pytest.approx(float(p.hull_distances.min()))
    assert p.class_margin == pytest.approx(
        float(np.sort(p.hull_distances)[1] - p.hull_distances.min()))
    assert p.closest_classes[0] == int(np.argmin(p.hull_distances))
    assert p.flip_min >= 0.0 and p.gap >= 0.0
    assert p.zeta == pytest.approx(zeta(p, AmbiguityConfig()))


def test_profile_round_trip(rng):
    bundle, _ = cluster_bundle(rng, per_class=60, n_eval=4)
    space, geom = space_and_geometry(bundle)
    p = profile(space, geom, bundle.eval.x[1], sample_id="rt")
    q = GeometryProfile.from_dict(json.loads(json.dumps(p.to_dict())))
    assert q.sample_id == p.sample_id and q.source == p.source
    assert q.zeta == pytest.approx(p.zeta)
    np.testing.assert_allclose(q.hull_distances, p.hull_distances)


def test_profile_sentinel_round_trip():
    p = make_profile(flip_min=0.0)
    p.zeta = math.inf
    q = GeometryProfile.from_dict(json.loads(json.dumps(p.to_dict())))
    assert math.isinf(q.zeta)


def test_profile_frame_validation(rng):
    bundle, _ = cluster_bundle(rng, per_class=50, n_eval=4)
    space, geom = space_and_geometry(bundle)
    with pytest.raises(ValidationError):
        profile(space, geom, bundle.eval.x[0], frame="latent")


# ---------------------------------------------------------------------------
# calibration

def test_percentile_mode_matches_numpy():
    scores = np.arange(1.0, 101.0)
    tau = calibrate_threshold(scores, mode="percentile", p=99.0)
    assert tau == pytest.approx(99.01)
    assert tau == pytest.approx(float(np.percentile(scores, 99.0)))


def test_percentile_single_score():
    assert calibrate_threshold(np.array([7.0]), p=50.0) == 7.0


def test_separating_mode_picks_midpoint_gap():
    scores = np.array([0.1, 0.2, 0.8, 0.9])
    labels = np.array([0, 0, 1, 1])
    tau = calibrate_threshold(scores, mode="separating", labels=labels)
    assert tau == pytest.approx(0.5)


def test_separating_mode_tie_prefers_smaller_tau():
    scores = np.array([0.0, 1.0, 2.0, 3.0])
    labels = np.array([0, 1, 0, 1])     # several thresholds tie on accuracy
    got = calibrate_threshold(scores, mode="separating", labels=labels)
    ties = [0.5, 1.5, 2.5]
    accs = []
    for t in ties:
        pred = scores > t
        accs.append(0.5 * ((pred[labels == 1]).mean()
                           + (~pred[labels == 0]).mean()))
    best = max(accs)
    first = ties[int(np.argmax(np.array(accs) == best))]
    assert got == pytest.approx(first)


def test_separating_mode_needs_labels():
    with pytest.raises(MissingLabels):
        calibrate_threshold(np.array([1.0, 2.0]), mode="separating")


def test_empty_scores_rejected():
    from ambit.errors import EmptyScores
    with pytest.raises(EmptyScores):
        calibrate_threshold(np.array([]))


def test_calibration_json_round_trip():
    cal = Calibration(tau=2.5, mode="percentile", param=99.0,
                      population={"zeta": np.array([1.0, 2.0, 3.0])})
    q = Calibration.from_dict(json.loads(json.dumps(cal.to_dict())))
    assert q.tau == cal.tau and q.mode == cal.mode
    np.testing.assert_allclose(q.population["zeta"],
                               cal.population["zeta"])


def test_percentile_of_midrank():
    vals = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert percentile_of(vals, 3.0) == pytest.approx(50.0)
    assert percentile_of(vals, 0.0) == pytest.approx(0.0)
    assert percentile_of(vals, math.inf) == pytest.approx(100.0)
    assert percentile_of(vals, 2.5) == pytest.approx(40.0)


# ---------------------------------------------------------------------------
# decisions

def test_infer_requires_threshold(rng):
    bundle, _ = cluster_bundle(rng, per_class=50, n_eval=4)
    space, geom = space_and_geometry(bundle)
    with pytest.raises(UncalibratedThreshold):
        infer(space, geom, bundle.eval.x[0], AmbiguityConfig())


def test_abstention_is_strict_and_monotone(rng):
    bundle, _ = cluster_bundle(rng, per_class=80, n_eval=30)
    space, geom = space_and_geometry(bundle)
    cfg = AmbiguityConfig()
    profs = [profile(space, geom, x, cfg) for x in bundle.eval.x]
    zs = np.array([p.zeta for p in profs])
    finite = zs[np.isfinite(zs)]
    tau = float(np.median(finite))
    cal = Calibration(tau=tau, mode="percentile", param=50.0, population={})
    flags = []
    for x, p in zip(bundle.eval.x, profs):
        d = infer(space, geom, x, cfg, cal)
        assert d.abstained == (p.zeta > tau)      # equality classifies
        flags.append(d.abstained)
    # raising tau can only reduce abstentions
    hi = Calibration(tau=float(finite.max()) + 1.0, mode="percentile",
                     param=99.0, population={})
    for x, was in zip(bundle.eval.x, flags):
        d = infer(space, geom, x, cfg, hi)
        assert (not d.abstained) or was or not math.isfinite(tau)


def test_sentinel_always_abstains(rng):
    bundle, _ = cluster_bundle(rng, per_class=50, n_eval=4)
    space, geom = space_and_geometry(bundle)
    cfg = AmbiguityConfig()
    # a training point sits inside its own hull: flip distance may still be
    # positive, so synthesize the sentinel path through rescore instead
    p = make_profile(flip_min=0.0)
    assert math.isinf(rescore(p, cfg).zeta)


# ---------------------------------------------------------------------------
# explanations

def test_explanation_text_and_determinism(rng):
    bundle, _ = cluster_bundle(rng, per_class=100, n_eval=20)
    space, geom = space_and_geometry(bundle)
    cfg = AmbiguityConfig()
    train_profs = [profile(space, geom, x, cfg, sample_id=f"t{i}")
                   for i, x in enumerate(bundle.train.x[::4])]
    cal = build_calibration(train_profs, mode="percentile", p=50.0)
    p = profile(space, geom, bundle.eval.x[0], cfg)
    text1 = explain(p, cal, class_names=bundle.head.class_names)
    text2 = explain(p, cal, class_names=bundle.head.class_names)
    assert text1 == text2
    assert text1.startswith("Classification of this input is ")
    assert "ambiguity measure is" in text1
    assert "% of all samples" in text1
    assert "It is close to both classes" in text1
    assert text1.count("\n- ") == 4


def test_explanation_verdict_tracks_threshold(rng):
    bundle, _ = cluster_bundle(rng, per_class=80, n_eval=10)
    space, geom = space_and_geometry(bundle)
    cfg = AmbiguityConfig()
    profs = [profile(space, geom, x, cfg, sample_id=f"t{i}")
             for i, x in enumerate(bundle.train.x[::4])]
    cal = build_calibration(profs, mode="percentile", p=50.0)
    p = profile(space, geom, bundle.eval.x[0], cfg)
    lo = Calibration(tau=-1.0, mode="percentile", param=0.0,
                     population=cal.population)
    hi = Calibration(tau=math.inf, mode="percentile", param=100.0,
                     population=cal.population)
    assert "is ambiguous because" in explain(p, lo)
    assert "higher than" in explain(p, lo)
    assert "is unambiguous because" in explain(p, hi)
    assert "lower than" in explain(p, hi)


def test_explain_requires_population():
    cal = Calibration(tau=1.0, mode="percentile", param=99.0, population={})
    with pytest.raises(NoCalibrationStats):
        explain(make_profile(), cal)
