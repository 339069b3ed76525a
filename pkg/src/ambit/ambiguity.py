"""Ambiguity scoring: four failure-mode distances folded into one number.

A sample is suspect when it sits far from every training hull, in a large
empty gap, yet right on top of a decision boundary with two class hulls at
near-identical range. The score multiplies the first two against the last
two; calibration turns the score into an abstain/classify gate and the
component percentiles into a human-readable account of the verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .boundary import min_boundary_distance
from .errors import (EmptyScores, MissingLabels, NoCalibrationStats,
                     TooFewClasses, UncalibratedThreshold, ValidationError)
from .features import ReducedSpace
from .hull import TrainingGeometry, gap_radius, hull_distance_vector

_COMPONENTS = ("hull_min", "gap", "flip_min", "class_margin")


@dataclass
class AmbiguityConfig:
    epsilon: float = 1e-3
    alpha: float = 1.0
    eps_bar: float = 0.01
    tau: float | None = None
    sentinel: float = math.inf

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if not self.alpha > 0:
            raise ValidationError(f"alpha must be positive, got {self.alpha}")


@dataclass
class GeometryProfile:
    sample_id: str
    source: int
    source_name: str
    hull_distances: np.ndarray
    hull_min: float
    class_margin: float          # second-closest hull minus closest
    flip_min: float
    flip_class: int
    gap: float
    zeta: float
    zeta_bar: float
    closest_classes: tuple      # two nearest hulls, by index
    abstained: bool | None = None

    def to_dict(self) -> dict:
        enc = lambda v: v if v is None or math.isfinite(v) else "inf"
        return {
            "sample_id": self.sample_id,
            "source": self.source,
            "source_name": self.source_name,
            "hull_distances": [enc(float(d)) for d in self.hull_distances],
            "hull_min": enc(self.hull_min),
            "class_margin": enc(self.class_margin),
            "flip_min": enc(self.flip_min),
            "flip_class": self.flip_class,
            "gap": enc(self.gap),
            "zeta": enc(self.zeta),
            "zeta_bar": enc(self.zeta_bar),
            "closest_classes": list(self.closest_classes),
            "abstained": self.abstained,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeometryProfile":
        dec = lambda v: None if v is None else (
            math.inf if v == "inf" else float(v))
        return cls(
            sample_id=d["sample_id"], source=int(d["source"]),
            source_name=d["source_name"],
            hull_distances=np.array([dec(v) for v in d["hull_distances"]]),
            hull_min=dec(d["hull_min"]), class_margin=dec(d["class_margin"]),
            flip_min=dec(d["flip_min"]), flip_class=int(d["flip_class"]),
            gap=dec(d["gap"]), zeta=dec(d["zeta"]), zeta_bar=dec(d["zeta_bar"]),
            closest_classes=tuple(d["closest_classes"]),
            abstained=d.get("abstained"))


def class_margin(hull_distances) -> float:
    """Second-smallest hull distance minus the smallest. Zero means the
    sample cannot be attributed to one class by proximity alone."""
    arr = np.sort(np.asarray(hull_distances, dtype=np.float64))
    if arr.size < 2:
        raise TooFewClasses(f"need at least 2 hull distances, got {arr.size}")
    if arr[0] < 0:
        raise ValidationError("hull distances must be nonnegative")
    return float(arr[1] - arr[0])


def zeta(profile: GeometryProfile, config: AmbiguityConfig) -> float:
    num = (profile.hull_min + config.epsilon) * (profile.gap + config.epsilon)
    if profile.flip_min == 0.0 or profile.class_margin == 0.0:
        return config.sentinel
    den = profile.flip_min * profile.class_margin
    if math.isinf(den):
        return 0.0
    return float((num / den) ** config.alpha)


def zeta_bar(profile: GeometryProfile, config: AmbiguityConfig,
             variant: str = "ratio") -> float:
    """Two-component shortcut: hull distance against boundary distance."""
    if variant == "ratio":
        if profile.flip_min == 0.0:
            return config.sentinel
        return float(((profile.hull_min + config.epsilon) / profile.flip_min)
                     ** config.alpha)
    if variant == "difference":
        return float(profile.hull_min - profile.flip_min)
    raise ValidationError(f"unknown zeta_bar variant {variant!r}")


def profile(space: ReducedSpace, geom: TrainingGeometry, x: np.ndarray,
            config: AmbiguityConfig | None = None,
            sample_id: str = "", frame: str = "embedding") -> GeometryProfile:
    """All four geometric components of one sample, plus its scores.

    ``frame`` says which coordinates x arrives in: "embedding" rotates it
    into the reduced frame first, "reduced" takes it as-is.
    """
    if config is None:
        config = AmbiguityConfig()
    x = np.asarray(x, dtype=np.float64)
    if frame == "embedding":
        y = space.to_reduced(x)
    elif frame == "reduced":
        y = x
    else:
        raise ValidationError(f"unknown frame {frame!r}")
    i = int(space.classify(y))
    d_hull = hull_distance_vector(geom, y, config.eps_bar)
    order = np.argsort(d_hull, kind="stable")
    flip_min, flip_class = min_boundary_distance(space, y)
    p = GeometryProfile(
        sample_id=sample_id, source=i,
        source_name=space.head.class_names[i],
        hull_distances=d_hull,
        hull_min=float(d_hull.min()),
        class_margin=class_margin(d_hull),
        flip_min=flip_min, flip_class=flip_class,
        gap=gap_radius(geom, y),
        zeta=0.0, zeta_bar=0.0,
        closest_classes=(int(order[0]), int(order[1])))
    p.zeta = zeta(p, config)
    p.zeta_bar = zeta_bar(p, config)
    return p


# ---------------------------------------------------------------------------
# threshold calibration

@dataclass
class Calibration:
    tau: float
    mode: str
    param: float                                  # percentile p, or balanced accuracy
    population: dict = field(default_factory=dict)  # component -> sorted array

    def to_dict(self) -> dict:
        enc = lambda v: v if v is None or math.isfinite(v) else "inf"
        return {"tau": enc(self.tau), "mode": self.mode, "param": self.param,
                "population": {k: [enc(float(x)) for x in v]
                               for k, v in self.population.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "Calibration":
        dec = lambda v: math.inf if v == "inf" else float(v)
        return cls(dec(d["tau"]), d["mode"], float(d["param"]),
                   {k: np.array([dec(x) for x in v])
                    for k, v in d["population"].items()})


def _population_stats(profiles) -> dict:
    cols = {
        "zeta": [p.zeta for p in profiles],
        "hull_min": [p.hull_min for p in profiles],
        "gap": [p.gap for p in profiles],
        "flip_min": [p.flip_min for p in profiles],
        "class_margin": [p.class_margin for p in profiles],
    }
    return {k: np.sort(np.asarray(v, dtype=np.float64)) for k, v in cols.items()}


def calibrate_threshold(scores, mode: str = "percentile", p: float = 99.0,
                        labels=None) -> float:
    """Pick tau from a score population.

    percentile mode interpolates linearly; separating mode scans midpoints
    between adjacent sorted scores for the best balanced accuracy of the
    rule "flag when score > tau", preferring the smaller tau on ties.
    """
    scores = np.asarray(list(scores), dtype=np.float64)
    if scores.size == 0:
        raise EmptyScores("cannot calibrate on an empty score set")
    if mode == "percentile":
        return float(np.percentile(scores, p, method="linear"))
    if mode == "separating":
        if labels is None:
            raise MissingLabels("separating mode needs binary labels")
        labels = np.asarray(list(labels), dtype=np.int64)
        if labels.shape != scores.shape:
            raise MissingLabels("labels must align with scores")
        uniq = np.unique(scores[np.isfinite(scores)])
        cands = [uniq[0] - 1.0] if uniq.size else [0.0]
        cands += [0.5 * (a + b) for a, b in zip(uniq[:-1], uniq[1:])]
        cands.append(uniq[-1] + 1.0 if uniq.size else 1.0)
        n_pos = max(int((labels == 1).sum()), 1)
        n_neg = max(int((labels == 0).sum()), 1)
        best_tau, best_acc = cands[0], -1.0
        for t in cands:
            flag = scores > t
            tpr = float((flag & (labels == 1)).sum()) / n_pos
            tnr = float((~flag & (labels == 0)).sum()) / n_neg
            acc = 0.5 * (tpr + tnr)
            if acc > best_acc + 1e-12:
                best_acc, best_tau = acc, t
        return float(best_tau)
    raise ValidationError(f"unknown calibration mode {mode!r}")


def build_calibration(profiles, mode: str = "percentile", p: float = 99.0,
                      labels=None) -> Calibration:
    profiles = list(profiles)
    if not profiles:
        raise EmptyScores("cannot calibrate on zero profiles")
    tau = calibrate_threshold([q.zeta for q in profiles], mode, p, labels)
    param = p if mode == "percentile" else 0.0
    return Calibration(tau, mode, float(param), _population_stats(profiles))


def percentile_of(sorted_values: np.ndarray, value: float) -> float:
    """Midrank percentile of a value against a sorted population."""
    n = sorted_values.size
    if n == 0:
        raise EmptyScores("empty population")
    less = int(np.searchsorted(sorted_values, value, side="left"))
    upper = int(np.searchsorted(sorted_values, value, side="right"))
    return (less + 0.5 * (upper - less)) / n * 100.0


# ---------------------------------------------------------------------------
# inference and explanation

@dataclass
class Decision:
    sample_id: str
    abstained: bool
    source: int
    source_name: str
    zeta: float
    explanation: str | None

    def to_dict(self) -> dict:
        return {"sample_id": self.sample_id, "abstained": self.abstained,
                "source": self.source, "source_name": self.source_name,
                "zeta": self.zeta if math.isfinite(self.zeta) else "inf",
                "explanation": self.explanation}


def infer(space: ReducedSpace, geom: TrainingGeometry, x: np.ndarray,
          config: AmbiguityConfig, calibration: Calibration | None = None,
          sample_id: str = "", frame: str = "embedding") -> Decision:
    """Classify or abstain. Abstains exactly when the score exceeds tau."""
    tau = config.tau
    if tau is None and calibration is not None:
        tau = calibration.tau
    if tau is None:
        raise UncalibratedThreshold("no tau: set config.tau or calibrate first")
    prof = profile(space, geom, x, config, sample_id, frame)
    prof.abstained = prof.zeta > tau
    text = None
    if prof.abstained and calibration is not None and calibration.population:
        text = explain(prof, calibration, tau=tau)
    return Decision(sample_id, prof.abstained, prof.source, prof.source_name,
                    prof.zeta, text)


def explain(prof: GeometryProfile, calibration: Calibration,
            class_names=None, tau: float | None = None) -> str:
    """Deterministic percentile-based account of one sample's score."""
    pop = calibration.population
    if not pop or any(k not in pop for k in ("zeta",) + _COMPONENTS):
        raise NoCalibrationStats("calibration carries no population statistics")
    tau = calibration.tau if tau is None else tau
    name = lambda k: (class_names[k] if class_names is not None else str(k))

    z_pct = percentile_of(pop["zeta"], prof.zeta)
    ambiguous = prof.zeta > tau
    verdict = ("ambiguous because its ambiguity measure is higher than "
               f"{z_pct:.1f}% of all samples" if ambiguous else
               "unambiguous because its ambiguity measure is lower than "
               f"{100.0 - z_pct:.1f}% of all samples")
    a, b = prof.closest_classes
    lines = [
        f"Classification of this input is {prof.source_name}. "
        f"This input is {verdict}. "
        "The ambiguity of this input has four components:",
        "- Its distance to the convex hull of training set is > "
        f"{percentile_of(pop['hull_min'], prof.hull_min):.1f} percentile",
        "- Its distance to closest decision boundary > "
        f"{percentile_of(pop['flip_min'], prof.flip_min):.1f} percentile",
        f"- It is close to both classes {name(a)} and {name(b)}",
        "- The radius of gap around this sample > "
        f"{percentile_of(pop['gap'], prof.gap):.1f} percentile",
    ]
    return "\n".join(lines)


def rescore(prof: GeometryProfile, config: AmbiguityConfig) -> GeometryProfile:
    """Same geometry, new epsilon/alpha."""
    out = replace(prof)
    out.zeta = zeta(out, config)
    out.zeta_bar = zeta_bar(out, config)
    return out
