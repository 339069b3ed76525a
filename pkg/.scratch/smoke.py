import numpy as np

from ambit.bundle import ModelHead
from ambit.features import ReducedSpace
from ambit.hull import TrainingGeometry, project_to_hull, gap_radius
from ambit.boundary import min_boundary_distance, boundary_distance_vector
from ambit import regions, ambiguity, detector

rng = np.random.default_rng(7)
n, f = 3, 5
W = rng.standard_normal((n, f))
head = ModelHead(W, rng.standard_normal(n), [f"c{k}" for k in range(n)])
space = ReducedSpace.from_head(head).with_bound(6.0)
print("dim", space.dim)

# training cloud in embedding frame
xs, ys = [], []
centers = rng.standard_normal((n, f)) * 2
for k in range(n):
    xs.append(centers[k] + 0.5 * rng.standard_normal((40, f)))
    ys.append(np.full(40, k))
X = np.vstack(xs); Y = np.concatenate(ys)

class B: pass
b = B(); b.train = B(); b.train.x = X; b.train.y = Y
geom = TrainingGeometry.from_bundle(space, b)

x = space.to_reduced(rng.standard_normal(f))
print("boundary vector:", boundary_distance_vector(space, x).distances)
print("min flip:", min_boundary_distance(space, x))
hp = project_to_hull(geom.class_points(0), x)
print("hull dist:", hp.distance, "gap:", gap_radius(geom, x))

poly = regions.enumerate_boundary_vertices(space, 0, 1)
print("poly verts:", poly.vertices.shape, "vol:", regions.polytope_volume(poly))
print("slice ub:", regions.slice_volume_upper_bound(space, 0, 1))

multi = regions.high_confidence_fraction_multi(space, 0.9, n_samples=20000, seed=1)
print("multi bound", multi.bound, "measured", multi.measured)

pl, off = regions.overconfident_unknown_fraction(space, geom, 0.9, 0.5,
                                                 n_samples=20000, seed=1)
print("ocu bound", pl.bound, "measured", pl.measured)

conf = ambiguity.AmbiguityConfig()
prof = ambiguity.profile(space, geom, rng.standard_normal(f), conf, "s0")
print("zeta", prof.zeta, "zeta_bar", prof.zeta_bar)

profs = [ambiguity.profile(space, geom, X[i], conf, str(i)) for i in range(0, 120, 5)]
cal = ambiguity.build_calibration(profs, "percentile", 99.0)
print("tau", cal.tau)
dec = ambiguity.infer(space, geom, rng.standard_normal(f) * 8, conf, cal, "far")
print("abstained:", dec.abstained)
print(ambiguity.explain(prof, cal))

pos = detector.FeatureTable.from_profiles(profs[:12], label=1)
neg = detector.FeatureTable.from_profiles(profs[12:], label=0)
model = detector.train_detector(pos, neg)
tbl = detector.FeatureTable(pos.ids + neg.ids, np.vstack([pos.x, neg.x]),
                            np.concatenate([pos.y, neg.y]))
print("metrics", detector.evaluate(model, tbl))

# binary head
head2 = ModelHead(rng.standard_normal((2, 4)), rng.standard_normal(2), ["a", "b"])
sp2 = ReducedSpace.from_head(head2).with_bound(4.0)
rep = regions.high_confidence_fraction_binary(sp2, 0.9)
print("binary chain:", rep.crude_bound, rep.polytope_bound, rep.boundary_volume)

w = regions.find_overconfident_witness(space, geom, x, tau=0.8)
print("witness conf", w.confidence, "dist", w.distance)
print("SMOKE OK")
