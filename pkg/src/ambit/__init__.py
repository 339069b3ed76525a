"""Feature-space geometry audits for trained linear classifier heads."""

from .ambiguity import (AmbiguityConfig, Calibration, Decision,
                        GeometryProfile, build_calibration,
                        calibrate_threshold, class_margin, explain, infer,
                        profile, zeta, zeta_bar)
from .boundary import (BoundaryVector, FlipPoint, boundary_distance_vector,
                       check_interface, min_boundary_distance,
                       project_relaxed, project_to_boundary, project_to_multi)
from .bounds import (BoundParams, compute_bound_params,
                     confidence_lower_bound, confidence_upper_bound,
                     delta_for_confidence)
from .bundle import (FORMAT_VERSION, EmbeddingSet, ModelBundle, ModelHead,
                     Violation, load_bundle, save_bundle, validate_bundle)
from .detector import (FeatureTable, DetectorModel, detect, evaluate,
                       split_table, train_detector)
from .errors import AuditError, ComputationError, ValidationError
from .features import ReducedSpace, empirical_bound, softmax
from .hull import (HullProjection, TrainingGeometry, contains_point,
                   gap_radius, hull_bounding_box, hull_distance_vector,
                   hull_volume_fraction, project_to_hull)
from .regions import (BoundaryPolytope, SlabSet, Witness, cube_slice_measure,
                      enumerate_boundary_vertices, find_overconfident_witness,
                      high_confidence_fraction_binary,
                      high_confidence_fraction_multi, make_slabs,
                      overconfident_unknown_fraction, polytope_volume,
                      slab_volume_union, slice_volume_upper_bound)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
