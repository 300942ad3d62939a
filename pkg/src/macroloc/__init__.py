"""Localisation against a building model from door and window landmarks."""

from .binning import LookupTable, build_lookup_table, quantize, silverman_bandwidth
from .descriptor import compute_all_descriptors, compute_descriptor, pack_descriptor, unpack_descriptor
from .evaluation import EvalReport, evaluate
from .geometry import FeatureSet, KDTree, Kind, MacroFeature, RigidTransform, compose, inverse
from .matching import Correspondence, hamming_distance, match_descriptors
from .pipeline import LocalizationError, PreprocessedIndex, build_index, localize
from .registration import RansacConfig, RegistrationResult, hypothesis_count, ransac_register, rigid_fit
from .scenegen import SceneSpec, generate_scene

__version__ = "0.1.0"
