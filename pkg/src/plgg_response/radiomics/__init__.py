"""Radiomic features of the T2 volume inside the whole-tumour mask."""
from .discretize import DiscretizedRoi, RadiomicsConfig, discretize
from .extractor import (
    FEATURE_NAMES,
    N_FEATURES,
    FeatureVector,
    RadiomicsExtractor,
    extract_features,
    read_features_csv,
    write_features_csv,
)
from .firstorder import firstorder_features
from .matrices import glcm_matrices, gldm_matrix, glrlm_matrices, glszm_matrix
from .shape import shape_features
from .texture import glcm_features, gldm_features, glrlm_features, glszm_features

__all__ = [
    "FEATURE_NAMES",
    "N_FEATURES",
    "DiscretizedRoi",
    "FeatureVector",
    "RadiomicsConfig",
    "RadiomicsExtractor",
    "discretize",
    "extract_features",
    "firstorder_features",
    "glcm_features",
    "glcm_matrices",
    "gldm_features",
    "gldm_matrix",
    "glrlm_features",
    "glrlm_matrices",
    "glszm_features",
    "glszm_matrix",
    "read_features_csv",
    "shape_features",
    "write_features_csv",
]
