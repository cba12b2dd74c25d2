"""Function-based isolation forests with gradient feature importance."""
from .data import Dataset, Scenario, generate, generate_bisect3d, generate_xaxis, load_csv, save_csv, scenario_split, translate
from .errors import ConfigError, DataError, DimensionMismatchError, FubifError
from .forest import Forest, ForestConfig, Tree, anomaly_score, build_tree, c_factor, fit, path_length
from .importance import global_importance, local_importance, local_importance_matrix, node_feature_influence
from .metrics import auc_fs, average_precision, precision_at_contamination, roc_auc
from .persist import load_forest, save_forest
from .splitting import Family, SplitFamilyDescriptor, SplitInstance
from .threshold import ThresholdKind

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "Dataset", "DimensionMismatchError", "Family", "Forest", "ForestConfig",
    "FubifError", "Scenario", "SplitFamilyDescriptor", "SplitInstance", "ThresholdKind", "Tree",
    "anomaly_score", "auc_fs", "average_precision", "build_tree", "c_factor", "fit", "generate",
    "generate_bisect3d", "generate_xaxis", "global_importance", "load_csv", "load_forest",
    "local_importance", "local_importance_matrix", "node_feature_influence", "path_length",
    "precision_at_contamination", "roc_auc", "save_csv", "save_forest", "scenario_split", "translate",
]
