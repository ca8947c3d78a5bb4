"""Distribution-matched training-set search.

Cluster a feature pool by identity, score each cluster by its Frechet
distance to a target feature set, convert the scores to softmax sampling
weights, and draw a training subset whose distribution tracks the target.
"""

from .clustering import Clustering, identity_features, kmeans
from .errors import FormatError, ValidationError
from .features_io import (
    FeatureTable,
    IdentityIndex,
    default_identity_index,
    load_features,
    load_identities,
    save_features,
    save_identities,
)
from .fid import GaussianStats, fid, sqrt_psd, summarize, trace_sqrt_product
from .search import (
    ClusterScores,
    SearchManifest,
    SearchParams,
    run_search,
    sample_training_set,
    score_clusters,
    softmax_weights,
)
from .synth import GroupSpec, PopulationSpec, generate

__version__ = "0.1.0"

__all__ = [
    "Clustering",
    "ClusterScores",
    "FeatureTable",
    "FormatError",
    "GaussianStats",
    "GroupSpec",
    "IdentityIndex",
    "PopulationSpec",
    "SearchManifest",
    "SearchParams",
    "ValidationError",
    "default_identity_index",
    "fid",
    "generate",
    "identity_features",
    "kmeans",
    "load_features",
    "load_identities",
    "run_search",
    "sample_training_set",
    "save_features",
    "save_identities",
    "score_clusters",
    "softmax_weights",
    "sqrt_psd",
    "summarize",
    "trace_sqrt_product",
    "__version__",
]
