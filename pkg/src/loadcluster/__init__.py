"""Submodular clustering of aggregated load profiles with Robust PCA features."""

from loadcluster.errors import (
    ConvergenceError,
    DataQualityError,
    DegenerateDataError,
    FeatureError,
    LoadClusterError,
    ParseError,
    ValidationError,
)
from loadcluster.io import LoadMatrix, load_profiles, normalize
from loadcluster.rpca import Decomposition, compute_mu, rpca_decompose
from loadcluster.features import FeatureVector, SeasonConfig, extract_features, season_mask
from loadcluster.similarity import SimilarityGraph, build_graph
from loadcluster.submodular import RankList, lazy_greedy_select
from loadcluster.clustering import assign, calinski_harabasz, kmeans_baseline, sweep_k

__version__ = "0.1.0"
