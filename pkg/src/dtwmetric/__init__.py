"""1NN time-series classification with learned local metrics inside DTW."""

from .classifier import Prediction, classify, error_rate
from .clustering import Codebook, assign, fit_kmeans, pair_index
from .dataset import Dataset, LabeledSequence, Sequence, class_counts, load_ucr_split
from .descriptors import DescriptorConfig, extract_all, extract_window
from .dtw import DtwResult, align, pairwise_dtw, path_cost
from .learner import FitConfig, MetricModel, fit, pair_feature, solve_metric_lp

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "Dataset",
    "DescriptorConfig",
    "DtwResult",
    "FitConfig",
    "LabeledSequence",
    "MetricModel",
    "Prediction",
    "Sequence",
    "align",
    "assign",
    "class_counts",
    "classify",
    "error_rate",
    "extract_all",
    "extract_window",
    "fit",
    "fit_kmeans",
    "load_ucr_split",
    "pair_feature",
    "pair_index",
    "pairwise_dtw",
    "path_cost",
    "solve_metric_lp",
]
