"""segkit: batch image segmentation, indexed retrieval, and fuzzy-rule
label prediction for 8-bit PNM images."""

from .clustering import (
    Assignment,
    ClusteringConfig,
    ClusteringResult,
    ClusterModel,
    PointSet,
    Weights,
    edge_weights,
    run_kmeans,
    segment_clustering,
)
from .features import Exemplar, FeatureVector, classify_windows, global_feature, local_histogram, refine_boundaries
from .predict import FuzzyRule, Prediction, RuleBase, Trapezoid, parse_rulebase, predict_label
from .raster import GradientMap, GrayImage, LabelMap, RgbImage, box_smooth, decode_pnm, encode_pnm, sobel_magnitude, to_gray
from .region import RegionParams, RegionStats, SegmentationResult, primary_segment, region_stats
from .retrieval import ImageRecord, Index, RankedResult, decode_index, encode_index, ingest, search_exhaustive, search_optimized, similarity
from .threshold import Histogram, ThresholdReport, binarize, gray_histogram, otsu_threshold, valley_threshold

__version__ = "0.1.0"
