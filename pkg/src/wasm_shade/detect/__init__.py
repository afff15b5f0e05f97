"""Static cryptojacking detectors: image, feature and control-flow-rule based."""

from .cfg import (
    BasicBlock, IRFunction, IRProgram, LoopFinding, Thresholds, build_icfg, categorize, find_loops,
    lift_to_ir, mining_probability,
)
from .estimators import CentroidClassifier, GaussianNaiveBayes, LogisticGD
from .features import FEATURE_NAMES, SIZE_FEATURES, FeatureExtractor, extract_features
from .image import GrayscaleImager, to_grayscale
from .model import (
    CFG_RULES, FEATURE_LOGISTIC, FEATURE_NB, IMAGE_CENTROID, IMAGE_LOGISTIC, MODEL_KINDS,
    DetectorModel, Verdict, corpus_digest, predict, train_cfg_rules, train_detector,
    train_feature_detector, train_image_detector,
)


def detect_mining_rules(g, thresholds=Thresholds(), threshold=0.5) -> Verdict:
    """Verdict straight from an ICFG."""
    p, loop = mining_probability(g, thresholds)
    return Verdict(p, "miner" if p >= threshold else "benign", {"loop": loop.to_json()} if loop else {})


__all__ = [
    "BasicBlock", "CFG_RULES", "CentroidClassifier", "DetectorModel", "FEATURE_LOGISTIC",
    "FEATURE_NAMES", "FEATURE_NB", "FeatureExtractor", "GaussianNaiveBayes", "GrayscaleImager",
    "IMAGE_CENTROID", "IMAGE_LOGISTIC", "IRFunction", "IRProgram", "LogisticGD", "LoopFinding",
    "MODEL_KINDS", "SIZE_FEATURES", "Thresholds", "Verdict", "build_icfg", "categorize",
    "corpus_digest", "detect_mining_rules", "extract_features", "find_loops", "lift_to_ir",
    "mining_probability", "predict", "to_grayscale", "train_cfg_rules", "train_detector",
    "train_feature_detector", "train_image_detector",
]
