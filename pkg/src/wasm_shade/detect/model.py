"""Detector models: training, prediction and versioned JSON persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateCorpus, KindMismatch
from ..fnv import fnv1a64
from ..wasm import Module, encode_module, parse_module
from .cfg import Thresholds, build_icfg, lift_to_ir, mining_probability
from .estimators import CentroidClassifier, GaussianNaiveBayes, LogisticGD
from .features import FEATURE_NAMES, extract_features
from .image import to_grayscale

FORMAT_VERSION = 1
IMAGE_CENTROID = "image-centroid"
IMAGE_LOGISTIC = "image-logistic"
FEATURE_NB = "feature-naive-bayes"
FEATURE_LOGISTIC = "feature-logistic"
CFG_RULES = "cfg-rules"
MODEL_KINDS = (IMAGE_CENTROID, IMAGE_LOGISTIC, FEATURE_NB, FEATURE_LOGISTIC, CFG_RULES)
LABELS = ("benign", "miner")

_ESTIMATORS = {IMAGE_CENTROID: CentroidClassifier, IMAGE_LOGISTIC: LogisticGD,
               FEATURE_NB: GaussianNaiveBayes, FEATURE_LOGISTIC: LogisticGD}
_IMAGE_LOGISTIC_PARAMS = {"epochs": 300, "learning_rate": 0.5, "l2": 1e-3, "standardize": False}


@dataclass(frozen=True)
class Verdict:
    miner_probability: float
    label: str
    evidence: dict = field(default_factory=dict, compare=False)

    def to_json(self):
        return {"miner_probability": self.miner_probability, "label": self.label,
                "evidence": self.evidence}


@dataclass
class DetectorModel:
    kind: str
    params: dict
    state: dict  # fitted arrays as lists
    metadata: dict
    threshold: float = 0.5

    def to_json(self):
        return {"format": "wasm-shade-detector", "version": FORMAT_VERSION, "kind": self.kind,
                "threshold": self.threshold, "params": self.params, "state": self.state,
                "metadata": self.metadata}

    @classmethod
    def from_json(cls, obj):
        if obj.get("format") != "wasm-shade-detector":
            raise ValueError("not a detector model file")
        if obj.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {obj.get('version')}")
        if obj["kind"] not in MODEL_KINDS:
            raise KindMismatch(f"unknown model kind {obj['kind']!r}")
        return cls(obj["kind"], obj["params"], obj["state"], obj["metadata"], obj["threshold"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def estimator(self):
        """Rebuild the fitted estimator from the stored state."""
        if self.kind == CFG_RULES:
            raise KindMismatch("cfg-rules has no fitted estimator")
        est = _ESTIMATORS[self.kind](**self.params)
        for k, v in self.state.items():
            setattr(est, k, np.asarray(v) if isinstance(v, list) else v)
        return est


# corpus helpers ----------------------------------------------------------------

def _label(v):
    if v in (1, True, "miner"):
        return 1
    if v in (0, False, "benign"):
        return 0
    raise ValueError(f"label must be 'miner' or 'benign', got {v!r}")


def _as_bytes(x):
    return encode_module(x) if isinstance(x, Module) else encode_module(parse_module(x))


def _as_module(x):
    return x if isinstance(x, Module) else parse_module(x)


def corpus_digest(corpus) -> str:
    rows = sorted(f"{_label(lab)}:{fnv1a64(_as_bytes(x)):016x}" for x, lab in corpus)
    return f"{fnv1a64('|'.join(rows).encode()):016x}"


def _labels(corpus):
    y = np.array([_label(lab) for _, lab in corpus], dtype=np.int64)
    if len(set(y.tolist())) < 2:
        raise DegenerateCorpus("corpus needs both miner and benign samples")
    return y


def _fitted_state(est):
    out = {}
    for k, v in vars(est).items():
        if k.endswith("_") and not k.startswith("_"):
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out


def image_vector(x) -> np.ndarray:
    return to_grayscale(_as_bytes(x)).reshape(-1) / 255.0


def train_image_detector(corpus, kind=IMAGE_CENTROID, seed=0, **params) -> DetectorModel:
    """corpus: (bytes or Module, label) pairs. Binaries are normalised by re-encoding first."""
    if kind not in (IMAGE_CENTROID, IMAGE_LOGISTIC):
        raise KindMismatch(f"{kind!r} is not an image detector")
    corpus = list(corpus)
    y = _labels(corpus)
    X = np.stack([image_vector(x) for x, _ in corpus])
    if kind == IMAGE_LOGISTIC:
        params = {**_IMAGE_LOGISTIC_PARAMS, **params, "seed": seed}
    est = _ESTIMATORS[kind](**params).fit(X, y)
    return DetectorModel(kind, est.get_params(), _fitted_state(est),
                         {"corpus_digest": corpus_digest(corpus), "seed": seed, "samples": len(y)})


def train_feature_detector(corpus, kind="naive-bayes", seed=0, features=None, **params) -> DetectorModel:
    kind = {"naive-bayes": FEATURE_NB, "logistic": FEATURE_LOGISTIC}.get(kind, kind)
    if kind not in (FEATURE_NB, FEATURE_LOGISTIC):
        raise KindMismatch(f"{kind!r} is not a feature detector")
    names = list(features or FEATURE_NAMES)
    unknown = set(names) - set(FEATURE_NAMES)
    if unknown:
        raise ValueError(f"unknown features: {sorted(unknown)}")
    cols = [FEATURE_NAMES.index(n) for n in names]
    corpus = list(corpus)
    y = _labels(corpus)
    X = np.stack([extract_features(_as_module(x))[cols] for x, _ in corpus])
    if kind == FEATURE_LOGISTIC:
        params = {**params, "seed": seed}
    est = _ESTIMATORS[kind](**params).fit(X, y)
    return DetectorModel(kind, est.get_params(), _fitted_state(est),
                         {"corpus_digest": corpus_digest(corpus), "seed": seed, "samples": len(y),
                          "features": names})


def train_cfg_rules(corpus=None, r_xor=6, r_mem=4, r_iter=16, seed=0) -> DetectorModel:
    """Rule thresholds are fixed, not learned; the corpus only feeds the metadata digest."""
    meta = {"seed": seed}
    if corpus is not None:
        corpus = list(corpus)
        meta["corpus_digest"] = corpus_digest(corpus)
        meta["samples"] = len(corpus)
    return DetectorModel(CFG_RULES, {"r_xor": r_xor, "r_mem": r_mem, "r_iter": r_iter}, {}, meta)


def train_detector(corpus, kind, seed=0, **params) -> DetectorModel:
    if kind in (IMAGE_CENTROID, IMAGE_LOGISTIC):
        return train_image_detector(corpus, kind, seed, **params)
    if kind in (FEATURE_NB, FEATURE_LOGISTIC):
        return train_feature_detector(corpus, kind, seed, **params)
    if kind == CFG_RULES:
        return train_cfg_rules(corpus, seed=seed, **params)
    raise KindMismatch(f"unknown model kind {kind!r}")


# prediction ----------------------------------------------------------------------

def predict(model: DetectorModel, x) -> Verdict:
    """Verdict for a Module or a raw binary."""
    if not isinstance(x, (Module, bytes, bytearray)):
        raise KindMismatch(f"cannot classify a {type(x).__name__}; pass a Module or bytes")
    if model.kind == CFG_RULES:
        th = Thresholds(**model.params)
        p, loop = mining_probability(build_icfg(lift_to_ir(_as_module(x))), th)
        evidence = {"loop": loop.to_json()} if loop else {}
        return _verdict(p, model.threshold, evidence)
    if model.kind not in _ESTIMATORS:
        raise KindMismatch(f"unknown model kind {model.kind!r}")
    est = model.estimator()
    if model.kind in (IMAGE_CENTROID, IMAGE_LOGISTIC):
        row = image_vector(x)[None]
    else:
        names = model.metadata.get("features", list(FEATURE_NAMES))
        row = extract_features(_as_module(x))[[FEATURE_NAMES.index(n) for n in names]][None]
    if row.shape[1] != est.n_features_in_:
        raise KindMismatch("input dimensionality does not match the model")
    p = float(est.predict_proba(row)[0, 1])
    evidence = {}
    if model.kind == IMAGE_CENTROID:
        d = est.distances(row)[0]
        evidence = {"distance_benign": float(d[0]), "distance_miner": float(d[1])}
    elif model.kind == FEATURE_NB:
        ll = est.feature_log_likelihood(row)[0]
        ratio = ll[1] - ll[0]
        top = np.argsort(-np.abs(ratio), kind="stable")[:3]
        evidence = {"top_features": [names[i] for i in top]}
    elif model.kind == FEATURE_LOGISTIC:
        z = (row[0] - est.mean_) / est.scale_ * est.coef_
        top = np.argsort(-np.abs(z), kind="stable")[:3]
        evidence = {"top_features": [names[i] for i in top]}
    return _verdict(p, model.threshold, evidence)


def _verdict(p, threshold, evidence):
    p = min(max(float(p), 0.0), 1.0)
    return Verdict(p, "miner" if p >= threshold else "benign", evidence)
