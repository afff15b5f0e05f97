"""Small from-scratch classifiers with the scikit-learn estimator interface.

Labels are 0 (benign) and 1 (miner); both must be present when fitting.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import DegenerateCorpus


def _check_binary(X, y):
    X, y = check_X_y(X, y, dtype=np.float64)
    y = y.astype(np.int64)
    if set(np.unique(y)) != {0, 1}:
        raise DegenerateCorpus("training data must contain both benign (0) and miner (1) samples")
    return X, y


def _logit(p):
    return math.log(p / (1.0 - p))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class _Binary(ClassifierMixin, BaseEstimator):
    def predict_proba(self, X):
        p = self._miner_proba(self._check(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self._miner_proba(self._check(X)) >= 0.5).astype(np.int64)

    def _check(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X


class CentroidClassifier(_Binary):
    """Nearest class mean with a softmax over negative RMS distances.

    ``temperature=None`` calibrates it from the training data as the
    largest temperature under which the least confident correctly classified
    training sample reaches ``confidence`` and a sample sitting on its own
    class centroid reaches ``centroid_confidence``.
    """

    def __init__(self, temperature=None, confidence=0.9, centroid_confidence=0.999):
        self.temperature = temperature
        self.confidence = confidence
        self.centroid_confidence = centroid_confidence

    def fit(self, X, y):
        X, y = _check_binary(X, y)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.centroids_ = np.stack([X[y == 0].mean(axis=0), X[y == 1].mean(axis=0)])
        if self.temperature is not None:
            self.temperature_ = float(self.temperature)
        else:
            margins = self._margin(X) * np.where(y == 1, 1.0, -1.0)
            good = margins[margins > 0]
            base = good.min() if good.size else np.abs(margins).mean()
            sep = float(np.sqrt(((self.centroids_[1] - self.centroids_[0]) ** 2).mean()))
            taus = [t for t in (base / _logit(self.confidence), sep / _logit(self.centroid_confidence))
                    if t > 0]
            self.temperature_ = float(min(taus)) if taus else 1.0
        return self

    def distances(self, X):
        return np.sqrt(((X[:, None, :] - self.centroids_[None, :, :]) ** 2).mean(axis=2))

    def _margin(self, X):
        d = self.distances(X)
        return d[:, 0] - d[:, 1]

    def _miner_proba(self, X):
        return _sigmoid(self._margin(X) / self.temperature_)


class LogisticGD(_Binary):
    """Logistic regression by full-batch gradient descent with an L2 penalty."""

    def __init__(self, epochs=2000, learning_rate=0.1, l2=1e-3, standardize=True, seed=0):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2 = l2
        self.standardize = standardize
        self.seed = seed

    def fit(self, X, y):
        X, y = _check_binary(X, y)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            sd = X.std(axis=0)
            self.scale_ = np.where(sd > 0, sd, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Z = (X - self.mean_) / self.scale_
        rng = np.random.default_rng(self.seed)
        w = rng.normal(0.0, 0.01, X.shape[1])
        b = 0.0
        n = X.shape[0]
        for _ in range(self.epochs):
            err = _sigmoid(Z @ w + b) - y
            w -= self.learning_rate * (Z.T @ err / n + self.l2 * w)
            b -= self.learning_rate * err.mean()
        self.coef_ = w
        self.intercept_ = float(b)
        return self

    def decision_function(self, X):
        X = self._check(X)
        return ((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_

    def _miner_proba(self, X):
        return _sigmoid(((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_)


class GaussianNaiveBayes(_Binary):
    """Per-feature Gaussian class likelihoods.

    Each class variance gets ``var_smoothing`` times the feature's overall
    variance added, plus ``var_floor``, so constant features never divide by zero.
    """

    def __init__(self, var_smoothing=1e-2, var_floor=1e-9):
        self.var_smoothing = var_smoothing
        self.var_floor = var_floor

    def fit(self, X, y):
        X, y = _check_binary(X, y)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        total = X.var(axis=0)
        self.theta_ = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
        self.var_ = np.stack([X[y == c].var(axis=0) for c in (0, 1)])
        self.var_ += self.var_smoothing * total + self.var_floor
        self.class_prior_ = np.array([(y == 0).mean(), (y == 1).mean()])
        return self

    def feature_log_likelihood(self, X):
        """(n, 2, d) per-feature log densities."""
        diff = X[:, None, :] - self.theta_[None, :, :]
        return -0.5 * (np.log(2 * np.pi * self.var_)[None] + diff ** 2 / self.var_[None])

    def _miner_proba(self, X):
        ll = self.feature_log_likelihood(X).sum(axis=2) + np.log(self.class_prior_)[None]
        return _sigmoid(ll[:, 1] - ll[:, 0])
