"""Bayesian multi-label kNN classifier (QMLC) and label-set decoding.

Training estimates, for each label j, the smoothed prior P(H_j) that a
sample carries the label and the conditional distributions P(C_j = r | H_j)
and P(C_j = r | not H_j) of the count r of label-j carriers among a
sample's k nearest neighbors. Prediction counts label carriers among the
query's k nearest training samples and assigns label j when the posterior
ratio

    f(x, y_j) = P(H_j) P(C_j | H_j) / [P(not H_j) P(C_j | not H_j)]

exceeds the decision threshold t (default 1, the MAP rule). The predicted
label set then maps back to a constellation state, or to an erasure when
no state carries that set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .statespace import N_LABELS, ModulationScheme

_NEIGHBOR_CHUNK = 256  # queries per distance-matrix block; bounds memory at ~chunk*m floats


@dataclass(frozen=True)
class QmlcParams:
    """k neighbors, Laplace smoothing s, posterior-ratio threshold t."""

    k: int
    s: float = 1.0
    t: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameterError(f"k must be a positive integer, got {self.k}")
        if self.s <= 0:
            raise InvalidParameterError(f"smoothing s must be positive, got {self.s}")
        if self.t <= 0:
            raise InvalidParameterError(f"threshold t must be positive, got {self.t}")


@dataclass(frozen=True)
class Prediction:
    """Per-label posterior ratios, thresholded label set, decoded state.

    decoded_state is None for an erasure (a label set no constellation
    state carries).
    """

    ratios: np.ndarray
    labels: frozenset[int]
    decoded_state: int | None


class TrainedClassifier:
    """Immutable result of QMLC training.

    Holds the training features and label flags (the kNN index), the
    priors, the raw per-count tables and the smoothed conditionals.
    """

    def __init__(self, params, features, label_flags, prior_pos, counts_pos, counts_neg):
        k, s = params.k, params.s
        self.params = params
        self.features = features
        self.label_flags = label_flags
        self.prior_pos = prior_pos                  # P(H_j), shape (l,)
        self.prior_neg = 1.0 - prior_pos            # P(not H_j)
        self.counts_pos = counts_pos                # sigma_j[r], shape (l, k+1)
        self.counts_neg = counts_neg                # sigma-bar_j[r]
        # smoothed conditionals P(C_j = r | H_j) and P(C_j = r | not H_j)
        self.cond_pos = (s + counts_pos) / (s * (k + 1) + counts_pos.sum(axis=1, keepdims=True))
        self.cond_neg = (s + counts_neg) / (s * (k + 1) + counts_neg.sum(axis=1, keepdims=True))

    @property
    def n_training(self) -> int:
        return self.features.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "format": "qmlc-classifier",
            "version": 1,
            "params": {"k": self.params.k, "s": self.params.s, "t": self.params.t},
            "prior_pos": self.prior_pos.tolist(),
            "counts_pos": self.counts_pos.tolist(),
            "counts_neg": self.counts_neg.tolist(),
            "features": self.features.tolist(),
            "label_flags": self.label_flags.astype(int).tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TrainedClassifier":
        if doc.get("format") != "qmlc-classifier" or doc.get("version") != 1:
            raise InvalidInputError("not a version-1 classifier document")
        params = QmlcParams(**doc["params"])
        return cls(
            params=params,
            features=np.asarray(doc["features"], dtype=float),
            label_flags=np.asarray(doc["label_flags"], dtype=bool),
            prior_pos=np.asarray(doc["prior_pos"], dtype=float),
            counts_pos=np.asarray(doc["counts_pos"], dtype=float),
            counts_neg=np.asarray(doc["counts_neg"], dtype=float),
        )


def _neighbor_indices(queries, training, k, exclude_self=False):
    """Indices (n, k) of each query's k nearest training rows.

    Exact search; ties at equal distance are broken toward the lower
    training index (stable sort on the distance row). With exclude_self,
    query row i is assumed to be training row i and is skipped.
    """
    n = queries.shape[0]
    out = np.empty((n, k), dtype=np.intp)
    for start in range(0, n, _NEIGHBOR_CHUNK):
        stop = min(start + _NEIGHBOR_CHUNK, n)
        block = queries[start:stop]
        diff = block[:, None, :] - training[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        if exclude_self:
            cols = np.arange(start, stop)
            dist[np.arange(stop - start), cols] = np.inf
        order = np.argsort(dist, axis=1, kind="stable")
        out[start:stop] = order[:, :k]
    return out


def count_neighbors(x: np.ndarray, training: np.ndarray, k: int) -> np.ndarray:
    """The k training indices nearest to x, nearest first."""
    training = np.asarray(training, dtype=float)
    if k >= training.shape[0]:
        raise InvalidParameterError(f"k={k} must be smaller than the training size {training.shape[0]}")
    return _neighbor_indices(np.asarray(x, dtype=float)[None, :], training, k)[0]


def train(features: np.ndarray, label_flags: np.ndarray, params: QmlcParams) -> TrainedClassifier:
    """Fit QMLC on (m, w) feature rows with (m, l) boolean label flags."""
    features = np.asarray(features, dtype=float)
    label_flags = np.asarray(label_flags, dtype=bool)
    if features.ndim != 2 or label_flags.ndim != 2 or features.shape[0] != label_flags.shape[0]:
        raise InvalidInputError(
            f"features {features.shape} and label flags {label_flags.shape} must align on samples"
        )
    m = features.shape[0]
    k, s = params.k, params.s
    if m <= k:
        raise InvalidParameterError(f"need more than k={k} training samples, got {m}")

    n_labels = label_flags.shape[1]
    prior_pos = (s + label_flags.sum(axis=0)) / (2.0 * s + m)

    # psi[i, j]: carriers of label j among sample i's k nearest neighbors,
    # the sample itself excluded from its own neighborhood
    neighbors = _neighbor_indices(features, features, k, exclude_self=True)
    psi = label_flags[neighbors].sum(axis=1)  # (m, l)

    counts_pos = np.zeros((n_labels, k + 1))
    counts_neg = np.zeros((n_labels, k + 1))
    for j in range(n_labels):
        pos = label_flags[:, j]
        counts_pos[j] = np.bincount(psi[pos, j], minlength=k + 1)
        counts_neg[j] = np.bincount(psi[~pos, j], minlength=k + 1)

    return TrainedClassifier(params, features, label_flags, prior_pos, counts_pos, counts_neg)


def posterior_ratios(clf: TrainedClassifier, queries: np.ndarray) -> np.ndarray:
    """f(x, y_j) for each query row and label, shape (n, l)."""
    queries = np.asarray(queries, dtype=float)
    neighbors = _neighbor_indices(queries, clf.features, clf.params.k)
    c = clf.label_flags[neighbors].sum(axis=1)  # (n, l)
    labels_idx = np.arange(c.shape[1])
    numer = clf.prior_pos[None, :] * clf.cond_pos[labels_idx, c]
    denom = clf.prior_neg[None, :] * clf.cond_neg[labels_idx, c]
    return numer / denom


def predict_batch(clf: TrainedClassifier, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(ratios (n, l), flags (n, l)) with flags = ratios > t."""
    ratios = posterior_ratios(clf, queries)
    return ratios, ratios > clf.params.t


def predict(clf: TrainedClassifier, x: np.ndarray, scheme: ModulationScheme | None = None) -> Prediction:
    """Classify one feature vector; decodes a state when a scheme is given."""
    ratios, flags = predict_batch(clf, np.asarray(x, dtype=float)[None, :])
    labels = frozenset(int(j + 1) for j in np.flatnonzero(flags[0]))
    decoded = decode_state(labels, scheme) if scheme is not None else None
    return Prediction(ratios=ratios[0], labels=labels, decoded_state=decoded)


def decode_state(labels: frozenset[int], scheme: ModulationScheme) -> int | None:
    """Map a predicted label set to its constellation state.

    A single label maps to the interior state of that quadrant and an
    adjacent pair maps to the shared axis state (8PSK). Sets no state
    carries (empty, non-adjacent pair, three or more labels, or any
    non-singleton for QPSK) are erasures, returned as None. Erasures are
    excluded from the shared key and counted separately.
    """
    state = scheme.state_for_labels(frozenset(labels))
    return state.index if state is not None else None
