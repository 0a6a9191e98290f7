"""Distance features for received phase-space points.

A received point t is summarized by its Euclidean distances to a fixed
ordered set of w virtual reference states r_1..r_w (by default the initial
constellation points), giving the feature vector d = (d_1, ..., d_w).
High-value vectors, whose every-entry-large signature marks points far
from all references, can be filtered out by an absolute cap or a quantile
of the max-entry distribution before classifier training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .statespace import ModulationScheme, PhasePoint


@dataclass(frozen=True)
class ReferenceSet:
    """Ordered reference points; feature index j corresponds to points[j]."""

    points: tuple[PhasePoint, ...]

    def __post_init__(self):
        if len(self.points) < 1:
            raise InvalidParameterError("reference set needs at least one point")

    @property
    def w(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.array([[r.q, r.p] for r in self.points])


def reference_set_for(scheme: ModulationScheme) -> ReferenceSet:
    """Default references: the initial modulated constellation, in state order."""
    return ReferenceSet(points=tuple(s.point for s in scheme.states))


@dataclass(frozen=True)
class LabeledSample:
    """A feature vector with its ground-truth label set and state index."""

    features: np.ndarray
    labels: frozenset[int]
    true_state: int


def euclidean(a: PhasePoint, b: PhasePoint) -> float:
    """Straight-line distance between two phase-space points."""
    return float(np.hypot(a.q - b.q, a.p - b.p))


def extract(point: PhasePoint, refs: ReferenceSet) -> np.ndarray:
    """Feature vector d_j = euclidean(point, refs[j]), in reference order."""
    return extract_batch(np.array([[point.q, point.p]]), refs)[0]


def extract_batch(points: np.ndarray, refs: ReferenceSet) -> np.ndarray:
    """Feature vectors for an (n, 2) array of points; returns (n, w)."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.empty((0, refs.w))
    if points.ndim != 2 or points.shape[1] != 2:
        raise InvalidInputError(f"expected an (n, 2) array of points, got shape {points.shape}")
    ref = refs.as_array()  # (w, 2)
    diff = points[:, None, :] - ref[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def resolve_threshold(features: np.ndarray, threshold: float | None = None, quantile: float | None = None) -> float:
    """Resolve a filtering threshold.

    Either an absolute `threshold` (positive) or a `quantile` in (0, 1] of
    the per-sample max-entry distribution; exactly one must be given.
    """
    if (threshold is None) == (quantile is None):
        raise InvalidParameterError("give exactly one of threshold or quantile")
    if threshold is not None:
        if not threshold > 0:
            raise InvalidParameterError(f"threshold must be positive, got {threshold}")
        return float(threshold)
    if not 0 < quantile <= 1:
        raise InvalidParameterError(f"quantile must be in (0, 1], got {quantile}")
    features = np.asarray(features, dtype=float)
    if features.size == 0:
        raise InvalidParameterError("cannot resolve a quantile threshold on an empty population")
    return float(np.quantile(features.max(axis=1), quantile))


def filter_features(features: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Split sample indices into (kept, discarded) under an absolute cap.

    A sample is discarded iff any feature entry exceeds the threshold.
    Returns the two index arrays, each preserving the input order, so
    callers can keep feature rows, labels, and state indices aligned.
    Discarded samples are returned, never silently dropped: the discard
    rate is a monitored statistic, since excessive filtering biases the
    classifier.
    """
    features = np.asarray(features, dtype=float)
    if features.size == 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    over = (features > threshold).any(axis=1)
    idx = np.arange(features.shape[0])
    return idx[~over], idx[over]


def to_csv_rows(features: np.ndarray, labels: list[frozenset[int]], states: np.ndarray) -> list[list]:
    """Rows (d_1..d_w, L1..L4 flags, true_state) for CSV export."""
    rows = []
    for f, lab, st in zip(features, labels, states):
        rows.append(list(map(float, f)) + [int(j in lab) for j in (1, 2, 3, 4)] + [int(st)])
    return rows


def csv_header(w: int) -> list[str]:
    return [f"d_{j}" for j in range(1, w + 1)] + ["L1", "L2", "L3", "L4", "true_state"]
