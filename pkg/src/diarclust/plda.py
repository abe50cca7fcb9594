"""Two-covariance PLDA in diagonalized form.

The model is stored as a mean vector, a projection ``transform`` that
simultaneously whitens the within-class covariance and diagonalizes the
between-class covariance of the data it was fit on, and the between-class
variances ``phi`` in the projected space, sorted descending.

Fitting is desk-scale: the unbiased pooled within-class covariance
(divisor N - K) and the count-weighted between-class scatter (divisor N)
feed a generalized symmetric eigendecomposition. A small ridge
proportional to the within-class trace guards against near-singular
scatter from small class counts; negative eigenvalues (sampling noise)
are clamped to zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ParseError, ValidationError

DEFAULT_MAX_RANK = 128
RIDGE_FACTOR = 1e-6


@dataclass(frozen=True, eq=False)
class PldaModel:
    """Diagonalized two-covariance PLDA: mean, projection, between-class variances."""

    mean: np.ndarray
    transform: np.ndarray
    phi: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64)
        transform = np.array(self.transform, dtype=np.float64)
        phi = np.array(self.phi, dtype=np.float64)
        if mean.ndim != 1:
            raise ValidationError(f"mean must be 1-D, got shape {mean.shape}")
        if transform.ndim != 2 or transform.shape[1] != mean.shape[0]:
            raise ValidationError(
                f"transform must be (rank, {mean.shape[0]}), got shape {transform.shape}"
            )
        if phi.shape != (transform.shape[0],):
            raise ValidationError(f"phi must have one entry per transform row, got shape {phi.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(transform)) and np.all(np.isfinite(phi))):
            raise ValidationError("model parameters contain non-finite values")
        if np.any(phi < 0):
            raise ValidationError("phi entries must be >= 0")
        if np.any(np.diff(phi) > 0):
            raise ValidationError("phi entries must be sorted descending")
        for arr in (mean, transform, phi):
            arr.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "transform", transform)
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def rank(self) -> int:
        return int(self.phi.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PldaModel):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.transform, other.transform)
            and np.array_equal(self.phi, other.phi)
        )


def fit_plda(vectors: np.ndarray, labels: Sequence, rank: int | None = None) -> PldaModel:
    """Fit a two-covariance PLDA model on labeled vectors.

    The unbiased pooled within-class covariance and the count-weighted
    between-class scatter are estimated, the within-class scatter is
    ridge-regularized, and the top-``rank`` generalized eigenvectors are
    kept by descending between-class variance. Needs at least 2 classes
    with 2 vectors each.

    Parameters
    ----------
    vectors : (N, D) array
    labels : sequence of N hashables
    rank : target dimension R'; defaults to min(D, 128)
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError(f"vectors must be a non-empty (N, D) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("vectors contain non-finite values")
    y = np.asarray(labels)
    if y.shape != (X.shape[0],):
        raise ValidationError(f"labels length {y.shape} does not match {X.shape[0]} vectors")

    n, dim = X.shape
    classes, class_idx = np.unique(y, return_inverse=True)
    if classes.shape[0] < 2:
        raise ValidationError("PLDA fitting needs at least 2 classes")
    counts = np.bincount(class_idx)
    if np.any(counts < 2):
        raise ValidationError("every class needs at least 2 vectors")

    if rank is None:
        rank = min(dim, DEFAULT_MAX_RANK)
    if not 1 <= rank <= dim:
        raise ValidationError(f"rank must be in [1, {dim}], got {rank}")

    mean = X.mean(axis=0)
    class_means = np.vstack([X[class_idx == k].mean(axis=0) for k in range(classes.shape[0])])
    centered_within = X - class_means[class_idx]
    # unbiased pooled within-class covariance; N > K since every class has >= 2
    scatter_within = centered_within.T @ centered_within / (n - classes.shape[0])
    centered_between = (class_means - mean) * np.sqrt(counts)[:, np.newaxis]
    scatter_between = centered_between.T @ centered_between / n

    ridge = RIDGE_FACTOR * np.trace(scatter_within) / dim
    if not np.isfinite(ridge) or ridge <= 0:
        raise ValidationError(
            "within-class scatter is singular (zero within-class variance); "
            "add noise to the data or more vectors per class"
        )
    scatter_within = scatter_within + ridge * np.eye(dim)

    try:
        eigvals, eigvecs = scipy.linalg.eigh(scatter_between, scatter_within)
    except scipy.linalg.LinAlgError as exc:
        raise ValidationError(
            "generalized eigendecomposition failed; the within-class scatter is "
            "numerically singular even after ridge regularization"
        ) from exc

    order = np.argsort(eigvals)[::-1][:rank]
    phi = np.clip(eigvals[order], 0.0, None)
    transform = eigvecs[:, order].T
    return PldaModel(mean=mean, transform=transform, phi=phi)


def save_plda(model: PldaModel, path: str | Path) -> None:
    """Serialize a model to JSON; exact float round-trip with load_plda."""
    payload = {
        "mean": model.mean.tolist(),
        "transform": model.transform.tolist(),
        "phi": model.phi.tolist(),
    }
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_plda(path: str | Path) -> PldaModel:
    """Load a model saved by :func:`save_plda`."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid PLDA JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError(f"{path}: PLDA JSON must be an object")
    missing = {"mean", "transform", "phi"} - payload.keys()
    if missing:
        raise ParseError(f"{path}: PLDA JSON missing keys: {sorted(missing)}")
    try:
        return PldaModel(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            transform=np.asarray(payload["transform"], dtype=np.float64),
            phi=np.asarray(payload["phi"], dtype=np.float64),
        )
    except (ValidationError, ValueError) as exc:
        raise ParseError(f"{path}: invalid PLDA model: {exc}") from exc
