"""Variational Bayes clustering in a PLDA-derived Gaussian mixture.

Works on vectors already projected into the PLDA-diagonalized space,
where the within-class covariance is identity and the between-class
variances are the vector ``phi``. Each speaker s has a latent
``y_s ~ N(0, I)`` and generates observations ``x ~ N(sqrt(phi) * y_s, I)``.
With the probability of staying in the same speaker state fixed at zero,
the temporal model degenerates to a plain mixture, so inference reduces
to alternating closed-form updates:

* speaker model:   ``Lambda_s = 1 + (Fa/Fb) * phi * occ_s`` (diagonal
  posterior precision) and
  ``alpha_s = (Fa/Fb) * sqrt(phi) * (sum_t gamma_ts x_t) / Lambda_s``;
* responsibilities: ``gamma_ts = softmax_s(log pi_s + ll_ts)`` with
  ``ll_ts = Fa * (x_t . (sqrt(phi) * alpha_s)
  - 0.5 * sum_d phi_d (alpha_sd^2 + 1/Lambda_sd))``;
* priors:          ``pi_s = mean_t gamma_ts``, dropping speakers whose
  prior falls below a threshold (this is what lets the model infer the
  number of speakers: redundant priors collapse to zero).

The evidence lower bound

``ELBO = sum_t logsumexp_s(log pi_s + ll_ts)
- (Fb/2) * sum_{s,d} (alpha_sd^2 + 1/Lambda_sd - 1 + log Lambda_sd)``

is evaluated once per iteration, right before the responsibility update,
and is non-decreasing between speaker-drop events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .ahc import ClusteringResult
from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class VbxConfig:
    """Inference knobs.

    ``fa`` scales the acoustic log-likelihood, ``fb`` the speaker-model
    regularization (larger values collapse redundant speakers harder).
    ``loop_probability`` must stay 0: that is the mixture reduction this
    module implements.
    """

    fa: float = 0.4
    fb: float = 17.0
    max_iters: int = 20
    elbo_rel_tol: float = 1e-6
    prior_drop_threshold: float = 1e-4
    loop_probability: float = 0.0

    def __post_init__(self) -> None:
        if self.fa <= 0 or self.fb <= 0:
            raise ValidationError(f"fa and fb must be > 0, got fa={self.fa}, fb={self.fb}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.elbo_rel_tol <= 0:
            raise ValidationError(f"elbo_rel_tol must be > 0, got {self.elbo_rel_tol}")
        if not 0.0 < self.prior_drop_threshold < 1.0:
            raise ValidationError(
                f"prior_drop_threshold must be in (0, 1), got {self.prior_drop_threshold}"
            )
        if self.loop_probability != 0.0:
            raise ValidationError("loop_probability must be 0 (mixture reduction)")


@dataclass(frozen=True, eq=False)
class VbxState:
    """Posterior state after inference.

    ``gamma`` is the T x S responsibility matrix (rows sum to 1),
    ``alpha``/``precision`` the diagonal Gaussian posteriors of the
    speaker latents, ``pi`` the speaker priors, ``elbo_trace`` the
    objective value per iteration, and ``drop_iterations`` the iteration
    indices right after which speakers were removed.
    """

    gamma: np.ndarray
    alpha: np.ndarray
    precision: np.ndarray
    pi: np.ndarray
    elbo_trace: tuple[float, ...]
    drop_iterations: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for name in ("gamma", "alpha", "precision", "pi"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.gamma.ndim != 2:
            raise ValidationError("gamma must be a T x S matrix")
        T, S = self.gamma.shape
        if self.alpha.shape != self.precision.shape or self.alpha.shape[0] != S:
            raise ValidationError("alpha and precision must both be S x R'")
        if self.pi.shape != (S,):
            raise ValidationError("pi must have one entry per speaker")
        if np.any(self.gamma < 0) or np.max(np.abs(self.gamma.sum(axis=1) - 1.0)) > 1e-9:
            raise ValidationError("gamma rows must be non-negative and sum to 1")
        if abs(self.pi.sum() - 1.0) > 1e-9 or np.any(self.pi < 0):
            raise ValidationError("pi must be a probability vector")
        if np.any(self.precision < 1.0 - 1e-9):
            raise ValidationError("posterior precisions cannot fall below the prior precision 1")


def _check_inputs(vectors: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError(f"vectors must be a non-empty (T, R') array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("vectors contain non-finite values")
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (X.shape[1],):
        raise ValidationError(f"phi must have shape ({X.shape[1]},), got {phi.shape}")
    if np.any(phi < 0) or not np.all(np.isfinite(phi)):
        raise ValidationError("phi entries must be finite and >= 0")
    return X, phi


def _speaker_model(
    gamma: np.ndarray, X: np.ndarray, phi: np.ndarray, config: VbxConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form update of the diagonal posteriors q(y_s)."""
    ratio = config.fa / config.fb
    occupancy = gamma.sum(axis=0)
    precision = 1.0 + ratio * np.outer(occupancy, phi)
    alpha = ratio * np.sqrt(phi) * (gamma.T @ X) / precision
    return alpha, precision


def _log_likelihood(
    X: np.ndarray, phi: np.ndarray, alpha: np.ndarray, precision: np.ndarray, config: VbxConfig
) -> np.ndarray:
    """Expected log-likelihood ll_ts, constant-in-s terms dropped."""
    means = np.sqrt(phi) * alpha
    quad = (phi * (alpha**2 + 1.0 / precision)).sum(axis=1)
    return config.fa * (X @ means.T - 0.5 * quad)


def _kl_penalty(alpha: np.ndarray, precision: np.ndarray) -> float:
    """Sum over speakers of KL(q(y_s) || N(0, I)), without the Fb scale."""
    return 0.5 * float((alpha**2 + 1.0 / precision - 1.0 + np.log(precision)).sum())


def elbo(state: VbxState, vectors: np.ndarray, phi: np.ndarray, config: VbxConfig) -> float:
    """Evidence lower bound of a state on the given projected vectors."""
    X, phi = _check_inputs(vectors, phi)
    if state.alpha.shape[1] != X.shape[1]:
        raise ValidationError(
            f"state dimension {state.alpha.shape[1]} does not match vectors dimension {X.shape[1]}"
        )
    loglik = _log_likelihood(X, phi, state.alpha, state.precision, config)
    with np.errstate(divide="ignore"):
        logits = np.log(state.pi) + loglik
    value = float(logsumexp(logits, axis=1).sum()) - config.fb * _kl_penalty(state.alpha, state.precision)
    if not np.isfinite(value):
        raise NumericalError("ELBO is not finite")
    return value


def gmm_vbx(
    vectors: np.ndarray,
    phi: np.ndarray,
    init_labels: np.ndarray,
    config: VbxConfig | None = None,
) -> tuple[ClusteringResult, VbxState]:
    """Cluster projected vectors by variational inference with prior collapse.

    ``init_labels`` (typically an AHC partition) seed hard one-hot
    responsibilities; priors start uniform over the initial clusters.
    Iteration stops when the relative ELBO improvement between two
    drop-free iterations falls below ``config.elbo_rel_tol`` or after
    ``config.max_iters`` iterations.

    Returns the clustering (labels = responsibility argmax, centroids =
    means of member projected vectors, priors = surviving speaker priors)
    and the final posterior state. Surviving speakers that end up with no
    assigned vectors are removed so that every reported cluster is
    non-empty.
    """
    config = config or VbxConfig()
    X, phi = _check_inputs(vectors, phi)
    T = X.shape[0]

    labels = np.asarray(init_labels)
    if labels.shape != (T,):
        raise ValidationError(f"init_labels must have shape ({T},), got {labels.shape}")
    _, dense = np.unique(labels, return_inverse=True)
    num_speakers = int(dense.max()) + 1

    gamma = np.zeros((T, num_speakers))
    gamma[np.arange(T), dense] = 1.0
    pi = np.full(num_speakers, 1.0 / num_speakers)

    elbo_trace: list[float] = []
    drop_iterations: list[int] = []
    alpha = np.zeros((num_speakers, X.shape[1]))
    precision = np.ones_like(alpha)

    for iteration in range(config.max_iters):
        alpha, precision = _speaker_model(gamma, X, phi, config)
        loglik = _log_likelihood(X, phi, alpha, precision, config)
        with np.errstate(divide="ignore"):
            logits = np.log(pi) + loglik
        value = float(logsumexp(logits, axis=1).sum()) - config.fb * _kl_penalty(alpha, precision)
        if not np.isfinite(value) or not np.all(np.isfinite(alpha)):
            raise NumericalError(f"non-finite values at VBx iteration {iteration}")

        gamma = softmax(logits, axis=1)
        pi = gamma.mean(axis=0)

        # relative improvement is meaningful only between drop-free iterations
        converged = (
            len(elbo_trace) >= 1
            and (not drop_iterations or drop_iterations[-1] != iteration - 1)
            and value - elbo_trace[-1] < config.elbo_rel_tol * max(abs(elbo_trace[-1]), 1e-12)
        )
        elbo_trace.append(value)

        keep = pi >= config.prior_drop_threshold
        if not keep.any():
            keep[int(np.argmax(pi))] = True
        dropped_now = not keep.all()
        if dropped_now:
            gamma = gamma[:, keep]
            gamma = gamma / gamma.sum(axis=1, keepdims=True)
            pi = pi[keep]
            pi = pi / pi.sum()
            alpha = alpha[keep]
            precision = precision[keep]
            drop_iterations.append(iteration)

        if converged and not dropped_now:
            break

    # refresh the speaker model so the returned state matches the final gamma
    alpha, precision = _speaker_model(gamma, X, phi, config)
    state = VbxState(
        gamma=gamma,
        alpha=alpha,
        precision=precision,
        pi=pi,
        elbo_trace=tuple(elbo_trace),
        drop_iterations=tuple(drop_iterations),
    )

    hard = gamma.argmax(axis=1)
    occupied, labels_out = np.unique(hard, return_inverse=True)
    num = occupied.size
    centroids = np.vstack([X[labels_out == g].mean(axis=0) for g in range(num)])
    surviving_priors = pi[occupied]
    surviving_priors = surviving_priors / surviving_priors.sum()
    result = ClusteringResult(
        labels=labels_out.astype(np.int64),
        centroids=centroids,
        priors=surviving_priors,
        num_clusters=num,
    )
    return result, state
