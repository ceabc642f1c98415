"""Spatial filtering and classification: shrinkage-regularized CSP,
log-variance features, and a weighted shrinkage LDA.

The transfer classifier here is deliberately plain: LDA over the pooled
aligned source features plus the target calibration features, with
per-sample weights so the few calibration trials can count more. It is a
stand-in, not a reimplementation, of heavier adaptation classifiers.
Binary classification only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .data import Trial
from .errors import DegenerateCovariance, EmptyClass, ShapeMismatch, SingleClass
from .spd import stacked_covariances

LOG_VARIANCE_EPS = 1e-20


@dataclass(frozen=True)
class SpatialFilterBank:
    """Rows are spatial filters taken from both ends of the generalized
    eigenvalue spectrum of (C_a, C_a + C_b)."""

    filters: np.ndarray
    n_per_side: int
    class_order: tuple[str, str]

    def __post_init__(self):
        arr = np.array(self.filters, dtype=np.float64, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "filters", arr)
        object.__setattr__(self, "class_order", tuple(self.class_order))

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]

    @property
    def n_channels(self) -> int:
        return self.filters.shape[1]

    def apply(self, data: np.ndarray) -> np.ndarray:
        if data.shape[-2] != self.n_channels:
            raise ShapeMismatch(
                f"bank expects {self.n_channels} channels, data has {data.shape[-2]}"
            )
        return self.filters @ data

    def to_dict(self) -> dict:
        return {
            "kind": "csp_bank",
            "n_per_side": self.n_per_side,
            "channels": self.n_channels,
            "class_order": list(self.class_order),
            "filters": [float(v) for v in self.filters.ravel(order="C")],
        }

    @classmethod
    def from_dict(cls, payload) -> "SpatialFilterBank":
        c = int(payload["channels"])
        flat = np.asarray(payload["filters"], dtype=np.float64)
        return cls(flat.reshape(-1, c), int(payload["n_per_side"]),
                   tuple(payload["class_order"]))


def _class_covariance(trials, shrinkage: float) -> np.ndarray:
    """Trace-normalized mean of per-trial covariances, shrunk toward
    (trace/c) * I."""
    covs = stacked_covariances(trials)
    mean = covs.mean(axis=0)
    tr = np.trace(mean)
    if tr <= 0:
        raise DegenerateCovariance("class covariance has non-positive trace")
    mean = mean / tr
    c = mean.shape[0]
    return (1.0 - shrinkage) * mean + shrinkage * (np.trace(mean) / c) * np.eye(c)


def _fix_signs(filters: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector gauge: largest-magnitude entry positive."""
    out = filters.copy()
    for i, row in enumerate(out):
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            out[i] = -row
    return out


def fit_csp(
    class_a: Sequence[Trial],
    class_b: Sequence[Trial],
    n_per_side: int = 3,
    shrinkage: float = 0.05,
    class_order: tuple[str, str] = ("a", "b"),
) -> SpatialFilterBank:
    """Fit spatial filters discriminating two classes of trials.

    Filters are generalized eigenvectors of (C_a, C_a + C_b) with
    ``n_per_side`` taken from each spectral end, normalized so
    ``w^T (C_a + C_b) w = 1``, eigenvector signs fixed by forcing each
    row's largest-magnitude entry positive.

    Parameters
    ----------
    class_a, class_b : trials of each class (a DomainSet slice, a list of
        Trial, or an (n, c, t) array)
    n_per_side : filters per spectral end; 2 * n_per_side <= channels
    shrinkage : float in [0, 1], covariance regularization toward
        (trace/c) * I
    """
    if len(class_a) == 0 or len(class_b) == 0:
        raise EmptyClass("both classes need at least one trial")
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError(f"shrinkage must be in [0, 1], got {shrinkage}")
    c_a = _class_covariance(class_a, shrinkage)
    c_b = _class_covariance(class_b, shrinkage)
    if c_a.shape != c_b.shape:
        raise ShapeMismatch(f"class covariances {c_a.shape} vs {c_b.shape}")
    n_ch = c_a.shape[0]
    if 2 * n_per_side > n_ch:
        raise ValueError(f"2 * n_per_side = {2 * n_per_side} exceeds {n_ch} channels")
    try:
        eigvals, eigvecs = scipy.linalg.eigh(c_a, c_a + c_b)
    except scipy.linalg.LinAlgError as e:
        raise DegenerateCovariance(f"generalized eigenproblem failed: {e}") from e
    order = np.argsort(eigvals)[::-1]
    eigvecs = eigvecs[:, order]
    picked = np.concatenate([eigvecs[:, :n_per_side], eigvecs[:, n_ch - n_per_side:]], axis=1)
    filters = _fix_signs(picked.T)
    return SpatialFilterBank(filters=filters, n_per_side=n_per_side, class_order=class_order)


def csp_eigenvalues(class_a, class_b, shrinkage: float = 0.05) -> np.ndarray:
    """Full generalized eigenvalue spectrum (descending), for diagnostics
    and invariance checks."""
    c_a = _class_covariance(class_a, shrinkage)
    c_b = _class_covariance(class_b, shrinkage)
    return np.sort(scipy.linalg.eigh(c_a, c_a + c_b, eigvals_only=True))[::-1]


def log_variance_features(
    bank: Optional[SpatialFilterBank], trial: Union[Trial, np.ndarray]
) -> np.ndarray:
    """log of each filtered row's variance; ``bank=None`` reads raw channels.

    A floor of 1e-20 inside the log guards silent channels.
    """
    data = trial.data if isinstance(trial, Trial) else np.asarray(trial, dtype=np.float64)
    filtered = bank.apply(data) if bank is not None else data
    return np.log(filtered.var(axis=-1) + LOG_VARIANCE_EPS)


@dataclass(frozen=True)
class LinearClassifier:
    """Linear decision rule: positive class iff ``weights @ x + bias >= 0``."""

    weights: np.ndarray
    bias: float
    class_order: tuple[str, str]  # (negative class, positive class)

    def __post_init__(self):
        arr = np.array(self.weights, dtype=np.float64, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "weights", arr)
        object.__setattr__(self, "class_order", tuple(self.class_order))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "linear_classifier",
            "class_order": list(self.class_order),
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
        }

    @classmethod
    def from_dict(cls, payload) -> "LinearClassifier":
        return cls(
            np.asarray(payload["weights"], dtype=np.float64),
            float(payload["bias"]),
            tuple(payload["class_order"]),
        )


def fit_lda(
    features: np.ndarray,
    labels: Sequence[str],
    sample_weights: Optional[np.ndarray] = None,
    shrinkage: float = 0.05,
) -> LinearClassifier:
    """Weighted binary LDA with covariance shrinkage toward spherical.

    Class means and the pooled covariance are weighted by total weight
    (no Bessel correction), so duplicating every sample at half weight
    reproduces the original classifier. The bias puts the boundary at the
    weighted class midpoint, shifted by the log prior ratio from the
    class weight masses.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected (n, k) features, got shape {x.shape}")
    y = np.asarray([str(v) for v in labels])
    if len(y) != x.shape[0]:
        raise ValueError(f"{x.shape[0]} feature rows but {len(y)} labels")
    if sample_weights is None:
        w = np.ones(len(y))
    else:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != (len(y),):
            raise ValueError(f"sample_weights shape {w.shape} != ({len(y)},)")
        if (w < 0).any():
            raise ValueError("sample_weights must be nonnegative")
    classes = sorted(set(y))
    if len(classes) != 2:
        raise SingleClass(f"binary LDA needs exactly 2 classes, got {classes}")
    neg, pos = classes
    masses, means, scatters = [], [], []
    for cls in (neg, pos):
        mask = y == cls
        w_cls = w[mask]
        mass = w_cls.sum()
        if mass <= 0:
            raise SingleClass(f"class {cls!r} has zero total weight")
        mu = (w_cls[:, None] * x[mask]).sum(axis=0) / mass
        centered = x[mask] - mu
        scatters.append((w_cls[:, None] * centered).T @ centered)
        masses.append(mass)
        means.append(mu)
    total = masses[0] + masses[1]
    pooled = (scatters[0] + scatters[1]) / total
    k = pooled.shape[0]
    tr = np.trace(pooled)
    if tr <= 0:
        # identical points per class: fall back to spherical unit covariance
        sigma = np.eye(k)
    else:
        sigma = (1.0 - shrinkage) * pooled + shrinkage * (tr / k) * np.eye(k)
        # shrinkage floor: keep the solve well-posed even at shrinkage 0
        sigma = sigma + 1e-12 * tr * np.eye(k)
    weights = np.linalg.solve(sigma, means[1] - means[0])
    midpoint = 0.5 * (means[0] + means[1])
    bias = float(-weights @ midpoint + np.log(masses[1] / masses[0]))
    return LinearClassifier(weights=weights, bias=bias, class_order=(neg, pos))


def decision_value(clf: LinearClassifier, features: np.ndarray) -> Union[float, np.ndarray]:
    """Signed distance-like score; >= 0 means the positive class."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != clf.dim:
        raise ShapeMismatch(f"features have dim {x.shape[-1]}, classifier expects {clf.dim}")
    score = x @ clf.weights + clf.bias
    return float(score) if np.ndim(score) == 0 else score


def predict(clf: LinearClassifier, features: np.ndarray):
    """Class id (or array of ids) from the decision rule."""
    score = decision_value(clf, features)
    neg, pos = clf.class_order
    if np.ndim(score) == 0:
        return pos if score >= 0 else neg
    return np.where(np.asarray(score) >= 0, pos, neg)
