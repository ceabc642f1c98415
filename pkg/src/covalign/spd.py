"""Covariance computation and SPD matrix calculus.

Per-trial covariance is the raw ``X @ X.T`` — no 1/t factor, no mean
centering — because the whitening identity (domain mean covariance
becomes I) depends on exactly this form. Centered/scaled variants exist
as documented options.

All symmetric matrix functions go through one eigendecomposition with
eigenvalues clamped to a relative floor and explicit re-symmetrization
after reconstruction. Common average referencing makes every trial
covariance rank-deficient (the channel-sum direction is null), so the
floor is what keeps inverse square roots defined on real pipelines;
clamped null directions pass through with large but bounded gain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .data import DomainSet, Trial
from .errors import DegenerateCovariance

#: Relative eigenvalue floor: eigenvalues below EIGEN_FLOOR x (largest
#: eigenvalue) are clamped up to it before any matrix power.
EIGEN_FLOOR = 1e-10

MEAN_ESTIMATORS = ("euclidean", "log_euclidean")

TrialLike = Union[Trial, np.ndarray]


@dataclass(frozen=True)
class SPDMatrix:
    """A symmetric positive-definite matrix with its applied eigen floor.

    Construct via :meth:`from_matrix`, which symmetry-checks, clamps the
    spectrum to ``eigen_floor * max_eigenvalue``, and caches the
    eigendecomposition for the square-root operations.
    """

    values: np.ndarray
    eigen_floor: float

    @classmethod
    def from_matrix(cls, m: np.ndarray, eigen_floor: float = EIGEN_FLOOR) -> "SPDMatrix":
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        sym_defect = np.linalg.norm(m - m.T)
        scale = np.linalg.norm(m)
        if scale > 0 and sym_defect / scale > 1e-12:
            raise ValueError(
                f"matrix is not symmetric (relative defect {sym_defect / scale:.2e})"
            )
        m = 0.5 * (m + m.T)
        w, v = np.linalg.eigh(m)
        w_max = w[-1]
        if not np.isfinite(w).all():
            raise DegenerateCovariance("non-finite eigenvalues")
        if w_max <= 0.0:
            raise DegenerateCovariance(
                "maximum eigenvalue is not positive (all-zero or negative-definite data)"
            )
        w = np.maximum(w, eigen_floor * w_max)
        values = _symmetrize(v @ np.diag(w) @ v.T)
        values.flags.writeable = False
        obj = cls.__new__(cls)
        object.__setattr__(obj, "values", values)
        object.__setattr__(obj, "eigen_floor", float(eigen_floor))
        object.__setattr__(obj, "_eigvals", w)
        object.__setattr__(obj, "_eigvecs", v)
        return obj

    def __post_init__(self):
        # Direct construction re-routes through from_matrix so the clamp
        # and cached decomposition always exist.
        built = SPDMatrix.from_matrix(self.values, self.eigen_floor)
        object.__setattr__(self, "values", built.values)
        object.__setattr__(self, "eigen_floor", built.eigen_floor)
        object.__setattr__(self, "_eigvals", built._eigvals)
        object.__setattr__(self, "_eigvecs", built._eigvecs)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """Clamped eigenvalues, ascending."""
        return self._eigvals.copy()

    def power(self, p: float) -> np.ndarray:
        """Symmetric matrix power through the cached eigendecomposition."""
        w, v = self._eigvals, self._eigvecs
        return _symmetrize(v @ np.diag(w**p) @ v.T)


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _trial_data(x: TrialLike) -> np.ndarray:
    if isinstance(x, Trial):
        return x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D trial matrix, got shape {arr.shape}")
    return arr


def trial_covariance(x: TrialLike, center: bool = False, scale: bool = False) -> np.ndarray:
    """Raw covariance ``X @ X.T`` of one trial.

    ``center=True`` removes each channel's mean first and ``scale=True``
    divides by the sample count; both are non-default variants and must
    stay off anywhere the whitening identity is relied on.
    """
    data = _trial_data(x)
    if center:
        data = data - data.mean(axis=1, keepdims=True)
    c = _symmetrize(data @ data.T)
    if scale:
        c = c / data.shape[1]
    return c


def _stacked(trials) -> np.ndarray:
    if isinstance(trials, DomainSet):
        return trials.stack()
    if isinstance(trials, np.ndarray):
        arr = np.asarray(trials, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected (n, channels, samples), got shape {arr.shape}")
        return arr
    return np.stack([_trial_data(t) for t in trials])


def stacked_covariances(trials) -> np.ndarray:
    """Per-trial raw covariances as one (n, c, c) array."""
    data = _stacked(trials)
    covs = np.einsum("nct,ndt->ncd", data, data, optimize=True)
    return 0.5 * (covs + covs.transpose(0, 2, 1))


def mean_covariance(
    trials,
    estimator: str = "euclidean",
    shrinkage: float = 0.0,
    eigen_floor: float = EIGEN_FLOOR,
) -> SPDMatrix:
    """Mean of per-trial covariances over a domain.

    ``euclidean`` is the arithmetic mean (the whitening reference);
    ``log_euclidean`` exponentiates the mean log, with each trial
    covariance eigen-floored before the log. The result is then shrunk:
    ``(1 - shrinkage) * M + shrinkage * (trace(M)/c) * I``.

    Parameters
    ----------
    trials : DomainSet, sequence of Trial, or (n, c, t) array
    estimator : {"euclidean", "log_euclidean"}
    shrinkage : float in [0, 1]
    """
    if estimator not in MEAN_ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {MEAN_ESTIMATORS}")
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError(f"shrinkage must be in [0, 1], got {shrinkage}")
    covs = stacked_covariances(trials)
    if estimator == "euclidean":
        m = covs.mean(axis=0)
    else:
        logs = np.empty_like(covs)
        for i, c_i in enumerate(covs):
            spd = SPDMatrix.from_matrix(c_i, eigen_floor)
            w, v = spd._eigvals, spd._eigvecs
            logs[i] = _symmetrize(v @ np.diag(np.log(w)) @ v.T)
        mean_log = logs.mean(axis=0)
        w, v = np.linalg.eigh(_symmetrize(mean_log))
        m = _symmetrize(v @ np.diag(np.exp(w)) @ v.T)
    if shrinkage > 0.0:
        c = m.shape[0]
        m = (1.0 - shrinkage) * m + shrinkage * (np.trace(m) / c) * np.eye(c)
    return SPDMatrix.from_matrix(m, eigen_floor)


def _as_spd(m: Union[SPDMatrix, np.ndarray]) -> SPDMatrix:
    return m if isinstance(m, SPDMatrix) else SPDMatrix.from_matrix(m)


def sqrt_spd(m: Union[SPDMatrix, np.ndarray]) -> np.ndarray:
    """Symmetric principal square root: ``S @ S = M`` (floored spectrum)."""
    return _as_spd(m).power(0.5)


def invsqrt_spd(m: Union[SPDMatrix, np.ndarray]) -> np.ndarray:
    """Symmetric principal inverse square root: ``S @ M @ S = I``.

    Eigenvalues are clamped to the relative floor before the -1/2 power,
    so rank-deficient references (post-CAR, or t < c) stay invertible
    with large but bounded gain along the clamped directions.
    """
    return _as_spd(m).power(-0.5)
