"""Trial- and feature-space alignment transforms.

Three closed-form aligners:

* Euclidean alignment — per-domain, unsupervised. The reference is the
  arithmetic mean of the domain's raw trial covariances and every trial
  is premultiplied by its symmetric inverse square root, which drives the
  domain's mean covariance to the identity. Batch and incremental
  (running-sum) fits are equivalent.
* Label alignment — supervised, class-wise. Each paired source class is
  mapped onto its target class's covariance geometry; only source trials
  are ever transformed, so prediction-time target trials need no label.
* Correlation alignment on feature vectors — recolors source feature
  covariance into the target's.

The whitening map is fixed to the symmetric principal root. Any S with
``S R S^T = I`` whitens, but the symmetric root is what keeps the
transformation matrix near-diagonal on consistent channel layouts, which
:func:`diag_dominance` quantifies as a diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .data import ClassPairing, DomainSet, Trial, pair_classes
from .errors import (
    EmptyState,
    MissingClass,
    ShapeMismatch,
    UnknownClass,
)
from .spd import (
    EIGEN_FLOOR,
    SPDMatrix,
    invsqrt_spd,
    mean_covariance,
    sqrt_spd,
    stacked_covariances,
    trial_covariance,
)


# ---------------------------------------------------------------------------
# Euclidean alignment


@dataclass(frozen=True)
class EATransform:
    """Whitening map for one domain: matrix is the inverse square root of
    the domain's mean covariance reference."""

    reference: SPDMatrix
    matrix: np.ndarray
    n_trials_fit: int

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "ea",
            "channels": self.n_channels,
            "n_trials_fit": self.n_trials_fit,
            "eigen_floor": self.reference.eigen_floor,
            "matrix": [float(v) for v in self.matrix.ravel(order="C")],
            "reference": [float(v) for v in self.reference.values.ravel(order="C")],
        }


def fit_ea(domain: Union[DomainSet, np.ndarray], eigen_floor: float = EIGEN_FLOOR) -> EATransform:
    """Fit the whitening transform on all of a domain's trials.

    Uses no label information. Raises DegenerateCovariance (from the SPD
    layer) on all-zero data.
    """
    reference = mean_covariance(domain, "euclidean", shrinkage=0.0, eigen_floor=eigen_floor)
    n = len(domain) if isinstance(domain, DomainSet) else int(np.asarray(domain).shape[0])
    return EATransform(reference=reference, matrix=invsqrt_spd(reference), n_trials_fit=n)


def _check_channels(matrix: np.ndarray, data: np.ndarray) -> None:
    if data.shape[-2] != matrix.shape[1]:
        raise ShapeMismatch(
            f"transform is {matrix.shape[0]}x{matrix.shape[1]} but data has "
            f"{data.shape[-2]} channels"
        )


def apply_ea(t: EATransform, trial: Trial) -> Trial:
    """Premultiply one trial by the whitening matrix; metadata preserved."""
    _check_channels(t.matrix, trial.data)
    return trial.with_data(t.matrix @ trial.data)


def apply_ea_domain(t: EATransform, domain: DomainSet) -> DomainSet:
    data = domain.stack()
    _check_channels(t.matrix, data)
    aligned = np.einsum("cd,ndt->nct", t.matrix, data, optimize=True)
    return DomainSet.from_stack(
        domain.domain_id, aligned, domain.sampling_rate, domain.labels,
        domain.trials[0].channel_names,
    )


def align_ea(domain: DomainSet) -> tuple[DomainSet, EATransform]:
    """Fit on the domain and return (aligned domain, transform)."""
    t = fit_ea(domain)
    return apply_ea_domain(t, domain), t


def ea_residual(domain: Union[DomainSet, np.ndarray]) -> float:
    """Frobenius distance of the domain's raw mean covariance from identity.

    After fit + apply on full-rank data this is below 1e-8; on rank-
    deficient domains each clamped null direction contributes one unit.
    """
    covs = stacked_covariances(domain)
    mean = covs.mean(axis=0)
    return float(np.linalg.norm(mean - np.eye(mean.shape[0])))


@dataclass(frozen=True)
class EAState:
    """Running covariance sum for incremental fitting (single writer)."""

    running_sum: np.ndarray
    count: int

    def __post_init__(self):
        arr = np.array(self.running_sum, dtype=np.float64, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "running_sum", arr)

    @classmethod
    def empty(cls, n_channels: int) -> "EAState":
        return cls(np.zeros((n_channels, n_channels)), 0)


def update_ea(state: EAState, trial: Union[Trial, np.ndarray]) -> EAState:
    """Fold one trial's covariance into the running sum."""
    cov = trial_covariance(trial)
    if cov.shape != state.running_sum.shape:
        raise ShapeMismatch(
            f"state tracks {state.running_sum.shape[0]} channels, trial has {cov.shape[0]}"
        )
    return EAState(state.running_sum + cov, state.count + 1)


def finalize_ea(state: EAState, eigen_floor: float = EIGEN_FLOOR) -> EATransform:
    """Transform from the trials folded in so far; matches the batch fit."""
    if state.count < 1:
        raise EmptyState("cannot finalize an EA state with no trials")
    reference = SPDMatrix.from_matrix(state.running_sum / state.count, eigen_floor)
    return EATransform(reference=reference, matrix=invsqrt_spd(reference), n_trials_fit=state.count)


# ---------------------------------------------------------------------------
# Label alignment


@dataclass(frozen=True)
class LATransform:
    """One channel-space map per paired source class."""

    per_class: Mapping[str, np.ndarray]
    pairing: ClassPairing

    def __post_init__(self):
        object.__setattr__(self, "per_class", dict(self.per_class))

    @property
    def n_channels(self) -> int:
        return next(iter(self.per_class.values())).shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "la",
            "channels": self.n_channels,
            "pairing": dict(self.pairing.pairs),
            "per_class": {
                cls: [float(v) for v in m.ravel(order="C")]
                for cls, m in sorted(self.per_class.items())
            },
        }


def fit_la(
    source: DomainSet,
    target: DomainSet,
    pairing: Optional[ClassPairing] = None,
    estimator: str = "euclidean",
    source_shrinkage: float = 0.0,
    target_shrinkage: float = 0.0,
) -> LATransform:
    """Fit class-wise source->target maps from labeled domains.

    For each pair the map is ``sqrt(R_target_class) @ invsqrt(R_source_class)``
    over class-wise mean covariances. ``target_shrinkage`` regularizes the
    target class means, the small-sample side when targets come from a
    short calibration block; it trades the exact covariance-matching
    identity for stability, so it defaults to 0 here.
    """
    for name, d in (("source", source), ("target", target)):
        if d.labels is None:
            raise MissingClass(f"LA requires labels: {name} domain {d.domain_id!r} has none")
    if source.n_channels != target.n_channels:
        raise ShapeMismatch(
            f"source has {source.n_channels} channels, target has {target.n_channels}"
        )
    pairing = pair_classes(source.classes(), target.classes(), explicit=pairing)
    per_class: dict[str, np.ndarray] = {}
    for s_cls, t_cls in sorted(pairing.pairs.items()):
        s_trials = source.trials_of(s_cls)
        t_trials = target.trials_of(t_cls)
        if not s_trials:
            raise MissingClass(f"source class {s_cls!r} has no trials")
        if not t_trials:
            raise MissingClass(f"target class {t_cls!r} has no trials")
        r_s = mean_covariance(s_trials, estimator, source_shrinkage)
        r_t = mean_covariance(t_trials, estimator, target_shrinkage)
        per_class[s_cls] = sqrt_spd(r_t) @ invsqrt_spd(r_s)
    return LATransform(per_class=per_class, pairing=pairing)


def apply_la(t: LATransform, source_trial: Trial, source_class: str) -> Trial:
    """Align one source trial by its class map. Target trials are never
    transformed; at prediction time their labels are unknown."""
    if source_class not in t.per_class:
        raise UnknownClass(f"class {source_class!r} is not in the fitted pairing")
    matrix = t.per_class[source_class]
    _check_channels(matrix, source_trial.data)
    return source_trial.with_data(matrix @ source_trial.data)


def apply_la_domain(t: LATransform, source: DomainSet) -> DomainSet:
    if source.labels is None:
        raise MissingClass(f"LA requires labels: domain {source.domain_id!r} has none")
    aligned = tuple(
        apply_la(t, trial, label) for trial, label in zip(source.trials, source.labels)
    )
    return DomainSet(source.domain_id, aligned, source.labels)


# ---------------------------------------------------------------------------
# Correlation alignment on feature vectors


@dataclass(frozen=True)
class CoralTransform:
    """Feature-space recoloring map W with the covariances it matches:
    ``W.T @ source_cov @ W`` equals ``target_cov`` on full-rank inputs."""

    matrix: np.ndarray
    source_cov: np.ndarray
    target_cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "coral",
            "dim": self.dim,
            "matrix": [float(v) for v in self.matrix.ravel(order="C")],
            "source_cov": [float(v) for v in self.source_cov.ravel(order="C")],
            "target_cov": [float(v) for v in self.target_cov.ravel(order="C")],
        }


def _feature_cov(features: np.ndarray, eigen_floor: float) -> SPDMatrix:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected (n_samples, dim) features, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 feature vectors, got {x.shape[0]}")
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    return SPDMatrix.from_matrix(0.5 * (cov + cov.T), eigen_floor)


def fit_coral(
    source_features: np.ndarray,
    target_features: np.ndarray,
    eigen_floor: float = EIGEN_FLOOR,
) -> CoralTransform:
    """Closed-form minimizer of ``||W.T Cs W - Ct||_F^2``.

    Covariances are mean-centered sample covariances with the eigen
    floor applied; ``W = invsqrt(Cs) @ sqrt(Ct)`` achieves the minimum
    (zero on full-rank inputs).
    """
    c_s = _feature_cov(source_features, eigen_floor)
    c_t = _feature_cov(target_features, eigen_floor)
    if c_s.n != c_t.n:
        raise ShapeMismatch(f"source features have dim {c_s.n}, target {c_t.n}")
    w = invsqrt_spd(c_s) @ sqrt_spd(c_t)
    return CoralTransform(matrix=w, source_cov=c_s.values, target_cov=c_t.values)


def apply_coral(t: CoralTransform, features: np.ndarray) -> np.ndarray:
    """Recolor (n, d) source features; target features pass unchanged."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != t.dim:
        raise ShapeMismatch(f"features have dim {x.shape[-1]}, transform expects {t.dim}")
    return x @ t.matrix


# ---------------------------------------------------------------------------
# Diagnostics and serialization


def diag_dominance(matrix: np.ndarray) -> float:
    """Share of absolute mass on the diagonal, in [0, 1].

    Near 1 means original channel i dominates transformed channel i, so
    channel identity survives alignment. Reported as a diagnostic only;
    the pattern is dataset-dependent.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    total = np.abs(m).sum()
    if total == 0.0:
        return 0.0
    return float(np.abs(np.diag(m)).sum() / total)


def transform_from_dict(payload: Mapping) -> Union[EATransform, LATransform, CoralTransform]:
    """Inverse of the transforms' ``to_dict`` (row-major float arrays)."""
    kind = payload.get("kind")
    if kind == "ea":
        c = int(payload["channels"])
        reference = SPDMatrix.from_matrix(
            np.asarray(payload["reference"], dtype=np.float64).reshape(c, c),
            float(payload.get("eigen_floor", EIGEN_FLOOR)),
        )
        return EATransform(
            reference=reference,
            matrix=np.asarray(payload["matrix"], dtype=np.float64).reshape(c, c),
            n_trials_fit=int(payload["n_trials_fit"]),
        )
    if kind == "la":
        c = int(payload["channels"])
        per_class = {
            cls: np.asarray(flat, dtype=np.float64).reshape(c, c)
            for cls, flat in payload["per_class"].items()
        }
        return LATransform(per_class=per_class, pairing=ClassPairing(payload["pairing"]))
    if kind == "coral":
        d = int(payload["dim"])

        def mat(key):
            return np.asarray(payload[key], dtype=np.float64).reshape(d, d)

        return CoralTransform(matrix=mat("matrix"), source_cov=mat("source_cov"),
                              target_cov=mat("target_cov"))
    raise ValueError(f"unknown transform kind {kind!r}")
