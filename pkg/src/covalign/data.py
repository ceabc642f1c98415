"""Domain data types shared by every other module.

A :class:`Trial` is one epoch of multichannel signal (channels x samples);
a :class:`DomainSet` is one subject's or session's ordered trial
collection, the unit over which alignment is fit. All types are immutable
after construction and safe to share across workers.

Constructors enforce structural invariants only (2-D data, positive
sampling rate, uniform shape across a set). Content checks — finite
entries, label/trial agreement — live in :func:`validate_domain`, which
reports violations instead of raising, so defective sets can be loaded
and diagnosed.

Channel semantics are the caller's responsibility: alignment requires
matching channel counts across domains and assumes index i means the
same electrode everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import AmbiguousPairing, CardinalityMismatch


def _readonly_f64(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, copy=True, order="C")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Trial:
    """One channels x samples matrix with sampling-rate metadata.

    Parameters
    ----------
    data : array_like, shape (c, t)
        Signal values, arbitrary scale. Stored as read-only float64.
    sampling_rate : float
        Sampling rate in Hz, > 0.
    channel_names : sequence of str, optional
        Length must equal the channel count when given.
    """

    data: np.ndarray
    sampling_rate: float
    channel_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        arr = _readonly_f64(self.data)
        if arr.ndim != 2:
            raise ValueError(f"trial data must be 2-D (channels x samples), got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"trial data must be at least 1x1, got shape {arr.shape}")
        if not self.sampling_rate > 0:
            raise ValueError(f"sampling_rate must be > 0, got {self.sampling_rate}")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "sampling_rate", float(self.sampling_rate))
        if self.channel_names is not None:
            names = tuple(str(n) for n in self.channel_names)
            if len(names) != arr.shape[0]:
                raise ValueError(
                    f"channel_names has length {len(names)} for {arr.shape[0]} channels"
                )
            object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def rank_deficient(self) -> bool:
        """Warning-level flag: fewer samples than channels, so the trial
        covariance is necessarily rank-deficient."""
        return self.n_samples < self.n_channels

    def with_data(self, data, sampling_rate: Optional[float] = None) -> "Trial":
        """New trial with replaced samples; metadata carried over."""
        return Trial(
            data,
            self.sampling_rate if sampling_rate is None else sampling_rate,
            self.channel_names,
        )


@dataclass(frozen=True)
class DomainSet:
    """A subject's or session's trials, optionally labeled.

    Trials keep acquisition order; the contiguous-block calibration
    selection in the evaluation harness depends on it. All trials must
    share (channels, samples, sampling_rate).
    """

    domain_id: str
    trials: tuple[Trial, ...]
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        trials = tuple(self.trials)
        if not trials:
            raise ValueError("DomainSet requires at least one trial")
        shape0 = trials[0].data.shape
        fs0 = trials[0].sampling_rate
        for i, tr in enumerate(trials):
            if tr.data.shape != shape0:
                raise ValueError(
                    f"trial {i} has shape {tr.data.shape}, expected {shape0} "
                    f"(uniform shape required within a domain)"
                )
            if tr.sampling_rate != fs0:
                raise ValueError(
                    f"trial {i} has sampling_rate {tr.sampling_rate}, expected {fs0}"
                )
        object.__setattr__(self, "trials", trials)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(y) for y in self.labels))

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self) -> Iterator[Trial]:
        return iter(self.trials)

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def n_channels(self) -> int:
        return self.trials[0].n_channels

    @property
    def n_samples(self) -> int:
        return self.trials[0].n_samples

    @property
    def sampling_rate(self) -> float:
        return self.trials[0].sampling_rate

    def stack(self) -> np.ndarray:
        """All trials as one (n_trials, channels, samples) array."""
        return np.stack([t.data for t in self.trials])

    def classes(self) -> tuple[str, ...]:
        """Distinct labels in first-appearance order."""
        if self.labels is None:
            return ()
        return tuple(dict.fromkeys(self.labels))

    def trials_of(self, label: str) -> tuple[Trial, ...]:
        if self.labels is None:
            return ()
        return tuple(t for t, y in zip(self.trials, self.labels) if y == label)

    def subset(self, indices: Sequence[int], domain_id: Optional[str] = None) -> "DomainSet":
        idx = list(indices)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return DomainSet(
            domain_id if domain_id is not None else self.domain_id,
            tuple(self.trials[i] for i in idx),
            labels,
        )

    def without_labels(self) -> "DomainSet":
        return DomainSet(self.domain_id, self.trials, None)

    @classmethod
    def from_stack(
        cls,
        domain_id: str,
        data: np.ndarray,
        sampling_rate: float,
        labels: Optional[Sequence[str]] = None,
        channel_names: Optional[Sequence[str]] = None,
    ) -> "DomainSet":
        """Build a set from an (n_trials, channels, samples) array."""
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"expected (n_trials, channels, samples), got shape {data.shape}")
        names = tuple(channel_names) if channel_names is not None else None
        trials = tuple(Trial(data[n], sampling_rate, names) for n in range(data.shape[0]))
        return cls(domain_id, trials, tuple(labels) if labels is not None else None)


def validate_domain(d: DomainSet) -> list[str]:
    """Diagnostic invariant check; returns violation strings, never raises.

    Empty list means the set is well-formed: >= 1 trial, uniform shape,
    finite data everywhere, and labels (when present) aligned
    index-for-index with trials.
    """
    violations: list[str] = []
    if d.n_trials < 1:
        violations.append("domain has no trials")
        return violations
    shape0 = d.trials[0].data.shape
    for i, tr in enumerate(d.trials):
        if tr.data.shape != shape0:
            violations.append(
                f"violation at index {i}: shape {tr.data.shape} differs from {shape0}"
            )
        if not np.isfinite(tr.data).all():
            violations.append(f"violation at index {i}: non-finite entries in trial data")
    if d.labels is not None and len(d.labels) != d.n_trials:
        violations.append(
            f"violation: label/trial length mismatch ({len(d.labels)} labels, "
            f"{d.n_trials} trials)"
        )
    return violations


@dataclass(frozen=True)
class ClassPairing:
    """Injective source-class -> target-class mapping.

    Class identifiers are opaque strings; a pairing is never guessed from
    sort order when the label spaces differ.
    """

    pairs: Mapping[str, str]

    def __post_init__(self):
        pairs = {str(s): str(t) for s, t in dict(self.pairs).items()}
        targets = list(pairs.values())
        if len(set(targets)) != len(targets):
            dup = next(t for t in targets if targets.count(t) > 1)
            raise ValueError(f"pairing is not injective: target class {dup!r} repeated")
        object.__setattr__(self, "pairs", pairs)

    def __getitem__(self, source_class: str) -> str:
        return self.pairs[source_class]

    def __contains__(self, source_class: str) -> bool:
        return source_class in self.pairs

    def source_classes(self) -> set[str]:
        return set(self.pairs)

    def target_classes(self) -> set[str]:
        return set(self.pairs.values())

    @classmethod
    def identity(cls, classes: Sequence[str]) -> "ClassPairing":
        return cls({c: c for c in classes})


def pair_classes(
    source_labels,
    target_labels,
    explicit: Optional[ClassPairing] = None,
) -> ClassPairing:
    """Resolve the source->target class pairing for label alignment.

    With identical label spaces the identity pairing is returned; with
    differing spaces an explicit pairing is required (pairing reflects
    experimenter intent — e.g. source "right hand" onto target "left
    hand" — and is never inferred).

    Raises
    ------
    CardinalityMismatch
        Source and target class counts differ and no explicit pairing
        covers them.
    AmbiguousPairing
        Label spaces differ and no explicit pairing was supplied.
    """
    source = {str(c) for c in source_labels}
    target = {str(c) for c in target_labels}
    if explicit is not None:
        if explicit.source_classes() != source or explicit.target_classes() != target:
            raise ValueError(
                f"explicit pairing covers {sorted(explicit.source_classes())} -> "
                f"{sorted(explicit.target_classes())}, but the label spaces are "
                f"{sorted(source)} vs {sorted(target)}"
            )
        return explicit
    if len(source) != len(target):
        raise CardinalityMismatch(
            f"{len(source)} source classes vs {len(target)} target classes"
        )
    if source == target:
        return ClassPairing.identity(sorted(source))
    raise AmbiguousPairing(
        f"label spaces differ ({sorted(source)} vs {sorted(target)}); "
        "supply an explicit ClassPairing"
    )
