"""Synthetic multi-subject generator with controllable inter-subject shift.

Per subject s the model is ``X = A_s @ S + noise``, where S are shared
class-conditional band-limited sources (filtered white noise, class-
dependent per-source variance) and ``A_s = I + shift_strength * E_s``
with E_s a random symmetric perturbation (eigenvalues clamped away from
zero so A_s stays positive-definite). Class power profiles average to
the same value on every source, so the class-average source covariance
is spherical; with symmetric mixing this makes whitening cancel A_s
exactly up to a scalar, i.e. the inter-subject shift is precisely the
kind of shift covariance whitening can remove. Optional out-of-band
interference with subject-specific random topography is available for
temporal-filtering experiments.

Everything is deterministic given the seed, with one substream per
subject. Output values are quantized through float32 once so generated
datasets survive the container format bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import DomainSet
from .errors import ShapeMismatch
from .preprocess import BandpassSpec, bandpass
from .spd import stacked_covariances

#: Class-discriminative per-source variances: the "own" source of a class
#: runs hot, the other classes' sources run cold, background sources sit
#: at 1. hi + (k-1) * lo = k keeps the class-average spherical.
DISCRIMINATIVE_LO = 0.25

#: Mixing eigenvalue clamp keeping A_s positive-definite at large shifts.
MIXING_EIG_MIN = 0.05

#: Interference sources (subject-specific topography, class-independent).
N_INTERFERENCE_SOURCES = 2


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for :func:`generate`; defaults are the desk-scale dataset."""

    n_subjects: int = 5
    channels: int = 8
    samples: int = 256
    trials_per_class: int = 60
    n_classes: int = 2
    sampling_rate: float = 128.0
    shift_strength: float = 0.5
    noise_level: float = 0.1
    band: tuple[float, float] = (8.0, 30.0)
    interference_level: float = 0.0
    interference_band: tuple[float, float] = (40.0, 60.0)
    class_names: Optional[tuple[str, ...]] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("n_subjects", "channels", "samples", "trials_per_class", "n_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_classes > self.channels:
            raise ValueError("need at least one source per class: n_classes <= channels")
        if self.shift_strength < 0 or self.noise_level < 0 or self.interference_level < 0:
            raise ValueError("shift_strength, noise_level, interference_level must be >= 0")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if not self.sampling_rate > 0:
            raise ValueError(f"sampling_rate must be > 0, got {self.sampling_rate}")
        if self.class_names is None:
            if self.n_classes == 2:
                names: tuple[str, ...] = ("left", "right")
            else:
                names = tuple(f"class{k}" for k in range(self.n_classes))
            object.__setattr__(self, "class_names", names)
        else:
            names = tuple(str(n) for n in self.class_names)
            if len(names) != self.n_classes:
                raise ValueError(f"{len(names)} class_names for {self.n_classes} classes")
            object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))
        object.__setattr__(
            self, "interference_band",
            (float(self.interference_band[0]), float(self.interference_band[1])),
        )

    def class_powers(self) -> np.ndarray:
        """(n_classes, channels) per-source variance profile per class."""
        k, c = self.n_classes, self.channels
        hi = k - (k - 1) * DISCRIMINATIVE_LO
        powers = np.ones((k, c))
        powers[:, :k] = DISCRIMINATIVE_LO
        powers[np.arange(k), np.arange(k)] = hi
        return powers


@dataclass(frozen=True)
class GroundTruth:
    """Generator internals emitted for oracle checks."""

    spec: GeneratorSpec
    mixing: dict  # domain_id -> (c, c) mixing matrix A_s
    interference_mixing: dict  # domain_id -> (c, n_int) topography, or None
    class_powers: np.ndarray  # (n_classes, channels)


def _subject_mixing(rng: np.random.Generator, c: int, strength: float) -> np.ndarray:
    g = rng.standard_normal((c, c)) / np.sqrt(c)
    perturb = 0.5 * (g + g.T)
    a = np.eye(c) + strength * perturb
    w, v = np.linalg.eigh(a)
    w = np.maximum(w, MIXING_EIG_MIN)
    return v @ np.diag(w) @ v.T


def _band_noise(rng: np.random.Generator, shape, band, fs: float) -> np.ndarray:
    spec = BandpassSpec(band[0], band[1], order=4, zero_phase=True)
    return bandpass(rng.standard_normal(shape), spec, sampling_rate=fs)


def generate(spec: GeneratorSpec) -> tuple[list[DomainSet], GroundTruth]:
    """Draw one labeled DomainSet per subject plus the ground truth.

    Trials interleave classes round-robin in acquisition order, so any
    contiguous calibration block of length >= n_classes covers every
    class. Labels are the spec's class names.
    """
    powers = spec.class_powers()
    sqrt_powers = np.sqrt(powers)
    c, t = spec.channels, spec.samples
    n_trials = spec.trials_per_class * spec.n_classes
    label_seq = tuple(
        spec.class_names[i % spec.n_classes] for i in range(n_trials)
    )
    class_idx = np.arange(n_trials) % spec.n_classes

    domains = []
    mixing: dict = {}
    interference_mixing: dict = {}
    for s in range(spec.n_subjects):
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, s)))
        domain_id = f"subject_{s:02d}"
        a_s = _subject_mixing(rng, c, spec.shift_strength)
        mixing[domain_id] = a_s
        if spec.interference_level > 0:
            b_s = rng.standard_normal((c, N_INTERFERENCE_SOURCES))
            b_s *= spec.interference_level / np.sqrt(N_INTERFERENCE_SOURCES)
            interference_mixing[domain_id] = b_s
        else:
            interference_mixing[domain_id] = None

        sources = _band_noise(rng, (n_trials, c, t), spec.band, spec.sampling_rate)
        sources *= sqrt_powers[class_idx][:, :, None]
        data = np.einsum("cd,ndt->nct", a_s, sources, optimize=True)
        if spec.noise_level > 0:
            data += spec.noise_level * rng.standard_normal((n_trials, c, t))
        if spec.interference_level > 0:
            hum = _band_noise(
                rng, (n_trials, N_INTERFERENCE_SOURCES, t),
                spec.interference_band, spec.sampling_rate,
            )
            data += np.einsum("ci,nit->nct", interference_mixing[domain_id], hum,
                              optimize=True)
        # container precision, so save/load round-trips bit-exactly
        data = data.astype(np.float32).astype(np.float64)
        domains.append(
            DomainSet.from_stack(domain_id, data, spec.sampling_rate, labels=label_seq)
        )
    truth = GroundTruth(
        spec=spec, mixing=mixing, interference_mixing=interference_mixing,
        class_powers=powers,
    )
    return domains, truth


def discrepancy(domains: Sequence[DomainSet]) -> float:
    """Mean pairwise Frobenius distance between per-domain mean covariances.

    Zero for identical domains; whitening drives it to numerical zero on
    full-rank data.
    """
    if len(domains) < 2:
        raise ValueError("discrepancy needs at least 2 domains")
    c = domains[0].n_channels
    for d in domains[1:]:
        if d.n_channels != c:
            raise ShapeMismatch(
                f"domain {d.domain_id!r} has {d.n_channels} channels, expected {c}"
            )
    means = [stacked_covariances(d).mean(axis=0) for d in domains]
    dists = [
        np.linalg.norm(means[i] - means[j])
        for i in range(len(means))
        for j in range(i + 1, len(means))
    ]
    return float(np.mean(dists))
