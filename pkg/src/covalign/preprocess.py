"""Signal conditioning ahead of alignment: band-pass temporal filtering,
common average referencing (CAR), epoching, and downsampling.

Filters are Butterworth IIR, order 4 by default, applied forward-backward
(zero phase) for offline work; a causal single-pass mode exists for
online use. Zero-phase runs pad each end with an even reflection of 3x
the filter order before trimming, which keeps startup transients out of
short trials. All operations are pure; trials may be processed in
parallel with deterministic results.

Each operation accepts a Trial, a DomainSet, or a bare array (filtering
along the last axis) and returns the same kind.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import signal as sps

from .data import DomainSet, Trial
from .errors import InvalidBand, InvalidFactor, TooFewChannels, WindowOutOfRange

Signal = Union[Trial, DomainSet, np.ndarray]


@dataclass(frozen=True)
class BandpassSpec:
    """Passband edges in Hz plus the filter realization knobs."""

    low_hz: float
    high_hz: float
    order: int = 4
    zero_phase: bool = True

    def __post_init__(self):
        if not 0.0 < self.low_hz < self.high_hz:
            raise InvalidBand(
                f"need 0 < low_hz < high_hz, got [{self.low_hz}, {self.high_hz}]"
            )
        if self.order < 1:
            raise InvalidBand(f"order must be >= 1, got {self.order}")

    def sos(self, sampling_rate: float) -> np.ndarray:
        if not self.high_hz < sampling_rate / 2:
            raise InvalidBand(
                f"high edge {self.high_hz} Hz violates Nyquist for fs={sampling_rate} Hz"
            )
        return sps.butter(
            self.order,
            [self.low_hz, self.high_hz],
            btype="bandpass",
            fs=sampling_rate,
            output="sos",
        )


@dataclass(frozen=True)
class EpochSpec:
    """Epoch window relative to cue onset, in seconds."""

    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise InvalidBand(f"need start_s < end_s, got [{self.start_s}, {self.end_s}]")

    def n_samples(self, sampling_rate: float) -> int:
        return int(round((self.end_s - self.start_s) * sampling_rate))


def _apply_to_signal(x: Signal, fn, new_rate: Optional[float] = None) -> Signal:
    """Run an array -> array function over any supported signal kind."""
    if isinstance(x, Trial):
        return x.with_data(fn(x.data), sampling_rate=new_rate)
    if isinstance(x, DomainSet):
        fs = x.sampling_rate if new_rate is None else new_rate
        return DomainSet.from_stack(
            x.domain_id, fn(x.stack()), fs, x.labels, x.trials[0].channel_names
        )
    return fn(np.asarray(x, dtype=np.float64))


def _rate_of(x: Signal, sampling_rate: Optional[float]) -> float:
    if isinstance(x, (Trial, DomainSet)):
        return x.sampling_rate
    if sampling_rate is None:
        raise ValueError("sampling_rate is required for bare arrays")
    return float(sampling_rate)


def bandpass(x: Signal, spec: BandpassSpec, sampling_rate: Optional[float] = None) -> Signal:
    """Band-pass each channel independently along the time axis."""
    fs = _rate_of(x, sampling_rate)
    sos = spec.sos(fs)

    def run(data: np.ndarray) -> np.ndarray:
        if spec.zero_phase:
            padlen = min(3 * spec.order, data.shape[-1] - 1)
            return sps.sosfiltfilt(sos, data, axis=-1, padtype="even", padlen=padlen)
        return sps.sosfilt(sos, data, axis=-1)

    return _apply_to_signal(x, run)


def car(x: Signal) -> Signal:
    """Common average referencing: subtract the instantaneous
    across-channel mean from every channel, making each sample column
    exactly zero-mean."""
    n_ch = x.n_channels if isinstance(x, (Trial, DomainSet)) else np.asarray(x).shape[-2]
    if n_ch < 2:
        raise TooFewChannels(f"CAR needs at least 2 channels, got {n_ch}")
    return _apply_to_signal(x, lambda d: d - d.mean(axis=-2, keepdims=True))


def epoch(
    continuous: np.ndarray,
    sampling_rate: float,
    onsets: Sequence[int],
    spec: EpochSpec,
    domain_id: str = "epoched",
    labels: Optional[Sequence[str]] = None,
    channel_names: Optional[Sequence[str]] = None,
) -> DomainSet:
    """Cut one trial per cue onset from a continuous recording.

    Trial n spans ``[onset_n + round(start_s*fs), ...)`` and has exactly
    ``round((end_s - start_s) * fs)`` samples.

    Raises
    ------
    WindowOutOfRange
        Naming the first onset whose window leaves the recording.
    """
    data = np.asarray(continuous, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"expected (channels, samples), got shape {data.shape}")
    total = data.shape[1]
    length = spec.n_samples(sampling_rate)
    if length < 1:
        raise InvalidBand(f"epoch window [{spec.start_s}, {spec.end_s}] s is empty at fs={sampling_rate}")
    trials = []
    for onset in onsets:
        start = int(round(onset + spec.start_s * sampling_rate))
        stop = start + length
        if start < 0 or stop > total:
            raise WindowOutOfRange(
                f"onset {onset}: window [{start}, {stop}) leaves recording of {total} samples"
            )
        trials.append(Trial(data[:, start:stop], sampling_rate, channel_names))
    return DomainSet(domain_id, tuple(trials), tuple(labels) if labels is not None else None)


#: Anti-alias low-pass for decimation: cutoff as a fraction of the target
#: rate, and its Butterworth order.
ANTIALIAS_CUTOFF_FRACTION = 0.4
ANTIALIAS_ORDER = 8


def downsample(x: Signal, factor: int, sampling_rate: Optional[float] = None) -> Signal:
    """Decimate by an integer factor with zero-phase anti-alias filtering.

    The anti-alias filter is a zero-phase Butterworth low-pass at
    0.4x the target rate, order 8. Output length is ``floor(t / factor)``
    and the sampling rate divides by the factor. ``factor=1`` is the
    identity.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise InvalidFactor(f"factor must be an integer >= 1, got {factor!r}")
    factor = int(factor)
    if factor == 1:
        return x
    fs = _rate_of(x, sampling_rate)
    cutoff = ANTIALIAS_CUTOFF_FRACTION * (fs / factor)
    sos = sps.butter(ANTIALIAS_ORDER, cutoff, btype="lowpass", fs=fs, output="sos")

    def run(data: np.ndarray) -> np.ndarray:
        keep = data.shape[-1] // factor
        padlen = min(3 * ANTIALIAS_ORDER, data.shape[-1] - 1)
        smoothed = sps.sosfiltfilt(sos, data, axis=-1, padtype="even", padlen=padlen)
        return np.ascontiguousarray(smoothed[..., ::factor][..., :keep])

    return _apply_to_signal(x, run, new_rate=fs / factor)


def crop(x: Union[Trial, DomainSet], spec: EpochSpec) -> Union[Trial, DomainSet]:
    """Re-window already-epoched trials, treating sample 0 as cue onset."""
    fs = x.sampling_rate
    start = int(round(spec.start_s * fs))
    length = spec.n_samples(fs)
    total = x.n_samples
    if start < 0 or start + length > total:
        raise WindowOutOfRange(
            f"window [{start}, {start + length}) leaves trial of {total} samples"
        )
    return _apply_to_signal(x, lambda d: np.ascontiguousarray(d[..., start : start + length]))
