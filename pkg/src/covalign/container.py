"""Dataset container: one directory per dataset, shared by every command.

Layout::

    <dir>/manifest.json
    <dir>/<data_file>        # one raw binary per domain

``manifest.json`` schema: ``format_version``, ``domains`` — a list of
``{domain_id, channels, samples, sampling_rate_hz, n_trials,
labels (optional), data_file}``. Each binary holds little-endian 32-bit
IEEE-754 floats in trial-major, channel-major, sample order: trial n,
channel i, sample j sits at flat index ``((n*c)+i)*t + j``.

float32 is the wire precision; in-memory trials are float64, so a
round-trip is bit-exact exactly when the values are float32-representable
(true for anything previously loaded from a container, and for the synth
generator's output).
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import DomainSet
from .errors import UnknownArtifact

FORMAT_VERSION = 1


def save_domains(domains: Sequence[DomainSet], path) -> None:
    """Write domains to ``path`` (created if needed, files overwritten)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for d in domains:
        data_file = f"{d.domain_id}.bin"
        raw = d.stack().astype("<f4")
        _atomic_write_bytes(path / data_file, raw.tobytes(order="C"))
        entry = {
            "domain_id": d.domain_id,
            "channels": d.n_channels,
            "samples": d.n_samples,
            "sampling_rate_hz": d.sampling_rate,
            "n_trials": d.n_trials,
            "data_file": data_file,
        }
        if d.labels is not None:
            entry["labels"] = list(d.labels)
        entries.append(entry)
    manifest = {"format_version": FORMAT_VERSION, "domains": entries}
    _atomic_write_bytes(
        path / "manifest.json",
        (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode(),
    )


def load_domains(path) -> list[DomainSet]:
    """Read every domain recorded in ``<path>/manifest.json``."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise UnknownArtifact(f"no manifest.json under {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise UnknownArtifact(f"corrupt manifest.json under {path}: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnknownArtifact(f"unsupported container format_version {version!r}")
    domains = []
    for entry in manifest.get("domains", []):
        n = int(entry["n_trials"])
        c = int(entry["channels"])
        t = int(entry["samples"])
        data_path = path / entry["data_file"]
        raw = np.fromfile(data_path, dtype="<f4")
        if raw.size != n * c * t:
            raise UnknownArtifact(
                f"{data_path}: expected {n * c * t} float32 values, found {raw.size}"
            )
        data = raw.reshape(n, c, t).astype(np.float64)
        domains.append(
            DomainSet.from_stack(
                entry["domain_id"],
                data,
                float(entry["sampling_rate_hz"]),
                labels=entry.get("labels"),
            )
        )
    return domains


def _atomic_write_bytes(target: Path, payload: bytes) -> None:
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, target)
