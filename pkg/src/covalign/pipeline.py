"""Stage-ordered decoding pipelines and the leave-one-subject-out harness.

A pipeline is an ordered stage list; placement questions (alignment
between temporal and spatial filtering, or after spatial filtering) are
expressed purely by stage order. Fitting consumes the source domains and
the target domain's trial pool plus an optional labeled calibration
block; prediction consumes target trials.

Per-domain semantics: whitening (``ea``) is fit once per domain,
including the target, whose reference by default uses the whole trial
pool unlabeled — alignment is unsupervised, so no label leaks — while
labels are only ever read from the calibration block. Class-wise
alignment (``la``) maps each source domain onto the calibration block's
class geometry and relabels the aligned source trials to their paired
target classes, so heterogeneous label spaces train a target-vocabulary
classifier.

All randomness in the harness flows from one master seed through named
substreams keyed by (subject index, calibration size, repeat): adding
configs or reordering the sweep never perturbs existing draws, and
serial and parallel execution are bitwise identical.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from .data import ClassPairing, DomainSet, Trial
from .decoding import (
    LinearClassifier,
    SpatialFilterBank,
    fit_csp,
    fit_lda,
    log_variance_features,
    predict as predict_labels,
)
from .errors import InvalidConfig, InvalidM, MissingClass, SingleClass
from .alignment import (
    CoralTransform,
    EATransform,
    EAState,
    LATransform,
    apply_coral,
    fit_coral,
    fit_ea,
    fit_la,
    finalize_ea,
    update_ea,
)

STAGE_NAMES = ("bandpass", "car", "ea", "la", "csp", "coral", "logvar", "weighted-lda")

_STAGE_DEFAULTS: dict[str, dict[str, Any]] = {
    "bandpass": {"low_hz": 8.0, "high_hz": 30.0, "order": 4, "zero_phase": True},
    "car": {},
    "ea": {"target_scope": "all", "recompute_every": 1},
    "la": {
        "pairing": None,
        "estimator": "euclidean",
        "source_shrinkage": 0.0,
        "target_shrinkage": 0.05,
    },
    "csp": {"n_per_side": 3, "shrinkage": 0.05},
    "coral": {"target_scope": "all"},
    "logvar": {},
    "weighted-lda": {"target_weight": 2.0, "shrinkage": 0.05},
}


@dataclass(frozen=True)
class StageSpec:
    """One pipeline stage: a recognized name plus its parameters."""

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in STAGE_NAMES:
            raise InvalidConfig(f"unknown stage {self.name!r}; expected one of {STAGE_NAMES}")
        defaults = _STAGE_DEFAULTS[self.name]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise InvalidConfig(
                f"stage {self.name!r} got unknown parameters {sorted(unknown)}"
            )
        merged = {**defaults, **dict(self.params)}
        object.__setattr__(self, "params", merged)

    def __getitem__(self, key: str):
        return self.params[key]


@dataclass(frozen=True)
class PipelineConfig:
    """Named, validated stage ordering.

    Rules: exactly one classifier stage, last; exactly one ``logvar``;
    matrix-space stages (bandpass, car, ea, la, csp) before ``logvar``;
    feature-space ``coral`` after it; at most one alignment stage
    (``ea`` or ``la``); at most one ``csp``.
    """

    name: str
    stages: tuple[StageSpec, ...]

    def __post_init__(self):
        stages = tuple(
            s if isinstance(s, StageSpec) else StageSpec(s["stage"], {
                k: v for k, v in s.items() if k != "stage"
            })
            for s in self.stages
        )
        object.__setattr__(self, "stages", stages)
        names = [s.name for s in stages]
        if names.count("weighted-lda") != 1:
            raise InvalidConfig("exactly one classifier stage (weighted-lda) is required")
        if names[-1] != "weighted-lda":
            raise InvalidConfig("the classifier stage must come last")
        if names.count("logvar") != 1:
            raise InvalidConfig("exactly one logvar feature stage is required")
        logvar_at = names.index("logvar")
        n_align = names.count("ea") + names.count("la")
        if n_align > 1:
            raise InvalidConfig("at most one alignment stage (ea or la) is allowed")
        if names.count("csp") > 1 or names.count("coral") > 1:
            raise InvalidConfig("csp and coral may appear at most once")
        for i, n in enumerate(names):
            if n in ("bandpass", "car", "ea", "la", "csp") and i > logvar_at:
                raise InvalidConfig(f"stage {n!r} operates on trials and must precede logvar")
            if n == "coral" and i < logvar_at:
                raise InvalidConfig("coral operates on feature vectors and must follow logvar")
        ea = self.stage("ea")
        if ea is not None and ea["target_scope"] not in ("all", "calibration"):
            raise InvalidConfig("ea target_scope must be 'all' or 'calibration'")
        coral = self.stage("coral")
        if coral is not None and coral["target_scope"] not in ("all", "calibration"):
            raise InvalidConfig("coral target_scope must be 'all' or 'calibration'")
        if (
            ea is not None
            and coral is not None
            and ea["target_scope"] == "calibration"
            and coral["target_scope"] == "all"
        ):
            raise InvalidConfig(
                "with ea target_scope='calibration' the trial pool is off-limits at fit "
                "time; set coral target_scope='calibration'"
            )

    def stage(self, name: str) -> Optional[StageSpec]:
        for s in self.stages:
            if s.name == name:
                return s
        return None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "stages": [{"stage": s.name, **s.params} for s in self.stages],
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "PipelineConfig":
        try:
            name = payload["name"]
            raw = payload["stages"]
        except (KeyError, TypeError) as e:
            raise InvalidConfig(f"pipeline config needs 'name' and 'stages': {e}") from e
        stages = tuple(
            StageSpec(s["stage"], {k: v for k, v in s.items() if k != "stage"}) for s in raw
        )
        return cls(name=name, stages=stages)


def _preset(name: str, *stage_names: str) -> PipelineConfig:
    return PipelineConfig(name, tuple(StageSpec(s) for s in stage_names))


#: The six stage orderings under comparison plus the alignment variants.
PRESETS: dict[str, PipelineConfig] = {
    cfg.name: cfg
    for cfg in (
        _preset("tf-rcsp", "bandpass", "csp", "logvar", "weighted-lda"),
        _preset("tf-ea-rcsp", "bandpass", "ea", "csp", "logvar", "weighted-lda"),
        _preset("tf-rcsp-ea", "bandpass", "csp", "ea", "logvar", "weighted-lda"),
        _preset("tf-car-rcsp", "bandpass", "car", "csp", "logvar", "weighted-lda"),
        _preset("tf-car-ea-rcsp", "bandpass", "car", "ea", "csp", "logvar", "weighted-lda"),
        _preset("tf-car-rcsp-ea", "bandpass", "car", "csp", "ea", "logvar", "weighted-lda"),
        _preset("ea-rcsp", "ea", "csp", "logvar", "weighted-lda"),
        _preset("tf-la-rcsp", "bandpass", "la", "csp", "logvar", "weighted-lda"),
        _preset("tf-car-la-rcsp", "bandpass", "car", "la", "csp", "logvar", "weighted-lda"),
    )
}


def get_preset(name: str) -> PipelineConfig:
    if name not in PRESETS:
        raise InvalidConfig(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name]


# ---------------------------------------------------------------------------
# Pipeline execution


@dataclass
class _Block:
    """One domain's trials (or features) flowing through the stages."""

    domain_id: str
    data: np.ndarray  # (n, c, t) matrices, or (n, k) features after logvar
    sampling_rate: float
    labels: Optional[tuple[str, ...]]

    def as_domain(self) -> DomainSet:
        return DomainSet.from_stack(self.domain_id, self.data, self.sampling_rate, self.labels)


def _bandpass_op(spec_params: Mapping, fs: float):
    from .preprocess import BandpassSpec, bandpass

    band = BandpassSpec(
        spec_params["low_hz"], spec_params["high_hz"],
        order=spec_params["order"], zero_phase=spec_params["zero_phase"],
    )

    def run(data: np.ndarray) -> np.ndarray:
        return bandpass(data, band, sampling_rate=fs)

    return run


def _car_op(data: np.ndarray) -> np.ndarray:
    return data - data.mean(axis=-2, keepdims=True)


def _apply_matrix(matrix: np.ndarray, data: np.ndarray) -> np.ndarray:
    return np.einsum("cd,ndt->nct", matrix, data, optimize=True)


@dataclass(frozen=True)
class _OnlineEA:
    """Predict-time whitening that continues from the calibration state.

    Each predict call starts from the stored state and folds scoring
    trials in arrival order, re-deriving the map every
    ``recompute_every`` trials; calls do not mutate shared state, so a
    fitted pipeline stays reusable and deterministic.
    """

    initial_state: EAState
    recompute_every: int

    def run(self, data: np.ndarray) -> np.ndarray:
        state = self.initial_state
        matrix = None
        if state.count > 0:
            matrix = finalize_ea(state).matrix
        out = np.empty_like(data)
        since_refit = 0
        for n in range(data.shape[0]):
            state = update_ea(state, data[n])
            since_refit += 1
            if matrix is None or since_refit >= self.recompute_every:
                matrix = finalize_ea(state).matrix
                since_refit = 0
            out[n] = matrix @ data[n]
        return out


class FittedPipeline:
    """Frozen result of Pipeline.fit; safe for concurrent predict."""

    def __init__(
        self,
        config: PipelineConfig,
        target_ops: Sequence,
        classifier: LinearClassifier,
        bank: Optional[SpatialFilterBank],
        ea_transforms: Mapping[str, EATransform],
        la_transforms: Mapping[str, LATransform],
        coral: Optional[CoralTransform],
    ):
        self.config = config
        self._target_ops = tuple(target_ops)
        self.classifier = classifier
        self.bank = bank
        self.ea_transforms = dict(ea_transforms)
        self.la_transforms = dict(la_transforms)
        self.coral = coral

    def _features(self, data: np.ndarray) -> np.ndarray:
        for op in self._target_ops:
            data = op(data)
        return np.log(data.var(axis=-1) + 1e-20)

    def predict(self, trials: Union[DomainSet, Sequence[Trial], np.ndarray]) -> np.ndarray:
        """Class labels for target trials, in order."""
        data = _stack_trials(trials)
        feats = self._features(data)
        return predict_labels(self.classifier, feats)

    def decision_values(self, trials) -> np.ndarray:
        from .decoding import decision_value

        return decision_value(self.classifier, self._features(_stack_trials(trials)))

    def score(self, trials, labels: Sequence[str]) -> float:
        preds = self.predict(trials)
        y = np.asarray([str(v) for v in labels])
        if len(y) != len(preds):
            raise ValueError(f"{len(preds)} predictions vs {len(y)} labels")
        return float(np.mean(preds == y))


def _stack_trials(trials) -> np.ndarray:
    if isinstance(trials, DomainSet):
        return trials.stack()
    if isinstance(trials, np.ndarray):
        return np.asarray(trials, dtype=np.float64)
    return np.stack([t.data for t in trials])


class Pipeline:
    """Runnable stage composition; build via :func:`build_pipeline`."""

    def __init__(self, config: PipelineConfig):
        self.config = config

    def fit(
        self,
        sources: Sequence[DomainSet],
        target_pool: DomainSet,
        calibration: Optional[DomainSet] = None,
    ) -> FittedPipeline:
        """Fit every stage.

        Parameters
        ----------
        sources : labeled source domains (one whitening fit each)
        target_pool : all target trials; labels, if any, are ignored
        calibration : the labeled target calibration block, or None for
            plug-and-play (m = 0) transfer
        """
        if not sources:
            raise InvalidConfig("at least one source domain is required")
        for d in sources:
            if d.labels is None:
                raise MissingClass(f"source domain {d.domain_id!r} has no labels")
        if calibration is not None and calibration.labels is None:
            raise MissingClass("calibration block has no labels")

        fs = target_pool.sampling_rate
        src = [_Block(d.domain_id, d.stack(), d.sampling_rate, d.labels) for d in sources]
        pool = _Block(target_pool.domain_id, target_pool.stack(), fs, None)
        calib = (
            _Block(calibration.domain_id, calibration.stack(), calibration.sampling_rate,
                   calibration.labels)
            if calibration is not None and calibration.n_trials > 0
            else None
        )

        target_ops: list = []
        bank: Optional[SpatialFilterBank] = None
        classifier: Optional[LinearClassifier] = None
        ea_transforms: dict[str, EATransform] = {}
        la_transforms: dict[str, LATransform] = {}
        coral: Optional[CoralTransform] = None
        in_feature_space = False

        for stage in self.config.stages:
            if stage.name == "bandpass":
                op = _bandpass_op(stage.params, fs)
                for b in src:
                    b.data = op(b.data)
                pool.data = op(pool.data)
                if calib is not None:
                    calib.data = op(calib.data)
                target_ops.append(op)
            elif stage.name == "car":
                for b in src:
                    b.data = _car_op(b.data)
                pool.data = _car_op(pool.data)
                if calib is not None:
                    calib.data = _car_op(calib.data)
                target_ops.append(_car_op)
            elif stage.name == "ea":
                for b in src:
                    t = fit_ea(b.data)
                    ea_transforms[b.domain_id] = t
                    b.data = _apply_matrix(t.matrix, b.data)
                if stage["target_scope"] == "all":
                    t = fit_ea(pool.data)
                    ea_transforms[pool.domain_id] = t
                    pool.data = _apply_matrix(t.matrix, pool.data)
                    if calib is not None:
                        calib.data = _apply_matrix(t.matrix, calib.data)
                    target_ops.append(lambda d, m=t.matrix: _apply_matrix(m, d))
                else:
                    state = EAState.empty(pool.data.shape[1])
                    if calib is not None:
                        for n in range(calib.data.shape[0]):
                            state = update_ea(state, calib.data[n])
                        t = finalize_ea(state)
                        ea_transforms[pool.domain_id] = t
                        calib.data = _apply_matrix(t.matrix, calib.data)
                    online = _OnlineEA(state, int(stage["recompute_every"]))
                    target_ops.append(online.run)
            elif stage.name == "la":
                if calib is None:
                    raise MissingClass(
                        "LA requires labels: a labeled calibration block with at least "
                        "one trial per paired class (m >= 1)"
                    )
                pairing = stage["pairing"]
                explicit = ClassPairing(pairing) if pairing is not None else None
                calib_domain = calib.as_domain()
                for b in src:
                    t = fit_la(
                        b.as_domain(),
                        calib_domain,
                        pairing=explicit,
                        estimator=stage["estimator"],
                        source_shrinkage=stage["source_shrinkage"],
                        target_shrinkage=stage["target_shrinkage"],
                    )
                    la_transforms[b.domain_id] = t
                    aligned = np.empty_like(b.data)
                    for n, label in enumerate(b.labels):
                        aligned[n] = t.per_class[label] @ b.data[n]
                    b.data = aligned
                    # classifier speaks the target vocabulary
                    b.labels = tuple(t.pairing[label] for label in b.labels)
            elif stage.name == "csp":
                data_parts = [b.data for b in src]
                label_parts = [b.labels for b in src]
                if calib is not None:
                    data_parts.append(calib.data)
                    label_parts.append(calib.labels)
                all_labels = [y for part in label_parts for y in part]
                classes = sorted(set(all_labels))
                if len(classes) != 2:
                    raise SingleClass(
                        f"csp needs exactly 2 pooled classes, got {classes}"
                    )
                pooled = np.concatenate(data_parts, axis=0)
                y = np.asarray(all_labels)
                bank = fit_csp(
                    pooled[y == classes[0]],
                    pooled[y == classes[1]],
                    n_per_side=stage["n_per_side"],
                    shrinkage=stage["shrinkage"],
                    class_order=(classes[0], classes[1]),
                )
                for b in src:
                    b.data = np.einsum("kc,nct->nkt", bank.filters, b.data, optimize=True)
                pool.data = np.einsum("kc,nct->nkt", bank.filters, pool.data, optimize=True)
                if calib is not None:
                    calib.data = np.einsum("kc,nct->nkt", bank.filters, calib.data,
                                           optimize=True)
                target_ops.append(lambda d, f=bank.filters: np.einsum(
                    "kc,nct->nkt", f, d, optimize=True))
            elif stage.name == "logvar":
                for b in src:
                    b.data = np.log(b.data.var(axis=-1) + 1e-20)
                pool.data = np.log(pool.data.var(axis=-1) + 1e-20)
                if calib is not None:
                    calib.data = np.log(calib.data.var(axis=-1) + 1e-20)
                in_feature_space = True
            elif stage.name == "coral":
                src_feats = np.concatenate([b.data for b in src], axis=0)
                if stage["target_scope"] == "all":
                    tgt_feats = pool.data
                else:
                    if calib is None:
                        raise MissingClass(
                            "coral target_scope='calibration' needs a calibration block"
                        )
                    tgt_feats = calib.data
                if tgt_feats.shape[0] < 2:
                    raise MissingClass(
                        "coral needs at least 2 target feature vectors in scope"
                    )
                coral = fit_coral(src_feats, tgt_feats)
                offset = 0
                for b in src:
                    n = b.data.shape[0]
                    b.data = apply_coral(coral, src_feats[offset : offset + n])
                    offset += n
            elif stage.name == "weighted-lda":
                feat_parts = [b.data for b in src]
                label_parts = [b.labels for b in src]
                weight_parts = [np.ones(b.data.shape[0]) for b in src]
                if calib is not None:
                    feat_parts.append(calib.data)
                    label_parts.append(calib.labels)
                    weight_parts.append(
                        np.full(calib.data.shape[0], float(stage["target_weight"]))
                    )
                x = np.concatenate(feat_parts, axis=0)
                y = [label for part in label_parts for label in part]
                w = np.concatenate(weight_parts)
                classifier = fit_lda(x, y, sample_weights=w, shrinkage=stage["shrinkage"])

        assert classifier is not None and in_feature_space  # guaranteed by config rules
        return FittedPipeline(
            config=self.config,
            target_ops=target_ops,
            classifier=classifier,
            bank=bank,
            ea_transforms=ea_transforms,
            la_transforms=la_transforms,
            coral=coral,
        )


def build_pipeline(config: Union[PipelineConfig, Mapping, str]) -> Pipeline:
    """Validate and wrap a config (a PipelineConfig, a config dict, or a
    preset name)."""
    if isinstance(config, str):
        config = get_preset(config)
    elif not isinstance(config, PipelineConfig):
        config = PipelineConfig.from_dict(config)
    return Pipeline(config)


# ---------------------------------------------------------------------------
# Leave-one-subject-out harness


@dataclass(frozen=True)
class CalibrationSpec:
    """Contiguous-block calibration selection: m labeled trials starting
    at a uniformly random offset (the block design avoids scattering
    calibration trials across the session)."""

    m: int

    def __post_init__(self):
        if self.m < 0:
            raise InvalidM(f"m must be >= 0, got {self.m}")


def select_calibration_block(n: int, m: int, rng: np.random.Generator) -> range:
    """Uniform contiguous index block of length m within [0, n)."""
    if not 0 <= m <= n:
        raise InvalidM(f"need 0 <= m <= n, got m={m}, n={n}")
    if m == 0:
        return range(0, 0)
    start = int(rng.integers(0, n - m + 1))
    return range(start, start + m)


@dataclass(frozen=True)
class EvalRecord:
    subject: str
    m: int
    repeat: int
    accuracy: Optional[float]
    n_eval: int
    block_start: Optional[int]
    status: str  # "ok" or "skipped_la_m0"

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "m": self.m,
            "repeat": self.repeat,
            "accuracy": self.accuracy,
            "n_eval": self.n_eval,
            "block_start": self.block_start,
            "status": self.status,
        }


@dataclass(frozen=True)
class EvalReport:
    """Per-(subject, m, repeat) accuracies with the config and seeds that
    produced them; every aggregate is recomputed from the records."""

    config: dict
    seed: int
    m_values: tuple[int, ...]
    repeats: int
    records: tuple[EvalRecord, ...]

    def _ok(self, subject: Optional[str] = None, m: Optional[int] = None):
        return [
            r.accuracy
            for r in self.records
            if r.status == "ok"
            and (subject is None or r.subject == subject)
            and (m is None or r.m == m)
        ]

    def subjects(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(r.subject for r in self.records))

    def mean_accuracy(self, m: Optional[int] = None, subject: Optional[str] = None):
        vals = self._ok(subject, m)
        return float(np.mean(vals)) if vals else None

    def overall(self) -> dict[int, dict[str, Optional[float]]]:
        out = {}
        for m in self.m_values:
            vals = self._ok(m=m)
            out[m] = {
                "mean": float(np.mean(vals)) if vals else None,
                "std": float(np.std(vals)) if vals else None,
                "n_runs": len(vals),
            }
        return out

    def subject_table(self) -> dict[str, dict[int, Optional[float]]]:
        return {
            s: {m: self.mean_accuracy(m=m, subject=s) for m in self.m_values}
            for s in self.subjects()
        }

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "m_values": list(self.m_values),
            "repeats": self.repeats,
            "records": [r.to_dict() for r in self.records],
            "overall": {str(m): v for m, v in self.overall().items()},
            "per_subject": {
                s: {str(m): v for m, v in row.items()}
                for s, row in self.subject_table().items()
            },
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "EvalReport":
        records = tuple(
            EvalRecord(
                subject=r["subject"], m=int(r["m"]), repeat=int(r["repeat"]),
                accuracy=r["accuracy"], n_eval=int(r["n_eval"]),
                block_start=r["block_start"], status=r["status"],
            )
            for r in payload["records"]
        )
        return cls(
            config=dict(payload["config"]),
            seed=int(payload["seed"]),
            m_values=tuple(int(m) for m in payload["m_values"]),
            repeats=int(payload["repeats"]),
            records=records,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject", "m", "repeat", "accuracy"])
            for r in self.records:
                writer.writerow([
                    r.subject, r.m, r.repeat,
                    "" if r.accuracy is None else f"{r.accuracy:.10g}",
                ])


DEFAULT_M_VALUES = (0, 4, 8, 12, 16, 20)


def _n_workers(explicit: Optional[int]) -> int:
    if explicit is not None:
        return max(1, explicit)
    env = os.environ.get("COVALIGN_THREADS")
    return max(1, int(env)) if env else 1


def _run_cell(
    config: PipelineConfig,
    domains: Sequence[DomainSet],
    target_idx: int,
    m: int,
    repeat: int,
    seed: int,
) -> EvalRecord:
    target = domains[target_idx]
    sources = [d for i, d in enumerate(domains) if i != target_idx]
    n = target.n_trials
    if not 0 <= m < n:
        raise InvalidM(f"m={m} must satisfy 0 <= m < target trial count {n}")
    skip_la = config.stage("la") is not None and m == 0
    if skip_la:
        return EvalRecord(
            subject=target.domain_id, m=m, repeat=repeat, accuracy=None,
            n_eval=n, block_start=None, status="skipped_la_m0",
        )
    rng = np.random.default_rng(np.random.SeedSequence((seed, target_idx, m, repeat)))
    block = select_calibration_block(n, m, rng)
    calibration = target.subset(block) if m > 0 else None
    holdout = [i for i in range(n) if i not in block]
    try:
        fitted = Pipeline(config).fit(sources, target.without_labels(), calibration)
        preds = fitted.predict(target.subset(holdout).without_labels())
    except Exception as e:
        e.args = (f"{e} [subject={target.domain_id}, m={m}, repeat={repeat}]",)
        raise
    truth = np.asarray([target.labels[i] for i in holdout])
    accuracy = float(np.mean(preds == truth))
    return EvalRecord(
        subject=target.domain_id, m=m, repeat=repeat, accuracy=accuracy,
        n_eval=len(holdout), block_start=block.start if m > 0 else None, status="ok",
    )


def loso_evaluate(
    domains: Sequence[DomainSet],
    config: Union[PipelineConfig, Mapping, str],
    m_values: Sequence[int] = DEFAULT_M_VALUES,
    repeats: int = 1,
    seed: int = 0,
    n_workers: Optional[int] = None,
) -> EvalReport:
    """Leave-one-subject-out sweep over calibration sizes.

    Each (target subject, m, repeat) cell draws its calibration block
    from its own named RNG substream, fits the pipeline on the remaining
    domains plus the block, and scores the held-out target trials. Cells
    are independent; with COVALIGN_THREADS (or ``n_workers``) they run in
    parallel, reduced in deterministic order.
    """
    config = build_pipeline(config).config
    domains = list(domains)
    if seed < 0:
        raise InvalidConfig(f"seed must be >= 0, got {seed}")
    if len(domains) < 2:
        raise InvalidConfig("LOSO needs at least 2 domains")
    for d in domains:
        if d.labels is None:
            raise MissingClass(f"domain {d.domain_id!r} has no labels")
    cells = [
        (ti, m, r)
        for ti in range(len(domains))
        for m in m_values
        for r in range(repeats)
    ]
    workers = _n_workers(n_workers)
    if workers == 1:
        records = [_run_cell(config, domains, ti, m, r, seed) for ti, m, r in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_cell, config, domains, ti, m, r, seed)
                for ti, m, r in cells
            ]
            records = [f.result() for f in futures]
    return EvalReport(
        config=config.to_dict(),
        seed=seed,
        m_values=tuple(int(m) for m in m_values),
        repeats=repeats,
        records=tuple(records),
    )


@dataclass(frozen=True)
class ConfigComparison:
    """Per-config LOSO reports sharing calibration draws, plus pairwise
    mean-accuracy deltas."""

    reports: dict  # config name -> EvalReport, insertion-ordered

    def names(self) -> tuple[str, ...]:
        return tuple(self.reports)

    def table(self) -> dict[str, dict[int, Optional[float]]]:
        return {
            name: {m: rep.mean_accuracy(m=m) for m in rep.m_values}
            for name, rep in self.reports.items()
        }

    def delta(self, name_a: str, name_b: str, m: Optional[int] = None) -> Optional[float]:
        """Mean accuracy of a minus mean accuracy of b."""
        a = self.reports[name_a].mean_accuracy(m=m)
        b = self.reports[name_b].mean_accuracy(m=m)
        if a is None or b is None:
            return None
        return a - b

    def pairwise_deltas(self) -> dict[str, Optional[float]]:
        names = self.names()
        return {
            f"{a} - {b}": self.delta(a, b)
            for i, a in enumerate(names)
            for b in names[i + 1 :]
        }

    def to_dict(self) -> dict:
        return {
            "configs": {name: rep.to_dict() for name, rep in self.reports.items()},
            "table": {
                name: {str(m): v for m, v in row.items()}
                for name, row in self.table().items()
            },
            "pairwise_deltas": self.pairwise_deltas(),
        }


def compare_configs(
    domains: Sequence[DomainSet],
    configs: Sequence[Union[PipelineConfig, Mapping, str]],
    m_values: Sequence[int] = DEFAULT_M_VALUES,
    repeats: int = 1,
    seed: int = 0,
    n_workers: Optional[int] = None,
) -> ConfigComparison:
    """Evaluate several configs under identical calibration draws.

    The RNG substreams are keyed by (subject, m, repeat) only, so every
    config sees the same blocks and differences reflect the pipeline,
    not the sampling.
    """
    resolved = [build_pipeline(c).config for c in configs]
    if not resolved:
        raise InvalidConfig("compare_configs needs at least one config")
    names = [c.name for c in resolved]
    if len(set(names)) != len(names):
        raise InvalidConfig(f"config names must be unique, got {names}")
    reports = {
        c.name: loso_evaluate(domains, c, m_values, repeats, seed, n_workers)
        for c in resolved
    }
    return ConfigComparison(reports=reports)
