"""Experiment runner: seeded trials, train/probe splits, sweeps, CSV reports.

A run takes a config (synthetic spec or a features file, a structure
family, hyperparameters, an optional one-variable sweep grid and a trial
count), trains one model per (sweep point, trial seed), encodes and
classifies the held-out clips, and aggregates mean and standard deviation
per metric into long-format rows ``sweep_var,value,metric,mean,std``.

Everything is seeded: trial t uses seed base+t for data generation, the
gallery/probe split, structure construction and training, so reports are
bit-reproducible. Wall-clock times are kept on the report object for
inspection but stay out of the CSV rows, which carry only deterministic
values. A failing trial is recorded as a failure count row instead of
aborting the run.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataio import FeatureMatrix, load_features
from .encoder import (
    MODE_RANK,
    MODE_SELF_CORRECT,
    MODE_SIGN,
    ProbeEncoding,
    classify_voting,
    compression_ratio,
    encode_rank_constrained,
    encode_self_correct,
    encode_sign,
    unique_columns,
)
from .errors import ParseError, SomValidationError
from .filters import HyperParams
from .structures import (
    build_hadamard,
    build_itq_means,
    build_lda_spectral,
    build_random_unique,
    build_two_class,
    expand_to_samples,
)
from .synth import SyntheticSpec, synth_videos
from .trainer import TrainedModel, train_som

STRUCTURE_FAMILIES = ("two-class", "random", "hadamard", "itq-means", "lda-spectral")
ENCODE_MODES = (MODE_SIGN, MODE_SELF_CORRECT, MODE_RANK)
SWEEPABLE = ("lambda2", "bits", "mode", "rank")


def build_structure_table(family: str, bits: int, x, labels, seed: int):
    """Construct a class code table of the requested family on gallery data."""
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = int(labels.max()) + 1
    if family == "two-class":
        if num_classes != 2:
            raise SomValidationError("two-class structure needs exactly 2 classes")
        return build_two_class(bits)
    if family == "random":
        return build_random_unique(num_classes, bits, seed)
    if family == "hadamard":
        return build_hadamard(num_classes, bits)
    if family == "itq-means":
        return build_itq_means(x, labels, bits, seed=seed)
    if family == "lda-spectral":
        extra = None
        if bits > num_classes:
            extra = build_itq_means(x, labels, bits - num_classes, seed=seed)
        return build_lda_spectral(labels, bits, extra=extra, seed=seed)
    raise SomValidationError(f"unknown structure family {family!r}; "
                             f"expected one of {STRUCTURE_FAMILIES}")


def split_clips(fm: FeatureMatrix, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Boolean gallery/probe masks: half of each class's clips to each side."""
    if fm.labels is None:
        raise SomValidationError("split needs labeled features")
    clip_ids = fm.clip_ids
    if clip_ids is None:
        clip_ids = np.arange(fm.num_frames)  # one frame per clip
    rng = np.random.default_rng(seed)
    gallery_clips = []
    for c in np.unique(fm.labels):
        clips = np.unique(clip_ids[fm.labels == c])
        perm = rng.permutation(clips)
        half = max(1, len(clips) // 2)
        gallery_clips.extend(perm[:half].tolist())
    mask = np.isin(clip_ids, gallery_clips)
    if mask.all():
        raise SomValidationError("every clip landed in the gallery; need >= 2 clips per class")
    return mask, ~mask


def encode_clips(model: TrainedModel, x, clip_ids, mode: str, hp: HyperParams,
                 rank: int | None = None) -> np.ndarray:
    """Encode frames clip by clip; returns codes aligned with the columns."""
    x = np.asarray(x, dtype=np.float64)
    clip_ids = np.asarray(clip_ids, dtype=np.int64)
    codes = np.empty((model.bits, x.shape[1]), dtype=np.int8)
    for clip in np.unique(clip_ids):
        cols = clip_ids == clip
        block = x[:, cols]
        if mode == MODE_SIGN:
            enc = encode_sign(model.bank, block)
        elif mode == MODE_SELF_CORRECT:
            enc = encode_self_correct(model.bank, block, hp)
        elif mode == MODE_RANK:
            # clamp to what this clip admits; short clips cap the rank anyway
            r = rank if rank is not None else model.bits
            r = max(1, min(int(r), model.bits, block.shape[1]))
            enc = encode_rank_constrained(model.bank, block, r, hp)
        else:
            raise SomValidationError(f"unknown encode mode {mode!r}")
        codes[:, cols] = enc.codes
    return codes


@dataclass(frozen=True)
class ExperimentConfig:
    synth: SyntheticSpec | None = None
    features_path: str | None = None
    structure: str = "itq-means"
    bits: int = 32
    hp: HyperParams = field(default_factory=HyperParams)
    trials: int = 10
    mode: str = MODE_SELF_CORRECT
    rank: int | None = None
    sweep_var: str | None = None
    sweep_values: tuple = ()

    def validate(self) -> "ExperimentConfig":
        if (self.synth is None) == (self.features_path is None):
            raise SomValidationError("config needs exactly one of 'synth' or 'features'")
        if self.structure not in STRUCTURE_FAMILIES:
            raise SomValidationError(f"unknown structure family {self.structure!r}")
        if self.mode not in ENCODE_MODES:
            raise SomValidationError(f"unknown encode mode {self.mode!r}")
        if self.trials < 1:
            raise SomValidationError("trials must be >= 1")
        if self.bits < 1:
            raise SomValidationError("bits must be >= 1")
        if self.sweep_var is not None:
            if self.sweep_var not in SWEEPABLE:
                raise SomValidationError(
                    f"sweep variable must be one of {SWEEPABLE}, got {self.sweep_var!r}"
                )
            if not self.sweep_values:
                raise SomValidationError("sweep grid is empty")
        self.hp.validate()
        if self.synth is not None:
            self.synth.validate()
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        synth = d.pop("synth", None)
        features = d.pop("features", None)
        hp = HyperParams.from_dict(d.pop("hp", {}))
        sweep = d.pop("sweep", None) or {}
        if len(sweep) > 1:
            raise SomValidationError("only one variable may be swept at a time")
        sweep_var, sweep_values = (next(iter(sweep.items())) if sweep else (None, ()))
        known = {"structure", "bits", "trials", "mode", "rank"}
        unknown = set(d) - known
        if unknown:
            raise SomValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            synth=SyntheticSpec.from_dict(synth) if synth is not None else None,
            features_path=features,
            hp=hp,
            sweep_var=sweep_var,
            sweep_values=tuple(sweep_values),
            **{k: d[k] for k in known if k in d},
        ).validate()


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    recognition_rate: float
    compression_test_pooled: float
    compression_test_clip_mean: float
    compression_train: float


@dataclass(frozen=True)
class ReportRow:
    sweep_var: str
    value: str
    metric: str
    mean: float
    std: float


@dataclass
class ExperimentReport:
    rows: list
    wall_times: dict = field(default_factory=dict)

    @property
    def recognition_rate(self) -> float:
        vals = [r.mean for r in self.rows if r.metric == "recognition_rate"]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def compression_test(self) -> float:
        vals = [r.mean for r in self.rows if r.metric == "cs1_pooled"]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def compression_train(self) -> float:
        vals = [r.mean for r in self.rows if r.metric == "cs2"]
        return float(np.mean(vals)) if vals else float("nan")


def run_trial(config: ExperimentConfig, trial: int, *, lambda2=None, bits=None,
              mode=None, rank=None) -> TrialResult:
    """One seeded train/encode/classify round at one sweep point."""
    base_seed = config.synth.seed if config.synth is not None else config.hp.seed
    seed = base_seed + trial
    bits = bits if bits is not None else config.bits
    mode = mode if mode is not None else config.mode
    rank = rank if rank is not None else config.rank
    hp = replace(config.hp, seed=seed,
                 lambda2=config.hp.lambda2 if lambda2 is None else float(lambda2))

    if config.synth is not None:
        fm = synth_videos(replace(config.synth, seed=seed))
    else:
        fm = load_features(config.features_path)
    gal_mask, probe_mask = split_clips(fm, seed)
    clip_ids = fm.clip_ids if fm.clip_ids is not None else np.arange(fm.num_frames)
    xg, yg = fm.x[:, gal_mask], fm.labels[gal_mask]
    xp, yp, cp = fm.x[:, probe_mask], fm.labels[probe_mask], clip_ids[probe_mask]

    table = build_structure_table(config.structure, bits, xg, yg, seed)
    structure = expand_to_samples(table, yg)
    model = train_som(xg, yg, structure, hp)

    probe_codes = encode_clips(model, xp, cp, mode, hp, rank=rank)
    correct, total, clip_ratios = 0, 0, []
    for clip in np.unique(cp):
        cols = cp == clip
        block = probe_codes[:, cols]
        enc = ProbeEncoding(block, mode, rank=rank,
                            unique_count=unique_columns(block),
                            compression_ratio=compression_ratio(block))
        vote = classify_voting(model, enc)
        correct += int(vote.predicted_class == int(yp[cols][0]))
        total += 1
        clip_ratios.append(enc.compression_ratio)
    return TrialResult(
        trial=trial,
        seed=seed,
        recognition_rate=correct / total,
        compression_test_pooled=compression_ratio(probe_codes),
        compression_test_clip_mean=float(np.mean(clip_ratios)),
        compression_train=compression_ratio(model.gallery_codes),
    )


_METRIC_FIELDS = (
    ("recognition_rate", "recognition_rate"),
    ("cs1_pooled", "compression_test_pooled"),
    ("cs1_clip_mean", "compression_test_clip_mean"),
    ("cs2", "compression_train"),
)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    config.validate()
    points = [(None, None)] if config.sweep_var is None else [
        (config.sweep_var, v) for v in config.sweep_values
    ]
    rows: list[ReportRow] = []
    wall_times: dict[str, float] = {}
    for var, value in points:
        label_var = var if var is not None else "none"
        label_val = format_value(value) if var is not None else ""
        overrides = {var: value} if var is not None else {}
        results, failures = [], 0
        t0 = time.perf_counter()
        for trial in range(config.trials):
            try:
                results.append(run_trial(config, trial, **overrides))
            except Exception:
                failures += 1
        wall_times[f"{label_var}={label_val}"] = time.perf_counter() - t0
        for metric, attr in _METRIC_FIELDS:
            vals = [getattr(r, attr) for r in results]
            if vals:
                rows.append(ReportRow(label_var, label_val, metric,
                                      float(np.mean(vals)), float(np.std(vals))))
        if failures:
            rows.append(ReportRow(label_var, label_val, "failures", float(failures), 0.0))
    rows.sort(key=lambda r: (r.sweep_var, r.value, r.metric))
    return ExperimentReport(rows=rows, wall_times=wall_times)


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def save_report(report: ExperimentReport, path) -> None:
    lines = ["sweep_var,value,metric,mean,std"]
    for r in report.rows:
        lines.append(f"{r.sweep_var},{r.value},{r.metric},{r.mean!r},{r.std!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_report(path) -> ExperimentReport:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "sweep_var,value,metric,mean,std":
        raise ParseError("bad report header", line=1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", line=lineno)
        try:
            rows.append(ReportRow(parts[0], parts[1], parts[2],
                                  float(parts[3]), float(parts[4])))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
    return ExperimentReport(rows=rows)


def load_config_file(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("config root must be a JSON object")
    return ExperimentConfig.from_dict(data)
