"""File formats: feature CSV, packed code files, binary model files.

Features travel as CSV with one frame per row (``label,clip_id,f1,...,fd``,
header required); floats are written with shortest round-trip repr so a
save/load cycle reproduces values exactly. Codes use a one-line-per-frame
text format with hex-packed bits (LSB first within each byte), header
``# SOMCODES1 m=<bits>``. Models are a single binary file: magic line
``SOMMODEL1``, a JSON header with hyperparameters, shapes, labels and
diagnostics, then raw float64 filter weights and bit-packed gallery codes.
All writers are deterministic, so re-serializing a loaded object is
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ShapeMismatchError, VersionMismatchError
from .filters import BitTrainMeta, FilterBank, HyperParams
from .trainer import OuterIterationRecord, TrainedModel

MODEL_MAGIC = b"SOMMODEL1"
CODES_MAGIC = "# SOMCODES1"


@dataclass
class FeatureMatrix:
    """Column-major frame features with optional per-column metadata."""

    x: np.ndarray
    labels: np.ndarray | None = None
    clip_ids: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise ShapeMismatchError(f"features must be 2-D, got {self.x.shape}")
        for name in ("labels", "clip_ids"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=np.int64)
                if v.shape != (self.x.shape[1],):
                    raise ShapeMismatchError(
                        f"{name} shape {v.shape} does not match {self.x.shape[1]} columns"
                    )
                setattr(self, name, v)

    @property
    def feature_dim(self) -> int:
        return self.x.shape[0]

    @property
    def num_frames(self) -> int:
        return self.x.shape[1]


# ---------------------------------------------------------------------------
# bit packing
# ---------------------------------------------------------------------------

def pack_codes(codes: np.ndarray) -> np.ndarray:
    """Pack a +-1 matrix column-wise into bytes, LSB-first within each byte.

    Returns a (ceil(bits/8), n) uint8 array; bit i of a column lands in
    byte i//8 at position i%8.
    """
    codes = np.asarray(codes)
    bits01 = ((codes + 1) // 2).astype(np.uint8)
    return np.packbits(bits01, axis=0, bitorder="little")


def unpack_codes(packed: np.ndarray, bits: int) -> np.ndarray:
    """Inverse of pack_codes for a known bit length."""
    bits01 = np.unpackbits(np.asarray(packed, dtype=np.uint8), axis=0,
                           count=bits, bitorder="little")
    return (2 * bits01.astype(np.int8) - 1)


# ---------------------------------------------------------------------------
# features CSV
# ---------------------------------------------------------------------------

def save_features(fm: FeatureMatrix, path) -> None:
    d = fm.feature_dim
    header = "label,clip_id," + ",".join(f"f{i + 1}" for i in range(d))
    lines = [header]
    for j in range(fm.num_frames):
        label = "" if fm.labels is None else str(int(fm.labels[j]))
        clip = "" if fm.clip_ids is None else str(int(fm.clip_ids[j]))
        values = ",".join(repr(float(v)) for v in fm.x[:, j])
        lines.append(f"{label},{clip},{values}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_features(path) -> FeatureMatrix:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty features file", line=0)
    header = lines[0].split(",")
    if header[:2] != ["label", "clip_id"] or len(header) < 3:
        raise ParseError(
            "header must be 'label,clip_id,f1,...'; got " + lines[0][:60], line=1
        )
    d = len(header) - 2
    cols, labels, clips = [], [], []
    has_labels = has_clips = True
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d + 2:
            raise ParseError(f"expected {d + 2} fields, got {len(parts)}", line=lineno)
        try:
            labels.append(int(parts[0]) if parts[0] != "" else None)
            clips.append(int(parts[1]) if parts[1] != "" else None)
            cols.append([float(v) for v in parts[2:]])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        has_labels &= parts[0] != ""
        has_clips &= parts[1] != ""
    if not cols:
        raise ParseError("no data rows", line=1)
    x = np.asarray(cols, dtype=np.float64).T
    return FeatureMatrix(
        x,
        np.asarray(labels, dtype=np.int64) if has_labels else None,
        np.asarray(clips, dtype=np.int64) if has_clips else None,
    )


# ---------------------------------------------------------------------------
# codes files
# ---------------------------------------------------------------------------

def save_codes(codes: np.ndarray, clip_ids, path, labels=None) -> None:
    """One line per frame: ``clip_id,label,hexbits`` (label may be empty)."""
    codes = np.asarray(codes, dtype=np.int8)
    clip_ids = np.asarray(clip_ids, dtype=np.int64)
    if codes.ndim != 2 or clip_ids.shape != (codes.shape[1],):
        raise ShapeMismatchError("codes and clip ids do not align")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (codes.shape[1],):
            raise ShapeMismatchError("labels do not align with codes")
    m = codes.shape[0]
    packed = pack_codes(codes)
    lines = [f"{CODES_MAGIC} m={m}"]
    for j in range(codes.shape[1]):
        label = "" if labels is None else str(int(labels[j]))
        lines.append(f"{int(clip_ids[j])},{label},{bytes(packed[:, j]).hex()}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_codes(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Returns (codes, clip_ids, labels-or-None)."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    if not lines or not lines[0].startswith(CODES_MAGIC):
        raise VersionMismatchError(
            f"expected '{CODES_MAGIC} m=<bits>' header, got {lines[0][:40] if lines else '<empty>'}"
        )
    try:
        m = int(lines[0].split("m=")[1])
    except (IndexError, ValueError) as exc:
        raise VersionMismatchError(f"malformed codes header: {lines[0]}") from exc
    n_bytes = (m + 7) // 8
    cols, clips, labels = [], [], []
    has_labels = True
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"expected 'clip_id,label,hex', got {line[:40]}", line=lineno)
        try:
            clips.append(int(parts[0]))
            labels.append(int(parts[1]) if parts[1] != "" else None)
            raw = bytes.fromhex(parts[2])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if len(raw) != n_bytes:
            raise ParseError(
                f"expected {n_bytes} code bytes, got {len(raw)}", line=lineno
            )
        cols.append(np.frombuffer(raw, dtype=np.uint8))
        has_labels &= parts[1] != ""
    if not cols:
        raise ParseError("no code rows", line=1)
    packed = np.stack(cols, axis=1)
    codes = unpack_codes(packed, m)
    return (
        codes,
        np.asarray(clips, dtype=np.int64),
        np.asarray(labels, dtype=np.int64) if has_labels else None,
    )


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def save_model(model: TrainedModel, path) -> None:
    d, m = model.bank.weights.shape
    n = model.gallery_codes.shape[1]
    header = {
        "hp": model.hp.as_dict(),
        "feature_dim": d,
        "bits": m,
        "gallery_size": n,
        "labels": model.gallery_labels.tolist(),
        "converged": model.converged,
        "diagnostics": [
            {
                "iteration": rec.iteration,
                "flip_fraction": rec.flip_fraction,
                "relaxed_objective": rec.relaxed_objective,
                "class_block_ranks": list(rec.class_block_ranks),
            }
            for rec in model.diagnostics
        ],
        "train_meta": [
            {
                "iterations": meta.iterations,
                "objective": meta.objective,
                "gap": meta.gap,
                "degenerate": meta.degenerate,
            }
            for meta in model.bank.train_meta
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC + b"\n")
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.bank.weights, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(model.bank.biases, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(pack_codes(model.gallery_codes).T).tobytes())


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        data = fh.read()
    magic_len = len(MODEL_MAGIC) + 1
    if data[:magic_len] != MODEL_MAGIC + b"\n":
        raise VersionMismatchError(
            f"expected {MODEL_MAGIC.decode()} header, got {data[:16]!r}"
        )
    try:
        hlen = int.from_bytes(data[magic_len:magic_len + 8], "little")
        header = json.loads(data[magic_len + 8:magic_len + 8 + hlen])
        d, m, n = header["feature_dim"], header["bits"], header["gallery_size"]
        offset = magic_len + 8 + hlen
        w_bytes = d * m * 8
        weights = np.frombuffer(data[offset:offset + w_bytes], dtype=np.float64)
        weights = weights.reshape(d, m).copy()
        offset += w_bytes
        biases = np.frombuffer(data[offset:offset + m * 8], dtype=np.float64).copy()
        offset += m * 8
        n_bytes = (m + 7) // 8
        packed = np.frombuffer(
            data[offset:offset + n * n_bytes], dtype=np.uint8
        ).reshape(n, n_bytes).T
        if offset + n * n_bytes != len(data):
            raise ParseError(
                f"model file has {len(data) - offset - n * n_bytes} trailing/missing bytes"
            )
        codes = unpack_codes(np.ascontiguousarray(packed), m)
        if weights.size != d * m or biases.size != m:
            raise ParseError("model arrays truncated")
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed model file: {exc}") from exc
    hp = HyperParams.from_dict(header["hp"])
    bank = FilterBank(
        weights,
        biases,
        [BitTrainMeta(**meta) for meta in header.get("train_meta", [])],
    )
    diagnostics = [
        OuterIterationRecord(
            iteration=rec["iteration"],
            flip_fraction=rec["flip_fraction"],
            relaxed_objective=rec["relaxed_objective"],
            class_block_ranks=tuple(rec["class_block_ranks"]),
        )
        for rec in header.get("diagnostics", [])
    ]
    return TrainedModel(
        bank=bank,
        gallery_codes=codes,
        gallery_labels=np.asarray(header["labels"], dtype=np.int64),
        hp=hp,
        diagnostics=diagnostics,
        converged=bool(header["converged"]),
    )
