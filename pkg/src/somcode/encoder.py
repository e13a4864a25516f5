"""Probe encoding and Hamming-space voting classification.

Three encoders map a probe clip's filter responses to codes:

* ``encode_sign`` thresholds responses at zero (the plain baseline);
* ``encode_self_correct`` re-runs the low-rank binarization with the
  structure term switched off, letting similar frames pull each other's
  codes together (codes near the decision boundary get corrected by
  their neighbors);
* ``encode_rank_constrained`` projects the responses to the best rank-r
  approximation before taking signs, which caps how many distinct codes a
  clip can produce.

Classification votes per frame: each probe code finds its Hamming-nearest
gallery code and votes for that code's class. Ties are deterministic
(nearest-neighbor ties go to the smaller class id; vote ties to the class
with the smaller summed distance, then the smaller id).

The compression ratio of a code matrix is its distinct-column count over
the column count; lower means more redundancy removed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatchError,
    EmptyGalleryError,
    EmptyProbeError,
    LengthMismatchError,
    RankOutOfRangeError,
)
from .filters import FilterBank, HyperParams, project
from .trainer import TrainedModel, binarize_lowrank, sign_pm1

MODE_SIGN = "sign"
MODE_SELF_CORRECT = "self-correct"
MODE_RANK = "rank"


@dataclass(frozen=True)
class ProbeEncoding:
    """Codes for one probe clip plus redundancy bookkeeping."""

    codes: np.ndarray
    mode: str
    rank: int | None = None
    unique_count: int = 0
    compression_ratio: float = 0.0

    @property
    def bits(self) -> int:
        return self.codes.shape[0]

    @property
    def num_frames(self) -> int:
        return self.codes.shape[1]


@dataclass(frozen=True)
class VoteResult:
    """Outcome of voting one probe clip against the gallery.

    ``total_frames`` counts the votes cast: one per frame normally, one per
    unique probe code when ``per_unique`` voting is selected.
    """

    predicted_class: int
    per_class_votes: dict
    total_frames: int
    tie_broken: bool


def unique_columns(codes: np.ndarray) -> int:
    """Number of bitwise-distinct columns."""
    if codes.shape[1] == 0:
        return 0
    return np.unique(codes, axis=1).shape[1]


def compression_ratio(codes: np.ndarray) -> float:
    """Distinct columns over total columns, in (0, 1]."""
    codes = np.asarray(codes)
    n = codes.shape[1]
    if n < 1:
        raise EmptyProbeError("compression ratio needs at least one column")
    return unique_columns(codes) / n


def _finish(codes: np.ndarray, mode: str, rank: int | None = None) -> ProbeEncoding:
    return ProbeEncoding(
        codes=codes,
        mode=mode,
        rank=rank,
        unique_count=unique_columns(codes),
        compression_ratio=compression_ratio(codes),
    )


def encode_sign(bank: FilterBank, xp: np.ndarray) -> ProbeEncoding:
    """Threshold filter responses at zero, sign(0) = +1."""
    xp = np.asarray(xp, dtype=np.float64)
    if xp.ndim != 2 or xp.shape[1] == 0:
        raise EmptyProbeError("probe must have at least one frame")
    return _finish(sign_pm1(project(bank, xp)), MODE_SIGN)


def encode_self_correct(bank: FilterBank, xp: np.ndarray, hp: HyperParams) -> ProbeEncoding:
    """Low-rank re-binarization of one clip, structure term off.

    Starts from the sign codes and runs the same inner solver as training
    with lambda2 = 0; the structure argument contributes nothing and is
    passed as the starting codes only to satisfy its sign-alphabet contract.
    """
    base = encode_sign(bank, xp)
    hp0 = replace(hp, lambda2=0.0)
    a = project(bank, np.asarray(xp, dtype=np.float64))
    codes, _ = binarize_lowrank(a, base.codes, hp0, base.codes)
    return _finish(codes, MODE_SELF_CORRECT)


def encode_rank_constrained(
    bank: FilterBank, xp: np.ndarray, r: int, hp: HyperParams | None = None
) -> ProbeEncoding:
    """Signs of the best rank-r approximation of the filter responses."""
    xp = np.asarray(xp, dtype=np.float64)
    if xp.ndim != 2 or xp.shape[1] == 0:
        raise EmptyProbeError("probe must have at least one frame")
    a = project(bank, xp)
    r_max = min(a.shape)
    if not 1 <= r <= r_max:
        raise RankOutOfRangeError(f"rank {r} outside [1, {r_max}] for responses {a.shape}")
    return _finish(sign_pm1(linalg.trunc_svd(a, r)), MODE_RANK, rank=r)


def hamming(a, b) -> int:
    """Number of differing positions between two codes."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise LengthMismatchError(f"code lengths differ: {a.shape[0]} vs {b.shape[0]}")
    return int(np.count_nonzero(a != b))


def _gallery_entries(model: TrainedModel) -> tuple[np.ndarray, np.ndarray]:
    """Deduplicated (code column, class) pairs, deterministic order."""
    codes = model.gallery_codes
    labels = model.gallery_labels
    if codes.shape[1] == 0:
        raise EmptyGalleryError("model gallery is empty")
    seen: dict[tuple, None] = {}
    cols, cls = [], []
    for j in range(codes.shape[1]):
        key = (tuple(codes[:, j].tolist()), int(labels[j]))
        if key not in seen:
            seen[key] = None
            cols.append(codes[:, j])
            cls.append(int(labels[j]))
    return np.stack(cols, axis=1), np.asarray(cls, dtype=np.int64)


def classify_voting(
    model: TrainedModel, probe: ProbeEncoding, per_unique: bool = False
) -> VoteResult:
    """Majority vote over per-frame Hamming nearest neighbors.

    With ``per_unique`` each distinct probe code votes once instead of once
    per frame (the redundancy-compressed reading of clip voting).
    """
    if probe.codes.shape[1] == 0:
        raise EmptyProbeError("probe has no frames")
    gallery, gallery_cls = _gallery_entries(model)
    if probe.bits != gallery.shape[0]:
        raise DimensionMismatchError(
            f"probe bits {probe.bits} != gallery bits {gallery.shape[0]}"
        )
    votes_codes = np.unique(probe.codes, axis=1) if per_unique else probe.codes
    m = gallery.shape[0]
    # Hamming distances via the +-1 inner product: d = (m - a.b) / 2
    gram = votes_codes.astype(np.int64).T @ gallery.astype(np.int64)
    dists = (m - gram) // 2  # (votes, gallery entries)

    classes = np.unique(gallery_cls)
    votes = {int(c): 0 for c in classes}
    dist_sums = {int(c): 0 for c in classes}
    tie_broken = False
    for row in dists:
        dmin = row.min()
        nearest = np.flatnonzero(row == dmin)
        cand_classes = np.unique(gallery_cls[nearest])
        if cand_classes.shape[0] > 1:
            tie_broken = True
        chosen = int(cand_classes.min())
        votes[chosen] += 1
        dist_sums[chosen] += int(dmin)

    top = max(votes.values())
    leaders = sorted(c for c, v in votes.items() if v == top)
    if len(leaders) > 1:
        tie_broken = True
        best_sum = min(dist_sums[c] for c in leaders)
        leaders = [c for c in leaders if dist_sums[c] == best_sum]
    predicted = leaders[0]
    return VoteResult(
        predicted_class=predicted,
        per_class_votes=votes,
        total_frames=int(dists.shape[0]),
        tie_broken=tie_broken,
    )
