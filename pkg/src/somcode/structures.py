"""Prior code structures: per-class binary code tables and their expansion.

A class code table assigns every class one distinct code in {-1,+1}^m.
Expanding a table over per-sample labels produces the target matrix whose
per-class blocks are rank one (all columns of a class identical). Several
table families are provided: the complementary two-class pair, uniformly
random distinct codes, Sylvester-Hadamard rows, quantized class means, and
one-hot spectral codes with optional appended bits.

``separation_score`` measures how well a code matrix separates labeled
samples: the mean inter-class Hamming distance minus the mean intra-class
Hamming distance. Its maximum over all code matrices is the bit count m,
attained exactly when intra-class codes are identical and inter-class codes
differ in every bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard as _sylvester_hadamard

from .errors import (
    CapacityExceededError,
    DegenerateMeansError,
    LabelOutOfRangeError,
    NoPairsError,
    ShapeMismatchError,
    SizeNotPowerOfTwoError,
    TooFewBitsError,
)

ITQ_DEFAULT_ITERS = 50


@dataclass(frozen=True)
class ClassCodeTable:
    """One code per class: ``codes`` is (num_classes, bits) in {-1,+1}."""

    codes: np.ndarray
    source: str = "custom"

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int8)
        if codes.ndim != 2 or codes.shape[0] < 1 or codes.shape[1] < 1:
            raise ShapeMismatchError(f"code table must be 2-D and non-empty, got {codes.shape}")
        if not np.all(np.abs(codes) == 1):
            raise ShapeMismatchError("code table entries must be -1 or +1")
        if len({tuple(row) for row in codes}) != codes.shape[0]:
            raise CapacityExceededError("class codes must be pairwise distinct")
        object.__setattr__(self, "codes", codes)

    @property
    def num_classes(self) -> int:
        return self.codes.shape[0]

    @property
    def bits(self) -> int:
        return self.codes.shape[1]


@dataclass(frozen=True)
class OrdinalStructure:
    """Per-sample target matrix S (bits x samples) with column labels."""

    matrix: np.ndarray
    labels: np.ndarray
    source: str = "custom"

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=np.int8)
        labels = np.asarray(self.labels, dtype=np.int64)
        if s.ndim != 2 or labels.ndim != 1 or s.shape[1] != labels.shape[0]:
            raise ShapeMismatchError(
                f"structure {s.shape} does not align with {labels.shape[0]} labels"
            )
        if not np.all(np.abs(s) == 1):
            raise ShapeMismatchError("structure entries must be -1 or +1")
        object.__setattr__(self, "matrix", s)
        object.__setattr__(self, "labels", labels)

    @property
    def bits(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_samples(self) -> int:
        return self.matrix.shape[1]


def _contiguous_labels(labels) -> np.ndarray:
    """Validate labels as 0..C-1 with every class present (table row = label)."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] < 1:
        raise LabelOutOfRangeError("labels must be a non-empty 1-D sequence")
    classes = np.unique(labels)
    if classes[0] != 0 or classes[-1] != classes.shape[0] - 1:
        raise LabelOutOfRangeError(
            f"labels must cover 0..C-1 contiguously, got classes {classes.tolist()}"
        )
    return labels


def _check_capacity(num_classes: int, bits: int) -> None:
    if num_classes < 1 or bits < 1:
        raise TooFewBitsError("need at least one class and one bit")
    if num_classes > 2 ** bits:
        raise CapacityExceededError(f"{bits} bits cannot hold {num_classes} distinct codes")


def build_two_class(bits: int) -> ClassCodeTable:
    """The complementary pair: all +1 for class 0, all -1 for class 1.

    The two codes differ in every bit, so under the {0,1} relabeling
    b -> (b+1)/2 they are orthogonal; this pair maximizes the separation
    score at exactly ``bits``.
    """
    if bits < 1:
        raise TooFewBitsError("bits must be >= 1")
    codes = np.vstack([np.ones(bits, dtype=np.int8), -np.ones(bits, dtype=np.int8)])
    return ClassCodeTable(codes, source="two-class")


def build_random_unique(num_classes: int, bits: int, seed: int) -> ClassCodeTable:
    """Uniformly random distinct codes, deterministic per seed.

    Collisions are resampled, so when num_classes == 2**bits the table is a
    permutation of the full code book.
    """
    _check_capacity(num_classes, bits)
    rng = np.random.default_rng(seed)
    seen: set[tuple] = set()
    rows = []
    while len(rows) < num_classes:
        cand = rng.choice(np.array([-1, 1], dtype=np.int8), size=bits)
        key = tuple(cand.tolist())
        if key not in seen:
            seen.add(key)
            rows.append(cand)
    return ClassCodeTable(np.vstack(rows), source="random")


def build_hadamard(num_classes: int, bits: int) -> ClassCodeTable:
    """First ``num_classes`` rows of the Sylvester Hadamard matrix of order ``bits``."""
    if bits < 1 or (bits & (bits - 1)) != 0:
        raise SizeNotPowerOfTwoError(f"Hadamard order must be a power of two, got {bits}")
    if num_classes > bits:
        raise CapacityExceededError(f"Hadamard order {bits} holds at most {bits} orthogonal rows")
    h = _sylvester_hadamard(bits).astype(np.int8)
    return ClassCodeTable(h[:num_classes], source="hadamard")


def _quantization_loss(v: np.ndarray, b: np.ndarray, rot: np.ndarray) -> float:
    return float(np.linalg.norm(b - v @ rot))


def build_itq_means(
    x: np.ndarray,
    labels,
    bits: int,
    iters: int = ITQ_DEFAULT_ITERS,
    seed: int = 0,
    loss_trace: list | None = None,
) -> ClassCodeTable:
    """Quantize per-class mean vectors into distinct codes.

    Class means are projected onto their top principal directions, then an
    alternating sign-assignment / orthogonal-Procrustes rotation refines the
    quantization for ``iters`` rounds. Colliding class codes are repaired by
    deterministic bit flips (lowest-index bit first), keeping every class
    code unique. ``loss_trace``, when given, collects the quantization loss
    after each rotation update.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = _contiguous_labels(labels)
    if x.ndim != 2 or x.shape[1] != labels.shape[0]:
        raise ShapeMismatchError(f"features {x.shape} do not align with {labels.shape[0]} labels")
    classes = np.unique(labels)
    num_classes = classes.shape[0]
    if num_classes < 2:
        raise DegenerateMeansError("need at least two classes to quantize")
    if bits > x.shape[0]:
        raise TooFewBitsError(f"{bits} bits exceed feature dimension {x.shape[0]}")
    _check_capacity(num_classes, bits)

    means = np.stack([x[:, labels == c].mean(axis=1) for c in classes])  # (C, d)
    if np.allclose(means, means[0], atol=1e-12):
        raise DegenerateMeansError("all class means are identical")

    centered = means - means.mean(axis=0)
    # principal directions of the class-mean cloud; deterministic LAPACK SVD
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    proj = np.zeros((x.shape[0], bits))
    take = min(bits, vt.shape[0])
    proj[:, :take] = vt[:take].T
    v = centered @ proj  # (C, bits)

    rng = np.random.default_rng(seed)
    rot, _ = np.linalg.qr(rng.normal(size=(bits, bits)))
    for _ in range(max(iters, 0)):
        b = np.where(v @ rot >= 0, 1.0, -1.0)
        u, _, wt = np.linalg.svd(b.T @ v, full_matrices=False)
        rot = (u @ wt).T
        if loss_trace is not None:
            loss_trace.append(_quantization_loss(v, b, rot))
    codes = np.where(v @ rot >= 0, 1, -1).astype(np.int8)

    # collision repair: flip bits of the later class following the binary
    # counter pattern (bit 0 first), guaranteed to terminate by capacity
    seen: set[tuple] = set()
    for i in range(num_classes):
        row = codes[i].copy()
        counter = 0
        while tuple(row.tolist()) in seen:
            counter += 1
            flips = [j for j in range(bits) if (counter >> j) & 1]
            row = codes[i].copy()
            row[flips] *= -1
        codes[i] = row
        seen.add(tuple(row.tolist()))
    return ClassCodeTable(codes, source="itq-means")


def build_lda_spectral(
    labels,
    bits: int,
    extra: ClassCodeTable | None = None,
    seed: int = 0,
) -> ClassCodeTable:
    """One-hot spectral codes: class c carries +1 at bit c, -1 elsewhere.

    When ``bits`` exceeds the class count the remaining bits are appended
    from ``extra`` (for example a quantized-means table) or, by default,
    from random distinct codes. The one-hot prefix alone already keeps all
    rows pairwise distinct.
    """
    labels = _contiguous_labels(labels)
    num_classes = int(labels.max()) + 1
    if bits < num_classes:
        raise TooFewBitsError(f"{bits} bits cannot one-hot encode {num_classes} classes")
    head = -np.ones((num_classes, num_classes), dtype=np.int8)
    head[np.arange(num_classes), np.arange(num_classes)] = 1
    if bits == num_classes:
        return ClassCodeTable(head, source="lda-spectral")
    tail_bits = bits - num_classes
    if extra is None:
        tail = build_random_unique(num_classes, tail_bits, seed).codes
    else:
        if extra.num_classes != num_classes:
            raise ShapeMismatchError(
                f"appended table has {extra.num_classes} classes, expected {num_classes}"
            )
        if extra.bits < tail_bits:
            raise TooFewBitsError(
                f"appended table has {extra.bits} bits, need {tail_bits}"
            )
        tail = extra.codes[:, :tail_bits]
    return ClassCodeTable(np.hstack([head, tail]), source="lda-appended")


def expand_to_samples(table: ClassCodeTable, labels) -> OrdinalStructure:
    """Tile class codes over samples: column j gets the code of labels[j]."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] < 1:
        raise LabelOutOfRangeError("labels must be a non-empty 1-D sequence")
    if labels.min() < 0 or labels.max() >= table.num_classes:
        raise LabelOutOfRangeError(
            f"labels must lie in [0, {table.num_classes - 1}], got "
            f"[{labels.min()}, {labels.max()}]"
        )
    return OrdinalStructure(table.codes[labels].T, labels, source=table.source)


def separation_score(codes: np.ndarray, labels) -> float:
    """Mean inter-class minus mean intra-class Hamming distance.

    Pairs are unordered (i < j). Requires at least one pair of each kind.
    Bounded above by the number of bits; the bound is attained exactly by
    structures whose intra-class codes coincide and whose inter-class codes
    are complementary.
    """
    codes = np.asarray(codes)
    labels = np.asarray(labels, dtype=np.int64)
    if codes.ndim != 2 or codes.shape[1] != labels.shape[0]:
        raise ShapeMismatchError(f"codes {codes.shape} do not align with {labels.shape[0]} labels")
    if not np.all(np.abs(codes) == 1):
        raise ShapeMismatchError("codes must be -1/+1 valued")
    m, n = codes.shape
    gram = codes.astype(np.int64).T @ codes.astype(np.int64)
    ham = (m - gram) // 2  # Hamming distances between all column pairs
    same = labels[:, None] == labels[None, :]
    iu = np.triu_indices(n, k=1)
    intra_mask = same[iu]
    n_intra = int(intra_mask.sum())
    n_inter = int((~intra_mask).sum())
    if n_intra == 0 or n_inter == 0:
        raise NoPairsError(
            f"need both pair kinds: {n_intra} intra-class, {n_inter} inter-class"
        )
    ham_pairs = ham[iu]
    inter_sum = int(ham_pairs[~intra_mask].sum())
    intra_sum = int(ham_pairs[intra_mask].sum())
    return inter_sum / n_inter - intra_sum / n_intra
