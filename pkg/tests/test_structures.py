import numpy as np
import pytest

from somcode import linalg, structures
from somcode.errors import (
    CapacityExceededError,
    DegenerateMeansError,
    LabelOutOfRangeError,
    NoPairsError,
    SizeNotPowerOfTwoError,
    TooFewBitsError,
)
from somcode.structures import (
    build_hadamard,
    build_itq_means,
    build_lda_spectral,
    build_random_unique,
    build_two_class,
    expand_to_samples,
    separation_score,
)


def brute_separation_score(codes, labels):
    """Direct pair enumeration, kept independent of the Gram-matrix path."""
    n = codes.shape[1]
    inter, intra, n_inter, n_intra = 0, 0, 0, 0
    for i in range(n):
        for j in range(i + 1, n):
            d = int(np.sum(codes[:, i] != codes[:, j]))
            if labels[i] == labels[j]:
                intra += d
                n_intra += 1
            else:
                inter += d
                n_inter += 1
    return inter / n_inter - intra / n_intra


# ---------------------------------------------------------------------------
# two-class table
# ---------------------------------------------------------------------------

def test_two_class_complementary():
    t = build_two_class(4)
    assert np.array_equal(t.codes[0], [1, 1, 1, 1])
    assert np.array_equal(t.codes[1], [-1, -1, -1, -1])
    zero_one = (t.codes + 1) // 2
    assert zero_one[0] @ zero_one[1] == 0  # orthogonal as 0/1 vectors


def test_two_class_single_bit():
    t = build_two_class(1)
    assert sorted(t.codes.ravel().tolist()) == [-1, 1]


def test_two_class_score_equals_bits():
    for m in (1, 3, 8):
        s = expand_to_samples(build_two_class(m), [0, 0, 0, 1, 1, 1])
        assert separation_score(s.matrix, s.labels) == m


# ---------------------------------------------------------------------------
# random table
# ---------------------------------------------------------------------------

def test_random_unique_two_codes_one_bit():
    t = build_random_unique(2, 1, seed=0)
    assert sorted(t.codes.ravel().tolist()) == [-1, 1]


def test_random_unique_exhausts_code_book():
    t = build_random_unique(16, 4, seed=1)
    assert len({tuple(r) for r in t.codes}) == 16


def test_random_unique_deterministic():
    a = build_random_unique(10, 32, seed=7)
    b = build_random_unique(10, 32, seed=7)
    assert np.array_equal(a.codes, b.codes)
    assert len({tuple(r) for r in a.codes}) == 10


def test_random_unique_capacity():
    with pytest.raises(CapacityExceededError):
        build_random_unique(5, 2, seed=0)


# ---------------------------------------------------------------------------
# Hadamard table
# ---------------------------------------------------------------------------

def test_hadamard_order_two():
    t = build_hadamard(2, 2)
    assert np.array_equal(t.codes, [[1, 1], [1, -1]])


def test_hadamard_rows_orthogonal():
    t = build_hadamard(8, 8)
    g = t.codes.astype(int) @ t.codes.astype(int).T
    assert np.array_equal(g, 8 * np.eye(8, dtype=int))


def test_hadamard_h4_pairwise_hamming():
    t = build_hadamard(4, 4)
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.sum(t.codes[i] != t.codes[j]) == 2


def test_hadamard_errors():
    with pytest.raises(SizeNotPowerOfTwoError):
        build_hadamard(2, 6)
    with pytest.raises(CapacityExceededError):
        build_hadamard(5, 4)


# ---------------------------------------------------------------------------
# quantized class means
# ---------------------------------------------------------------------------

def test_itq_means_opposite_means_one_bit():
    v = np.array([1.0, 2.0, -1.0, 0.5])
    x = np.stack([v, v, -v, -v]).T + 0.0
    t = build_itq_means(x, [0, 0, 1, 1], bits=1, seed=0)
    assert sorted(t.codes.ravel().tolist()) == [-1, 1]


def test_itq_means_codes_distinct():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(6, 40))
    labels = np.repeat(np.arange(8), 5)
    x = rng.normal(size=(6, 40)) + labels * 0.3
    t = build_itq_means(x, labels, bits=3, seed=2)
    assert len({tuple(r) for r in t.codes}) == 8


def test_itq_means_loss_non_increasing():
    rng = np.random.default_rng(3)
    centers = rng.normal(size=(8, 4)) * 5.0
    x = np.repeat(centers, 6, axis=1) + rng.normal(scale=0.1, size=(8, 24))
    labels = np.repeat(np.arange(4), 6)
    trace = []
    build_itq_means(x, labels, bits=4, iters=20, seed=3, loss_trace=trace)
    assert len(trace) == 20
    assert all(a >= b - 1e-9 for a, b in zip(trace, trace[1:]))


def test_itq_means_degenerate():
    x = np.ones((3, 6))
    with pytest.raises(DegenerateMeansError):
        build_itq_means(x, [0, 0, 0, 1, 1, 1], bits=2)


# ---------------------------------------------------------------------------
# spectral table
# ---------------------------------------------------------------------------

def test_lda_spectral_one_hot():
    t = build_lda_spectral([0, 1, 2], bits=3)
    assert np.array_equal(t.codes, 2 * np.eye(3, dtype=np.int8) - 1)


def test_lda_spectral_pairwise_hamming_two():
    t = build_lda_spectral([0, 1, 2], bits=3)
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.sum(t.codes[i] != t.codes[j]) == 2


def test_lda_spectral_appended_bits():
    rng = np.random.default_rng(9)
    centers = rng.normal(size=(8, 3)) * 4.0
    x = np.repeat(centers, 4, axis=1) + rng.normal(scale=0.05, size=(8, 12))
    labels = np.repeat(np.arange(3), 4)
    extra = build_itq_means(x, labels, bits=5, seed=1)
    t = build_lda_spectral(labels, bits=8, extra=extra)
    assert t.bits == 8
    one_hot = t.codes[:, :3]
    assert np.array_equal(one_hot, 2 * np.eye(3, dtype=np.int8) - 1)
    assert len({tuple(r) for r in t.codes}) == 3
    assert t.source == "lda-appended"


def test_lda_spectral_too_few_bits():
    with pytest.raises(TooFewBitsError):
        build_lda_spectral([0, 1, 2], bits=2)


# ---------------------------------------------------------------------------
# expansion
# ---------------------------------------------------------------------------

def test_expand_tiles_codes():
    table = structures.ClassCodeTable(np.array([[1, 1], [-1, 1]], dtype=np.int8))
    s = expand_to_samples(table, [0, 0, 1])
    assert np.array_equal(s.matrix.T, [[1, 1], [1, 1], [-1, 1]])


def test_expand_blocks_rank_one():
    table = build_random_unique(4, 6, seed=5)
    labels = np.random.default_rng(6).integers(0, 4, size=20)
    labels[:4] = np.arange(4)  # every class present
    s = expand_to_samples(table, labels)
    for c in range(4):
        block = s.matrix[:, s.labels == c].astype(float)
        assert np.linalg.matrix_rank(block) == 1


def test_expand_block_trace_norm_closed_form():
    table = build_random_unique(4, 6, seed=12)
    rng = np.random.default_rng(13)
    labels = rng.integers(0, 4, size=20)
    labels[:4] = np.arange(4)
    s = expand_to_samples(table, labels)
    for c in range(4):
        block = s.matrix[:, s.labels == c].astype(float)
        n_c = block.shape[1]
        code_norm = np.linalg.norm(table.codes[c].astype(float))
        assert np.isclose(linalg.trace_norm(block), code_norm * np.sqrt(n_c), atol=1e-9)


def test_expand_label_out_of_range():
    table = build_two_class(3)
    with pytest.raises(LabelOutOfRangeError):
        expand_to_samples(table, [0, 2])


# ---------------------------------------------------------------------------
# separation score
# ---------------------------------------------------------------------------

def test_score_all_identical_columns():
    codes = np.ones((4, 6), dtype=np.int8)
    with np.errstate(all="raise"):
        assert separation_score(codes, [0, 0, 0, 1, 1, 1]) == 0.0


def test_score_hand_enumerated():
    codes = np.array([[1, 1, -1], [1, -1, -1]], dtype=np.int8)
    # pairs: (0,1) intra d=1, (0,2) inter d=2, (1,2) inter d=1
    assert separation_score(codes, [0, 0, 1]) == pytest.approx(0.5)


def test_score_matches_brute_force():
    rng = np.random.default_rng(31)
    for _ in range(20):
        m = int(rng.integers(1, 7))
        n = int(rng.integers(3, 10))
        codes = rng.choice(np.array([-1, 1], dtype=np.int8), size=(m, n))
        labels = rng.integers(0, 3, size=n)
        if len(np.unique(labels)) < 2:
            continue
        assert separation_score(codes, labels) == pytest.approx(
            brute_separation_score(codes, labels)
        )


def test_score_bounded_by_bits():
    rng = np.random.default_rng(37)
    checked = 0
    while checked < 200:
        m = int(rng.integers(1, 9))
        n = int(rng.integers(3, 12))
        codes = rng.choice(np.array([-1, 1], dtype=np.int8), size=(m, n))
        labels = rng.integers(0, 4, size=n)
        same = labels[:, None] == labels[None, :]
        iu = np.triu_indices(n, k=1)
        if same[iu].sum() == 0 or (~same[iu]).sum() == 0:
            continue
        assert separation_score(codes, labels) <= m + 1e-12
        checked += 1


def test_score_max_iff_optimal_and_flip_decreases():
    m = 5
    labels = np.array([0, 0, 1, 1, 1])
    s = expand_to_samples(build_two_class(m), labels)
    base = separation_score(s.matrix, labels)
    assert base == m
    for i in range(m):
        for j in range(len(labels)):
            flipped = s.matrix.copy()
            flipped[i, j] *= -1
            assert separation_score(flipped, labels) < base


def test_score_requires_both_pair_kinds():
    codes = np.ones((3, 4), dtype=np.int8)
    with pytest.raises(NoPairsError):
        separation_score(codes, [0, 0, 0, 0])
    with pytest.raises(NoPairsError):
        separation_score(codes, [0, 1, 2, 3])
