"""Alternating optimization of filters and structured binary codes.

The outer loop alternates two subproblems until the code matrix stops
changing: (1) retrain the per-bit margin filters using the current codes as
labels, (2) re-binarize the filter responses class by class under a
low-rank prior pulled toward the target structure. The per-class
binarization minimizes

    ||A_c - B_c||_F^2 + ||B_c||_* + lambda2 * ||B_c - S_c||_F^2

over B_c in {-1,+1}, via the variational form of the trace norm: with
L = (B_c B_c^T)^(1/2) fixed, the unconstrained minimizer is the linear
solve ((1 + lambda2) I + L^-1) \\ (A_c + lambda2 S_c), which is then
projected back to signs. Convergence is measured by the fraction of
entries that flipped; the objective is tracked but not guaranteed
monotone across sign projections, so iteration caps always apply.

sign(0) is +1 everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import EmptyClassError, ShapeMismatchError
from .filters import FilterBank, HyperParams, project, train_filter_bank
from .structures import OrdinalStructure


def sign_pm1(a: np.ndarray) -> np.ndarray:
    """Entrywise sign into {-1,+1} with sign(0) = +1."""
    return np.where(np.asarray(a) >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class InnerSolveReport:
    """One per-class binarization run."""

    iterations: int
    final_flip_fraction: float
    objective_trace: tuple


@dataclass(frozen=True)
class OuterIterationRecord:
    """Diagnostics for one outer alternation round."""

    iteration: int
    flip_fraction: float
    relaxed_objective: float
    class_block_ranks: tuple


@dataclass
class TrainedModel:
    """Filter bank plus the gallery codes it was trained against."""

    bank: FilterBank
    gallery_codes: np.ndarray
    gallery_labels: np.ndarray
    hp: HyperParams
    diagnostics: list = field(default_factory=list)
    converged: bool = True

    def __post_init__(self):
        self.gallery_codes = np.asarray(self.gallery_codes, dtype=np.int8)
        self.gallery_labels = np.asarray(self.gallery_labels, dtype=np.int64)
        if self.gallery_codes.shape[1] != self.gallery_labels.shape[0]:
            raise ShapeMismatchError("gallery codes do not align with labels")
        if not np.all(np.abs(self.gallery_codes) == 1):
            raise ShapeMismatchError("gallery codes must be -1/+1 valued")

    @property
    def bits(self) -> int:
        return self.gallery_codes.shape[0]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.gallery_labels)


def binarize_lowrank(
    ac: np.ndarray,
    sc: np.ndarray,
    hp: HyperParams,
    b0: np.ndarray,
) -> tuple[np.ndarray, InnerSolveReport]:
    """Discrete low-rank binarization of one class block.

    ``ac`` holds the filter responses for this class, ``sc`` the +-1 target
    block, ``b0`` the starting codes. Iterates square root of the code
    gram -> regularized solve -> sign until fewer than ``hp.inner_tol`` of
    the entries flip or ``hp.inner_max_iter`` is reached.
    """
    hp.validate()
    ac = np.asarray(ac, dtype=np.float64)
    sc = np.asarray(sc)
    b = np.asarray(b0)
    if ac.shape != sc.shape or ac.shape != b.shape:
        raise ShapeMismatchError(
            f"responses {ac.shape}, structure {sc.shape} and start {b.shape} must match"
        )
    if not (np.all(np.abs(sc) == 1) and np.all(np.abs(b) == 1)):
        raise ShapeMismatchError("structure and starting codes must be -1/+1 valued")
    b = b.astype(np.int8)
    sc_f = sc.astype(np.float64)
    m = ac.shape[0]
    eye = np.eye(m)
    rhs = ac + hp.lambda2 * sc_f

    def objective(codes: np.ndarray) -> float:
        cf = codes.astype(np.float64)
        return float(
            np.linalg.norm(ac - cf) ** 2
            + linalg.trace_norm(cf)
            + hp.lambda2 * np.linalg.norm(cf - sc_f) ** 2
        )

    trace = []
    flips = 1.0
    iterations = 0
    for _ in range(hp.inner_max_iter):
        iterations += 1
        bf = b.astype(np.float64)
        gram = bf @ bf.T
        floor = hp.ridge_eps * float(np.trace(gram))
        # pseudo-inverse with the floor as rank cutoff: directions the
        # current codes do not span pass through the solve un-penalized;
        # inflating them by 1/floor instead would overwhelm the structure
        # weight and pin wrong fixed points whenever rank(B) < bits
        ell_inv = linalg.psd_sqrt_pinv(gram, floor)
        b_real = linalg.ridge_solve((1.0 + hp.lambda2) * eye + ell_inv, rhs, 0.0)
        b_new = sign_pm1(b_real)
        flips = float(np.mean(b_new != b))
        b = b_new
        trace.append(objective(b))
        if flips < hp.inner_tol:
            break
    return b, InnerSolveReport(iterations, flips, tuple(trace))


def objective_eval(
    x: np.ndarray,
    codes: np.ndarray,
    structure: OrdinalStructure,
    bank: FilterBank,
    hp: HyperParams,
) -> float:
    """Relaxed training objective for diagnostics.

    mu * total hinge slack + lambda1 * ||W||_F^2 + per-class trace norms
    + lambda2 * ||B - S||_F^2 + ||A - B||_F^2, with A the filter responses.
    """
    x = np.asarray(x, dtype=np.float64)
    codes = np.asarray(codes)
    if codes.shape != structure.matrix.shape or x.shape[1] != codes.shape[1]:
        raise ShapeMismatchError(
            f"codes {codes.shape}, structure {structure.matrix.shape} and "
            f"features {x.shape} do not conform"
        )
    a = project(bank, x)
    cf = codes.astype(np.float64)
    slack = np.maximum(0.0, 1.0 - cf * a).sum()
    tn = 0.0
    for c in np.unique(structure.labels):
        tn += linalg.trace_norm(cf[:, structure.labels == c])
    return float(
        hp.mu * slack
        + hp.lambda1 * np.linalg.norm(bank.weights) ** 2
        + tn
        + hp.lambda2 * np.linalg.norm(cf - structure.matrix) ** 2
        + np.linalg.norm(a - cf) ** 2
    )


def train_som(
    x: np.ndarray,
    labels,
    structure: OrdinalStructure,
    hp: HyperParams,
) -> TrainedModel:
    """Alternate filter training and per-class binarization to a fixed point.

    Codes start at the target structure (or at signed random projections
    when ``hp.init`` is "random-sign"); each round retrains the filter bank
    against the current codes, projects, binarizes every class block, and
    stops when the outer bit-flip fraction drops below ``hp.outer_tol``.
    """
    hp.validate()
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] != labels.shape[0]:
        raise ShapeMismatchError(f"features {x.shape} do not align with {labels.shape[0]} labels")
    if x.shape[1] == 0:
        raise EmptyClassError("training needs at least one sample")
    if structure.num_samples != labels.shape[0] or not np.array_equal(structure.labels, labels):
        raise ShapeMismatchError("structure labels do not match the training labels")
    classes = np.unique(labels)
    class_cols = {int(c): np.flatnonzero(labels == c) for c in classes}
    if any(len(cols) == 0 for cols in class_cols.values()):
        raise EmptyClassError("every class needs at least one sample")

    m = structure.bits
    if hp.init == "structure":
        codes = structure.matrix.copy()
    else:
        rng = np.random.default_rng(hp.seed)
        codes = sign_pm1(rng.normal(size=(m, x.shape[0])) @ x)

    bank: FilterBank | None = None
    diagnostics: list[OuterIterationRecord] = []
    converged = False
    for it in range(1, hp.outer_max_iter + 1):
        bank = train_filter_bank(x, codes, hp, warm=bank if hp.warm_start else None)
        a = project(bank, x)
        new_codes = codes.copy()
        for c, cols in class_cols.items():
            block, _ = binarize_lowrank(
                a[:, cols], structure.matrix[:, cols], hp, codes[:, cols]
            )
            new_codes[:, cols] = block
        flip = float(np.mean(new_codes != codes))
        codes = new_codes
        ranks = tuple(
            int(np.linalg.matrix_rank(codes[:, cols].astype(np.float64)))
            for _, cols in sorted(class_cols.items())
        )
        diagnostics.append(
            OuterIterationRecord(
                iteration=it,
                flip_fraction=flip,
                relaxed_objective=objective_eval(x, codes, structure, bank, hp),
                class_block_ranks=ranks,
            )
        )
        if flip < hp.outer_tol:
            converged = True
            break
    return TrainedModel(
        bank=bank,
        gallery_codes=codes,
        gallery_labels=labels,
        hp=hp,
        diagnostics=diagnostics,
        converged=converged,
    )
