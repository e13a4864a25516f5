"""Maximum-margin filter bank: one independent linear separator per code bit.

Each bit i of the code matrix provides the labels for one hinge-loss SVM

    mu * sum_j max(0, 1 - B_ij (w_i . x_j + b_i)) + lambda1 * ||w_i||^2

solved in the dual by coordinate descent. The bias is handled by feature
augmentation (a constant-1 row), which puts a lambda1 * b^2 ridge on it;
with roughly centered data the effect on the optimum is negligible and the
dual stays a pure box constraint, so warm starting across retrainings is a
matter of keeping the alpha vector.

Training is deterministic: coordinate visitation order comes from an
in-kernel linear congruential shuffle seeded per bit, so results do not
depend on whether the numba-compiled or pure-python kernel runs, nor on
any parallel schedule across bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, SomValidationError

try:  # pragma: no cover - exercised implicitly by every solver call
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

_LCG_A = 1103515245
_LCG_C = 12345
_LCG_MASK = 0x7FFFFFFF


@dataclass(frozen=True)
class HyperParams:
    """Knobs for filter training and the alternating code optimization.

    ``ridge_eps`` is the relative eigenvalue floor: the binarizer floors the
    eigenvalues of the code-gram square root at ridge_eps * trace(B B^T)
    before inverting it.
    """

    mu: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 0.1
    svm_tol: float = 1e-4
    svm_max_iter: int = 1000
    inner_tol: float = 1e-3
    inner_max_iter: int = 30
    outer_tol: float = 1e-3
    outer_max_iter: int = 10
    ridge_eps: float = 1e-8
    seed: int = 0
    use_bias: bool = True
    warm_start: bool = True
    init: str = "structure"  # or "random-sign"

    def validate(self) -> "HyperParams":
        if self.mu <= 0 or self.lambda1 <= 0:
            raise SomValidationError("mu and lambda1 must be > 0")
        if self.lambda2 < 0:
            raise SomValidationError("lambda2 must be >= 0")
        for name in ("svm_tol", "inner_tol", "outer_tol", "ridge_eps"):
            if getattr(self, name) <= 0:
                raise SomValidationError(f"{name} must be > 0")
        for name in ("svm_max_iter", "inner_max_iter", "outer_max_iter"):
            if getattr(self, name) < 1:
                raise SomValidationError(f"{name} must be >= 1")
        if self.init not in ("structure", "random-sign"):
            raise SomValidationError(f"unknown init mode {self.init!r}")
        return self

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "svm_tol": self.svm_tol,
            "svm_max_iter": self.svm_max_iter,
            "inner_tol": self.inner_tol,
            "inner_max_iter": self.inner_max_iter,
            "outer_tol": self.outer_tol,
            "outer_max_iter": self.outer_max_iter,
            "ridge_eps": self.ridge_eps,
            "seed": self.seed,
            "use_bias": self.use_bias,
            "warm_start": self.warm_start,
            "init": self.init,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SomValidationError(f"unknown hyperparameter keys: {sorted(unknown)}")
        return cls(**known).validate()


@dataclass(frozen=True)
class BitTrainMeta:
    """Per-bit training record."""

    iterations: int
    objective: float
    gap: float
    degenerate: bool = False


@dataclass
class FilterBank:
    """Learned filters: ``weights`` is (feature_dim, bits), one column per bit.

    ``dual_coefs`` holds the SVM dual variables for warm starting later
    retrainings; it is solver state, not part of the model proper, and is
    never serialized.
    """

    weights: np.ndarray
    biases: np.ndarray
    train_meta: list = field(default_factory=list)
    dual_coefs: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[1],):
            raise DimensionMismatchError(
                f"weights {self.weights.shape} and biases {self.biases.shape} disagree"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise DimensionMismatchError("filter bank contains NaN or Inf")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def bits(self) -> int:
        return self.weights.shape[1]


def _dcd_solve(xaug, y, alpha, c_upper, tol, max_epochs, seed):
    """Dual coordinate descent on the hinge SVM, box constraint 0<=alpha<=C.

    Written to run identically under numba nopython mode and plain python:
    the shuffle uses an explicit 31-bit LCG (numba-safe int64 arithmetic).
    Returns (w, epochs, relative duality gap).
    """
    n, d = xaug.shape
    w = np.zeros(d)
    for j in range(n):
        if alpha[j] != 0.0:
            ay = alpha[j] * y[j]
            for k in range(d):
                w[k] += ay * xaug[j, k]
    qdiag = np.zeros(n)
    for j in range(n):
        s = 0.0
        for k in range(d):
            s += xaug[j, k] * xaug[j, k]
        qdiag[j] = s
    idx = np.arange(n)
    state = (_LCG_A * (seed & _LCG_MASK) + _LCG_C) & _LCG_MASK
    epochs = 0
    rel_gap = np.inf
    for _ in range(max_epochs):
        epochs += 1
        for j in range(n - 1, 0, -1):
            state = (_LCG_A * state + _LCG_C) & _LCG_MASK
            k = state % (j + 1)
            tmp = idx[j]
            idx[j] = idx[k]
            idx[k] = tmp
        for t in range(n):
            j = idx[t]
            if qdiag[j] <= 0.0:
                continue
            score = 0.0
            for k in range(d):
                score += w[k] * xaug[j, k]
            grad = y[j] * score - 1.0
            a_old = alpha[j]
            a_new = a_old - grad / qdiag[j]
            if a_new < 0.0:
                a_new = 0.0
            elif a_new > c_upper:
                a_new = c_upper
            if a_new != a_old:
                delta = (a_new - a_old) * y[j]
                for k in range(d):
                    w[k] += delta * xaug[j, k]
                alpha[j] = a_new
        wsq = 0.0
        for k in range(d):
            wsq += w[k] * w[k]
        hinge = 0.0
        asum = 0.0
        for j in range(n):
            score = 0.0
            for k in range(d):
                score += w[k] * xaug[j, k]
            slack = 1.0 - y[j] * score
            if slack > 0.0:
                hinge += slack
            asum += alpha[j]
        primal = 0.5 * wsq + c_upper * hinge
        dual = asum - 0.5 * wsq
        gap = primal - dual
        denom = abs(primal)
        if denom < 1.0:
            denom = 1.0
        rel_gap = gap / denom
        if rel_gap <= tol:
            break
    return w, epochs, rel_gap


if njit is not None:
    _dcd_solve = njit(cache=True)(_dcd_solve)


def _bit_seed(seed: int, bit: int) -> int:
    # depends only on (hp.seed, bit index) so bits train independently
    return (seed * 1000003 + 0x9E3779B9 * (bit + 1)) & _LCG_MASK


def train_filter_bank(
    x: np.ndarray,
    codes: np.ndarray,
    hp: HyperParams,
    warm: FilterBank | None = None,
) -> FilterBank:
    """Train one hinge-loss separator per code row, using the rows as labels.

    A constant code row has no two-class problem to solve: that bit keeps
    the warm-start filter when one is given, otherwise a zero filter whose
    bias reproduces the constant sign.
    """
    hp.validate()
    x = np.ascontiguousarray(x, dtype=np.float64)
    codes = np.asarray(codes)
    if x.ndim != 2 or codes.ndim != 2 or x.shape[1] != codes.shape[1]:
        raise DimensionMismatchError(
            f"features {x.shape} do not align with codes {codes.shape}"
        )
    if not np.all(np.abs(codes) == 1):
        raise DimensionMismatchError("code entries must be -1 or +1")
    d, n = x.shape
    m = codes.shape[0]
    if warm is not None and (warm.feature_dim != d or warm.bits != m):
        raise DimensionMismatchError(
            f"warm bank ({warm.feature_dim}, {warm.bits}) does not match ({d}, {m})"
        )

    if hp.use_bias:
        xaug = np.ascontiguousarray(np.vstack([x, np.ones((1, n))]).T)
    else:
        xaug = np.ascontiguousarray(x.T)
    c_upper = hp.mu / (2.0 * hp.lambda1)

    weights = np.zeros((d, m))
    biases = np.zeros(m)
    alphas = np.zeros((m, n))
    meta = []
    for i in range(m):
        y = np.ascontiguousarray(codes[i], dtype=np.float64)
        if np.all(y == y[0]):
            if warm is not None:
                weights[:, i] = warm.weights[:, i]
                biases[i] = warm.biases[i]
                if warm.dual_coefs is not None and warm.dual_coefs.shape == (m, n):
                    alphas[i] = warm.dual_coefs[i]
            elif hp.use_bias:
                biases[i] = y[0]
            scores = weights[:, i] @ x + biases[i]
            slack = np.maximum(0.0, 1.0 - y * scores).sum()
            obj = hp.mu * slack + hp.lambda1 * (
                weights[:, i] @ weights[:, i] + (biases[i] ** 2 if hp.use_bias else 0.0)
            )
            meta.append(BitTrainMeta(iterations=0, objective=float(obj), gap=0.0, degenerate=True))
            continue
        alpha = np.zeros(n)
        if warm is not None and warm.dual_coefs is not None and warm.dual_coefs.shape == (m, n):
            alpha = np.clip(warm.dual_coefs[i].copy(), 0.0, c_upper)
        w_aug, epochs, gap = _dcd_solve(
            xaug, y, alpha, c_upper, hp.svm_tol, hp.svm_max_iter, _bit_seed(hp.seed, i)
        )
        if hp.use_bias:
            weights[:, i] = w_aug[:-1]
            biases[i] = w_aug[-1]
        else:
            weights[:, i] = w_aug
        alphas[i] = alpha
        scores = weights[:, i] @ x + biases[i]
        slack = np.maximum(0.0, 1.0 - y * scores).sum()
        obj = hp.mu * slack + hp.lambda1 * (
            weights[:, i] @ weights[:, i] + (biases[i] ** 2 if hp.use_bias else 0.0)
        )
        meta.append(BitTrainMeta(iterations=int(epochs), objective=float(obj), gap=float(gap)))
    return FilterBank(weights, biases, meta, dual_coefs=alphas)


def project(bank: FilterBank, x: np.ndarray) -> np.ndarray:
    """Filter responses: entry (i, j) is w_i . x_j + b_i."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != bank.feature_dim:
        raise DimensionMismatchError(
            f"features {x.shape} do not match bank feature dim {bank.feature_dim}"
        )
    return bank.weights.T @ x + bank.biases[:, None]
