"""Pydantic request/response models for the HTTP service.

Feature payloads are frame-major: ``features[i]`` is the d-dimensional
vector of frame i. Codes travel as hex strings (bits packed LSB-first per
frame), matching the on-disk codes format.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

EncodeMode = Literal["sign", "self-correct", "rank"]
StructureFamily = Literal["two-class", "random", "hadamard", "itq-means", "lda-spectral"]


class HealthResponse(BaseModel):
    status: str
    version: str
    models: int


class SynthRequest(BaseModel):
    num_classes: int = 10
    feature_dim: int = 64
    subspace_dim: int = 3
    frames_per_clip: int = 30
    clips_per_class: int = 6
    noise_sigma: float = 0.5
    walk_step: float = 0.05
    seed: int = 0


class SynthResponse(BaseModel):
    features: list[list[float]]
    labels: list[int]
    clip_ids: list[int]


class HyperParamsModel(BaseModel):
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
    init: Literal["structure", "random-sign"] = "structure"


class TrainRequest(BaseModel):
    features: list[list[float]] = Field(..., description="one row per frame")
    labels: list[int]
    clip_ids: Optional[list[int]] = None
    structure: StructureFamily = "itq-means"
    bits: int = 32
    hyperparams: Optional[HyperParamsModel] = None
    model_id: Optional[str] = Field(None, description="name for the stored model")


class TrainResponse(BaseModel):
    model_id: str
    bits: int
    feature_dim: int
    num_classes: int
    outer_iterations: int
    converged: bool
    final_flip_fraction: float
    gallery_compression: float


class ModelInfo(BaseModel):
    model_id: str
    bits: int
    feature_dim: int
    num_classes: int
    gallery_size: int
    converged: bool


class ModelListResponse(BaseModel):
    models: list[ModelInfo]


class EncodeRequest(BaseModel):
    model_id: str
    features: list[list[float]]
    clip_ids: Optional[list[int]] = None
    mode: EncodeMode = "self-correct"
    rank: Optional[int] = None


class ClipCodes(BaseModel):
    clip_id: int
    codes_hex: list[str]
    unique_count: int
    compression_ratio: float


class EncodeResponse(BaseModel):
    bits: int
    mode: EncodeMode
    clips: list[ClipCodes]
    pooled_compression: float


class ClassifyRequest(BaseModel):
    model_id: str
    features: Optional[list[list[float]]] = None
    codes_hex: Optional[list[str]] = Field(
        None, description="alternative to features: pre-encoded frame codes"
    )
    clip_ids: Optional[list[int]] = None
    mode: EncodeMode = "self-correct"
    rank: Optional[int] = None
    per_unique: bool = False


class ClipPrediction(BaseModel):
    clip_id: int
    predicted_class: int
    votes: dict[int, int]
    total_frames: int
    tie_broken: bool


class ClassifyResponse(BaseModel):
    predictions: list[ClipPrediction]


class PathRequest(BaseModel):
    path: str
    model_id: Optional[str] = None


class MessageResponse(BaseModel):
    message: str
