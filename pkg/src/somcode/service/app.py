"""HTTP service exposing the training / encoding / classification pipeline.

Models live in an in-memory registry keyed by model id, with save/load
endpoints for the on-disk model format, so a long-running instance can
serve many clients against models trained here or by the CLI.
"""

from __future__ import annotations

import threading
from itertools import count

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..dataio import load_model, pack_codes, save_model, unpack_codes
from ..encoder import ProbeEncoding, classify_voting, compression_ratio, unique_columns
from ..errors import SomError, SomValidationError
from ..experiment import build_structure_table, encode_clips
from ..filters import HyperParams
from ..structures import expand_to_samples
from ..synth import SyntheticSpec, synth_videos
from ..trainer import TrainedModel, train_som
from .schemas import (
    ClassifyRequest,
    ClassifyResponse,
    ClipCodes,
    ClipPrediction,
    EncodeRequest,
    EncodeResponse,
    HealthResponse,
    MessageResponse,
    ModelInfo,
    ModelListResponse,
    PathRequest,
    SynthRequest,
    SynthResponse,
    TrainRequest,
    TrainResponse,
)

app = FastAPI(
    title="somcode service",
    description="Structured ordinal binary codes over HTTP: train filter banks, "
                "encode clips into self-correcting codes, classify by Hamming voting.",
    version=__version__,
)

_models: dict[str, TrainedModel] = {}
_lock = threading.Lock()
_auto_id = count(1)


def _get_model(model_id: str) -> TrainedModel:
    with _lock:
        model = _models.get(model_id)
    if model is None:
        raise HTTPException(status_code=404, detail=f"unknown model id {model_id!r}")
    return model


def _features_matrix(rows: list[list[float]]) -> np.ndarray:
    if not rows:
        raise HTTPException(status_code=422, detail="features are empty")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise HTTPException(status_code=422, detail="feature rows have mixed lengths")
    x = np.asarray(rows, dtype=np.float64).T  # columns are frames
    if not np.all(np.isfinite(x)):
        raise HTTPException(status_code=422, detail="features contain NaN or Inf")
    return x


def _clip_ids(n: int, clip_ids: list[int] | None) -> np.ndarray:
    if clip_ids is None:
        return np.zeros(n, dtype=np.int64)  # one clip by default
    ids = np.asarray(clip_ids, dtype=np.int64)
    if ids.shape != (n,):
        raise HTTPException(status_code=422, detail=f"expected {n} clip ids, got {ids.shape[0]}")
    return ids


def _info(model_id: str, model: TrainedModel) -> ModelInfo:
    return ModelInfo(
        model_id=model_id,
        bits=model.bits,
        feature_dim=model.bank.feature_dim,
        num_classes=int(model.classes.shape[0]),
        gallery_size=int(model.gallery_codes.shape[1]),
        converged=model.converged,
    )


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    with _lock:
        n = len(_models)
    return HealthResponse(status="ok", version=__version__, models=n)


@app.post("/synth", response_model=SynthResponse)
def synth(req: SynthRequest) -> SynthResponse:
    try:
        fm = synth_videos(SyntheticSpec(**req.model_dump()))
    except SomValidationError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return SynthResponse(
        features=fm.x.T.tolist(),
        labels=fm.labels.tolist(),
        clip_ids=fm.clip_ids.tolist(),
    )


@app.post("/train", response_model=TrainResponse)
def train(req: TrainRequest) -> TrainResponse:
    x = _features_matrix(req.features)
    labels = np.asarray(req.labels, dtype=np.int64)
    if labels.shape != (x.shape[1],):
        raise HTTPException(status_code=422,
                            detail=f"expected {x.shape[1]} labels, got {labels.shape[0]}")
    hp_fields = req.hyperparams.model_dump() if req.hyperparams else {}
    try:
        hp = HyperParams.from_dict(hp_fields)
        table = build_structure_table(req.structure, req.bits, x, labels, hp.seed)
        structure = expand_to_samples(table, labels)
        model = train_som(x, labels, structure, hp)
    except SomValidationError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except SomError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    with _lock:
        model_id = req.model_id or f"model-{next(_auto_id)}"
        _models[model_id] = model
    last = model.diagnostics[-1]
    return TrainResponse(
        model_id=model_id,
        bits=model.bits,
        feature_dim=model.bank.feature_dim,
        num_classes=int(model.classes.shape[0]),
        outer_iterations=len(model.diagnostics),
        converged=model.converged,
        final_flip_fraction=last.flip_fraction,
        gallery_compression=compression_ratio(model.gallery_codes),
    )


@app.get("/models", response_model=ModelListResponse)
def list_models() -> ModelListResponse:
    with _lock:
        infos = [_info(mid, m) for mid, m in sorted(_models.items())]
    return ModelListResponse(models=infos)


@app.get("/models/{model_id}", response_model=ModelInfo)
def model_info(model_id: str) -> ModelInfo:
    return _info(model_id, _get_model(model_id))


@app.delete("/models/{model_id}", response_model=MessageResponse)
def delete_model(model_id: str) -> MessageResponse:
    with _lock:
        if model_id not in _models:
            raise HTTPException(status_code=404, detail=f"unknown model id {model_id!r}")
        del _models[model_id]
    return MessageResponse(message=f"deleted {model_id}")


@app.post("/models/{model_id}/save", response_model=MessageResponse)
def save_model_file(model_id: str, req: PathRequest) -> MessageResponse:
    model = _get_model(model_id)
    try:
        save_model(model, req.path)
    except OSError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return MessageResponse(message=f"saved {model_id} to {req.path}")


@app.post("/models/load", response_model=ModelInfo)
def load_model_file(req: PathRequest) -> ModelInfo:
    try:
        model = load_model(req.path)
    except (OSError, SomValidationError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    with _lock:
        model_id = req.model_id or f"model-{next(_auto_id)}"
        _models[model_id] = model
    return _info(model_id, model)


def _hex_columns(codes: np.ndarray) -> list[str]:
    packed = pack_codes(codes)
    return [bytes(packed[:, j]).hex() for j in range(codes.shape[1])]


@app.post("/encode", response_model=EncodeResponse)
def encode(req: EncodeRequest) -> EncodeResponse:
    model = _get_model(req.model_id)
    x = _features_matrix(req.features)
    clip_ids = _clip_ids(x.shape[1], req.clip_ids)
    try:
        codes = encode_clips(model, x, clip_ids, req.mode, model.hp, rank=req.rank)
    except SomError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    clips = []
    for clip in np.unique(clip_ids):
        cols = clip_ids == clip
        block = codes[:, cols]
        clips.append(ClipCodes(
            clip_id=int(clip),
            codes_hex=_hex_columns(block),
            unique_count=unique_columns(block),
            compression_ratio=compression_ratio(block),
        ))
    return EncodeResponse(
        bits=model.bits,
        mode=req.mode,
        clips=clips,
        pooled_compression=compression_ratio(codes),
    )


@app.post("/classify", response_model=ClassifyResponse)
def classify(req: ClassifyRequest) -> ClassifyResponse:
    model = _get_model(req.model_id)
    if (req.features is None) == (req.codes_hex is None):
        raise HTTPException(status_code=422,
                            detail="provide exactly one of 'features' or 'codes_hex'")
    if req.features is not None:
        x = _features_matrix(req.features)
        clip_ids = _clip_ids(x.shape[1], req.clip_ids)
        try:
            codes = encode_clips(model, x, clip_ids, req.mode, model.hp, rank=req.rank)
        except SomError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
    else:
        n_bytes = (model.bits + 7) // 8
        try:
            raw = [bytes.fromhex(h) for h in req.codes_hex]
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=f"bad hex codes: {exc}") from exc
        if any(len(r) != n_bytes for r in raw):
            raise HTTPException(status_code=422,
                                detail=f"each code must pack into {n_bytes} bytes")
        packed = np.stack([np.frombuffer(r, dtype=np.uint8) for r in raw], axis=1)
        codes = unpack_codes(packed, model.bits)
        clip_ids = _clip_ids(codes.shape[1], req.clip_ids)
    predictions = []
    for clip in np.unique(clip_ids):
        cols = clip_ids == clip
        block = codes[:, cols]
        enc = ProbeEncoding(block, req.mode, unique_count=unique_columns(block),
                            compression_ratio=compression_ratio(block))
        try:
            vote = classify_voting(model, enc, per_unique=req.per_unique)
        except SomError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        predictions.append(ClipPrediction(
            clip_id=int(clip),
            predicted_class=vote.predicted_class,
            votes=vote.per_class_votes,
            total_frames=vote.total_frames,
            tie_broken=vote.tie_broken,
        ))
    return ClassifyResponse(predictions=predictions)
