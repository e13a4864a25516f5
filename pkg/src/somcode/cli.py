"""Command-line interface.

Subcommands mirror the pipeline stages: ``synth`` writes a feature CSV,
``train`` fits a model from features, ``encode`` turns features into code
files, ``classify`` votes codes against a model, ``sweep`` runs a config
driven experiment grid to CSV, and ``serve`` starts the HTTP service.

Exit codes: 0 on success, 2 for validation problems (bad arguments,
malformed files, inconsistent shapes), 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataio import load_codes, load_features, load_model, save_codes, save_features, save_model
from .encoder import MODE_RANK, ProbeEncoding, classify_voting, compression_ratio, unique_columns
from .errors import SomValidationError
from .experiment import (
    STRUCTURE_FAMILIES,
    build_structure_table,
    encode_clips,
    load_config_file,
    run_experiment,
    save_report,
)
from .filters import HyperParams
from .structures import expand_to_samples
from .synth import SyntheticSpec, synth_videos
from .trainer import train_som


def _read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SomValidationError(f"cannot read JSON file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise SomValidationError(f"{path}: expected a JSON object")
    return data


def _hyperparams(args) -> HyperParams:
    d = _read_json(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "lambda2", None) is not None:
        d["lambda2"] = args.lambda2
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    return HyperParams.from_dict(d)


def cmd_synth(args) -> int:
    spec = SyntheticSpec.from_dict(_read_json(args.spec))
    fm = synth_videos(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "features.csv"
    save_features(fm, path)
    print(f"wrote {fm.num_frames} frames x {fm.feature_dim} dims to {path}")
    return 0


def cmd_train(args) -> int:
    fm = load_features(args.features)
    if fm.labels is None:
        raise SomValidationError("training features must carry labels")
    hp = _hyperparams(args)
    table = build_structure_table(args.structure, args.bits, fm.x, fm.labels, hp.seed)
    structure = expand_to_samples(table, fm.labels)
    model = train_som(fm.x, fm.labels, structure, hp)
    save_model(model, args.out)
    last = model.diagnostics[-1]
    print(
        f"trained {model.bits}-bit model on {fm.num_frames} frames, "
        f"{len(model.classes)} classes: {len(model.diagnostics)} outer iterations, "
        f"final flip fraction {last.flip_fraction:.2e}, "
        f"gallery compression {compression_ratio(model.gallery_codes):.4f} -> {args.out}"
    )
    if not model.converged:
        print("warning: outer loop hit its iteration cap before stabilizing")
    return 0


def cmd_encode(args) -> int:
    model = load_model(args.model)
    fm = load_features(args.features)
    hp = _hyperparams(args) if args.config else model.hp
    mode = {"sign": "sign", "correct": "self-correct", "rank": "rank"}[args.mode]
    if mode == MODE_RANK and args.r is None:
        raise SomValidationError("--r is required for rank mode")
    clip_ids = fm.clip_ids if fm.clip_ids is not None else np.arange(fm.num_frames)
    codes = encode_clips(model, fm.x, clip_ids, mode, hp, rank=args.r)
    save_codes(codes, clip_ids, args.out, labels=fm.labels)
    clips = np.unique(clip_ids)
    ratios = [compression_ratio(codes[:, clip_ids == c]) for c in clips]
    print(
        f"encoded {codes.shape[1]} frames in {len(clips)} clips (mode {mode}): "
        f"pooled compression {compression_ratio(codes):.4f}, "
        f"per-clip mean {float(np.mean(ratios)):.4f} -> {args.out}"
    )
    return 0


def cmd_classify(args) -> int:
    model = load_model(args.model)
    codes, clip_ids, labels = load_codes(args.codes)
    lines = ["clip_id,predicted,truth,correct,votes"]
    correct = total = 0
    for clip in np.unique(clip_ids):
        cols = clip_ids == clip
        block = codes[:, cols]
        enc = ProbeEncoding(block, "file", unique_count=unique_columns(block),
                            compression_ratio=compression_ratio(block))
        vote = classify_voting(model, enc, per_unique=args.per_unique)
        truth = int(labels[cols][0]) if labels is not None else ""
        ok = ""
        if labels is not None:
            ok = int(vote.predicted_class == truth)
            correct += ok
            total += 1
        votes = ";".join(f"{c}:{v}" for c, v in sorted(vote.per_class_votes.items()) if v)
        lines.append(f"{int(clip)},{vote.predicted_class},{truth},{ok},{votes}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    if total:
        print(f"classified {total} clips: recognition rate {correct / total:.4f} -> {args.out}")
    else:
        print(f"classified {len(np.unique(clip_ids))} clips (no ground truth) -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config_file(args.config)
    report = run_experiment(config)
    save_report(report, args.out)
    print(f"wrote {len(report.rows)} report rows to {args.out}")
    for key, seconds in report.wall_times.items():
        print(f"  {key}: {seconds:.1f}s")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somcode",
        description="Structured ordinal binary codes: train, encode, classify, sweep.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled feature CSV")
    p.add_argument("--spec", required=True, help="JSON file with synthetic spec fields")
    p.add_argument("--out", required=True, help="output directory for features.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model from a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--structure", required=True, choices=STRUCTURE_FAMILIES)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON file with hyperparameter fields")
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode features into a codes file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--mode", choices=("sign", "correct", "rank"), default="correct")
    p.add_argument("--r", type=int, default=None, help="rank cap for rank mode")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("classify", help="vote a codes file against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--codes", required=True)
    p.add_argument("--per-unique", action="store_true",
                   help="one vote per distinct code instead of per frame")
    p.add_argument("--out", required=True, help="output per-clip CSV report")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="run a config-driven experiment grid")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", required=True, help="output CSV report")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SomValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
