"""Structured ordinal binary codes for labeled feature-vector sequences.

Learns one maximum-margin linear filter per code bit, alternating with a
structured low-rank discrete binarization, then encodes new sequences with
self-correcting codes and classifies them by Hamming-distance voting.

Typical flow::

    from somcode.synth import SyntheticSpec, synth_videos
    from somcode.experiment import build_structure_table
    from somcode.structures import expand_to_samples
    from somcode.filters import HyperParams
    from somcode.trainer import train_som
    from somcode.encoder import classify_voting, encode_self_correct

    fm = synth_videos(SyntheticSpec(seed=1))
    table = build_structure_table("itq-means", 32, fm.x, fm.labels, seed=1)
    model = train_som(fm.x, fm.labels, expand_to_samples(table, fm.labels),
                      HyperParams())
    probe = encode_self_correct(model.bank, fm.x[:, fm.clip_ids == 0], model.hp)
    print(classify_voting(model, probe).predicted_class)
"""

from . import dataio, encoder, errors, experiment, filters, linalg, structures, synth, trainer

__version__ = "0.1.0"

__all__ = [
    "dataio",
    "encoder",
    "errors",
    "experiment",
    "filters",
    "linalg",
    "structures",
    "synth",
    "trainer",
    "__version__",
]
