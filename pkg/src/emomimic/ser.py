"""Speech emotion recognizer: utterance audio -> 6-dimensional emotion vector."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import dsp, nnet
from .corpus import AudioClip, Manifest, load_wav
from .emotion import EMOTION_MAX, EMOTION_MIN, EmotionVector, N_DIMENSIONS

SER_FORMAT = "emomimic-ser-model"
SER_VERSION = 1

DEFAULT_HIDDEN = (64, 64)


@dataclass
class SerModel:
    """Trained recognizer: frame analysis config plus the regression network.

    Immutable after training; the raw network output is clamped into [1, 7]
    before it is ever exposed.
    """

    frame_config: dsp.FrameConfig
    sample_rate: int
    network: nnet.TrainedNetwork
    metadata: dict = field(default_factory=dict)


def _collect_features(manifest: Manifest, frame_cfg: dsp.FrameConfig, sample_rate: int) -> np.ndarray:
    rows = []
    for rec in manifest.records:
        clip = load_wav(manifest.resolve_path(rec), sample_rate)
        rows.append(dsp.utterance_features(clip, frame_cfg))
    return np.vstack(rows)


def train_ser(
    manifest: Manifest,
    cfg: nnet.TrainConfig,
    frame_cfg: dsp.FrameConfig,
    sample_rate: int = 16000,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    corpus_id: str = "",
) -> SerModel:
    """Train the recognizer on a labeled manifest and record held-out MAE.

    The split is 80/20 by default (cfg.validation_fraction overrides the
    held-out share), shuffled by cfg.rng_seed.
    """
    if len(manifest.records) < 10:
        raise ValueError(f"need at least 10 labeled records to train, got {len(manifest.records)}")
    for i, rec in enumerate(manifest.records):
        if rec.label is None:
            raise ValueError(f"record {i} ({rec.audio_path}) has no emotion label")

    features = _collect_features(manifest, frame_cfg, sample_rate)
    labels = np.vstack([rec.label.values for rec in manifest.records])
    weights = np.array([rec.weight for rec in manifest.records])

    heldout_frac = cfg.validation_fraction if cfg.validation_fraction > 0 else 0.2
    rng = np.random.default_rng(cfg.rng_seed)
    order = rng.permutation(len(features))
    n_holdout = int(round(heldout_frac * len(features)))
    if n_holdout == 0 or n_holdout == len(features):
        raise ValueError(
            f"degenerate split: {len(features)} records with held-out fraction {heldout_frac}"
        )
    holdout_idx, train_idx = order[:n_holdout], order[n_holdout:]

    spec = nnet.mlp_spec(features.shape[1], hidden, N_DIMENSIONS)
    net = nnet.train(spec, features[train_idx], labels[train_idx], cfg, sample_weight=weights[train_idx])

    predictions = np.clip(net.predict(features[holdout_idx]), EMOTION_MIN, EMOTION_MAX)
    abs_err = np.abs(predictions - labels[holdout_idx])
    per_dim = abs_err.mean(axis=0)
    metadata = {
        "corpus_id": corpus_id,
        "n_train": int(len(train_idx)),
        "n_heldout": int(n_holdout),
        "rng_seed": int(cfg.rng_seed),
        "heldout_mae_per_dimension": per_dim.tolist(),
        "heldout_mae_overall": float(abs_err.mean()),
    }
    return SerModel(frame_cfg, sample_rate, net, metadata)


def recognize(model: SerModel, clip: AudioClip) -> EmotionVector:
    """Predict the emotion vector of one clip, clamped into [1, 7]."""
    if clip.sample_rate != model.sample_rate:
        raise ValueError(
            f"clip rate {clip.sample_rate} does not match model rate {model.sample_rate}"
        )
    feats = dsp.utterance_features(clip, model.frame_config)
    raw = model.network.predict(feats)
    return EmotionVector.clamped(raw)


def predict_manifest(
    model: SerModel, manifest: Manifest, cache: Optional[dict] = None
) -> list[np.ndarray]:
    """Recognize every record; an optional per-path cache skips repeat work."""
    out = []
    for rec in manifest.records:
        path = str(manifest.resolve_path(rec))
        if cache is not None and path in cache:
            out.append(cache[path])
            continue
        clip = load_wav(path, model.sample_rate)
        vec = recognize(model, clip).as_array()
        if cache is not None:
            cache[path] = vec
        out.append(vec)
    return out


def evaluate_mae(
    model: SerModel, manifest: Manifest, predictions: Optional[Sequence[np.ndarray]] = None
) -> tuple[np.ndarray, float]:
    """Per-dimension and overall mean absolute error against manifest labels."""
    if not manifest.records:
        raise ValueError("empty manifest")
    for i, rec in enumerate(manifest.records):
        if rec.label is None:
            raise ValueError(f"record {i} ({rec.audio_path}) has no emotion label")
    if predictions is None:
        predictions = predict_manifest(model, manifest)
    preds = np.vstack(predictions)
    labels = np.vstack([rec.label.values for rec in manifest.records])
    abs_err = np.abs(preds - labels)
    return abs_err.mean(axis=0), float(abs_err.mean())


def save_ser_model(model: SerModel, path, config_checksum: str = "") -> None:
    doc = {
        "format": SER_FORMAT,
        "version": SER_VERSION,
        "config_checksum": config_checksum,
        "sample_rate": model.sample_rate,
        "frame_config": asdict(model.frame_config),
        "metadata": model.metadata,
        "network": nnet.network_to_dict(model.network),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc), encoding="utf-8")


def load_ser_model(path) -> tuple[SerModel, str]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != SER_FORMAT:
        raise ValueError(f"{path}: not a {SER_FORMAT} file")
    if doc.get("version") != SER_VERSION:
        raise ValueError(f"{path}: unsupported version {doc.get('version')}")
    model = SerModel(
        frame_config=dsp.FrameConfig(**doc["frame_config"]),
        sample_rate=int(doc["sample_rate"]),
        network=nnet.network_from_dict(doc["network"]),
        metadata=doc.get("metadata", {}),
    )
    return model, doc.get("config_checksum", "")
