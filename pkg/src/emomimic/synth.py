"""Desk-scale statistical parametric synthesizer conditioned on emotion.

Transcripts are space-separated phoneme strings over a small inventory.
A duration network maps phoneme-level linguistic features plus the
utterance's emotion vector to frames per phoneme; an acoustic network maps
frame-level features plus the same emotion vector to static+dynamic
acoustic parameters, which parameter generation smooths into trajectories
for the vocoder. The emotion vector always occupies the last six entries
of both network inputs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import dsp, nnet, paramgen, vocoder
from .corpus import AudioClip, Manifest, load_wav
from .emotion import N_DIMENSIONS
from .phones import DEFAULT_INVENTORY
from .ser import SerModel, predict_manifest

logger = logging.getLogger(__name__)

SYNTH_FORMAT = "emomimic-synth-model"
SYNTH_VERSION = 1

# Emotion occupies the last six entries of every model input row.
EMOTION_SLICE = slice(-N_DIMENSIONS, None)

DEFAULT_SYNTH_FRAME_CONFIG = dsp.FrameConfig(n_cepstra=25)
DEFAULT_HIDDEN = (64, 64)
VARIANCE_FLOOR = 1e-6


def linguistic_feature_length(inventory: Sequence[str]) -> int:
    """Per-phoneme feature length: 3 one-hots + position + utterance length."""
    return 3 * len(inventory) + 2


def acoustic_frame_length(frame_cfg: dsp.FrameConfig) -> int:
    """(cepstra + log-F0) statics, deltas, delta-deltas, plus voiced flag."""
    return 3 * (frame_cfg.n_cepstra + 1) + 1


def encode_text(transcript: str, inventory: Sequence[str] = DEFAULT_INVENTORY) -> tuple[list[str], np.ndarray]:
    """Parse a phoneme-string transcript into per-phoneme feature rows.

    Each row holds one-hot identities of the current, previous and next
    phoneme (all-zero at utterance edges), position in utterance (0..1,
    0 for a single phoneme), and utterance length in phonemes.
    """
    if not transcript or not transcript.strip():
        raise ValueError("empty transcript")
    index = {p: i for i, p in enumerate(inventory)}
    phones = transcript.split()
    for p in phones:
        if p not in index:
            raise ValueError(f"unknown phoneme {p!r}; inventory is {list(inventory)}")
    n = len(phones)
    size = len(inventory)
    feats = np.zeros((n, linguistic_feature_length(inventory)))
    for i, p in enumerate(phones):
        feats[i, index[p]] = 1.0
        if i > 0:
            feats[i, size + index[phones[i - 1]]] = 1.0
        if i < n - 1:
            feats[i, 2 * size + index[phones[i + 1]]] = 1.0
        feats[i, 3 * size] = 0.0 if n == 1 else i / (n - 1)
        feats[i, 3 * size + 1] = float(n)
    return phones, feats


def frame_features(phone_feats: np.ndarray, durations: np.ndarray) -> np.ndarray:
    """Expand phoneme rows to frame rows, appending position-in-phoneme."""
    rows = []
    for feats, dur in zip(phone_feats, durations):
        dur = int(dur)
        pos = (np.arange(dur) + 0.5) / dur
        rows.append(np.hstack([np.tile(feats, (dur, 1)), pos[:, None]]))
    return np.vstack(rows)


@dataclass
class SynthModel:
    """Trained duration and acoustic networks plus generation parameters.

    ``variances`` is the global diagonal of the acoustic output space in
    raw units, used by parameter generation. Immutable after training.
    """

    inventory: list[str]
    frame_config: dsp.FrameConfig
    sample_rate: int
    duration_net: nnet.TrainedNetwork
    acoustic_net: nnet.TrainedNetwork
    variances: np.ndarray
    noise_seed: int = 0
    metadata: dict = None

    def __post_init__(self):
        if self.metadata is None:
            self.metadata = {}
        self.variances = np.asarray(self.variances, dtype=np.float64)
        want = acoustic_frame_length(self.frame_config)
        if self.variances.shape != (want,):
            raise ValueError(f"variances must have shape ({want},), got {self.variances.shape}")


def predict_durations(model: SynthModel, phone_feats: np.ndarray, emotion: np.ndarray) -> np.ndarray:
    """Frames per phoneme: network output rounded and clamped to >= 1."""
    emotion = np.asarray(emotion, dtype=np.float64)
    if emotion.shape != (N_DIMENSIONS,) or not np.all(np.isfinite(emotion)):
        raise ValueError("emotion must be a finite 6-vector")
    x = np.hstack([phone_feats, np.tile(emotion, (len(phone_feats), 1))])
    raw = model.duration_net.predict(x)[:, 0]
    return np.maximum(np.round(raw).astype(int), 1)


def predict_acoustics(model: SynthModel, frame_feats: np.ndarray, emotion: np.ndarray) -> np.ndarray:
    """Per-frame static+dynamic acoustic parameters in the documented layout."""
    emotion = np.asarray(emotion, dtype=np.float64)
    if emotion.shape != (N_DIMENSIONS,) or not np.all(np.isfinite(emotion)):
        raise ValueError("emotion must be a finite 6-vector")
    x = np.hstack([frame_feats, np.tile(emotion, (len(frame_feats), 1))])
    return model.acoustic_net.predict(x)


def mlpg_generate(seq: np.ndarray, variances: np.ndarray, frame_cfg: dsp.FrameConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smooth static trajectories from a predicted acoustic sequence.

    Returns (cepstra, log_f0, voiced): the continuous part is solved per
    stream from its static/delta/delta-delta means under the global
    variances; the voiced flag passes through thresholded at 0.5.
    """
    seq = np.atleast_2d(np.asarray(seq, dtype=np.float64))
    want = acoustic_frame_length(frame_cfg)
    if seq.shape[1] != want:
        raise ValueError(f"sequence width {seq.shape[1]} does not match layout {want}")
    n_static = frame_cfg.n_cepstra + 1
    statics = paramgen.mlpg(seq[:, : 3 * n_static], variances[: 3 * n_static], n_static)
    voiced = seq[:, -1] >= 0.5
    return statics[:, : frame_cfg.n_cepstra], statics[:, frame_cfg.n_cepstra], voiced


def acoustic_targets(clip: AudioClip, frame_cfg: dsp.FrameConfig) -> np.ndarray:
    """Analysis targets for training: statics, dynamics, voiced flag."""
    contour = dsp.extract_f0(clip, frame_cfg)
    cepstra = dsp.extract_mel_cepstra(clip, frame_cfg)
    lf0 = np.log(np.where(contour.voiced, contour.f0, frame_cfg.f0_min))
    continuous = np.hstack([cepstra, lf0[:, None]])
    full = paramgen.dynamic_features(continuous)
    return np.hstack([full, contour.voiced.astype(np.float64)[:, None]])


def _frames_per_phone(n_frames: int, boundaries: np.ndarray, frame_cfg: dsp.FrameConfig, rate: int) -> np.ndarray:
    """Assign each frame to the phone whose sample span holds its center."""
    hop = frame_cfg.hop_samples(rate)
    centers = np.arange(n_frames) * hop + frame_cfg.window_samples(rate) / 2.0
    idx = np.minimum(np.searchsorted(boundaries, centers, side="right"), len(boundaries) - 1)
    return np.bincount(idx, minlength=len(boundaries))


def train_synth(
    manifest: Manifest,
    alignment: dict[str, list[tuple[str, int]]],
    emotion_source: Union[str, SerModel],
    frame_cfg: dsp.FrameConfig = DEFAULT_SYNTH_FRAME_CONFIG,
    sample_rate: int = 16000,
    duration_cfg: Optional[nnet.TrainConfig] = None,
    acoustic_cfg: Optional[nnet.TrainConfig] = None,
    inventory: Sequence[str] = DEFAULT_INVENTORY,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    noise_seed: int = 0,
) -> SynthModel:
    """Train duration and acoustic networks on an aligned corpus.

    ``emotion_source`` is either the string "labels" (use manifest labels,
    the oracle route) or a trained SerModel whose predictions condition the
    training rows, mirroring how the synthesizer is driven at run time.
    """
    if not manifest.records:
        raise ValueError("empty manifest")
    duration_cfg = duration_cfg or nnet.TrainConfig(learning_rate=0.05, epochs=200, rng_seed=11)
    acoustic_cfg = acoustic_cfg or nnet.TrainConfig(learning_rate=0.05, batch_size=64, epochs=40, rng_seed=12)

    if isinstance(emotion_source, SerModel):
        emotions = predict_manifest(emotion_source, manifest)
    elif emotion_source == "labels":
        emotions = []
        for i, rec in enumerate(manifest.records):
            if rec.label is None:
                raise ValueError(f"record {i} ({rec.audio_path}) has no label and emotion_source is 'labels'")
            emotions.append(rec.label.values)
    else:
        raise ValueError("emotion_source must be 'labels' or a SerModel")

    dur_x, dur_y, ac_x, ac_y = [], [], [], []
    for rec, emotion in zip(manifest.records, emotions):
        if not rec.transcript.strip():
            raise ValueError(f"record {rec.audio_path} has no transcript")
        if rec.audio_path not in alignment:
            raise ValueError(f"no alignment entry for {rec.audio_path}")
        spans = alignment[rec.audio_path]
        phones = [p for p, _ in spans]
        if phones != rec.transcript.split():
            raise ValueError(f"alignment phones do not match transcript for {rec.audio_path}")

        clip = load_wav(manifest.resolve_path(rec), sample_rate)
        targets = acoustic_targets(clip, frame_cfg)
        boundaries = np.cumsum([n for _, n in spans])
        durations = _frames_per_phone(targets.shape[0], boundaries, frame_cfg, sample_rate)

        _, phone_feats = encode_text(rec.transcript, inventory)
        emo = np.asarray(emotion, dtype=np.float64)
        dur_x.append(np.hstack([phone_feats, np.tile(emo, (len(phone_feats), 1))]))
        dur_y.append(durations.astype(np.float64)[:, None])

        if np.any(durations == 0):
            # keep acoustic rows aligned by dropping zero-length phones
            keep = durations > 0
            phone_feats = phone_feats[keep]
            durations = durations[keep]
        ff = frame_features(phone_feats, durations)
        ac_x.append(np.hstack([ff, np.tile(emo, (len(ff), 1))]))
        ac_y.append(targets)

    dur_inputs, dur_targets = np.vstack(dur_x), np.vstack(dur_y)
    ac_inputs, ac_targets = np.vstack(ac_x), np.vstack(ac_y)

    logger.info("duration set: %s rows; acoustic set: %s rows", len(dur_inputs), len(ac_inputs))
    dur_spec = nnet.mlp_spec(dur_inputs.shape[1], list(hidden), 1)
    ac_spec = nnet.mlp_spec(ac_inputs.shape[1], list(hidden), ac_targets.shape[1])
    duration_net = nnet.train(dur_spec, dur_inputs, dur_targets, duration_cfg)
    acoustic_net = nnet.train(ac_spec, ac_inputs, ac_targets, acoustic_cfg)

    variances = np.maximum(np.var(ac_targets, axis=0), VARIANCE_FLOOR)
    metadata = {
        "n_utterances": len(manifest.records),
        "n_acoustic_frames": int(ac_targets.shape[0]),
        "emotion_source": "labels" if emotion_source == "labels" else "ser",
        "duration_loss": duration_net.loss_history[-1],
        "acoustic_loss": acoustic_net.loss_history[-1],
    }
    return SynthModel(
        inventory=list(inventory),
        frame_config=frame_cfg,
        sample_rate=sample_rate,
        duration_net=duration_net,
        acoustic_net=acoustic_net,
        variances=variances,
        noise_seed=noise_seed,
        metadata=metadata,
    )


def synthesize_params(model: SynthModel, transcript: str, emotion: np.ndarray):
    """Run the text-to-trajectory stages; returns (cepstra, log_f0, voiced, durations)."""
    _, phone_feats = encode_text(transcript, model.inventory)
    durations = predict_durations(model, phone_feats, emotion)
    ff = frame_features(phone_feats, durations)
    seq = predict_acoustics(model, ff, emotion)
    cepstra, lf0, voiced = mlpg_generate(seq, model.variances, model.frame_config)
    # the vocoder requires voiced F0 inside the tracker band
    lf0 = np.clip(lf0, np.log(model.frame_config.f0_min), np.log(model.frame_config.f0_max))
    return cepstra, lf0, voiced, durations


def synthesize(model: SynthModel, transcript: str, emotion: np.ndarray) -> AudioClip:
    """Full chain: text and emotion in, waveform out. Deterministic."""
    cepstra, lf0, voiced, _ = synthesize_params(model, transcript, emotion)
    return vocoder.vocode(cepstra, lf0, voiced, model.frame_config, model.sample_rate, model.noise_seed)


def save_synth_model(model: SynthModel, path, config_checksum: str = "") -> None:
    doc = {
        "format": SYNTH_FORMAT,
        "version": SYNTH_VERSION,
        "config_checksum": config_checksum,
        "inventory": model.inventory,
        "frame_config": asdict(model.frame_config),
        "sample_rate": model.sample_rate,
        "noise_seed": model.noise_seed,
        "variances": model.variances.tolist(),
        "metadata": model.metadata,
        "duration_net": nnet.network_to_dict(model.duration_net),
        "acoustic_net": nnet.network_to_dict(model.acoustic_net),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc), encoding="utf-8")


def load_synth_model(path) -> tuple[SynthModel, str]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != SYNTH_FORMAT:
        raise ValueError(f"{path}: not a {SYNTH_FORMAT} file")
    if doc.get("version") != SYNTH_VERSION:
        raise ValueError(f"{path}: unsupported version {doc.get('version')}")
    model = SynthModel(
        inventory=list(doc["inventory"]),
        frame_config=dsp.FrameConfig(**doc["frame_config"]),
        sample_rate=int(doc["sample_rate"]),
        duration_net=nnet.network_from_dict(doc["duration_net"]),
        acoustic_net=nnet.network_from_dict(doc["acoustic_net"]),
        variances=np.asarray(doc["variances"], dtype=np.float64),
        noise_seed=int(doc["noise_seed"]),
        metadata=doc.get("metadata", {}),
    )
    return model, doc.get("config_checksum", "")
