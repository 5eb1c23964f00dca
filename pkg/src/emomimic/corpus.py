"""Corpus handling: WAV and manifest I/O plus the synthetic label-known corpus.

The synthetic generator realizes a fixed emotion-to-prosody mapping so that
every emotion dimension is recoverable from the emitted audio; it serves as
the ground-truth oracle for the recognizer and synthesizer stages.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.io import wavfile

from .emotion import EmotionVector
from .phones import FORMANT_HZ, SPEAKABLE_PHONES

PCM16_SCALE = 32768.0


class WavFormatError(ValueError):
    """Unreadable container or unsupported sample encoding."""


class SampleRateMismatchError(ValueError):
    """File sample rate differs from the configured rate (no resampling)."""


class ManifestError(ValueError):
    """Malformed or inconsistent manifest file."""


@dataclass
class AudioClip:
    """Mono audio: float64 samples in [-1, 1] at a fixed rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"AudioClip samples must be 1-D, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioClip samples must be finite")
        if self.samples.size and np.max(np.abs(self.samples)) > 1.0 + 1e-9:
            raise ValueError("AudioClip samples must lie in [-1, 1]")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class UtteranceRecord:
    audio_path: str
    speaker_id: str
    condition_id: str
    transcript: str
    label: Optional[EmotionVector] = None
    weight: float = 1.0

    def __post_init__(self):
        if not self.speaker_id:
            raise ValueError("speaker_id must be non-empty")
        if not self.condition_id:
            raise ValueError("condition_id must be non-empty")


@dataclass
class Manifest:
    """Ordered utterance records plus the derived speaker and condition sets.

    ``condition_set`` and ``speaker_set`` hold the distinct ids in first
    appearance order, which anchors every downstream iteration order.
    """

    records: list[UtteranceRecord]
    condition_set: list[str] = field(default_factory=list)
    speaker_set: list[str] = field(default_factory=list)
    root: Optional[Path] = None

    def __post_init__(self):
        conditions, speakers = [], []
        for rec in self.records:
            if rec.condition_id not in conditions:
                conditions.append(rec.condition_id)
            if rec.speaker_id not in speakers:
                speakers.append(rec.speaker_id)
        if self.condition_set and self.condition_set != conditions:
            raise ManifestError("condition_set does not match records")
        if self.speaker_set and self.speaker_set != speakers:
            raise ManifestError("speaker_set does not match records")
        self.condition_set = conditions
        self.speaker_set = speakers

    def resolve_path(self, record: UtteranceRecord) -> Path:
        p = Path(record.audio_path)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        return p

    def labeled(self) -> bool:
        return all(rec.label is not None for rec in self.records)


def load_wav(path, expected_rate: int) -> AudioClip:
    """Read a RIFF/WAVE file as a mono clip at the configured rate.

    PCM16 and 32-bit IEEE float encodings are accepted; multi-channel input
    is downmixed by per-sample channel average. A rate mismatch is an error,
    never a resample.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"audio file not found: {path}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise WavFormatError(f"malformed WAV container: {path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(
            f"unsupported WAV encoding {data.dtype} in {path}: only PCM16 and float32 are accepted"
        )
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    np.clip(samples, -1.0, 1.0, out=samples)

    if rate != expected_rate:
        raise SampleRateMismatchError(
            f"{path}: sample rate {rate} Hz does not match configured {expected_rate} Hz"
        )
    return AudioClip(samples=samples, sample_rate=rate)


def write_wav(clip: AudioClip, path, encoding: str = "pcm16") -> None:
    """Write a clip as PCM16 (default) or float32 WAV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if encoding == "pcm16":
        q = np.clip(np.round(clip.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
        wavfile.write(str(path), clip.sample_rate, q)
    elif encoding == "float32":
        wavfile.write(str(path), clip.sample_rate, clip.samples.astype(np.float32))
    else:
        raise ValueError(f"unknown WAV encoding {encoding!r}: use 'pcm16' or 'float32'")


# --- manifest I/O ---------------------------------------------------------

def _parse_manifest_line(line: str, lineno: int) -> UtteranceRecord:
    fields = line.split("\t")
    if len(fields) < 4:
        raise ManifestError(
            f"line {lineno}: expected at least 4 tab-separated fields "
            f"(audio_path, speaker_id, condition_id, transcript), got {len(fields)}"
        )
    if len(fields) > 6:
        raise ManifestError(f"line {lineno}: too many fields ({len(fields)})")
    audio_path, speaker_id, condition_id, transcript = fields[:4]
    if not audio_path:
        raise ManifestError(f"line {lineno}: empty audio_path")
    if not speaker_id:
        raise ManifestError(f"line {lineno}: empty speaker_id")
    if not condition_id:
        raise ManifestError(f"line {lineno}: empty condition_id")
    label = None
    weight = 1.0
    if len(fields) >= 5 and fields[4]:
        try:
            label = EmotionVector.parse_csv(fields[4])
        except ValueError as exc:
            raise ManifestError(f"line {lineno}: bad label: {exc}") from exc
    if len(fields) == 6 and fields[5]:
        try:
            weight = float(fields[5])
        except ValueError as exc:
            raise ManifestError(f"line {lineno}: bad weight {fields[5]!r}") from exc
        if weight <= 0:
            raise ManifestError(f"line {lineno}: weight must be positive")
    return UtteranceRecord(audio_path, speaker_id, condition_id, transcript, label, weight)


def load_manifest(path) -> Manifest:
    """Read a tab-separated manifest; see README for the line format."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            rec = _parse_manifest_line(line, lineno)
            triple = (rec.speaker_id, rec.condition_id, rec.audio_path)
            if triple in seen:
                raise ManifestError(f"line {lineno}: duplicate (speaker, condition, path) triple {triple}")
            seen.add(triple)
            records.append(rec)
    if not records:
        raise ManifestError(f"empty manifest: {path}")
    return Manifest(records=records, root=path.parent)


def save_manifest(manifest: Manifest, path, header_comments: Sequence[str] = ()) -> None:
    """Write a manifest in the same format load_manifest reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {c}" for c in header_comments]
    for rec in manifest.records:
        fields = [rec.audio_path, rec.speaker_id, rec.condition_id, rec.transcript]
        if rec.label is not None:
            fields.append(",".join(repr(float(x)) for x in rec.label.values))
            if rec.weight != 1.0:
                fields.append(repr(float(rec.weight)))
        lines.append("\t".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- synthetic corpus ------------------------------------------------------

# Emotion-to-prosody mapping. Every dimension must leave a recoverable
# acoustic trace, otherwise recognizer training is ill-posed.
F0_BASE_HZ = 120.0
F0_PER_AROUSAL = 15.0
RMS_BASE = 0.10
RMS_PER_DOMINANCE = 0.10
DUR_BASE_S = 1.0
DUR_PER_INTEREST = 0.05
TILT_BASE_DB = -6.0
TILT_PER_PLEASANTNESS = 1.0
# Both gains are one-sided in the label: the pooled recognizer features are
# order-invariant statistics, so a signed contour slope would be ambiguous.
# Positivity mainly controls source roughness: the fraction of aperiodic
# (noise-excited) spans, which lands in the voiced-frame ratio. The
# cycle-alternating F0 jitter must stay tiny because larger depths
# genuinely double the period and the tracker would report f0/2.
SLOPE_PER_CREDIBILITY = 0.015
JITTER_PER_POSITIVITY = 0.001
ROUGHNESS_PER_POSITIVITY = 0.08
ROUGH_SPAN_S = 0.030

LABEL_LOW, LABEL_HIGH = 2.0, 6.0


def prosody_targets(label: EmotionVector) -> dict:
    """Deterministic prosody targets implied by an emotion label."""
    v = label.values
    return {
        "f0_hz": F0_BASE_HZ + F0_PER_AROUSAL * (v[1] - 4.0),
        "rms": RMS_BASE * (1.0 + RMS_PER_DOMINANCE * (v[2] - 4.0)),
        "duration_s": DUR_BASE_S + DUR_PER_INTEREST * (v[4] - 4.0),
        "tilt_db_per_octave": TILT_BASE_DB + TILT_PER_PLEASANTNESS * (v[0] - 4.0),
        "f0_slope": SLOPE_PER_CREDIBILITY * (v[3] - LABEL_LOW),
        "jitter_depth": JITTER_PER_POSITIVITY * (v[5] - LABEL_LOW),
        "roughness": ROUGHNESS_PER_POSITIVITY * (v[5] - LABEL_LOW),
    }


def _split_samples(total: int, n_parts: int) -> list[int]:
    """Partition total samples into n nearly equal parts (cumulative rounding)."""
    bounds = [round(total * i / n_parts) for i in range(n_parts + 1)]
    return [bounds[i + 1] - bounds[i] for i in range(n_parts)]


def render_utterance(
    label: EmotionVector,
    phones: Sequence[str],
    sample_rate: int,
    rng: Optional[np.random.Generator] = None,
) -> tuple[AudioClip, list[int]]:
    """Synthesize an utterance realizing the prosody mapping for ``label``.

    Returns the clip and the per-phone segment lengths in samples. The
    waveform is a harmonic source with phase continuity across phones,
    tilted per pleasantness and colored by each phone's resonance, with a
    positivity-controlled share of aperiodic spans; samples are rounded
    through float32 so float-encoded WAV round trips exactly. The rng only
    drives the aperiodic spans (their placement and noise).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    targets = prosody_targets(label)
    n_total = int(round(targets["duration_s"] * sample_rate))
    seg_lengths = _split_samples(n_total, len(phones))

    # F0 contour: a linear rise per credibility, then alternating-period
    # jitter per positivity. The alternation flips sign every pitch cycle,
    # which raises subharmonic sidebands (a spectral trace) while keeping
    # the time-averaged F0 at the mapping value.
    t_rel = (np.arange(n_total) + 0.5) / n_total
    f0 = targets["f0_hz"] * (1.0 + targets["f0_slope"] * (t_rel - 0.5))
    base_phase = np.cumsum(f0) / sample_rate
    alternation = np.where(np.floor(base_phase) % 2 == 0, 1.0, -1.0)
    f0 = f0 * (1.0 + targets["jitter_depth"] * alternation)

    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate
    f0_peak = float(np.max(f0))
    n_harm = max(1, int(0.45 * sample_rate / f0_peak))
    k = np.arange(1, n_harm + 1, dtype=np.float64)
    # tilt_db_per_octave converts to a power law in harmonic number
    tilt_amp = k ** (targets["tilt_db_per_octave"] / (20.0 * np.log10(2.0)))

    out = np.zeros(n_total)
    pos = 0
    for phone, seg_len in zip(phones, seg_lengths):
        if seg_len == 0:
            continue
        sl = slice(pos, pos + seg_len)
        if phone == "sil":
            pos += seg_len
            continue
        freqs = k * np.mean(f0[sl])
        boost = 1.0 + np.exp(-0.5 * ((freqs - FORMANT_HZ[phone]) / 250.0) ** 2)
        amps = tilt_amp * boost
        out[sl] = np.sin(np.outer(phase[sl], k)) @ amps
        pos += seg_len

    # Roughness: replace random spans with noise at the local RMS. Those
    # frames lose periodicity and go unvoiced, lowering the voiced-frame
    # ratio, while the overall energy profile is preserved.
    span = max(1, int(round(ROUGH_SPAN_S * sample_rate)))
    n_spans = int(np.ceil(n_total / span))
    rough = rng.random(n_spans) < targets["roughness"]
    for si in np.flatnonzero(rough):
        sl = slice(si * span, min((si + 1) * span, n_total))
        local = float(np.sqrt(np.mean(out[sl] ** 2)))
        if local > 0:
            out[sl] = rng.standard_normal(sl.stop - sl.start) * local

    rms = float(np.sqrt(np.mean(out**2)))
    if rms > 0:
        out *= targets["rms"] / rms
    out = np.clip(out, -1.0, 1.0)
    out = out.astype(np.float32).astype(np.float64)
    return AudioClip(samples=out, sample_rate=sample_rate), seg_lengths


def generate_synthetic_corpus(
    n_speakers: int,
    conditions: Sequence[str],
    utterances_per_cell: int,
    rng_seed: int,
    out_dir,
    sample_rate: int = 16000,
    header_comments: Sequence[str] = (),
) -> Manifest:
    """Generate a label-known corpus: WAVs, manifest, and alignment sidecar.

    Labels are drawn uniformly in [2, 6] per dimension (headroom so the 1..7
    clamp never triggers); transcripts are 3..8 random speakable phones. The
    whole corpus is a pure function of rng_seed.
    """
    if n_speakers < 1 or utterances_per_cell < 1:
        raise ValueError("n_speakers and utterances_per_cell must be >= 1")
    if not conditions:
        raise ValueError("at least one condition is required")
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    try:
        wav_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {out_dir}: {exc}") from exc

    rng = np.random.default_rng(rng_seed)
    records = []
    alignment_lines = []
    idx = 0
    for s in range(n_speakers):
        speaker = f"spk{s}"
        for condition in conditions:
            for _ in range(utterances_per_cell):
                label = EmotionVector(rng.uniform(LABEL_LOW, LABEL_HIGH, size=6))
                n_phones = int(rng.integers(3, 9))
                phones = [SPEAKABLE_PHONES[i] for i in rng.integers(0, len(SPEAKABLE_PHONES), size=n_phones)]
                clip, seg_lengths = render_utterance(label, phones, sample_rate, rng)
                rel_path = f"wav/u{idx:04d}_{speaker}_{condition}.wav"
                write_wav(clip, out_dir / rel_path, encoding="pcm16")
                records.append(
                    UtteranceRecord(rel_path, speaker, condition, " ".join(phones), label)
                )
                alignment_lines.append(
                    rel_path + "\t" + " ".join(f"{p}:{n}" for p, n in zip(phones, seg_lengths))
                )
                idx += 1

    manifest = Manifest(records=records, root=out_dir)
    save_manifest(manifest, out_dir / "manifest.tsv", header_comments=header_comments)
    (out_dir / "alignment.tsv").write_text("\n".join(alignment_lines) + "\n", encoding="utf-8")
    return manifest


def load_alignment(path) -> dict[str, list[tuple[str, int]]]:
    """Read the alignment sidecar: audio_path -> [(phone, n_samples), ...]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"alignment file not found: {path}")
    out: dict[str, list[tuple[str, int]]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        try:
            audio_path, spans = raw.split("\t")
            pairs = []
            for item in spans.split(" "):
                phone, n = item.rsplit(":", 1)
                pairs.append((phone, int(n)))
        except ValueError as exc:
            raise ManifestError(f"alignment line {lineno}: {exc}") from exc
        out[audio_path] = pairs
    return out
