"""Frame-level acoustic analysis: F0, energy, mel-cepstra, and pooling.

All operations share one left-aligned framing (frame t starts at t * hop),
so shifting the input by one hop shifts every output stream by one frame.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import AudioClip

# A correlation local max at a fraction of the period counts as the
# fundamental when it reaches this share of the global max. Frames whose
# global max is itself degraded (below DEGRADED_PEAK, e.g. partly
# aperiodic windows) use the laxer ratio: their peak heights are noisy, so
# period multiples compete within a wider band.
NEAR_PEAK_RATIO = 0.9
DEGRADED_PEAK = 0.85
DEGRADED_RATIO = 0.8


@dataclass(frozen=True)
class FrameConfig:
    window_len: float = 0.025
    hop_len: float = 0.010
    window_shape: str = "hann"
    f0_min: float = 50.0
    f0_max: float = 500.0
    voicing_threshold: float = 0.30
    n_mel_filters: int = 26
    n_cepstra: int = 13
    log_floor: float = -20.0

    def __post_init__(self):
        if not 0 < self.hop_len <= self.window_len:
            raise ValueError(f"need 0 < hop_len <= window_len, got hop={self.hop_len}, window={self.window_len}")
        if not 0 < self.f0_min < self.f0_max:
            raise ValueError(f"need 0 < f0_min < f0_max, got {self.f0_min}, {self.f0_max}")
        if not 0 < self.voicing_threshold < 1:
            raise ValueError(f"voicing_threshold must be in (0,1), got {self.voicing_threshold}")
        if self.n_mel_filters < 2 or self.n_cepstra < 1:
            raise ValueError("need n_mel_filters >= 2 and n_cepstra >= 1")
        if self.n_cepstra > self.n_mel_filters:
            raise ValueError("n_cepstra cannot exceed n_mel_filters")
        if self.window_shape != "hann":
            raise ValueError(f"unknown window shape {self.window_shape!r}")

    def window_samples(self, rate: int) -> int:
        return int(round(self.window_len * rate))

    def hop_samples(self, rate: int) -> int:
        return int(round(self.hop_len * rate))

    def window_array(self, rate: int) -> np.ndarray:
        return np.hanning(self.window_samples(rate))

    def n_frames(self, n_samples: int, rate: int) -> int:
        win, hop = self.window_samples(rate), self.hop_samples(rate)
        if n_samples < win:
            return 0
        return 1 + (n_samples - win) // hop

    def feature_length(self) -> int:
        """Pooled utterance feature vector length for this config."""
        return 4 * (2 + self.n_cepstra) + 2

    def with_cepstra(self, n_cepstra: int) -> "FrameConfig":
        return replace(self, n_cepstra=n_cepstra)

    def validate_rate(self, rate: int) -> None:
        if self.f0_max >= rate / 2:
            raise ValueError(f"f0_max {self.f0_max} must be below Nyquist ({rate / 2})")


@dataclass
class F0Contour:
    """Per-frame fundamental frequency with a voicing decision.

    ``f0`` is NaN on unvoiced frames; ``confidence`` is the normalized
    autocorrelation peak value clipped to [0, 1].
    """

    f0: np.ndarray
    voiced: np.ndarray
    confidence: np.ndarray

    @property
    def n_frames(self) -> int:
        return len(self.f0)

    def voiced_f0(self) -> np.ndarray:
        return self.f0[self.voiced]


def _frame_starts(n_samples: int, win: int, hop: int) -> np.ndarray:
    if n_samples < win:
        raise ValueError(f"clip of {n_samples} samples is shorter than one {win}-sample window")
    return np.arange(0, n_samples - win + 1, hop)


def frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    starts = _frame_starts(len(x), win, hop)
    return np.lib.stride_tricks.sliding_window_view(x, win)[starts]


def extract_f0(clip: AudioClip, cfg: FrameConfig) -> F0Contour:
    """Autocorrelation pitch tracker with parabolic peak refinement.

    Each frame is correlated against the signal shifted by every candidate
    lag in the F0 band, using the full window at every lag (the tail is
    zero-padded). A frame is voiced iff the peak normalized correlation
    reaches the voicing threshold. For periodic input the correlation peaks
    at every multiple of the period, and lag-axis sampling or localized
    corruption can hand the global max to a multiple, so the fundamental is
    taken as the smallest local-max lag scoring at least NEAR_PEAK_RATIO of
    the global max. Sub-period peaks of harmonic signals stay well below
    that ratio, so the rule does not introduce octave-up errors.
    """
    rate = clip.sample_rate
    cfg.validate_rate(rate)
    win, hop = cfg.window_samples(rate), cfg.hop_samples(rate)
    starts = _frame_starts(len(clip.samples), win, hop)
    n_frames = len(starts)

    lag_min = max(1, int(np.ceil(rate / cfg.f0_max)))
    lag_max = int(np.floor(rate / cfg.f0_min))
    x = clip.samples - np.mean(clip.samples)
    xp = np.concatenate([x, np.zeros(lag_max + 2)])

    csq = np.concatenate([[0.0], np.cumsum(xp * xp)])
    windows = np.lib.stride_tricks.sliding_window_view(xp, win)
    base = windows[starts]
    e0 = csq[starts + win] - csq[starts]

    lags = np.arange(lag_min - 1, lag_max + 2)
    r = np.zeros((n_frames, len(lags)))
    for j, lag in enumerate(lags):
        shifted = windows[starts + lag]
        num = np.einsum("fw,fw->f", base, shifted)
        el = csq[starts + lag + win] - csq[starts + lag]
        den = np.sqrt(e0 * el)
        np.divide(num, den, out=r[:, j], where=den > 0)

    # columns 1..-2 of r correspond to lags lag_min..lag_max
    band = r[:, 1:-1]
    gmax_idx = np.argmax(band, axis=1)
    gmax = band[np.arange(n_frames), gmax_idx]
    voiced = gmax >= cfg.voicing_threshold

    f0 = np.full(n_frames, np.nan)
    confidence = np.clip(np.where(np.isfinite(gmax), gmax, 0.0), 0.0, 1.0)
    for i in np.flatnonzero(voiced):
        row = r[i]
        ratio = NEAR_PEAK_RATIO if gmax[i] >= DEGRADED_PEAK else DEGRADED_RATIO
        peaks = np.flatnonzero((row[1:-1] >= row[:-2]) & (row[1:-1] >= row[2:])) + 1
        near = peaks[row[peaks] >= max(cfg.voicing_threshold, ratio * gmax[i])]
        j = int(near[0]) if len(near) else int(gmax_idx[i]) + 1
        rm, r0, rp = row[j - 1], row[j], row[j + 1]
        denom = rm - 2.0 * r0 + rp
        delta = 0.0 if denom == 0 else np.clip(0.5 * (rm - rp) / denom, -0.5, 0.5)
        lag = lags[j] + delta
        f0[i] = np.clip(rate / lag, cfg.f0_min, cfg.f0_max)

    return F0Contour(f0=f0, voiced=voiced, confidence=confidence)


def mean_f0(contour: F0Contour, trim: float = 0.1) -> float:
    """Trimmed mean of voiced F0, robust to rare octave-slipped frames.

    Returns NaN when no frame is voiced.
    """
    vf = np.sort(contour.voiced_f0())
    if len(vf) == 0:
        return float("nan")
    k = int(trim * len(vf))
    return float(np.mean(vf[k : len(vf) - k])) if len(vf) > 2 * k else float(np.mean(vf))


def extract_energy(clip: AudioClip, cfg: FrameConfig) -> np.ndarray:
    """Per-frame RMS of the tapered frame."""
    rate = clip.sample_rate
    frames = frame_signal(clip.samples, cfg.window_samples(rate), cfg.hop_samples(rate))
    tapered = frames * cfg.window_array(rate)
    return np.sqrt(np.mean(tapered * tapered, axis=1))


def mel_scale(f_hz):
    return 2595.0 * np.log10(1.0 + np.asarray(f_hz) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, n_fft: int, rate: int) -> np.ndarray:
    """Triangular filters (peak 1) spanning 0..Nyquist, shape (n_filters, n_bins)."""
    edges_hz = mel_to_hz(np.linspace(0.0, mel_scale(rate / 2.0), n_filters + 2))
    bin_hz = np.fft.rfftfreq(n_fft, d=1.0 / rate)
    fb = np.zeros((n_filters, len(bin_hz)))
    for i in range(n_filters):
        lo, center, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        up = (bin_hz - lo) / (center - lo)
        down = (hi - bin_hz) / (hi - center)
        fb[i] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def filter_center_frequencies(n_filters: int, rate: int) -> np.ndarray:
    return mel_to_hz(np.linspace(0.0, mel_scale(rate / 2.0), n_filters + 2))[1:-1]


def _dct_basis(n_bands: int, n_cepstra: int) -> np.ndarray:
    """Forward cosine basis, shape (n_bands, n_cepstra).

    Coefficient 0 is the plain mean of the band log powers, so adding d to
    it shifts every band by d; higher coefficients carry weight 2/M.
    """
    m = np.arange(n_bands) + 0.5
    k = np.arange(n_cepstra)
    basis = np.cos(np.pi * np.outer(m, k) / n_bands) * (2.0 / n_bands)
    basis[:, 0] = 1.0 / n_bands
    return basis


def cepstra_to_band_log_power(cepstra: np.ndarray, n_bands: int) -> np.ndarray:
    """Evaluate the truncated cosine series back to per-band log power."""
    cepstra = np.atleast_2d(np.asarray(cepstra, dtype=np.float64))
    n_cep = cepstra.shape[1]
    m = np.arange(n_bands) + 0.5
    k = np.arange(n_cep)
    synth = np.cos(np.pi * np.outer(k, m) / n_bands)
    synth[0, :] = 1.0
    return cepstra @ synth


def extract_mel_cepstra(clip: AudioClip, cfg: FrameConfig) -> np.ndarray:
    """Per-frame mel cepstra, shape (n_frames, n_cepstra).

    Pipeline: tapered frame -> power spectrum -> triangular mel filterbank
    -> natural log with floor -> truncated cosine transform. Coefficient 0
    equals the mean band log power.
    """
    rate = clip.sample_rate
    win = cfg.window_samples(rate)
    frames = frame_signal(clip.samples, win, cfg.hop_samples(rate))
    tapered = frames * cfg.window_array(rate)
    n_fft = 1 << int(np.ceil(np.log2(win)))
    spectrum = np.fft.rfft(tapered, n=n_fft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    fb = mel_filterbank(cfg.n_mel_filters, n_fft, rate)
    band_power = power @ fb.T
    log_power = np.log(np.maximum(band_power, np.exp(cfg.log_floor)))
    return log_power @ _dct_basis(cfg.n_mel_filters, cfg.n_cepstra)


def _stats(x: np.ndarray) -> list[float]:
    return [
        float(np.mean(x)),
        float(np.std(x)),
        float(np.percentile(x, 10)),
        float(np.percentile(x, 90)),
    ]


def pool_utterance_features(
    f0: F0Contour, energy: np.ndarray, cepstra: np.ndarray, cfg: FrameConfig
) -> np.ndarray:
    """Pool frame streams into the fixed-length utterance feature vector.

    Layout: 4 statistics (mean, population std, p10, p90) of voiced log-F0,
    of log RMS energy, and of each cepstral coefficient, then voiced-frame
    ratio and duration in seconds. With zero voiced frames the F0 block
    falls back to the log(f0_min) sentinel.
    """
    n = f0.n_frames
    if n == 0:
        raise ValueError("cannot pool zero frames")
    if len(energy) != n or cepstra.shape[0] != n:
        raise ValueError(
            f"frame count mismatch: f0 {n}, energy {len(energy)}, cepstra {cepstra.shape[0]}"
        )
    voiced_f0 = f0.voiced_f0()
    if len(voiced_f0):
        feats = _stats(np.log(voiced_f0))
    else:
        feats = [float(np.log(cfg.f0_min))] * 4
    feats += _stats(np.log(np.maximum(energy, np.exp(cfg.log_floor))))
    for j in range(cepstra.shape[1]):
        feats += _stats(cepstra[:, j])
    feats.append(float(np.mean(f0.voiced)))
    feats.append((n - 1) * cfg.hop_len + cfg.window_len)
    out = np.asarray(feats, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite value in pooled features")
    return out


def analyze(clip: AudioClip, cfg: FrameConfig) -> tuple[F0Contour, np.ndarray, np.ndarray]:
    """Run all three frame analyses on one clip."""
    return extract_f0(clip, cfg), extract_energy(clip, cfg), extract_mel_cepstra(clip, cfg)


def utterance_features(clip: AudioClip, cfg: FrameConfig) -> np.ndarray:
    f0, energy, cepstra = analyze(clip, cfg)
    return pool_utterance_features(f0, energy, cepstra, cfg)


def write_frame_matrix(path, matrix: np.ndarray) -> None:
    """Dump a per-frame matrix as line-delimited decimal text (one frame per line)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(" ".join(f"{v:.10g}" for v in row) + "\n")
