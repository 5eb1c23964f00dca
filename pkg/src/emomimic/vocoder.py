"""Source-filter waveform generation from static acoustic trajectories.

Excitation is a pulse train at the generated F0 on voiced frames and
seeded white noise on unvoiced frames; the spectral envelope comes from
the mel-cepstral trajectory, evaluated as an exponentiated cosine series
over the filterbank's band centers and applied frame-wise by overlap-add
magnitude filtering.
"""

from __future__ import annotations

import numpy as np

from .corpus import AudioClip
from .dsp import FrameConfig, cepstra_to_band_log_power, filter_center_frequencies

PEAK_CEILING = 0.9

# Pulse kernel width in samples; narrow enough to keep the source flat to
# ~3 kHz at 16 kHz, wide enough that integer-lag autocorrelation sampling
# still sees the true period peak for fractional periods.
PULSE_SIGMA = 0.8


def excitation_signal(
    f0: np.ndarray,
    voiced: np.ndarray,
    n_samples: int,
    hop: int,
    sample_rate: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Pulse train / noise excitation at one value per frame.

    Pulses are spaced by the running period with phase accumulated across
    voiced frames. Each pulse is a narrow Gaussian kernel placed at its
    exact fractional position: a hard one-sample impulse at a non-integer
    period would make the emitted train periodic only over several pitch
    cycles, and re-analysis would lock onto that longer period. Pulse
    energy is sqrt(period), giving the train unit variance; unvoiced
    samples are unit-variance white noise.
    """
    half = int(np.ceil(4.0 * PULSE_SIGMA))
    out = np.zeros(n_samples + 2 * half + 1)
    n_frames = len(f0)
    phase = 0.0
    for t in range(n_frames):
        start = t * hop
        stop = min(start + hop, n_samples) if t < n_frames - 1 else n_samples
        if stop <= start:
            continue
        if voiced[t]:
            step = f0[t] / sample_rate
            span = stop - start
            n_pulses = int(np.floor(phase + span * step))
            if n_pulses > 0:
                ticks = (np.arange(1, n_pulses + 1) - phase) / step
                for pos in start + ticks:
                    center = int(np.floor(pos))
                    idx = np.arange(center - half, center + half + 1) + half
                    kernel = np.exp(-0.5 * ((idx - half - pos) / PULSE_SIGMA) ** 2)
                    out[idx] += kernel * (np.sqrt(1.0 / step) / np.sqrt(np.sum(kernel**2)))
            phase += span * step - n_pulses
        else:
            out[start + half : stop + half] = rng.standard_normal(stop - start)
            phase = 0.0
    return out[half : n_samples + half]


def envelope_magnitudes(cepstra: np.ndarray, cfg: FrameConfig, n_fft: int, sample_rate: int) -> np.ndarray:
    """Per-frame magnitude envelope at rfft bins, shape (T, n_fft//2 + 1).

    The cepstra are the truncated cosine series of band log power; the
    series is evaluated back at the band centers, halved to log magnitude,
    and linearly interpolated over frequency (flat beyond the outer
    centers).
    """
    log_power = cepstra_to_band_log_power(cepstra, cfg.n_mel_filters)
    centers = filter_center_frequencies(cfg.n_mel_filters, sample_rate)
    bin_hz = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    mags = np.empty((log_power.shape[0], len(bin_hz)))
    for t in range(log_power.shape[0]):
        mags[t] = np.exp(0.5 * np.interp(bin_hz, centers, log_power[t]))
    return mags


def vocode(
    cepstra: np.ndarray,
    log_f0: np.ndarray,
    voiced: np.ndarray,
    cfg: FrameConfig,
    sample_rate: int,
    noise_seed: int = 0,
) -> AudioClip:
    """Render audio from aligned per-frame trajectories.

    The output spans (T - 1) * hop + window samples and is peak-normalized
    down to 0.9 only when it would exceed that ceiling.
    """
    cepstra = np.atleast_2d(np.asarray(cepstra, dtype=np.float64))
    log_f0 = np.asarray(log_f0, dtype=np.float64)
    voiced = np.asarray(voiced, dtype=bool)
    n_frames = cepstra.shape[0]
    if len(log_f0) != n_frames or len(voiced) != n_frames:
        raise ValueError(
            f"misaligned streams: cepstra {n_frames}, log_f0 {len(log_f0)}, voiced {len(voiced)}"
        )
    if n_frames == 0:
        raise ValueError("empty trajectories")
    f0 = np.exp(log_f0)
    if np.any(voiced & ((f0 < cfg.f0_min) | (f0 > cfg.f0_max))):
        raise ValueError(f"voiced F0 outside [{cfg.f0_min}, {cfg.f0_max}]")

    win = cfg.window_samples(sample_rate)
    hop = cfg.hop_samples(sample_rate)
    n_samples = (n_frames - 1) * hop + win
    rng = np.random.default_rng(noise_seed)
    excitation = excitation_signal(f0, voiced, n_samples, hop, sample_rate, rng)

    n_fft = 1 << int(np.ceil(np.log2(win)))
    mags = envelope_magnitudes(cepstra, cfg, n_fft, sample_rate)
    window = cfg.window_array(sample_rate)

    out = np.zeros(n_samples)
    wsum = np.zeros(n_samples)
    for t in range(n_frames):
        start = t * hop
        seg = excitation[start : start + win] * window
        spec = np.fft.rfft(seg, n=n_fft)
        filtered = np.fft.irfft(spec * mags[t], n=n_fft)[:win]
        out[start : start + win] += filtered
        wsum[start : start + win] += window
    out /= np.maximum(wsum, 1e-8)

    peak = float(np.max(np.abs(out))) if n_samples else 0.0
    if peak > PEAK_CEILING:
        out *= PEAK_CEILING / peak
    return AudioClip(samples=out, sample_rate=sample_rate)
