"""Short-time Fourier analysis/synthesis with square-root Hann windows.

Spectrograms are complex arrays of shape (channels, frames, bins); a
single-channel spectrogram may also be passed as (frames, bins).
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["StftConfig", "analyze", "synthesize", "apply_weights", "frame_count"]


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 1024
    hop: int = 256
    sample_rate: int = 16000
    window: str = "sqrt-hann"

    def __post_init__(self):
        n, h = self.fft_size, self.hop
        if n < 2 or n & (n - 1):
            raise ValueError(f"fft_size must be a power of two, got {n}")
        if h < 1 or n % h or h > n // 2:
            raise ValueError(f"hop must divide fft_size and be <= fft_size/2, got {h}")
        if self.window != "sqrt-hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def bins(self):
        return self.fft_size // 2 + 1

    def frequencies(self):
        return np.arange(self.bins) * self.sample_rate / self.fft_size


def sqrt_hann(n):
    # periodic Hann, so that shifted copies sum to a constant
    return np.sqrt(0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n))


def frame_count(num_samples, cfg):
    if num_samples < cfg.fft_size:
        return 0
    return (num_samples - cfg.fft_size) // cfg.hop + 1


def analyze(signal, cfg=StftConfig()):
    """STFT of a (channels, samples) or (samples,) real signal.

    Frames start at multiples of ``hop``; the trailing partial frame is
    dropped, so ``frames = (T - fft_size) // hop + 1``.
    """
    x = np.asarray(signal, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None]
    if x.ndim != 2:
        raise ValueError(f"signal must be 1-D or 2-D, got shape {x.shape}")
    if x.shape[-1] < cfg.fft_size:
        raise ValueError(
            f"signal has {x.shape[-1]} samples, fewer than one frame ({cfg.fft_size})"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.fft_size, axis=-1)
    frames = frames[:, :: cfg.hop]
    spec = np.fft.rfft(frames * sqrt_hann(cfg.fft_size), axis=-1)
    return spec[0] if squeeze else spec


def synthesize(spec, cfg=StftConfig()):
    """Weighted overlap-add inverse of :func:`analyze`.

    Returns (channels, samples) for a 3-D spectrogram and (samples,) for a
    2-D one, with ``samples = (frames - 1) * hop + fft_size``.
    """
    Y = np.asarray(spec)
    squeeze = Y.ndim == 2
    if squeeze:
        Y = Y[None]
    if Y.ndim != 3:
        raise ValueError(f"spectrogram must be 2-D or 3-D, got shape {Y.shape}")
    if Y.shape[-1] != cfg.bins:
        raise ValueError(
            f"spectrogram has {Y.shape[-1]} bins but fft_size {cfg.fft_size} "
            f"implies {cfg.bins}"
        )
    n, hop = cfg.fft_size, cfg.hop
    win = sqrt_hann(n)
    # sum over overlapping frames of analysis * synthesis window is n / (2 hop)
    win = win * (2.0 * hop / n)
    frames = np.fft.irfft(Y, n=n, axis=-1) * win
    channels, count = Y.shape[0], Y.shape[1]
    out = np.zeros((channels, (count - 1) * hop + n)) if count else np.zeros((channels, 0))
    for i in range(count):
        out[:, i * hop:i * hop + n] += frames[:, i]
    return out[0] if squeeze else out


def apply_weights(spec, weights):
    """Filter output O(l, k) = sum_m conj(H_m(k)) Y_m(l, k).

    ``weights`` is (bins, channels) for a time-invariant filter or
    (frames, bins, channels) for a per-frame filter.  Returns (frames, bins).
    """
    Y = np.asarray(spec)
    w = np.asarray(weights)
    if Y.ndim != 3:
        raise ValueError(f"spectrogram must be (channels, frames, bins), got {Y.shape}")
    m, frames, bins = Y.shape
    if w.shape[-1] != m:
        raise ValueError(f"weights have {w.shape[-1]} channels, spectrogram has {m}")
    if w.ndim == 2:
        if w.shape[0] != bins:
            raise ValueError(f"weights have {w.shape[0]} bins, spectrogram has {bins}")
        return np.einsum("km,mlk->lk", np.conj(w), Y)
    if w.ndim == 3:
        if w.shape[:2] != (frames, bins):
            raise ValueError(f"weights shape {w.shape} does not match {(frames, bins, m)}")
        return np.einsum("lkm,mlk->lk", np.conj(w), Y)
    raise ValueError(f"weights must be 2-D or 3-D, got shape {w.shape}")
