"""Multichannel WAV reading and writing (PCM 16-bit and IEEE float32)."""

import numpy as np
from scipy.io import wavfile

__all__ = ["SAMPLE_RATE", "MAX_CHANNELS", "read_wav", "write_wav"]

SAMPLE_RATE = 16000
MAX_CHANNELS = 16


def read_wav(path, sample_rate=SAMPLE_RATE):
    """Read a WAV file as float64 samples of shape (channels, samples).

    PCM 16-bit is scaled by 1/32768; float32 is taken as is.  Files at any
    rate other than ``sample_rate`` are rejected rather than resampled.
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as err:
        raise ValueError(f"{path}: unreadable WAV file ({err})") from None
    if rate != sample_rate:
        raise ValueError(f"{path}: sample rate {rate} Hz, expected {sample_rate} Hz (no resampling)")
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype} (PCM16 or float32 only)")
    x = x[:, None] if x.ndim == 1 else x
    if x.shape[1] > MAX_CHANNELS:
        raise ValueError(f"{path}: {x.shape[1]} channels exceeds the {MAX_CHANNELS}-channel limit")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{path}: non-finite samples")
    return x.T.copy()


def write_wav(path, signal, sample_rate=SAMPLE_RATE):
    """Write (channels, samples) or (samples,) data as float32 WAV."""
    x = np.asarray(signal, dtype=np.float32)
    if x.ndim == 2:
        if x.shape[0] > MAX_CHANNELS:
            raise ValueError(f"{x.shape[0]} channels exceeds the {MAX_CHANNELS}-channel limit")
        x = x.T
    elif x.ndim != 1:
        raise ValueError(f"expected 1-D or (channels, samples) data, got {x.shape}")
    wavfile.write(path, sample_rate, np.ascontiguousarray(x))
