"""Ideal binary masks, cross-channel median fusion and mask file I/O."""

import json
import struct
from typing import NamedTuple

import numpy as np

__all__ = [
    "MaskPair",
    "oracle_masks",
    "median_fuse",
    "write_mask_file",
    "read_mask_file",
    "MASK_FORMAT_VERSION",
]

MASK_FORMAT_VERSION = 1


class MaskPair(NamedTuple):
    """Speech and noise masks with values in [0, 1].

    Arrays are (frames, bins) for a fused mask or (channels, frames, bins)
    for per-channel masks.
    """

    speech: np.ndarray
    noise: np.ndarray


def local_snr_db(clean, noise):
    """Per-bin SNR in dB; |N|^2 = 0 maps to +inf, both zero to -inf."""
    px = np.abs(np.asarray(clean)) ** 2
    pn = np.abs(np.asarray(noise)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = 10.0 * np.log10(px / pn)
    snr[(pn == 0) & (px > 0)] = np.inf
    snr[(pn == 0) & (px == 0)] = -np.inf
    return snr


def oracle_masks(clean, noise, lc_x=0.0, lc_n=-10.0):
    """Ideal binary masks from clean and noise spectrograms.

    The speech mask is 1 where the local SNR exceeds ``lc_x`` (strictly);
    the noise mask is 0 where it exceeds ``lc_n`` and 1 otherwise.
    """
    clean = np.asarray(clean)
    noise = np.asarray(noise)
    if clean.shape != noise.shape:
        raise ValueError(f"shape mismatch: clean {clean.shape} vs noise {noise.shape}")
    if lc_x < lc_n:
        raise ValueError(f"lc_x ({lc_x}) must be >= lc_n ({lc_n})")
    snr = local_snr_db(clean, noise)
    speech = (snr > lc_x).astype(float)
    noise_mask = (~(snr > lc_n)).astype(float)
    return MaskPair(speech, noise_mask)


def median_fuse(masks):
    """Per-bin median across channels (axis 0), speech and noise separately.

    An even channel count uses the mean of the two middle values.
    """
    speech = np.asarray(masks.speech, dtype=float)
    noise = np.asarray(masks.noise, dtype=float)
    if speech.ndim != 3 or speech.shape[0] == 0:
        raise ValueError("expected per-channel masks of shape (channels, frames, bins)")
    if speech.shape != noise.shape:
        raise ValueError(f"speech/noise mask shapes differ: {speech.shape} vs {noise.shape}")
    return MaskPair(np.median(speech, axis=0), np.median(noise, axis=0))


def write_mask_file(path, mask, quantity):
    """Write one mask tensor in the length-prefixed JSON + float32 format.

    Layout: a 4-byte little-endian unsigned header length, the UTF-8 JSON
    header ``{"version", "channels", "frames", "bins", "quantity", "layout"}``,
    then ``channels * frames * bins`` little-endian float32 values with bins
    varying fastest, then frames, then channels.
    """
    if quantity not in ("speech", "noise"):
        raise ValueError(f"quantity must be 'speech' or 'noise', got {quantity!r}")
    data = np.asarray(mask, dtype="<f4")
    if data.ndim == 2:
        data = data[None]
    if data.ndim != 3:
        raise ValueError(f"mask must be 2-D or 3-D, got shape {data.shape}")
    header = {
        "version": MASK_FORMAT_VERSION,
        "channels": data.shape[0],
        "frames": data.shape[1],
        "bins": data.shape[2],
        "quantity": quantity,
        "layout": "frame-major",
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        fh.write(np.ascontiguousarray(data).tobytes())


def read_mask_file(path):
    """Read a mask file; returns (header dict, float array channels x frames x bins)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise ValueError(f"{path}: truncated mask file")
    (size,) = struct.unpack("<I", blob[:4])
    try:
        header = json.loads(blob[4:4 + size].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ValueError(f"{path}: unreadable mask header ({err})") from None
    for key in ("channels", "frames", "bins", "quantity", "layout"):
        if key not in header:
            raise ValueError(f"{path}: mask header lacks {key!r}")
    if header["layout"] != "frame-major":
        raise ValueError(f"{path}: unsupported layout {header['layout']!r}")
    shape = (int(header["channels"]), int(header["frames"]), int(header["bins"]))
    payload = blob[4 + size:]
    expected = 4 * shape[0] * shape[1] * shape[2]
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload has {len(payload)} bytes, header dimensions "
            f"{shape} require {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(float)
    if not np.all((data >= 0) & (data <= 1)):
        raise ValueError(f"{path}: mask values outside [0, 1]")
    return header, data
