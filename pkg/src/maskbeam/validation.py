"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np

from .masks import MaskPair, median_fuse

__all__ = ["check_spectrogram", "check_masks", "check_covariance", "check_reference"]


def check_spectrogram(spec, channels=None, name="spectrogram"):
    """Return ``spec`` as a finite complex (channels, frames, bins) array."""
    Y = np.asarray(spec)
    if Y.ndim != 3:
        raise ValueError(f"{name} must have shape (channels, frames, bins), got {Y.shape}")
    if min(Y.shape) == 0:
        raise ValueError(f"{name} is empty: shape {Y.shape}")
    if channels is not None and Y.shape[0] != channels:
        raise ValueError(f"{name} has {Y.shape[0]} channels, expected {channels}")
    if not np.all(np.isfinite(Y)):
        raise ValueError(f"{name} contains NaN or Inf")
    return Y.astype(complex, copy=False)


def check_masks(masks, frames, bins):
    """Validate masks against a spectrogram's (frames, bins) and fuse channels.

    Accepts a :class:`MaskPair` (or 2-tuple) of (frames, bins) arrays, or of
    (channels, frames, bins) arrays which are median-fused.
    """
    if not isinstance(masks, MaskPair):
        try:
            speech, noise = masks
        except (TypeError, ValueError):
            raise TypeError("masks must be a MaskPair or a (speech, noise) pair") from None
        masks = MaskPair(speech, noise)
    speech = np.asarray(masks.speech, dtype=float)
    noise = np.asarray(masks.noise, dtype=float)
    if speech.shape != noise.shape:
        raise ValueError(f"speech mask {speech.shape} and noise mask {noise.shape} differ")
    if speech.ndim == 3:
        speech, noise = median_fuse(MaskPair(speech, noise))
    if speech.shape != (frames, bins):
        raise ValueError(
            f"mask dimensions {speech.shape} do not match spectrogram "
            f"frames x bins {(frames, bins)}"
        )
    for label, m in (("speech", speech), ("noise", noise)):
        if not np.all((m >= 0) & (m <= 1)):
            raise ValueError(f"{label} mask has values outside [0, 1]")
    return MaskPair(speech, noise)


def check_covariance(phi, name="covariance", tol=1e-10):
    """Return ``phi`` as complex (..., M, M) after checking Hermitian symmetry."""
    A = np.asarray(phi, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"{name} must have shape (..., M, M), got {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    asym = np.max(np.abs(A - np.conj(np.swapaxes(A, -1, -2)))) if A.size else 0.0
    if asym > tol * max(scale, 1e-300):
        raise ValueError(f"{name} is not Hermitian (asymmetry {asym:.3e})")
    return A


def check_reference(reference, channels):
    """``"auto"`` passes through; otherwise an in-range channel index."""
    if isinstance(reference, str):
        if reference == "auto":
            return reference
        try:
            reference = int(reference)
        except ValueError:
            raise ValueError(f"reference must be 'auto' or a channel index, got {reference!r}") from None
    reference = int(reference)
    if not 0 <= reference < channels:
        raise ValueError(f"reference channel {reference} outside [0, {channels})")
    return reference
