"""Mask-weighted spatial covariance estimation and reference-channel choice."""

from typing import NamedTuple

import numpy as np

from .masks import MaskPair

__all__ = [
    "CovariancePair",
    "ReferenceChoice",
    "covariance_utterance",
    "covariance_recursive",
    "select_reference",
]

RECURSIVE_INIT = 1e-10


class CovariancePair(NamedTuple):
    """Speech and noise covariances, (bins, M, M) or (frames, bins, M, M)."""

    xx: np.ndarray
    nn: np.ndarray
    mode: str = "utterance"


class ReferenceChoice(NamedTuple):
    channel: int
    scores: np.ndarray


def _check(spec, mask):
    Y = np.asarray(spec)
    if Y.ndim != 3:
        raise ValueError(f"spectrogram must be (channels, frames, bins), got {Y.shape}")
    speech = np.asarray(mask.speech, dtype=float)
    noise = np.asarray(mask.noise, dtype=float)
    if speech.shape != Y.shape[1:] or noise.shape != Y.shape[1:]:
        raise ValueError(
            f"mask shapes {speech.shape}/{noise.shape} do not match "
            f"spectrogram frames x bins {Y.shape[1:]}"
        )
    return Y, speech, noise


def covariance_utterance(spec, mask: MaskPair, normalize=False):
    """Time-invariant covariances averaged over the whole utterance.

    phi(k) = 1/L * sum_l mask(l, k) y(l, k) y(l, k)^H, with L the total frame
    count.  ``normalize=True`` divides by the per-bin mask sum instead.
    """
    Y, speech, noise = _check(spec, mask)
    frames = Y.shape[1]
    if frames == 0:
        raise ValueError("spectrogram has zero frames")

    def accumulate(weights):
        phi = np.einsum("lk,mlk,nlk->kmn", weights, Y, np.conj(Y))
        if normalize:
            total = weights.sum(axis=0)
            return phi / np.where(total > 0, total, 1.0)[:, None, None]
        return phi / frames

    return CovariancePair(accumulate(speech), accumulate(noise), "utterance")


def covariance_recursive(spec, mask: MaskPair, alpha=0.95, init=RECURSIVE_INIT):
    """Per-frame covariances by recursive smoothing.

    phi(l) = alpha * phi(l - 1) + (1 - alpha) * mask(l) y(l) y(l)^H, starting
    from ``init * I``.  Returns arrays of shape (frames, bins, M, M).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"forgetting factor must lie in (0, 1), got {alpha}")
    Y, speech, noise = _check(spec, mask)
    m, frames, bins = Y.shape
    yt = np.transpose(Y, (1, 2, 0))
    outer = yt[..., :, None] * np.conj(yt[..., None, :])

    def smooth(weights):
        out = np.empty((frames, bins, m, m), dtype=complex)
        state = np.broadcast_to(init * np.eye(m, dtype=complex), (bins, m, m)).copy()
        for l in range(frames):
            state = alpha * state + (1.0 - alpha) * weights[l, :, None, None] * outer[l]
            out[l] = state
        return out

    return CovariancePair(smooth(speech), smooth(noise), "recursive")


def select_reference(spec):
    """Pick the channel whose magnitude spectrogram correlates best with the rest.

    score(m) is the mean Pearson correlation between |Y_m| and |Y_m'| over
    m' != m, flattened over frames and bins.  Pairs involving a constant
    channel score -1.  Ties go to the lowest index.
    """
    Y = np.asarray(spec)
    if Y.ndim != 3 or Y.shape[0] < 2:
        raise ValueError("reference selection needs a (channels >= 2, frames, bins) spectrogram")
    mag = np.abs(Y).reshape(Y.shape[0], -1)
    centered = mag - mag.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered ** 2, axis=1))
    flat = norms <= 1e-12 * np.maximum(np.abs(mag).max(axis=1), 1e-300)
    safe = np.where(flat, 1.0, norms)
    unit = centered / safe[:, None]
    corr = unit @ unit.T
    bad = flat[:, None] | flat[None, :]
    corr[bad] = -1.0
    m = Y.shape[0]
    off = ~np.eye(m, dtype=bool)
    scores = np.array([corr[i, off[i]].mean() for i in range(m)])
    best = np.flatnonzero(scores >= scores.max() - 1e-12)[0]
    return ReferenceChoice(int(best), scores)
