"""Evaluation metrics: log-spectral distortion, cepstral features and feature variance."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.fft import dct
from sklearn.cluster import KMeans

from .stft import StftConfig, analyze

__all__ = [
    "SdScore",
    "FeatureMatrix",
    "FvScore",
    "erb_weights",
    "sd_metric",
    "mel_filterbank",
    "cepstral_features",
    "fv_metric",
    "pseudo_states",
]

SILENCE_FLOOR = 1e-6
LOG_RATIO_LIMIT_DB = 60.0
LOG_FLOOR = 1e-10
MEL_BANDS = 26
CEPSTRA = 13


@dataclass
class SdScore:
    per_frame: np.ndarray
    mean: float
    frames_used: int


@dataclass
class FeatureMatrix:
    features: np.ndarray
    state_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise ValueError(f"features must be (frames, D), got {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if self.state_labels is not None:
            self.state_labels = np.asarray(self.state_labels, dtype=int)
            if self.state_labels.shape != (self.features.shape[0],):
                raise ValueError("state_labels must have one label per frame")

    def with_labels(self, labels):
        return FeatureMatrix(self.features, labels)


@dataclass
class FvScore:
    percentage: float
    # (state, count, baseline variance, test variance)
    per_state: List[Tuple[int, int, float, float]] = field(default_factory=list)


def erb_bandwidth(freq_hz):
    return 24.7 * (4.37 * np.asarray(freq_hz) / 1000.0 + 1.0)


def erb_weights(bins, sample_rate=16000):
    """Per-bin weights 1/ERB(f), normalized to sum to one."""
    freqs = np.linspace(0.0, sample_rate / 2.0, bins)
    w = 1.0 / erb_bandwidth(freqs)
    return w / w.sum()


def sd_metric(processed, clean, sample_rate=16000):
    """Frequency-weighted log-spectral distortion in dB.

    Per frame, sqrt(sum_k w(k) (10 log10(|P|^2 / |C|^2))^2) with ERB weights
    ``w``.  Log ratios are clipped to +-60 dB and frames whose clean power is
    below 1e-6 of the loudest frame are skipped.
    """
    P = np.asarray(processed)
    C = np.asarray(clean)
    if P.shape != C.shape or P.ndim != 2:
        raise ValueError(f"expected matching (frames, bins) spectrograms, got {P.shape} and {C.shape}")
    po = np.abs(P) ** 2
    pi = np.abs(C) ** 2
    frame_power = pi.sum(axis=1)
    if frame_power.size == 0 or frame_power.max() <= 0:
        raise ValueError("all frames are silent")
    active = frame_power >= SILENCE_FLOOR * frame_power.max()
    tiny = np.finfo(float).tiny
    ratio = 10.0 * (np.log10(np.maximum(po, tiny)) - np.log10(np.maximum(pi, tiny)))
    ratio = np.clip(ratio, -LOG_RATIO_LIMIT_DB, LOG_RATIO_LIMIT_DB)
    w = erb_weights(P.shape[1], sample_rate)
    per_frame = np.sqrt(np.sum(w * ratio[active] ** 2, axis=1))
    return SdScore(per_frame, float(per_frame.mean()), int(active.sum()))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(cfg=StftConfig(), bands=MEL_BANDS):
    """Triangular mel filters over the one-sided bins, each summing to one."""
    freqs = cfg.frequencies()
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(cfg.sample_rate / 2.0), bands + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None] - lo) / (mid - lo)
    falling = (hi - freqs[None]) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    sums = fb.sum(axis=1, keepdims=True)
    if np.any(sums == 0):
        raise ValueError(f"fft_size {cfg.fft_size} too small for {bands} mel bands")
    return fb / sums


def cepstral_features(signal, cfg=StftConfig(), bands=MEL_BANDS, coefficients=CEPSTRA):
    """Mel-cepstral features, (frames, coefficients).

    Power spectra from :func:`analyze`, a ``bands``-band mel filterbank, log
    with a 1e-10 floor, orthonormal DCT-II, first ``coefficients`` values.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("cepstral_features expects a single-channel signal")
    power = np.abs(analyze(x, cfg)) ** 2
    energies = power @ mel_filterbank(cfg, bands).T
    logmel = np.log(np.maximum(energies, LOG_FLOOR))
    return FeatureMatrix(dct(logmel, type=2, norm="ortho", axis=-1)[:, :coefficients])


def _state_variances(features, labels, states):
    out = {}
    for s in states:
        rows = features[labels == s]
        out[s] = float(np.mean(np.var(rows, axis=0)))
    return out


def fv_metric(test, baseline, counts="test"):
    """Occurrence-weighted percentage of states whose feature variance exceeds the baseline.

    V(j) is the mean over feature dimensions of the per-state variance.
    Only states labelled in both inputs count; ``c_j`` comes from the test
    labels by default (``counts="baseline"`` uses the baseline labels).
    """
    if test.state_labels is None or baseline.state_labels is None:
        raise ValueError("fv_metric needs state labels on both feature matrices")
    if counts not in ("test", "baseline"):
        raise ValueError(f"counts must be 'test' or 'baseline', got {counts!r}")
    shared = np.intersect1d(np.unique(test.state_labels), np.unique(baseline.state_labels))
    if shared.size == 0:
        raise ValueError("test and baseline share no states")
    v_test = _state_variances(test.features, test.state_labels, shared)
    v_base = _state_variances(baseline.features, baseline.state_labels, shared)
    source = test.state_labels if counts == "test" else baseline.state_labels
    per_state = []
    hit = total = 0
    for s in shared:
        c = int(np.sum(source == s))
        per_state.append((int(s), c, v_base[s], v_test[s]))
        total += c
        if v_test[s] > v_base[s]:
            hit += c
    return FvScore(100.0 * hit / total, per_state)


def pseudo_states(baseline, states, seed=0):
    """Cluster baseline feature frames into ``states`` labels with k-means.

    Frames are clustered in lexicographic order and clusters are numbered by
    their sorted centroids, so labels follow the frames under any
    permutation of the input.
    """
    X = baseline.features if isinstance(baseline, FeatureMatrix) else np.asarray(baseline, float)
    frames = X.shape[0]
    if states < 1 or frames < states:
        raise ValueError(f"need at least {states} frames, got {frames}")
    if states == 1:
        return np.zeros(frames, dtype=int)
    if np.all(X == X[0]):
        raise ValueError("all feature vectors are identical; cannot form states")
    order = np.lexsort(X.T[::-1])
    km = KMeans(n_clusters=states, random_state=seed, n_init=10).fit(X[order])
    rank = np.lexsort(km.cluster_centers_.T[::-1])
    relabel = np.empty(states, dtype=int)
    relabel[rank] = np.arange(states)
    labels = np.empty(frames, dtype=int)
    labels[order] = relabel[km.labels_]
    return labels
