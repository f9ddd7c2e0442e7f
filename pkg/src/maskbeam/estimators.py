"""scikit-learn style wrappers around the STFT, beamformer and feature code."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .filters import CATALOGUE, PARAMETRIC, compute_weights, output_snr, parse_variant, residual_noise_power
from .metrics import CEPSTRA, MEL_BANDS, cepstral_features
from .stats import covariance_recursive, covariance_utterance, select_reference
from .stft import StftConfig, analyze, apply_weights, synthesize
from .validation import check_masks, check_reference, check_spectrogram

__all__ = ["StftTransformer", "MaskBeamformer", "CepstralFeatures"]


class StftTransformer(TransformerMixin, BaseEstimator):
    """Multichannel STFT as a transformer; ``inverse_transform`` resynthesizes."""

    def __init__(self, fft_size=1024, hop=256, sample_rate=16000):
        self.fft_size = fft_size
        self.hop = hop
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        self.config_ = StftConfig(self.fft_size, self.hop, self.sample_rate)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        return analyze(X, self.config_)

    def inverse_transform(self, X):
        check_is_fitted(self, "config_")
        return synthesize(X, self.config_)


class MaskBeamformer(TransformerMixin, BaseEstimator):
    """Mask-driven beamformer: estimate statistics in ``fit``, filter in ``transform``.

    Parameters
    ----------
    filter : str
        A catalogue variant (``maskbeam.filters.CATALOGUE``) or one of the
        parametric names ``"r1mwf"`` / ``"sdw-mwf"`` that take ``mu``.
    reference : "auto" or int
        Reference channel; ``"auto"`` picks the best-correlated channel.
    statistics : {"utterance", "recursive"}
        Whole-utterance averages (one filter per bin) or recursive smoothing
        (one filter per frame and bin).
    alpha : float
        Forgetting factor for recursive statistics.
    normalize : bool
        Divide utterance statistics by the mask sum instead of the frame count.
    mu : float, optional
        Trade-off for the parametric variants and ``"vs"``.

    Attributes
    ----------
    covariances_ : CovariancePair
    reference_ : int
    reference_scores_ : ndarray or None
    weights_ : BeamformerWeights
    """

    def __init__(self, filter="r1mwf-mug-gevd", reference="auto", statistics="utterance",
                 alpha=0.95, normalize=False, mu=None):
        self.filter = filter
        self.reference = reference
        self.statistics = statistics
        self.alpha = alpha
        self.normalize = normalize
        self.mu = mu

    def _validate_params(self):
        name = str(self.filter).lower()
        if name not in CATALOGUE and name not in PARAMETRIC:
            parse_variant(name)
        if self.statistics not in ("utterance", "recursive"):
            raise ValueError(f"statistics must be 'utterance' or 'recursive', got {self.statistics!r}")
        return name

    def fit(self, X, masks):
        """Estimate covariances from spectrogram ``X`` (M, L, K) and ``masks``.

        ``masks`` is a :class:`~maskbeam.masks.MaskPair` of (L, K) arrays, or
        of (M, L, K) per-channel arrays which are median-fused first.
        """
        name = self._validate_params()
        Y = check_spectrogram(X)
        m, frames, bins = Y.shape
        masks = check_masks(masks, frames, bins)
        ref = check_reference(self.reference, m)
        if ref == "auto":
            if m > 1:
                choice = select_reference(Y)
                ref, self.reference_scores_ = choice.channel, choice.scores
            else:
                ref, self.reference_scores_ = 0, None
        else:
            self.reference_scores_ = None
        if self.statistics == "utterance":
            cov = covariance_utterance(Y, masks, normalize=self.normalize)
        else:
            cov = covariance_recursive(Y, masks, alpha=self.alpha)
        self.n_channels_ = m
        self.n_frames_ = frames
        self.reference_ = int(ref)
        self.covariances_ = cov
        self.weights_ = compute_weights(name, cov.xx, cov.nn, ref=self.reference_, mu=self.mu)
        return self

    def transform(self, X):
        """Filter output h^H y as a (frames, bins) spectrogram."""
        check_is_fitted(self, "weights_")
        Y = check_spectrogram(X, channels=self.n_channels_)
        if self.weights_.weights.ndim == 3 and Y.shape[1] != self.n_frames_:
            raise ValueError("per-frame weights need the spectrogram they were fitted on")
        return apply_weights(Y, self.weights_.weights)

    def output_snr(self):
        """Per-bin output SNR (dB) on the fitted statistics."""
        check_is_fitted(self, "weights_")
        cov = self.covariances_
        return output_snr(self.weights_.weights, cov.xx, cov.nn)

    def residual_noise_power(self):
        check_is_fitted(self, "weights_")
        return residual_noise_power(self.weights_.weights, self.covariances_.nn)


class CepstralFeatures(TransformerMixin, BaseEstimator):
    """Stateless mel-cepstral feature extractor for single-channel signals."""

    def __init__(self, fft_size=1024, hop=256, sample_rate=16000, bands=MEL_BANDS,
                 coefficients=CEPSTRA):
        self.fft_size = fft_size
        self.hop = hop
        self.sample_rate = sample_rate
        self.bands = bands
        self.coefficients = coefficients

    def fit(self, X=None, y=None):
        self.config_ = StftConfig(self.fft_size, self.hop, self.sample_rate)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        return cepstral_features(np.asarray(X, dtype=float), self.config_, self.bands,
                                 self.coefficients).features
