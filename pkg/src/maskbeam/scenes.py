"""Synthetic narrowband scenes with exact ground truth.

Scenes are generated directly in the STFT domain under the narrowband model
x(l, k) = g(k) S(l, k), so every closed-form filter property can be checked
against known statistics.  Randomness comes from :class:`Lcg64`, a documented
64-bit linear congruential generator, so a scene is reproducible from its seed
and parameters in any language.

Draw order for a scene, all from one generator stream (complex normals
unless stated otherwise):

1. steering vectors, ``bins * channels`` values (``random`` geometry), or
   one uniform source angle (``ula``), or ``channels`` uniforms (``gain``);
2. interferer steering, ``bins * channels`` values (``random``/``gain``) or
   one uniform angle (``ula``);
3. speech activity, ``frames`` real normals;
4. speech source coefficients, ``frames * bins`` values (row-major);
5. noise innovations, ``frames * bins * channels`` values (row-major).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import hermitize
from .stats import CovariancePair
from .stft import StftConfig, synthesize

__all__ = [
    "Lcg64",
    "SyntheticScene",
    "generate_scene",
    "oracle_covariances",
    "render_stems",
    "NOISE_KINDS",
    "GEOMETRIES",
]

NOISE_KINDS = ("diffuse", "directional", "mixed")
GEOMETRIES = ("random", "ula", "gain")
SPEED_OF_SOUND = 343.0
ULA_SPACING = 0.04
ULA_DIFFUSE_LOADING = 0.05
DIRECTIONAL_LOADING = 0.01
ACTIVITY_CORRELATION = 0.9


class Lcg64:
    """x <- a x + c (mod 2**64) with Knuth's MMIX constants.

    Uniforms use the top 53 bits, ``(x >> 11) * 2**-53``, in [0, 1).
    Normals use Box-Muller on consecutive uniform pairs (u1, u2):
    ``r = sqrt(-2 ln(1 - u1))``, giving ``r cos(2 pi u2)`` and
    ``r sin(2 pi u2)``.  A circular complex normal with unit variance is
    ``(r cos + 1j r sin) / sqrt(2)`` from one pair.
    """

    MULTIPLIER = 6364136223846793005
    INCREMENT = 1442695040888963407
    BLOCK = 1 << 14

    _jump = None

    def __init__(self, seed):
        self.state = int(seed) % (1 << 64)
        if Lcg64._jump is None:
            Lcg64._jump = self._jump_tables()
        self._mult, self._inc = Lcg64._jump

    @classmethod
    def _jump_tables(cls):
        # step j of a block: x_j = mult[j] * x_0 + inc[j]
        mult = np.empty(cls.BLOCK, dtype=np.uint64)
        inc = np.empty(cls.BLOCK, dtype=np.uint64)
        a, c = 1, 0
        mask = (1 << 64) - 1
        for j in range(cls.BLOCK):
            a = (a * cls.MULTIPLIER) & mask
            c = (c * cls.MULTIPLIER + cls.INCREMENT) & mask
            mult[j], inc[j] = a, c
        return mult, inc

    def next_raw(self, count):
        """The next ``count`` states as uint64."""
        out = np.empty(count, dtype=np.uint64)
        pos = 0
        while pos < count:
            take = min(self.BLOCK, count - pos)
            x = np.uint64(self.state)
            chunk = self._mult[:take] * x + self._inc[:take]
            out[pos:pos + take] = chunk
            self.state = int(chunk[-1])
            pos += take
        return out

    def uniform(self, count):
        return (self.next_raw(count) >> np.uint64(11)).astype(float) * 2.0 ** -53

    def _pairs(self, count):
        u = self.uniform(2 * count).reshape(count, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        return r * np.cos(theta), r * np.sin(theta)

    def normal(self, count):
        c, s = self._pairs((count + 1) // 2)
        return np.column_stack([c, s]).reshape(-1)[:count]

    def complex_normal(self, count):
        c, s = self._pairs(count)
        return (c + 1j * s) / np.sqrt(2.0)


@dataclass
class SyntheticScene:
    """Ground truth and STFT-domain stems of a generated scene.

    Shapes: ``steering`` (bins, M), ``speech_psd`` (frames, bins),
    ``noise_cov`` (bins, M, M), ``clean``/``noise`` (M, frames, bins).
    """

    steering: np.ndarray
    speech_psd: np.ndarray
    noise_cov: np.ndarray
    clean: np.ndarray
    noise: np.ndarray
    seed: int
    params: dict = field(default_factory=dict)

    @property
    def mixture(self):
        return self.clean + self.noise

    @property
    def channels(self):
        return self.steering.shape[1]

    def manifest(self):
        return {"seed": self.seed, **self.params}


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _plane_wave(freqs, channels, angle_deg):
    delays = np.arange(channels) * ULA_SPACING * np.cos(np.deg2rad(angle_deg)) / SPEED_OF_SOUND
    return np.exp(-2j * np.pi * freqs[:, None] * delays[None, :]) / np.sqrt(channels)


def _steering(rng, geometry, freqs, channels):
    bins = freqs.size
    if geometry == "random":
        return _unit(rng.complex_normal(bins * channels).reshape(bins, channels))
    if geometry == "ula":
        angle = 30.0 + 120.0 * rng.uniform(1)[0]
        return _plane_wave(freqs, channels, angle)
    gains = 0.5 + rng.uniform(channels)
    return np.broadcast_to(_unit(gains).astype(complex), (bins, channels)).copy()


def _spectral_shapes(freqs):
    speech = (1.0 + freqs / 800.0) ** -1.5
    noise = (1.0 + freqs / 2000.0) ** -1.0
    return speech, noise


def _spatial_coherence(kind, geometry, freqs, channels, interferer):
    bins = freqs.size
    eye = np.eye(channels)
    if geometry == "ula":
        pos = np.arange(channels) * ULA_SPACING
        dist = np.abs(pos[:, None] - pos[None, :])
        diffuse = np.sinc(2.0 * freqs[:, None, None] * dist / SPEED_OF_SOUND)
        diffuse = (1.0 - ULA_DIFFUSE_LOADING) * diffuse + ULA_DIFFUSE_LOADING * eye
    else:
        diffuse = np.broadcast_to(eye, (bins, channels, channels))
    diffuse = diffuse.astype(complex)
    outer = interferer[:, :, None] * np.conj(interferer[:, None, :])
    eps = DIRECTIONAL_LOADING * np.real(np.trace(outer, axis1=-2, axis2=-1)) / channels
    directional = outer + eps[:, None, None] * eye
    directional *= channels / np.real(np.trace(directional, axis1=-2, axis2=-1))[:, None, None]
    if kind == "diffuse":
        return diffuse
    if kind == "directional":
        return directional
    return 0.5 * diffuse + 0.5 * directional


def generate_scene(
    channels=6,
    bins=513,
    frames=200,
    snr_db=0.0,
    noise_kind="diffuse",
    seed=0,
    geometry="random",
    sample_rate=16000,
):
    """Draw a scene; the channel-0 broadband SNR of the stems equals ``snr_db``."""
    if channels < 1 or bins < 2 or frames < 1:
        raise ValueError(f"invalid dimensions M={channels}, K={bins}, L={frames}")
    if noise_kind not in NOISE_KINDS:
        raise ValueError(f"noise_kind must be one of {NOISE_KINDS}, got {noise_kind!r}")
    if geometry not in GEOMETRIES:
        raise ValueError(f"geometry must be one of {GEOMETRIES}, got {geometry!r}")
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")

    rng = Lcg64(seed)
    freqs = np.linspace(0.0, sample_rate / 2.0, bins)
    g = _steering(rng, geometry, freqs, channels)
    if geometry == "ula":
        interferer = _plane_wave(freqs, channels, 30.0 + 120.0 * rng.uniform(1)[0])
    else:
        interferer = _unit(rng.complex_normal(bins * channels).reshape(bins, channels))

    z = rng.normal(frames)
    u = np.empty(frames)
    state = 0.0
    innovation = np.sqrt(1.0 - ACTIVITY_CORRELATION ** 2)
    for l in range(frames):
        state = ACTIVITY_CORRELATION * state + innovation * z[l] if l else z[0]
        u[l] = state
    speech_shape, noise_shape = _spectral_shapes(freqs)
    psd = np.exp(u)[:, None] * speech_shape[None, :]
    source = np.sqrt(psd) * rng.complex_normal(frames * bins).reshape(frames, bins)
    clean = g.T[:, None, :] * source[None, :, :]

    cov = noise_shape[:, None, None] * _spatial_coherence(noise_kind, geometry, freqs, channels, interferer)
    cov = hermitize(cov)
    factor = np.linalg.cholesky(cov)
    innov = rng.complex_normal(frames * bins * channels).reshape(frames, bins, channels)
    noise = np.einsum("kmn,lkn->mlk", factor, innov)

    px = np.sum(np.abs(clean[0]) ** 2)
    pn = np.sum(np.abs(noise[0]) ** 2)
    scale = np.sqrt(px / (pn * 10.0 ** (snr_db / 10.0)))
    noise = noise * scale
    cov = cov * scale ** 2

    params = {
        "channels": channels,
        "bins": bins,
        "frames": frames,
        "snr_db": float(snr_db),
        "noise_kind": noise_kind,
        "geometry": geometry,
        "sample_rate": sample_rate,
    }
    return SyntheticScene(g, psd, cov, clean, noise, int(seed), params)


def oracle_covariances(scene):
    """Analytical statistics: phi_xx = mean_l(phi_ss) g g^H and the true phi_nn."""
    mean_psd = scene.speech_psd.mean(axis=0)
    g = scene.steering
    xx = mean_psd[:, None, None] * g[:, :, None] * np.conj(g[:, None, :])
    return CovariancePair(hermitize(xx), scene.noise_cov.copy(), "utterance")


def render_stems(scene, cfg=None):
    """Time-domain clean and noise stems, each (M, samples).

    Noise is rescaled after synthesis so the channel-0 SNR of the waveforms
    equals the scene's ``snr_db`` exactly.
    """
    if cfg is None:
        n = 2 * (scene.steering.shape[0] - 1)
        cfg = StftConfig(fft_size=n, hop=n // 4,
                         sample_rate=scene.params.get("sample_rate", 16000))
    clean = synthesize(scene.clean, cfg)
    noise = synthesize(scene.noise, cfg)
    px = np.sum(clean[0] ** 2)
    pn = np.sum(noise[0] ** 2)
    if pn > 0:
        noise = noise * np.sqrt(px / (pn * 10.0 ** (scene.params["snr_db"] / 10.0)))
    return clean, noise


def dumps_manifest(scene, **extra):
    return json.dumps({**scene.manifest(), **extra}, indent=2, sort_keys=True)
