"""Beamformer catalogue built on speech/noise covariance pairs.

All functions take covariances of shape (..., M, M) and return weight vectors
of shape (..., M), one per batch entry (frequency bin, or frame and bin).  A
filter ``h`` is applied as ``h^H y``.

The rank-1 MWF family shares the projection direction
``inv(phi_nn) @ phi_xx @ u_ref`` and differs only in the real spectral gain
``1 / (mu + lambda)`` with ``lambda = tr(inv(phi_nn) @ phi_xx)``.  The
``"mug"`` trade-off picks ``mu`` per bin so that the residual noise power
``h^H phi_nn h`` equals one, the same normalization the GEV beamformer has.
"""

import re
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .exceptions import DegenerateStatisticsError, SingularMatrixError
from .linalg import generalized_evd, hermitian_evd, hermitize, invert, regularize, trace_product

__all__ = [
    "MU_G",
    "CATALOGUE",
    "PARAMETRIC",
    "BeamformerWeights",
    "Rank1Speech",
    "lambda_eig",
    "mu_g",
    "r1mwf",
    "sdw_mwf_direct",
    "gev",
    "ban_gain",
    "gev_ban",
    "mvdr",
    "vs_filter",
    "rank1_reconstruct",
    "r1mwf_reconstructed",
    "residual_noise_power",
    "output_snr",
    "compute_weights",
    "parse_variant",
]

MU_G = "mug"
GAIN_GUARD = 1e-12
BAN_GUARD = 1e-15
NEGATIVE_LAMBDA_TOL = 1e-10

CATALOGUE = (
    "mvdr",
    "mwf",
    "gev",
    "gev-ban",
    "vs",
    "r1mwf-0",
    "r1mwf-1",
    "r1mwf-5",
    "r1mwf-10",
    "r1mwf-mug",
    "r1mwf-1-evd",
    "r1mwf-1-gevd",
    "r1mwf-mug-evd",
    "r1mwf-mug-gevd",
)
# variants whose trade-off comes from the caller's ``mu``
PARAMETRIC = ("r1mwf", "sdw-mwf")

Mu = Union[float, str, np.ndarray]


@dataclass(frozen=True)
class BeamformerWeights:
    variant: str
    weights: np.ndarray
    reference: int
    mu: Optional[Mu] = None


class Rank1Speech(NamedTuple):
    a: np.ndarray
    sigma: np.ndarray
    phi_r1: np.ndarray


def _bad_bins(mask):
    mask = np.asarray(mask)
    return np.flatnonzero(mask.reshape(-1))


def _raise_degenerate(what, mask):
    bins = _bad_bins(mask)
    shown = ", ".join(str(b) for b in bins[:8]) + (" ..." if bins.size > 8 else "")
    raise DegenerateStatisticsError(f"{what} at bin(s) {shown}", bins=bins)


def _lambda_from_inverse(inv_nn, phi_xx):
    lam = np.real(trace_product(inv_nn, phi_xx))
    if np.any(lam < -NEGATIVE_LAMBDA_TOL):
        _raise_degenerate("negative tr(inv(phi_nn) phi_xx); phi_xx is not PSD", lam < -NEGATIVE_LAMBDA_TOL)
    return np.maximum(lam, 0.0)


def lambda_eig(phi_xx, phi_nn):
    """tr(inv(phi_nn) phi_xx), the nonzero eigenvalue for rank-1 ``phi_xx``."""
    return _lambda_from_inverse(invert(phi_nn), hermitize(phi_xx))


def mu_g(phi_x1x1, lam):
    """Trade-off giving unit residual noise power: sqrt(phi_x1x1 * lam) - lam.

    The result is not clamped and may be negative.
    """
    phi = np.asarray(phi_x1x1, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(phi < 0) or np.any(lam < 0):
        raise ValueError("mu_g needs non-negative phi_x1x1 and lambda")
    return np.sqrt(phi * lam) - lam


def _resolve_mu(mu, phi_xx, lam, ref):
    if isinstance(mu, str):
        if mu != MU_G:
            raise ValueError(f"unknown trade-off rule {mu!r}")
        return mu_g(np.real(phi_xx[..., ref, ref]), lam)
    return np.asarray(mu, dtype=float)


def r1mwf(phi_xx, phi_nn, mu=1.0, ref=0):
    """Rank-1 MWF: inv(phi_nn) phi_xx u_ref / (mu + lambda).

    ``mu`` is a number, an array broadcastable to the batch, or ``"mug"``.

    Raises:
        DegenerateStatisticsError: where ``mu + lambda <= 1e-12``.
    """
    phi_xx = hermitize(phi_xx)
    inv_nn = invert(phi_nn)
    lam = _lambda_from_inverse(inv_nn, phi_xx)
    mu = _resolve_mu(mu, phi_xx, lam, ref)
    denom = mu + lam
    if np.any(denom <= GAIN_GUARD):
        _raise_degenerate("degenerate gain mu + lambda <= 1e-12", np.broadcast_to(denom <= GAIN_GUARD, lam.shape))
    return (inv_nn @ phi_xx[..., :, ref, None])[..., 0] / denom[..., None]


def sdw_mwf_direct(phi_xx, phi_nn, mu=1.0, ref=0):
    """SDW-MWF by a direct solve of (phi_xx + mu phi_nn) h = phi_xx u_ref.

    Where ``mu == 0`` the system is singular for rank-deficient ``phi_xx``;
    there the ``mu -> 0+`` limit is returned, i.e. the minimum-noise
    solution among all zero-distortion filters,
    ``inv(phi_nn) phi_xx pinv(phi_xx inv(phi_nn) phi_xx) phi_xx u_ref``.
    """
    phi_xx = hermitize(phi_xx)
    phi_nn = hermitize(phi_nn)
    if isinstance(mu, str):
        lam = np.real(np.trace(np.linalg.solve(phi_nn, phi_xx), axis1=-2, axis2=-1))
        mu = mu_g(np.real(phi_xx[..., ref, ref]), np.maximum(lam, 0.0))
    batch = phi_xx.shape[:-2]
    m = phi_xx.shape[-1]
    mu = np.broadcast_to(np.asarray(mu, dtype=float), batch)
    rhs = phi_xx[..., :, ref]
    h = np.empty(batch + (m,), dtype=complex)
    zero = mu == 0
    direct = ~zero
    if direct.any():
        system = phi_xx[direct] + mu[direct][:, None, None] * phi_nn[direct]
        try:
            h[direct] = np.linalg.solve(system, rhs[direct][..., None])[..., 0]
        except np.linalg.LinAlgError as err:
            raise SingularMatrixError(f"SDW-MWF system is singular: {err}") from None
    if zero.any():
        xx, nn = phi_xx[zero], phi_nn[zero]
        nn_xx = np.linalg.solve(nn, xx)
        gram = hermitize(xx @ nn_xx)
        core = np.linalg.pinv(gram, rcond=1e-10, hermitian=True)
        h[zero] = (nn_xx @ core @ xx[..., :, ref][..., None])[..., 0]
    return h


def gev(phi_xx, phi_nn):
    """Principal generalized eigenvector, scaled so h^H phi_nn h = 1."""
    return generalized_evd(phi_xx, phi_nn).vectors[..., :, 0]


def ban_gain(h, phi_nn):
    """Blind analytical normalization: sqrt(h^H phi_nn^2 h / M) / (h^H phi_nn h).

    Uses the diagonally loaded ``phi_nn`` that the GEV filter was normalized
    against, so a rank-deficient noise estimate gives a finite gain.
    """
    h = np.asarray(h, dtype=complex)
    phi_nn, _ = regularize(phi_nn)
    m = h.shape[-1]
    nh = phi_nn @ h[..., None]
    num = np.real(np.sum(np.conj(nh[..., 0]) * nh[..., 0], axis=-1))
    den = np.real(np.einsum("...i,...i->...", np.conj(h), nh[..., 0]))
    if np.any(den <= BAN_GUARD):
        _raise_degenerate("h^H phi_nn h <= 1e-15 in BAN", den <= BAN_GUARD)
    return np.sqrt(num / m) / den


def gev_ban(phi_xx, phi_nn):
    h = gev(phi_xx, phi_nn)
    return ban_gain(h, phi_nn)[..., None] * h


def mvdr(phi_xx, phi_nn):
    """MVDR toward the unit principal eigenvector ``a`` of ``phi_xx``.

    h = sqrt(a^H a) / (a^H inv(phi_nn) a) * inv(phi_nn) a, so h^H a = 1.
    """
    phi_xx = hermitize(phi_xx)
    zero = np.real(np.trace(phi_xx, axis1=-2, axis2=-1)) <= 0
    if zero.any():
        _raise_degenerate("zero speech covariance in MVDR", zero)
    a = hermitian_evd(phi_xx).vectors[..., :, 0]
    na = (invert(phi_nn) @ a[..., None])[..., 0]
    quad = np.real(np.einsum("...i,...i->...", np.conj(a), na))
    norm = np.sqrt(np.real(np.einsum("...i,...i->...", np.conj(a), a)))
    return (norm / quad)[..., None] * na


def vs_filter(phi_xx, phi_nn, mu=1.0, ref=0):
    """Variable-span filter of rank one: b b^H phi_xx u_ref / (mu + lambda_1).

    ``b`` is the phi_nn-normalized principal generalized eigenvector and
    ``lambda_1`` the largest generalized eigenvalue.
    """
    phi_xx = hermitize(phi_xx)
    values, B = generalized_evd(phi_xx, phi_nn)
    b = B[..., :, 0]
    lam1 = np.maximum(values[..., 0], 0.0)
    denom = np.asarray(mu, dtype=float) + lam1
    if np.any(denom <= GAIN_GUARD):
        _raise_degenerate("degenerate gain mu + lambda <= 1e-12", denom <= GAIN_GUARD)
    proj = np.einsum("...i,...i->...", np.conj(b), phi_xx[..., :, ref])
    return b * (proj / denom)[..., None]


def rank1_reconstruct(phi_xx, phi_nn=None, method="gevd"):
    """Rank-1 part sigma * a a^H of a speech covariance; the remainder is dropped.

    ``method="evd"`` takes ``a`` as the unit principal eigenvector of
    ``phi_xx``; ``"gevd"`` takes ``a = phi_nn b`` with ``b`` the principal
    generalized eigenvector.  ``sigma = tr(phi_xx) / tr(a a^H)`` keeps the
    trace.  ``phi_nn`` enters with the same diagonal loading the filters use,
    so ``inv(phi_nn) a`` stays parallel to ``b``.
    """
    phi_xx = hermitize(phi_xx)
    tr = np.real(np.trace(phi_xx, axis1=-2, axis2=-1))
    zero = tr <= 0
    if zero.any():
        _raise_degenerate("zero speech covariance in rank-1 reconstruction", zero)
    if method == "evd":
        a = hermitian_evd(phi_xx).vectors[..., :, 0]
    elif method == "gevd":
        if phi_nn is None:
            raise ValueError("gevd reconstruction needs phi_nn")
        phi_nn, _ = regularize(phi_nn)
        b = generalized_evd(phi_xx, phi_nn).vectors[..., :, 0]
        a = (phi_nn @ b[..., None])[..., 0]
    else:
        raise ValueError(f"method must be 'evd' or 'gevd', got {method!r}")
    sigma = tr / np.real(np.sum(np.abs(a) ** 2, axis=-1))
    phi_r1 = sigma[..., None, None] * a[..., :, None] * np.conj(a[..., None, :])
    return Rank1Speech(a, sigma, hermitize(phi_r1))


def r1mwf_reconstructed(phi_xx, phi_nn, mu=1.0, method="gevd", ref=0):
    """Rank-1 MWF on the reconstructed speech covariance.

    lambda and, for ``"mug"``, phi_x1x1 are both taken from the rank-1 part.
    """
    rec = rank1_reconstruct(phi_xx, phi_nn, method)
    return r1mwf(rec.phi_r1, phi_nn, mu, ref)


def residual_noise_power(h, phi_nn):
    """h^H phi_nn h."""
    h = np.asarray(h)
    return np.real(np.einsum("...i,...ij,...j->...", np.conj(h), phi_nn, h))


def output_snr(h, phi_xx, phi_nn):
    """Output SNR in dB, 10 log10(h^H phi_xx h / h^H phi_nn h)."""
    den = residual_noise_power(h, phi_nn)
    if np.any(den <= 0):
        raise ZeroDivisionError("h^H phi_nn h is zero")
    num = np.maximum(residual_noise_power(h, phi_xx), 0.0)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(num / den)


_VARIANT_RE = re.compile(r"^r1mwf-(?P<mu>mug|\d+(?:\.\d+)?)(?:-(?P<method>evd|gevd))?$")


def parse_variant(name):
    """Split a variant name into (family, mu, reconstruction method)."""
    name = name.lower()
    if name in ("mvdr", "mwf", "gev", "gev-ban", "vs", "r1mwf", "sdw-mwf"):
        return name, None, None
    match = _VARIANT_RE.match(name)
    if match is None:
        raise KeyError(f"unknown filter variant {name!r}")
    mu = match["mu"]
    return "r1mwf", (MU_G if mu == MU_G else float(mu)), match["method"]


def compute_weights(variant, phi_xx, phi_nn, ref=0, mu=None):
    """Weights for a catalogue (or parametric) variant name.

    ``mu`` is required by the parametric ``"r1mwf"`` and ``"sdw-mwf"``
    names and optionally overrides the trade-off of ``"vs"``.
    """
    family, fixed_mu, method = parse_variant(variant)
    if family == "mvdr":
        w, used = mvdr(phi_xx, phi_nn), None
    elif family == "mwf":
        w, used = sdw_mwf_direct(phi_xx, phi_nn, 1.0, ref), 1.0
    elif family == "sdw-mwf":
        used = 1.0 if mu is None else mu
        w = sdw_mwf_direct(phi_xx, phi_nn, used, ref)
    elif family == "gev":
        w, used = gev(phi_xx, phi_nn), None
    elif family == "gev-ban":
        w, used = gev_ban(phi_xx, phi_nn), None
    elif family == "vs":
        used = 1.0 if mu is None else mu
        w = vs_filter(phi_xx, phi_nn, used, ref)
    else:
        used = fixed_mu if fixed_mu is not None else (1.0 if mu is None else mu)
        if method is None:
            w = r1mwf(phi_xx, phi_nn, used, ref)
        else:
            w = r1mwf_reconstructed(phi_xx, phi_nn, used, method, ref)
    return BeamformerWeights(variant.lower(), w, int(ref), used)
