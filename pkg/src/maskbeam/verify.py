"""Synthetic self-check: closed-form filter properties on oracle scene statistics."""

import numpy as np
import scipy.linalg

from .filters import (
    CATALOGUE,
    compute_weights,
    lambda_eig,
    output_snr,
    r1mwf,
    rank1_reconstruct,
    residual_noise_power,
    sdw_mwf_direct,
)
from .scenes import NOISE_KINDS, generate_scene, oracle_covariances

__all__ = ["CHECKS", "run_checks"]

# name -> tolerance
CHECKS = {
    "residual_noise_gev": 1e-8,
    "residual_noise_mug": 1e-8,
    "closed_form_residual": 1e-10,
    "distortionless_mu0": 1e-10,
    "woodbury": 1e-8,
    "gev_max_snr_db": 1e-6,
    "gev_dominance_db": 1e-9,
    "collinearity": 1e-8,
    "reconstruction": 1e-10,
}

R1MWF_FIXED = ("r1mwf-0", "r1mwf-1", "r1mwf-5", "r1mwf-10", "r1mwf-mug")


def _scene_errors(scene, cov):
    xx, nn, g = cov.xx, cov.nn, scene.steering
    err = {}
    w = {n: compute_weights(n, xx, nn).weights for n in CATALOGUE}
    err["residual_noise_gev"] = np.abs(residual_noise_power(w["gev"], nn) - 1).max()
    err["residual_noise_mug"] = np.abs(residual_noise_power(w["r1mwf-mug"], nn) - 1).max()
    lam = lambda_eig(xx, nn)
    phi = np.real(xx[:, 0, 0])
    closed = woodbury = 0.0
    for mu in (0.0, 1.0, 5.0, 10.0):
        h = r1mwf(xx, nn, mu)
        closed = max(closed, np.abs(residual_noise_power(h, nn) - phi * lam / (mu + lam) ** 2).max())
        woodbury = max(woodbury, np.abs(h - sdw_mwf_direct(xx, nn, mu)).max())
    err["closed_form_residual"] = closed
    err["woodbury"] = woodbury
    h0 = w["r1mwf-0"]
    err["distortionless_mu0"] = np.abs(np.sum(np.conj(h0) * g, -1) - g[:, 0]).max()
    top = np.array([scipy.linalg.eigh(a, b, eigvals_only=True)[-1] for a, b in zip(xx, nn)])
    best = output_snr(w["gev"], xx, nn)
    err["gev_max_snr_db"] = np.abs(best - 10 * np.log10(top)).max()
    err["gev_dominance_db"] = max(0.0, max((output_snr(h, xx, nn) - best).max() for h in w.values()))
    col = 0.0
    for i, a in enumerate(R1MWF_FIXED):
        for b in R1MWF_FIXED[i + 1:]:
            ha, hb = w[a], w[b]
            c = np.abs(np.sum(np.conj(ha) * hb, -1)) / (np.linalg.norm(ha, axis=-1) * np.linalg.norm(hb, axis=-1))
            col = max(col, np.abs(c - 1).max())
    err["collinearity"] = col
    err["reconstruction"] = max(np.abs(rank1_reconstruct(xx, nn, m).phi_r1 - xx).max() for m in ("evd", "gevd"))
    return err


def run_checks(scenes=20, bins=513, seed=0):
    """Worst error per check over ``scenes`` oracle scenes cycling M in {2, 4, 6}.

    Returns ``{name: {"error", "tolerance", "passed"}}``.
    """
    worst = dict.fromkeys(CHECKS, 0.0)
    for i in range(scenes):
        scene = generate_scene(channels=(2, 4, 6)[i % 3], bins=bins, frames=8,
                               noise_kind=NOISE_KINDS[(i // 3) % 3], seed=seed + i)
        for name, e in _scene_errors(scene, oracle_covariances(scene)).items():
            worst[name] = max(worst[name], float(e))
    return {n: {"error": worst[n], "tolerance": tol, "passed": worst[n] <= tol} for n, tol in CHECKS.items()}
