import numpy as np
import pytest
from numpy.testing import assert_allclose

from maskbeam.filters import lambda_eig
from maskbeam.scenes import Lcg64, dumps_manifest, generate_scene, oracle_covariances, render_stems
from maskbeam.stft import StftConfig

A = 6364136223846793005
C = 1442695040888963407
MASK = (1 << 64) - 1


def reference_lcg(seed, n):
    x, out = seed, []
    for _ in range(n):
        x = (A * x + C) & MASK
        out.append(x)
    return out


def test_lcg_matches_scalar_recurrence():
    rng = Lcg64(12345)
    first = rng.next_raw(5)
    more = rng.next_raw(Lcg64.BLOCK + 7)
    ref = reference_lcg(12345, 5 + Lcg64.BLOCK + 7)
    assert [int(v) for v in first] == ref[:5]
    assert [int(v) for v in more[-10:]] == ref[-10:]


def test_lcg_uniform_and_normal_formulas():
    u = Lcg64(0).uniform(1)[0]
    assert u == (C >> 11) * 2.0 ** -53
    raw = reference_lcg(7, 2)
    u1, u2 = [(r >> 11) * 2.0 ** -53 for r in raw]
    r = np.sqrt(-2 * np.log1p(-u1))
    z = Lcg64(7).complex_normal(1)[0]
    assert z == pytest.approx((r * np.cos(2 * np.pi * u2) + 1j * r * np.sin(2 * np.pi * u2)) / np.sqrt(2))
    n = Lcg64(7).normal(3)
    assert n[0] == pytest.approx(r * np.cos(2 * np.pi * u2))
    assert n[1] == pytest.approx(r * np.sin(2 * np.pi * u2))


def test_lcg_moments():
    z = Lcg64(3).complex_normal(200000)
    assert abs(np.mean(np.abs(z) ** 2) - 1) < 0.01
    assert abs(np.mean(z)) < 0.01


@pytest.mark.parametrize("kind", ["diffuse", "directional", "mixed"])
@pytest.mark.parametrize("geometry", ["random", "ula", "gain"])
def test_scene_snr_and_shapes(kind, geometry):
    s = generate_scene(channels=3, bins=33, frames=40, snr_db=-5, noise_kind=kind, seed=1, geometry=geometry)
    assert s.clean.shape == s.noise.shape == (3, 40, 33)
    snr = 10 * np.log10(np.sum(np.abs(s.clean[0]) ** 2) / np.sum(np.abs(s.noise[0]) ** 2))
    assert abs(snr + 5) < 0.1
    assert np.array_equal(s.mixture, s.clean + s.noise)
    ev = np.linalg.eigvalsh(s.noise_cov)
    assert ev.min() > 0


def test_scene_deterministic():
    a = generate_scene(channels=4, bins=17, frames=10, seed=99)
    b = generate_scene(channels=4, bins=17, frames=10, seed=99)
    c = generate_scene(channels=4, bins=17, frames=10, seed=98)
    assert np.array_equal(a.clean, b.clean) and np.array_equal(a.noise, b.noise)
    assert not np.array_equal(a.clean, c.clean)


def test_diffuse_sample_covariance_converges():
    s = generate_scene(channels=6, bins=9, frames=2000, noise_kind="diffuse", seed=5)
    sample = np.einsum("mlk,nlk->kmn", s.noise, np.conj(s.noise)) / 2000
    # whiten by the true covariance, average over bins
    L = np.linalg.cholesky(s.noise_cov)
    Li = np.linalg.inv(L)
    white = Li @ sample @ np.conj(np.swapaxes(Li, -1, -2))
    err = np.linalg.norm(white.mean(0) - np.eye(6)) / np.linalg.norm(np.eye(6))
    assert err < 0.05


def test_clean_sample_covariance_is_rank1():
    s = generate_scene(channels=4, bins=5, frames=1000, seed=2)
    sample = np.einsum("mlk,nlk->kmn", s.clean, np.conj(s.clean)) / 1000
    ev = np.linalg.eigvalsh(sample)
    assert np.all(ev[:, -2] < 0.05 * ev[:, -1])


def test_oracle_covariances_identities():
    s = generate_scene(channels=5, bins=33, frames=20, noise_kind="mixed", seed=8)
    cov = oracle_covariances(s)
    ev = np.linalg.eigvalsh(cov.xx)
    assert np.all(np.abs(ev[:, :-1]) < 1e-12 * ev[:, -1:])
    phi = s.speech_psd.mean(0)
    g = s.steering
    quad = np.real(np.einsum("ki,kij,kj->k", np.conj(g), np.linalg.inv(cov.nn), g))
    assert_allclose(lambda_eig(cov.xx, cov.nn), phi * quad, rtol=1e-10)
    tr = np.real(np.trace(cov.xx, axis1=-2, axis2=-1))
    assert_allclose(tr, phi * np.sum(np.abs(g) ** 2, -1), rtol=1e-12)


def test_render_stems_time_domain_snr():
    s = generate_scene(channels=2, bins=513, frames=60, snr_db=5, seed=4)
    clean, noise = render_stems(s, StftConfig())
    assert clean.shape == (2, 59 * 256 + 1024)
    assert abs(10 * np.log10(np.sum(clean[0] ** 2) / np.sum(noise[0] ** 2)) - 5) < 0.1


def test_manifest_round_trip():
    s = generate_scene(channels=2, bins=9, frames=3, seed=11, noise_kind="directional")
    text = dumps_manifest(s, note="x")
    assert '"seed": 11' in text and '"noise_kind": "directional"' in text


def test_invalid_parameters():
    with pytest.raises(ValueError):
        generate_scene(channels=0)
    with pytest.raises(ValueError):
        generate_scene(bins=1)
    with pytest.raises(ValueError):
        generate_scene(noise_kind="pink")
    with pytest.raises(ValueError):
        generate_scene(geometry="circle")
