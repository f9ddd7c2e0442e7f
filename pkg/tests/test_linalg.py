import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from maskbeam.exceptions import SingularMatrixError
from maskbeam.linalg import (
    cholesky,
    generalized_evd,
    hermitian_evd,
    hermitize,
    invert,
    loading_level,
    normalize_phase,
    regularize,
    trace_product,
)

from conftest import crandn, random_hermitian, random_spd, rank1


def test_hermitize_makes_exact_real_diagonal(rng):
    a = crandn(rng, 5, 4, 4)
    h = hermitize(a)
    assert_allclose(h, np.conj(np.swapaxes(h, -1, -2)), rtol=0, atol=1e-15)
    assert np.all(np.imag(np.diagonal(h, axis1=-2, axis2=-1)) == 0)


def test_evd_identity():
    values, vectors = hermitian_evd(np.eye(2))
    assert_allclose(values, [1, 1])
    assert_allclose(np.conj(vectors.T) @ vectors, np.eye(2), atol=1e-12)


def test_evd_diagonal():
    values, vectors = hermitian_evd(np.diag([1.0, 3.0]).astype(complex))
    assert_allclose(values, [3, 1])
    assert_allclose(vectors, [[0, 1], [1, 0]], atol=1e-15)


def test_evd_random_reconstruction(rng):
    a = random_hermitian(rng, 6, (50,))
    values, V = hermitian_evd(a)
    recon = V @ (values[..., :, None] * np.conj(np.swapaxes(V, -1, -2)))
    err = np.linalg.norm(a - recon, axis=(-2, -1)) / np.linalg.norm(a, axis=(-2, -1))
    assert err.max() < 1e-9
    gram = np.conj(np.swapaxes(V, -1, -2)) @ V
    assert_allclose(gram, np.broadcast_to(np.eye(6), gram.shape), atol=1e-10)
    assert np.all(np.diff(values, axis=-1) <= 0)


def test_evd_matches_numpy_eigvalsh(rng):
    a = random_hermitian(rng, 8, (20,))
    values, _ = hermitian_evd(a)
    assert_allclose(values, np.linalg.eigvalsh(a)[..., ::-1], atol=1e-11)


def test_evd_eigenvalue_sum_equals_trace(rng):
    a = random_hermitian(rng, 16, (4,))
    values, _ = hermitian_evd(a)
    tr = np.real(np.trace(a, axis1=-2, axis2=-1))
    assert_allclose(values.sum(-1), tr, rtol=1e-9, atol=1e-12)


def test_phase_convention_largest_entry_real_positive(rng):
    _, V = hermitian_evd(random_spd(rng, 5, (10,)))
    idx = np.argmax(np.abs(V), axis=-2)
    top = np.take_along_axis(V, idx[..., None, :], axis=-2)[..., 0, :]
    assert np.all(np.real(top) > 0)
    assert_allclose(np.imag(top), 0, atol=1e-15)


def test_phase_normalization_idempotent(rng):
    v = crandn(rng, 3, 4, 4)
    once = normalize_phase(v)
    assert_allclose(normalize_phase(once), once, atol=1e-15)


def test_evd_deterministic_under_phase_of_input_vectors(rng):
    # same matrix twice gives bit-identical output
    a = random_hermitian(rng, 6)
    v1 = hermitian_evd(a).vectors
    v2 = hermitian_evd(a.copy()).vectors
    assert np.array_equal(v1, v2)


def test_gevd_identity_noise_reduces_to_evd(rng):
    a = random_spd(rng, 4, (6,))
    g = generalized_evd(a, np.broadcast_to(np.eye(4), a.shape))
    e = hermitian_evd(a)
    assert_allclose(g.values, e.values, atol=1e-12)
    assert_allclose(g.vectors, e.vectors, atol=1e-10)


def test_gevd_rank1_single_nonzero_value(rng):
    xx, _ = rank1(rng, 5, (30,))
    nn = random_spd(rng, 5, (30,))
    values, _ = generalized_evd(xx, nn)
    lam = np.real(trace_product(np.linalg.inv(nn), xx))
    assert_allclose(values[..., 0], lam, rtol=1e-8)
    assert np.all(np.abs(values[..., 1:]) < 1e-8 * values[..., :1])


def test_gevd_joint_diagonalization(rng):
    xx = random_spd(rng, 4, (100,))
    nn = random_spd(rng, 4, (100,))
    values, B = generalized_evd(xx, nn)
    Bh = np.conj(np.swapaxes(B, -1, -2))
    eye = np.broadcast_to(np.eye(4), nn.shape)
    assert np.linalg.norm(Bh @ nn @ B - eye, axis=(-2, -1)).max() < 1e-8
    D = Bh @ xx @ B
    off = D - np.einsum("...ii->...i", D)[..., None] * np.eye(4)
    assert np.linalg.norm(off, axis=(-2, -1)).max() < 1e-8
    assert_allclose(np.real(np.einsum("...ii->...i", D)), values, atol=1e-8)


def test_gevd_matches_scipy_eigh(rng):
    xx = random_spd(rng, 6)
    nn = random_spd(rng, 6)
    values, _ = generalized_evd(xx, nn)
    assert_allclose(values, scipy.linalg.eigh(xx, nn, eigvals_only=True)[::-1], rtol=1e-10)


def test_gevd_top_value_bounds_rayleigh_quotients(rng):
    xx = random_spd(rng, 4)
    nn = random_spd(rng, 4)
    top = generalized_evd(xx, nn).values[0]
    h = crandn(rng, 1000, 4)
    q = np.real(np.einsum("ni,ij,nj->n", np.conj(h), xx, h) / np.einsum("ni,ij,nj->n", np.conj(h), nn, h))
    assert q.max() <= top * (1 + 1e-12)
    # the principal vector itself attains it
    b = generalized_evd(xx, nn).vectors[:, 0]
    attained = np.real(np.conj(b) @ xx @ b) / np.real(np.conj(b) @ nn @ b)
    assert abs(attained - top) < 1e-6


def test_invert_examples():
    assert_allclose(invert(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    assert_allclose(invert(np.eye(3)), np.eye(3))


def test_invert_random_residual(rng):
    a = random_spd(rng, 7, (40,))
    prod = a @ invert(a)
    assert np.abs(prod - np.eye(7)).max() < 1e-9


def test_trace_product_examples(rng):
    assert trace_product(np.eye(3), np.eye(3)) == pytest.approx(3)
    assert trace_product(invert(np.diag([2.0, 2.0])), np.ones((2, 2))) == pytest.approx(1)
    a = crandn(rng, 4, 4)
    b = crandn(rng, 4, 4)
    brute = sum(a[i, j] * b[j, i] for i in range(4) for j in range(4))
    assert abs(trace_product(a, b) - brute) < 1e-12


def test_cholesky_untouched_when_well_conditioned(rng):
    a = random_spd(rng, 5, (8,))
    L, loaded = cholesky(a)
    assert not loaded.any()
    assert_allclose(L, np.linalg.cholesky(a), atol=1e-12)


def test_cholesky_loads_singular_matrices(rng):
    g = crandn(rng, 4)
    singular = np.outer(g, np.conj(g))
    L, loaded = cholesky(np.stack([singular, np.zeros((4, 4)), np.eye(4)]))
    assert loaded.tolist() == [True, True, False]
    assert np.all(np.isfinite(L))
    delta = loading_level(singular)
    assert_allclose(L[0] @ np.conj(L[0].T), singular + delta * np.eye(4), atol=1e-12)
    assert_allclose(L[1], np.sqrt(1e-30) * np.eye(4))


def test_regularize_matches_cholesky_choice(rng):
    a = np.stack([random_spd(rng, 3), np.zeros((3, 3), complex)])
    eff, loaded = regularize(a)
    assert_allclose(eff[0], hermitize(a[0]))
    assert_allclose(eff[1], 1e-30 * np.eye(3))
    assert loaded.tolist() == [False, True]


def test_cholesky_rejects_indefinite():
    with pytest.raises(SingularMatrixError) as info:
        cholesky(np.diag([1.0, -1.0]))
    assert info.value.index == 0
    assert info.value.pivot < 0


def test_rejects_non_square():
    with pytest.raises(ValueError):
        hermitian_evd(np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_gevd_property_random_pairs(m, seed):
    rng = np.random.default_rng(seed)
    xx = random_spd(rng, m)
    nn = random_spd(rng, m)
    values, B = generalized_evd(xx, nn)
    Bh = np.conj(B.T)
    assert np.linalg.norm(Bh @ nn @ B - np.eye(m)) < 1e-8
    D = Bh @ xx @ B
    assert np.linalg.norm(D - np.diag(np.diag(D))) < 1e-8 * max(1.0, values[0])
