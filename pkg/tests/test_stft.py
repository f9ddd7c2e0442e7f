import numpy as np
import pytest
from numpy.testing import assert_allclose

from maskbeam.estimators import StftTransformer
from maskbeam.stft import StftConfig, analyze, apply_weights, frame_count, sqrt_hann, synthesize

from conftest import crandn

CFG = StftConfig()


def interior_error_db(x, y, cfg=CFG):
    edge = cfg.fft_size - cfg.hop
    s = slice(edge, x.shape[-1] - edge)
    return 10 * np.log10(np.sum((x[..., s] - y[..., s]) ** 2) / np.sum(x[..., s] ** 2))


def test_config_validation():
    with pytest.raises(ValueError):
        StftConfig(fft_size=1000)
    with pytest.raises(ValueError):
        StftConfig(hop=300)
    with pytest.raises(ValueError):
        StftConfig(fft_size=512, hop=512)
    with pytest.raises(ValueError):
        StftConfig(window="hamming")
    assert CFG.bins == 513
    assert CFG.frequencies()[-1] == 8000


def test_frame_count_drops_partial_tail():
    assert frame_count(1023, CFG) == 0
    assert frame_count(1024, CFG) == 1
    assert frame_count(1024 + 255, CFG) == 1
    assert frame_count(16000, CFG) == 59
    assert analyze(np.zeros(16000), CFG).shape == (59, 513)


def test_window_overlap_sum_is_constant():
    w = sqrt_hann(1024) ** 2
    total = sum(np.roll(w, k * 256) for k in range(4))
    assert_allclose(total, 2.0, atol=1e-12)


def test_zero_signal():
    spec = analyze(np.zeros((2, 4096)), CFG)
    assert np.all(spec == 0)
    assert np.all(synthesize(spec, CFG) == 0)


def test_bin_centred_sinusoid_concentrates_energy():
    n = np.arange(4096)
    spec = analyze(np.cos(2 * np.pi * 64 * n / 1024), CFG)
    power = np.abs(spec) ** 2
    share = power[:, 63:66].sum(axis=1) / power.sum(axis=1)
    assert share.min() >= 0.99
    assert np.all(np.argmax(power, axis=1) == 64)


def test_parseval_against_direct_dft(rng):
    x = rng.standard_normal(1024)
    frame = x * sqrt_hann(1024)
    spec = analyze(x, CFG)[0]
    # one-sided spectrum: double the interior bins
    energy = (abs(spec[0]) ** 2 + abs(spec[-1]) ** 2 + 2 * np.sum(np.abs(spec[1:-1]) ** 2)) / 1024
    assert abs(energy - np.sum(frame ** 2)) < 1e-9 * np.sum(frame ** 2)
    direct = np.array([np.sum(frame * np.exp(-2j * np.pi * k * np.arange(1024) / 1024)) for k in (0, 7, 512)])
    assert_allclose(spec[[0, 7, 512]], direct, atol=1e-9)


def test_round_trip_random_signal(rng):
    x = rng.standard_normal((3, 16000))
    y = synthesize(analyze(x, CFG), CFG)
    assert interior_error_db(x[:, : y.shape[1]], y) < -80


def test_round_trip_speech_shaped_signal(rng):
    # AR(2) colouring plus a slow amplitude envelope
    e = rng.standard_normal(32000)
    x = np.zeros_like(e)
    for t in range(2, e.size):
        x[t] = 1.3 * x[t - 1] - 0.6 * x[t - 2] + e[t]
    x *= 1 + 0.9 * np.sin(2 * np.pi * 3 * np.arange(e.size) / 16000)
    y = synthesize(analyze(x, CFG), CFG)
    assert interior_error_db(x[: y.size], y) < -80


@pytest.mark.parametrize("fft_size,hop", [(512, 128), (256, 128), (64, 16)])
def test_round_trip_other_configs(rng, fft_size, hop):
    cfg = StftConfig(fft_size, hop)
    x = rng.standard_normal(8000)
    y = synthesize(analyze(x, cfg), cfg)
    assert interior_error_db(x[: y.size], y, cfg) < -80


def test_linearity(rng):
    x, y = rng.standard_normal((2, 2, 5000))
    lhs = analyze(2.5 * x - 0.5 * y, CFG)
    rhs = 2.5 * analyze(x, CFG) - 0.5 * analyze(y, CFG)
    assert np.abs(lhs - rhs).max() < 1e-10


def test_apply_weights_unit_vector_and_zero(rng):
    spec = crandn(rng, 4, 6, 9)
    for m in range(4):
        w = np.zeros((9, 4), complex)
        w[:, m] = 1
        assert np.array_equal(apply_weights(spec, w), spec[m])
    assert np.all(apply_weights(spec, np.zeros((9, 4))) == 0)


def test_apply_weights_matches_direct_sum(rng):
    spec = crandn(rng, 3, 5, 7)
    w = crandn(rng, 7, 3)
    direct = np.zeros((5, 7), complex)
    for l in range(5):
        for k in range(7):
            for m in range(3):
                direct[l, k] += np.conj(w[k, m]) * spec[m, l, k]
    assert np.abs(apply_weights(spec, w) - direct).max() < 1e-12
    per_frame = np.broadcast_to(w, (5, 7, 3))
    assert np.abs(apply_weights(spec, per_frame) - direct).max() < 1e-12


def test_apply_weights_shape_errors(rng):
    spec = crandn(rng, 3, 5, 7)
    with pytest.raises(ValueError):
        apply_weights(spec, np.ones((7, 2)))
    with pytest.raises(ValueError):
        apply_weights(spec, np.ones((6, 3)))


def test_short_signal_rejected():
    with pytest.raises(ValueError, match="fewer than one frame"):
        analyze(np.zeros(100), CFG)


def test_synthesize_rejects_wrong_bin_count():
    with pytest.raises(ValueError):
        synthesize(np.zeros((3, 100)), CFG)


def test_stft_transformer_round_trip(rng):
    x = rng.standard_normal((2, 8000))
    st = StftTransformer().fit(x)
    y = st.inverse_transform(st.transform(x))
    assert interior_error_db(x[:, : y.shape[1]], y) < -80
    assert st.get_params() == {"fft_size": 1024, "hop": 256, "sample_rate": 16000}
