"""Analysis/synthesis fidelity, frame geometry, and utterance slicing."""

import numpy as np
import pytest

from compse.autodiff import Tensor
from compse.cplx import ComplexTensor
from compse.errors import ContractError, ShapeError
from compse.stft import (StftConfig, istft, istft_tensor, reconstruct_utterance,
                         root_hann, slice_utterance, stft, stft_batch)


def test_paper_scale_frame_count_hand_derived():
    # 16000 samples, window 400, hop 100: 1 + (16000 - 400) / 100 = 157
    assert StftConfig.paper_scale().num_frames(16000) == 157


def test_frame_count_ceils_partial_tail():
    cfg = StftConfig.toy_scale()  # win 120, hop 60
    assert cfg.num_frames(16000) == 266  # 1 + ceil(15880 / 60)
    assert cfg.num_frames(120) == 1
    assert cfg.num_frames(121) == 2


def test_too_short_input_rejected():
    with pytest.raises(ContractError):
        StftConfig.paper_scale().num_frames(399)


def test_bin_count_is_half_fft():
    assert StftConfig.paper_scale().bins == 256
    assert StftConfig.toy_scale().bins == 64


@pytest.mark.parametrize("cfg,length", [
    (StftConfig.paper_scale(), 16000),
    (StftConfig.paper_scale(), 17234),
    (StftConfig.toy_scale(), 16000),
    (StftConfig.toy_scale(), 511),
    (StftConfig.tiny_scale(), 29),
])
def test_round_trip_machine_precision(cfg, length):
    x = np.random.default_rng(0).standard_normal(length)
    err = np.max(np.abs(istft(stft(x, cfg), cfg, length) - x))
    assert err < 1e-10


def test_analysis_matches_rfft_oracle():
    cfg = StftConfig.toy_scale()
    rng = np.random.default_rng(1)
    x = rng.standard_normal(600)
    S = stft(x, cfg)
    # frame 3 against a direct zero-padded windowed DFT
    frame = x[3 * cfg.hop:3 * cfg.hop + cfg.win_len] * cfg.window
    spec = np.fft.rfft(frame, n=cfg.fft_len)
    assert np.allclose(S.re[:, 3], spec.real[1:cfg.bins + 1], atol=1e-10)
    assert np.allclose(S.im[:, 3], spec.imag[1:cfg.bins + 1], atol=1e-10)


def test_window_is_strictly_positive_and_cola():
    for win in (120, 400):
        w = root_hann(win)
        assert np.all(w > 0)
        w2 = w ** 2
        acc = sum(w2[k * 60:(k + 1) * 60] for k in range(win // 60)) if win == 120 else \
            sum(w2[k * 100:(k + 1) * 100] for k in range(4))
        assert np.max(np.abs(acc - acc.mean())) / acc.mean() < 1e-12


def test_bad_geometry_rejected():
    with pytest.raises(ContractError):
        StftConfig(win_len=400, hop=99, fft_len=512)  # hop does not divide win
    with pytest.raises(ContractError):
        StftConfig(win_len=400, hop=100, fft_len=256)  # fft shorter than win
    with pytest.raises(ContractError):
        StftConfig(win_len=120, hop=60, fft_len=128,
                   window=np.linspace(0.1, 1.0, 120))  # violates overlap-add


def test_istft_validates_shapes():
    cfg = StftConfig.toy_scale()
    S = stft(np.zeros(1200), cfg)
    with pytest.raises(ShapeError):
        istft(S, cfg, 5000)  # frame count inconsistent with length
    bad = ComplexTensor(S.re[:10], S.im[:10])
    with pytest.raises(ShapeError):
        istft(bad, cfg, 1200)


def test_tensor_synthesis_matches_numpy_path():
    cfg = StftConfig.toy_scale()
    rng = np.random.default_rng(2)
    x = rng.standard_normal((3, 2000))
    re, im = stft_batch(x, cfg, np.float64)
    out = istft_tensor(ComplexTensor(Tensor(re), Tensor(im)), cfg, 2000)
    per_row = [istft(ComplexTensor(re[b], im[b]), cfg, 2000) for b in range(3)]
    assert np.allclose(out.data, np.stack(per_row), atol=1e-12)
    assert np.max(np.abs(out.data - x)) < 1e-10


@pytest.mark.parametrize("length", [4000, 16000, 16001, 23999, 24000, 40000])
def test_slice_reconstruct_roundtrip_exact(length):
    x = np.random.default_rng(3).standard_normal(length)
    slices, pad = slice_utterance(x)
    assert slices.shape[1] == 16000
    assert (slices.shape[0] - 1) * 8000 + 16000 == length + pad
    assert np.array_equal(reconstruct_utterance(slices, length), x)


def test_reconstruct_rejects_inconsistent_slice_count():
    slices, _ = slice_utterance(np.ones(24000))
    with pytest.raises(ShapeError):
        reconstruct_utterance(slices, 50000)
