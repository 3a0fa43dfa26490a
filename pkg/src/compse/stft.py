"""Framing, windowed Fourier analysis/synthesis, and utterance slicing.

Analysis is a strided application of fixed Fourier kernels (one row per
retained bin) to windowed frames; the DC bin is dropped so the frequency
axis is exactly fft_len/2, which the stride-2 encoder geometry needs.
Synthesis applies the dual (least-squares) kernels per frame and
overlap-adds with squared-window weights, normalized by the accumulated
window energy at each sample, so consistent spectra reconstruct the
signal to machine precision away from the uncovered tail.

The window is a root-Hann evaluated at half-sample points: it satisfies
constant overlap-add exactly for any hop dividing the length at least
twice over, and it never vanishes, so no sample is lost to analysis.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .cplx import ComplexTensor
from .errors import ContractError, ShapeError

SLICE_LEN = 16000
SLICE_HOP = 8000


def root_hann(win_len):
    """sqrt of a Hann window sampled at half-integer points (strictly positive)."""
    n = np.arange(win_len, dtype=np.float64)
    return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * (n + 0.5) / win_len))


@dataclass
class StftConfig:
    """Geometry of the convolutional STFT/iSTFT pair."""

    win_len: int = 400
    hop: int = 100
    fft_len: int = 512
    window: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.window is None:
            self.window = root_hann(self.win_len)
        self.window = np.asarray(self.window, dtype=np.float64)
        if not (0 < self.hop <= self.win_len <= self.fft_len):
            raise ContractError(
                f"need hop <= win_len <= fft_len, got {self.hop}/{self.win_len}/{self.fft_len}")
        if self.window.shape != (self.win_len,):
            raise ShapeError(f"window length {self.window.shape} != win_len {self.win_len}")
        self._check_cola()

    def _check_cola(self):
        if self.win_len % self.hop != 0:
            raise ContractError(f"hop {self.hop} must divide win_len {self.win_len}")
        w2 = self.window ** 2
        acc = np.zeros(self.hop)
        for k in range(self.win_len // self.hop):
            acc += w2[k * self.hop:(k + 1) * self.hop]
        dev = np.max(np.abs(acc - acc.mean())) / acc.mean()
        if dev > 1e-6:
            raise ContractError(f"window violates constant overlap-add (deviation {dev:.2e})")

    @property
    def bins(self):
        return self.fft_len // 2

    def num_frames(self, n_samples):
        """Frames needed to cover n_samples (the tail is zero-padded)."""
        if n_samples < self.win_len:
            raise ContractError(f"input length {n_samples} shorter than one window ({self.win_len})")
        return -(-(n_samples - self.win_len) // self.hop) + 1

    def padded_len(self, n_samples):
        return (self.num_frames(n_samples) - 1) * self.hop + self.win_len

    @classmethod
    def paper_scale(cls):
        """25 ms window, 6.25 ms hop at 16 kHz, 512-point transform, 256 bins."""
        return cls(win_len=400, hop=100, fft_len=512)

    @classmethod
    def toy_scale(cls):
        """64-bin axis sized for three stride-2 encoder layers."""
        return cls(win_len=120, hop=60, fft_len=128)

    @classmethod
    def tiny_scale(cls):
        """4-bin axis for finite-difference checks of the full pipeline."""
        return cls(win_len=6, hop=3, fft_len=8)


_KERNEL_CACHE = {}


def _kernels(cfg, np_dtype):
    """(analysis re, analysis im, dual re, dual im, ola weight) for cfg."""
    key = (cfg.win_len, cfg.hop, cfg.fft_len, cfg.window.tobytes(), np.dtype(np_dtype).char)
    hit = _KERNEL_CACHE.get(key)
    if hit is not None:
        return hit
    n = np.arange(cfg.win_len, dtype=np.float64)
    k = np.arange(1, cfg.bins + 1, dtype=np.float64)[:, None]
    phase = 2.0 * np.pi * k * n[None, :] / cfg.fft_len
    a_re = np.cos(phase) * cfg.window[None, :]
    a_im = -np.sin(phase) * cfg.window[None, :]
    stacked = np.vstack([a_re, a_im])  # [2*bins, win]
    dual = np.linalg.pinv(stacked)  # [win, 2*bins]
    d_re = dual[:, :cfg.bins]
    d_im = dual[:, cfg.bins:]
    out = tuple(m.astype(np_dtype) for m in (a_re, a_im, d_re, d_im)) + (
        (cfg.window ** 2).astype(np_dtype),)
    _KERNEL_CACHE[key] = out
    return out


def _frame(x, cfg):
    """[..., L] -> [..., T, win_len] hop-strided frames, tail zero-padded."""
    pad = cfg.padded_len(x.shape[-1]) - x.shape[-1]
    if pad:
        width = [(0, 0)] * (x.ndim - 1) + [(0, pad)]
        x = np.pad(x, width)
    v = np.lib.stride_tricks.sliding_window_view(x, cfg.win_len, axis=-1)
    return np.ascontiguousarray(v[..., ::cfg.hop, :])


def stft(x, cfg):
    """Complex spectrogram [bins, frames] of a 1-D waveform."""
    x = np.asarray(x, dtype=np.float64)
    cfg.num_frames(x.shape[-1])  # validates length
    a_re, a_im, _, _, _ = _kernels(cfg, np.float64)
    frames = _frame(x, cfg)  # [T, win]
    re = np.ascontiguousarray((frames @ a_re.T).T)
    im = np.ascontiguousarray((frames @ a_im.T).T)
    return ComplexTensor(re, im)


def _ola_weight(cfg, n_frames, out_len, np_dtype):
    w2 = (cfg.window ** 2).astype(np.float64)
    full = (n_frames - 1) * cfg.hop + cfg.win_len
    acc = np.zeros(max(full, out_len))
    for t in range(n_frames):
        acc[t * cfg.hop:t * cfg.hop + cfg.win_len] += w2
    acc[acc == 0.0] = 1.0  # uncovered tail stays zero in the numerator anyway
    return acc[:out_len].astype(np_dtype)


def istft(S, cfg, out_len):
    """Waveform of length out_len from a [bins, frames] complex spectrogram."""
    s_re = np.asarray(S.re, dtype=np.float64)
    s_im = np.asarray(S.im, dtype=np.float64)
    if s_re.shape[0] != cfg.bins:
        raise ShapeError(f"spectrogram has {s_re.shape[0]} bins, config expects {cfg.bins}")
    if cfg.num_frames(out_len) != s_re.shape[1]:
        raise ShapeError(
            f"frame count {s_re.shape[1]} inconsistent with output length {out_len}")
    _, _, d_re, d_im, w2 = _kernels(cfg, np.float64)
    rec = s_re.T @ d_re.T + s_im.T @ d_im.T  # [T, win] raw frame estimates
    rec *= w2[None, :]
    T = rec.shape[0]
    full = (T - 1) * cfg.hop + cfg.win_len
    acc = np.zeros(max(full, out_len))
    for t in range(T):
        acc[t * cfg.hop:t * cfg.hop + cfg.win_len] += rec[t]
    return acc[:out_len] / _ola_weight(cfg, T, out_len, np.float64)


def stft_batch(x, cfg, np_dtype=None):
    """Analysis of [B, L] waveforms -> (re, im) arrays [B, bins, T]."""
    x = np.asarray(x)
    np_dtype = np_dtype or x.dtype
    a_re, a_im, _, _, _ = _kernels(cfg, np_dtype)
    frames = _frame(x.astype(np_dtype, copy=False), cfg)  # [B, T, win]
    re = np.swapaxes(frames @ a_re.T, 1, 2)
    im = np.swapaxes(frames @ a_im.T, 1, 2)
    return np.ascontiguousarray(re), np.ascontiguousarray(im)


def istft_tensor(S, cfg, out_len):
    """Differentiable synthesis: ComplexTensor of Tensors [B, bins, T] -> Tensor [B, L]."""
    np_dtype = S.re.data.dtype
    _, _, d_re, d_im, w2 = _kernels(cfg, np_dtype)
    T = S.re.data.shape[2]
    if cfg.num_frames(out_len) != T:
        raise ShapeError(f"frame count {T} inconsistent with output length {out_len}")
    frames = ad.add(ad.matmul(ad.transpose(S.re, (0, 2, 1)), ad.Tensor(d_re.T.copy())),
                    ad.matmul(ad.transpose(S.im, (0, 2, 1)), ad.Tensor(d_im.T.copy())))
    frames = ad.mul(frames, ad.Tensor(w2[None, None, :]))
    acc = ad.overlap_add(frames, cfg.hop, out_len)
    weight = _ola_weight(cfg, T, out_len, np_dtype)
    return ad.mul(acc, ad.Tensor((1.0 / weight)[None, :]))


# -- utterance slicing (50% overlapped fixed-length windows) ---------------


def slice_utterance(x):
    """Split a waveform into 16000-sample slices starting every 8000 samples.

    Returns (slices [n, 16000], pad_len) where pad_len zeros were appended
    to fill the final slice.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ContractError("expected a non-empty 1-D waveform")
    n = max(1, -(-(max(x.size - SLICE_LEN, 0)) // SLICE_HOP) + 1)
    covered = (n - 1) * SLICE_HOP + SLICE_LEN
    pad_len = covered - x.size
    xp = np.pad(x, (0, pad_len))
    slices = np.stack([xp[i * SLICE_HOP:i * SLICE_HOP + SLICE_LEN] for i in range(n)])
    return slices, pad_len


def reconstruct_utterance(slices, original_len):
    """Overlap-add 16000-sample slices, halving doubly-covered regions."""
    slices = np.asarray(slices, dtype=np.float64)
    if slices.ndim != 2 or slices.shape[1] != SLICE_LEN:
        raise ShapeError(f"expected [n, {SLICE_LEN}] slices, got {slices.shape}")
    n = slices.shape[0]
    expected = max(1, -(-(max(original_len - SLICE_LEN, 0)) // SLICE_HOP) + 1)
    if n != expected:
        raise ShapeError(f"{n} slices inconsistent with original length {original_len}")
    covered = (n - 1) * SLICE_HOP + SLICE_LEN
    acc = np.zeros(covered)
    count = np.zeros(covered)
    for i in range(n):
        acc[i * SLICE_HOP:i * SLICE_HOP + SLICE_LEN] += slices[i]
        count[i * SLICE_HOP:i * SLICE_HOP + SLICE_LEN] += 1.0
    return (acc / count)[:original_len]
