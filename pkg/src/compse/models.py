"""Generator (complex encoder/decoder with recurrent bottleneck) and the
spectrally normalized waveform discriminator."""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .cplx import ComplexTensor
from .errors import ContractError, ShapeError
from .layers import (ComplexBatchNorm2d, ComplexConv2d, ComplexLinear, ComplexLSTM,
                     Linear, LSTMStack, Module, PReLU, SNConv1d, SNLinear)
from .masking import MaskEstimate, apply_mask
from .precision import dtype
from .stft import SLICE_LEN, StftConfig, istft_tensor, stft_batch

RECURRENT_KINDS = ("lstm", "clstm", "cblstm")


@dataclass
class GeneratorConfig:
    encoder_channels: tuple = (16, 32, 64, 128, 256, 256)
    recurrent_kind: str = "lstm"
    recurrent_layers: int = 2
    recurrent_units: int = 256  # per part for complex kinds use complex_units
    complex_units: int = 128
    mask_mode: str = "crm"
    stft: StftConfig = field(default_factory=StftConfig.paper_scale)

    def __post_init__(self):
        if self.recurrent_kind not in RECURRENT_KINDS:
            raise ContractError(f"unknown recurrent kind {self.recurrent_kind!r}")
        depth = len(self.encoder_channels)
        if self.stft.bins % (2 ** depth) != 0:
            raise ContractError(
                f"{self.stft.bins} bins not divisible by 2^{depth} encoder strides")

    @classmethod
    def paper_scale(cls, **kw):
        return cls(**kw)

    @classmethod
    def toy_scale(cls, **kw):
        kw.setdefault("encoder_channels", (8, 16, 32))
        kw.setdefault("recurrent_units", 32)
        kw.setdefault("complex_units", 16)
        kw.setdefault("stft", StftConfig.toy_scale())
        return cls(**kw)

    @classmethod
    def tiny_scale(cls, **kw):
        kw.setdefault("encoder_channels", (2, 4))
        kw.setdefault("recurrent_units", 4)
        kw.setdefault("complex_units", 3)
        kw.setdefault("stft", StftConfig.tiny_scale())
        return cls(**kw)


@dataclass
class DiscriminatorConfig:
    channels: tuple = (16, 32, 32, 64, 64, 128, 128, 256, 256, 512, 1024)
    filter_len: int = 31
    stride: int = 2
    leaky_slope: float = 0.3
    slice_len: int = SLICE_LEN

    @classmethod
    def paper_scale(cls, **kw):
        return cls(**kw)

    @classmethod
    def toy_scale(cls, **kw):
        kw.setdefault("channels", (4, 8, 8, 16, 16, 32))
        return cls(**kw)

    @classmethod
    def tiny_scale(cls, **kw):
        kw.setdefault("channels", (2, 4))
        kw.setdefault("slice_len", 64)
        return cls(**kw)


class Generator(Module):
    """Waveform-in, waveform-out masking network.

    conv-STFT -> complex encoder stack -> recurrent bottleneck -> complex
    decoder stack with skip concatenation -> mask head -> mask application
    on the input spectrum -> conv-iSTFT.
    """

    def __init__(self, cfg, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.cfg = cfg
        chans = list(cfg.encoder_channels)
        depth = len(chans)
        ins = [1] + chans[:-1]
        for i in range(depth):
            setattr(self, f"enc_conv{i}", ComplexConv2d(ins[i], chans[i], rng))
            setattr(self, f"enc_bn{i}", ComplexBatchNorm2d(chans[i]))
            setattr(self, f"enc_act{i}", PReLU(chans[i]))
        self.depth = depth
        self.bottleneck_bins = cfg.stft.bins // (2 ** depth)
        feat = chans[-1] * self.bottleneck_bins  # per plane, per frame
        if cfg.recurrent_kind == "lstm":
            self.recur = LSTMStack(2 * feat, cfg.recurrent_units, cfg.recurrent_layers, rng)
            self.proj = Linear(self.recur.hidden_out, 2 * feat, rng)
        else:
            bidir = cfg.recurrent_kind == "cblstm"
            self.recur = ComplexLSTM(feat, cfg.complex_units, cfg.recurrent_layers, rng,
                                     bidirectional=bidir)
            self.proj = ComplexLinear(self.recur.hidden_out, feat, rng)
        # decoder mirrors the encoder; skip concatenation doubles in-channels
        dec_outs = ins[::-1]  # [..., 1]; last layer emits the 1-channel mask
        dec_ins = chans[::-1]
        for i in range(depth):
            setattr(self, f"dec_conv{i}",
                    ComplexConv2d(dec_ins[i] * 2, dec_outs[i], rng, transposed=True))
            if i < depth - 1:
                setattr(self, f"dec_bn{i}", ComplexBatchNorm2d(dec_outs[i]))
                setattr(self, f"dec_act{i}", PReLU(dec_outs[i]))
        # start at the identity mask so training begins from passthrough:
        # zero kernels plus unit real bias make the first forward a no-op
        last = getattr(self, f"dec_conv{depth - 1}")
        last.A.data[:] = 0.0
        last.B.data[:] = 0.0
        last.bias_re.data[:] = 1.0

    def forward(self, x):
        """Enhance [B, L] noisy waveforms; output matches the input shape."""
        if isinstance(x, Tensor):
            x = x.data
        x = np.asarray(x, dtype=dtype())
        if x.ndim != 2:
            raise ShapeError(f"expected [batch, samples] input, got shape {x.shape}")
        B, L = x.shape
        cfg = self.cfg
        re, im = stft_batch(x, cfg.stft, dtype())
        spec = ComplexTensor(Tensor(re[:, None, :, :]), Tensor(im[:, None, :, :]))
        skips = []
        h = spec
        for i in range(self.depth):
            h = getattr(self, f"enc_conv{i}").forward(h)
            h = getattr(self, f"enc_bn{i}").forward(h)
            h = getattr(self, f"enc_act{i}").forward(h)
            skips.append(h)
        h = self._bottleneck(h)
        for i in range(self.depth):
            skip = skips[self.depth - 1 - i]
            h = ComplexTensor(ad.concat([h.re, skip.re], axis=1),
                              ad.concat([h.im, skip.im], axis=1))
            h = getattr(self, f"dec_conv{i}").forward(h)
            if i < self.depth - 1:
                h = getattr(self, f"dec_bn{i}").forward(h)
                h = getattr(self, f"dec_act{i}").forward(h)
        mask = MaskEstimate(ad.reshape(h.re, h.re.data.shape[0:1] + h.re.data.shape[2:]),
                            ad.reshape(h.im, h.im.data.shape[0:1] + h.im.data.shape[2:]),
                            cfg.mask_mode)
        noisy = ComplexTensor(Tensor(re), Tensor(im))
        enhanced = apply_mask(noisy, mask)
        return istft_tensor(enhanced, cfg.stft, L)

    def _bottleneck(self, h):
        """[B, C, F, T] complex -> recurrent stack over frames -> same shape."""
        B, C, F, T = h.re.data.shape
        feat = C * F

        def to_seq(plane):
            # channel-major flattening per frame, sequence axis first
            return ad.transpose(ad.reshape(plane, (B, feat, T)), (2, 0, 1))

        def from_seq(seq):
            return ad.reshape(ad.transpose(seq, (1, 2, 0)), (B, C, F, T))

        if self.cfg.recurrent_kind == "lstm":
            seq = ad.concat([to_seq(h.re), to_seq(h.im)], axis=2)  # [T, B, 2*feat]
            out = self.proj.forward(self.recur.forward(seq))
            re = ad.getitem(out, (slice(None), slice(None), slice(0, feat)))
            im = ad.getitem(out, (slice(None), slice(None), slice(feat, 2 * feat)))
            return ComplexTensor(from_seq(re), from_seq(im))
        seq = ComplexTensor(to_seq(h.re), to_seq(h.im))
        out = self.proj.forward(self.recur.forward(seq))
        return ComplexTensor(from_seq(out.re), from_seq(out.im))


class Discriminator(Module):
    """Conditional waveform discriminator: the candidate and the noisy
    condition enter as two channels; every layer is spectrally normalized."""

    def __init__(self, cfg, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(1)
        self.cfg = cfg
        ch_in = 2
        L = cfg.slice_len
        for i, ch in enumerate(cfg.channels):
            setattr(self, f"conv{i}", SNConv1d(ch_in, ch, rng, cfg.filter_len, cfg.stride))
            ch_in = ch
            L = -(-L // cfg.stride)
        self.n_layers = len(cfg.channels)
        self.post = SNConv1d(ch_in, 1, rng, kernel=1, stride=1)
        self.fc = SNLinear(L, 1, rng)
        self.final_len = L

    def forward(self, candidate, condition):
        cand = candidate if isinstance(candidate, Tensor) else Tensor(np.asarray(candidate, dtype=dtype()))
        cond = condition if isinstance(condition, Tensor) else Tensor(np.asarray(condition, dtype=dtype()))
        if cand.data.shape != cond.data.shape:
            raise ShapeError(f"candidate {cand.data.shape} vs condition {cond.data.shape}")
        h = ad.stack([cand, cond], axis=1)  # [B, 2, L]
        for i in range(self.n_layers):
            h = getattr(self, f"conv{i}").forward(h)
            h = ad.leaky_relu(h, self.cfg.leaky_slope)
        h = self.post.forward(h)  # [B, 1, L']
        h = ad.reshape(h, (h.data.shape[0], h.data.shape[2]))
        return self.fc.forward(h)  # [B, 1]


def count_parameters(model):
    """Total learnable scalar count."""
    return model.num_parameters()
