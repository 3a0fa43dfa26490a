"""Finite-difference verification of every differentiable building block.

Each named check builds a tiny instance of one layer or loss, computes a
scalar objective, and compares reverse-mode gradients against central
differences. All checks run in 64-bit regardless of the global precision.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, finite_difference_gradient
from .cplx import ComplexTensor
from .errors import ContractError
from .layers import (ComplexBatchNorm2d, ComplexConv2d, ComplexLinear, ComplexLSTM,
                     Linear, LSTM, PReLU, SNConv1d, SNLinear)
from .losses import (l1_term, relativistic_average_losses, relativistic_d_loss,
                     relativistic_g_adv_loss)
from .masking import MaskEstimate, apply_mask
from .models import Discriminator, DiscriminatorConfig, Generator, GeneratorConfig
from .precision import use_precision
from .stft import istft_tensor

TOL = 1e-4


def _rel_err(f, tensors, restore=()):
    """Worst relative gradient error of scalar f() over the given tensors.

    restore holds buffer arrays (for example spectral-norm u vectors) that
    forward passes mutate; they are reset before every evaluation so f is a
    pure function of the checked tensors.
    """
    snaps = [np.array(b, copy=True) for b in restore]

    def evaluate():
        for buf, snap in zip(restore, snaps):
            buf[...] = snap
        return f()

    for t in tensors:
        t.zero_grad()
    loss = evaluate()
    loss.backward()
    worst = 0.0
    for t in tensors:
        analytic = np.array(t.grad, copy=True)

        def objective(x, t=t):
            keep = t.data.copy()
            t.data[...] = x
            val = float(evaluate().data)
            t.data[...] = keep
            return val

        numeric = finite_difference_gradient(objective, t.data.copy())
        scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-10)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale))
        t.zero_grad()
    return worst


def _randt(rng, shape, scale=1.0):
    return Tensor(scale * rng.standard_normal(shape), requires_grad=True)


def _project(out, rng):
    """Fixed random projection to a scalar so every output entry matters."""
    r = rng.standard_normal(out.data.shape)
    return ad.tsum(ad.mul(out, r))


def check_tensor_ops():
    rng = np.random.default_rng(11)
    x = _randt(rng, (3, 4))
    w = _randt(rng, (4, 2))
    b = _randt(rng, (2,))

    def f():
        h = ad.tanh(ad.add(ad.matmul(x, w), b))
        h = ad.sigmoid(ad.mul(h, h))
        h = ad.softplus(ad.sub(h, ad.tmean(h)))
        return ad.tsum(ad.log(ad.add(ad.sqrt(ad.add(ad.mul(h, h), 0.1)), 1.0)))

    return _rel_err(f, [x, w, b])


def check_conv2d():
    rng = np.random.default_rng(12)
    x = _randt(rng, (2, 2, 4, 4))
    w = _randt(rng, (3, 2, 3, 2))

    def f():
        out = ad.conv2d(x, w, (2, 1), ((1, 1), (1, 0)))
        return _project(out, np.random.default_rng(13))

    return _rel_err(f, [x, w])


def check_conv_transpose2d():
    rng = np.random.default_rng(14)
    x = _randt(rng, (2, 3, 2, 4))
    w = _randt(rng, (3, 2, 3, 2))

    def f():
        out = ad.conv_transpose2d(x, w, (2, 1), ((1, 1), (1, 0)), (4, 4))
        return _project(out, np.random.default_rng(15))

    return _rel_err(f, [x, w])


def check_conv1d():
    rng = np.random.default_rng(16)
    x = _randt(rng, (2, 2, 8))
    w = _randt(rng, (3, 2, 4))

    def f():
        out = ad.conv1d(x, w, 2, (1, 2))
        return _project(out, np.random.default_rng(17))

    return _rel_err(f, [x, w])


def check_complex_conv():
    rng = np.random.default_rng(18)
    layer = ComplexConv2d(2, 3, rng, kernel=(3, 2), stride=(2, 1), freq_pad=(1, 1))
    h = ComplexTensor(_randt(rng, (2, 2, 4, 3)), _randt(rng, (2, 2, 4, 3)))

    def f():
        out = layer.forward(h)
        proj = np.random.default_rng(19)
        return ad.add(_project(out.re, proj), _project(out.im, proj))

    return _rel_err(f, [h.re, h.im, layer.A, layer.B, layer.bias_re, layer.bias_im])


def check_complex_conv_transposed():
    rng = np.random.default_rng(20)
    layer = ComplexConv2d(3, 2, rng, kernel=(3, 2), stride=(2, 1), freq_pad=(1, 1),
                          transposed=True)
    h = ComplexTensor(_randt(rng, (2, 3, 2, 3)), _randt(rng, (2, 3, 2, 3)))

    def f():
        out = layer.forward(h)
        proj = np.random.default_rng(21)
        return ad.add(_project(out.re, proj), _project(out.im, proj))

    return _rel_err(f, [h.re, h.im, layer.A, layer.B])


def check_batchnorm():
    rng = np.random.default_rng(22)
    layer = ComplexBatchNorm2d(3)
    h = ComplexTensor(_randt(rng, (2, 3, 3, 2)), _randt(rng, (2, 3, 3, 2)))

    def f():
        out = layer.forward(h)
        proj = np.random.default_rng(23)
        return ad.add(_project(out.re, proj), _project(out.im, proj))

    return _rel_err(f, [h.re, h.im, layer.gamma_re, layer.gamma_im,
                        layer.beta_re, layer.beta_im])


def check_prelu():
    rng = np.random.default_rng(24)
    layer = PReLU(3)
    x = _randt(rng, (2, 3, 4))

    def f():
        return _project(layer.forward(x), np.random.default_rng(25))

    return _rel_err(f, [x, layer.alpha])


def check_lstm():
    rng = np.random.default_rng(26)
    layer = LSTM(3, 4, rng)
    seq = _randt(rng, (3, 2, 3))

    def f():
        return _project(layer.forward(seq), np.random.default_rng(27))

    return _rel_err(f, [seq, layer.w_ih, layer.w_hh, layer.bias])


def check_complex_lstm():
    rng = np.random.default_rng(28)
    layer = ComplexLSTM(3, 2, layers=1, rng=rng, bidirectional=True)
    h = ComplexTensor(_randt(rng, (3, 2, 3)), _randt(rng, (3, 2, 3)))

    def f():
        out = layer.forward(h)
        proj = np.random.default_rng(29)
        return ad.add(_project(out.re, proj), _project(out.im, proj))

    params = [h.re, h.im, layer.lstm_r.fwd0.w_ih, layer.lstm_i.fwd0.w_hh,
              layer.lstm_r.bwd0.bias]
    return _rel_err(f, params)


def check_linear():
    rng = np.random.default_rng(30)
    real = Linear(3, 2, rng)
    cplx = ComplexLinear(3, 2, rng)
    x = _randt(rng, (4, 3))
    h = ComplexTensor(_randt(rng, (4, 3)), _randt(rng, (4, 3)))

    def f():
        proj = np.random.default_rng(31)
        out = cplx.forward(h)
        return ad.add(_project(real.forward(x), proj),
                      ad.add(_project(out.re, proj), _project(out.im, proj)))

    return _rel_err(f, [x, h.re, h.im, real.w, real.b, cplx.wr, cplx.wi, cplx.br])


def check_spectral_norm():
    rng = np.random.default_rng(32)
    conv = SNConv1d(2, 3, rng, kernel=3, stride=2)
    fc = SNLinear(4, 2, rng)
    x = _randt(rng, (2, 2, 6))
    z = _randt(rng, (3, 4))

    def f():
        proj = np.random.default_rng(33)
        h = ad.leaky_relu(conv.forward(x), 0.3)
        return ad.add(_project(h, proj), _project(fc.forward(z), proj))

    # the constant-u,v gradient is exact only at the power-iteration fixed
    # point, so converge the estimates before comparing
    for _ in range(300):
        f()
    return _rel_err(f, [x, z, conv.w, conv.b, fc.w, fc.b], restore=[conv.u, fc.u])


def check_istft():
    from .stft import StftConfig
    rng = np.random.default_rng(34)
    cfg = StftConfig.tiny_scale()
    frames = cfg.num_frames(12)
    S = ComplexTensor(_randt(rng, (2, cfg.bins, frames)),
                      _randt(rng, (2, cfg.bins, frames)))

    def f():
        return _project(istft_tensor(S, cfg, 12), np.random.default_rng(35))

    return _rel_err(f, [S.re, S.im])


def check_masking():
    rng = np.random.default_rng(36)
    x = ComplexTensor(_randt(rng, (2, 3, 4)), _randt(rng, (2, 3, 4)))
    worst = 0.0
    for mode in ("crm", "polar", "real"):
        m_re = _randt(rng, (2, 3, 4), 0.5)
        m_im = _randt(rng, (2, 3, 4), 0.5)

        def f(mode=mode, m_re=m_re, m_im=m_im):
            out = apply_mask(x, MaskEstimate(m_re, m_im, mode))
            proj = np.random.default_rng(37)
            return ad.add(_project(out.re, proj), _project(out.im, proj))

        worst = max(worst, _rel_err(f, [x.re, x.im, m_re, m_im]))
    return worst


def check_losses():
    rng = np.random.default_rng(38)
    d_real = _randt(rng, (4, 1))
    d_fake = _randt(rng, (4, 1))
    g_out = _randt(rng, (2, 16))
    target = Tensor(rng.standard_normal((2, 16)))

    def f():
        g_ra, d_ra = relativistic_average_losses(d_real, d_fake)
        total = ad.add(relativistic_d_loss(d_real, d_fake),
                       relativistic_g_adv_loss(d_real, d_fake))
        total = ad.add(total, ad.add(g_ra, d_ra))
        return ad.add(total, ad.mul(l1_term(g_out, target), 10.0))

    return _rel_err(f, [d_real, d_fake, g_out])


def _tiny_models():
    rng = np.random.default_rng(40)
    gen = Generator(GeneratorConfig.tiny_scale(), rng=np.random.default_rng(41))
    disc = Discriminator(DiscriminatorConfig.tiny_scale(), rng=np.random.default_rng(42))
    return rng, gen, disc


def check_generator():
    rng, gen, _ = _tiny_models()
    x = 0.5 * rng.standard_normal((2, 64))
    probe = [gen.enc_conv0.A, gen.dec_conv1.bias_re, gen.recur.fwd0.w_ih,
             gen.proj.w, gen.enc_bn0.gamma_re]

    def f():
        return _project(gen.forward(x), np.random.default_rng(43))

    return _rel_err(f, probe)


def check_discriminator():
    rng, _, disc = _tiny_models()
    cand = Tensor(0.5 * rng.standard_normal((2, 64)), requires_grad=True)
    cond = 0.5 * rng.standard_normal((2, 64))
    probe = [cand, disc.conv0.w, disc.conv1.b, disc.post.w, disc.fc.w, disc.fc.b]
    restore = [disc.conv0.u, disc.conv1.u, disc.post.u, disc.fc.u]

    def f():
        return _project(disc.forward(cand, cond), np.random.default_rng(44))

    for _ in range(300):
        f()
    return _rel_err(f, probe, restore=restore)


CHECKS = {
    "tensor_ops": check_tensor_ops,
    "conv2d": check_conv2d,
    "conv_transpose2d": check_conv_transpose2d,
    "conv1d": check_conv1d,
    "complex_conv": check_complex_conv,
    "complex_conv_transposed": check_complex_conv_transposed,
    "batchnorm": check_batchnorm,
    "prelu": check_prelu,
    "lstm": check_lstm,
    "complex_lstm": check_complex_lstm,
    "linear": check_linear,
    "spectral_norm": check_spectral_norm,
    "istft": check_istft,
    "masking": check_masking,
    "losses": check_losses,
    "generator": check_generator,
    "discriminator": check_discriminator,
}


def run(module=None):
    """Run checks (all, or one by name); returns [(name, max_rel_err, ok)]."""
    if module is not None and module not in CHECKS:
        raise ContractError(f"unknown gradcheck module {module!r}; "
                            f"choices: {', '.join(CHECKS)}")
    names = [module] if module else list(CHECKS)
    results = []
    with use_precision("float64"):
        for name in names:
            err = CHECKS[name]()
            results.append((name, err, err < TOL))
    return results
