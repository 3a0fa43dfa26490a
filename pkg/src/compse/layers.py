"""Learnable building blocks: complex convolutions, complex batch norm,
PReLU, real/complex LSTM stacks, spectral normalization, and the real 1-D
convolutions used by the discriminator."""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, parameter
from .cplx import ComplexTensor
from .errors import ContractError, NumericError, ShapeError
from .precision import dtype


class Module:
    """Minimal container tracking parameters, buffers, and children."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array):
        self._buffers[name] = array
        object.__setattr__(self, name, array)

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(prefix + cname + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for cname, child in self._children.items():
            yield from child.named_buffers(prefix + cname + ".")

    def train(self, flag=True):
        object.__setattr__(self, "training", flag)
        for child in self._children.values():
            child.train(flag)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self):
        return sum(p.size for p in self.parameters())


def _uniform(rng, shape, limit):
    return rng.uniform(-limit, limit, size=shape).astype(dtype())


def glorot(rng, shape, fan_in, fan_out):
    return _uniform(rng, shape, np.sqrt(6.0 / (fan_in + fan_out)))


class ComplexConv2d(Module):
    """Complex 2-D convolution (or its transpose) on [B, C, F, T] features.

    Kernel axes are (frequency, time); stride downsamples frequency only and
    the single time tap of lookahead is removed by causal (past-edge) padding.
    """

    def __init__(self, in_ch, out_ch, rng, kernel=(5, 2), stride=(2, 1),
                 freq_pad=(2, 1), transposed=False):
        super().__init__()
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel, self.stride = kernel, stride
        self.freq_pad = freq_pad
        self.time_pad = (kernel[1] - 1, 0)
        self.transposed = transposed
        # conv_transpose2d takes the forward-conv kernel layout, so the
        # transposed variant stores kernels as [out_of_adjoint= in_ch, ...].
        kshape = (in_ch, out_ch, *kernel) if transposed else (out_ch, in_ch, *kernel)
        fan_in = in_ch * kernel[0] * kernel[1]
        fan_out = out_ch * kernel[0] * kernel[1]
        limit = np.sqrt(6.0 / (fan_in + fan_out)) / np.sqrt(2.0)
        self.A = parameter(_uniform(rng, kshape, limit))
        self.B = parameter(_uniform(rng, kshape, limit))
        self.bias_re = parameter(np.zeros(out_ch, dtype=dtype()))
        self.bias_im = parameter(np.zeros(out_ch, dtype=dtype()))

    def _block_kernel(self):
        """One real kernel over stacked planes equivalent to the complex rule.

        Forward conv rows are output planes: [[A, -B], [B, A]]; the
        transposed layout has rows as input planes, giving [[A, B], [-B, A]].
        """
        neg_b = ad.mul(self.B, -1.0)
        if self.transposed:
            top = ad.concat([self.A, self.B], axis=1)
            bottom = ad.concat([neg_b, self.A], axis=1)
        else:
            top = ad.concat([self.A, neg_b], axis=1)
            bottom = ad.concat([self.B, self.A], axis=1)
        return ad.concat([top, bottom], axis=0)

    def forward(self, h):
        if h.re.data.shape[1] != self.in_ch:
            raise ShapeError(f"expected {self.in_ch} input channels, got {h.re.data.shape[1]}")
        pad = (self.freq_pad, self.time_pad)
        x = ad.concat([h.re, h.im], axis=1)
        k = self._block_kernel()
        if self.transposed:
            out_f = x.data.shape[2] * self.stride[0]
            out = ad.conv_transpose2d(x, k, self.stride, pad, (out_f, x.data.shape[3]))
        else:
            out = ad.conv2d(x, k, self.stride, pad)
        re = ad.getitem(out, (slice(None), slice(0, self.out_ch)))
        im = ad.getitem(out, (slice(None), slice(self.out_ch, 2 * self.out_ch)))
        br = ad.reshape(self.bias_re, (1, self.out_ch, 1, 1))
        bi = ad.reshape(self.bias_im, (1, self.out_ch, 1, 1))
        return ComplexTensor(ad.add(re, br), ad.add(im, bi))


class ComplexBatchNorm2d(Module):
    """Naive complex batch norm: each plane normalized per channel."""

    def __init__(self, ch, momentum=0.9, eps=1e-5):
        super().__init__()
        self.ch, self.momentum, self.eps = ch, momentum, eps
        self.gamma_re = parameter(np.ones(ch, dtype=dtype()))
        self.gamma_im = parameter(np.ones(ch, dtype=dtype()))
        self.beta_re = parameter(np.zeros(ch, dtype=dtype()))
        self.beta_im = parameter(np.zeros(ch, dtype=dtype()))
        self.register_buffer("run_mean", np.zeros((2, ch), dtype=np.float64))
        self.register_buffer("run_var", np.ones((2, ch), dtype=np.float64))
        self.register_buffer("initialized", np.zeros(1, dtype=np.float64))

    def _norm_plane(self, x, plane, gamma, beta):
        cshape = (1, self.ch, 1, 1)
        if self.training:
            if x.data.shape[0] * x.data.shape[2] * x.data.shape[3] < 2:
                raise ContractError("batch norm needs batch*spatial > 1 in training mode")
            mean = ad.tmean(x, axis=(0, 2, 3), keepdims=True)
            centered = ad.sub(x, mean)
            var = ad.tmean(ad.mul(centered, centered), axis=(0, 2, 3), keepdims=True)
            m = self.momentum
            self.run_mean[plane] = m * self.run_mean[plane] + (1 - m) * mean.data.reshape(-1)
            self.run_var[plane] = m * self.run_var[plane] + (1 - m) * var.data.reshape(-1)
            self.initialized[0] = 1.0
        else:
            if not self.initialized[0]:
                raise ContractError("batch norm used in eval mode before any training batch")
            mean = Tensor(self.run_mean[plane].reshape(cshape).astype(x.data.dtype))
            var = Tensor(self.run_var[plane].reshape(cshape).astype(x.data.dtype))
            centered = ad.sub(x, mean)
        inv = ad.power(ad.add(var, self.eps), -0.5)
        out = ad.mul(centered, inv)
        return ad.add(ad.mul(out, ad.reshape(gamma, cshape)), ad.reshape(beta, cshape))

    def forward(self, h):
        return ComplexTensor(self._norm_plane(h.re, 0, self.gamma_re, self.beta_re),
                             self._norm_plane(h.im, 1, self.gamma_im, self.beta_im))


class PReLU(Module):
    """Per-channel learned rectifier; complex features share one slope set."""

    def __init__(self, ch, init=0.25):
        super().__init__()
        self.alpha = parameter(np.full(ch, init, dtype=dtype()))

    def forward(self, x):
        if isinstance(x, ComplexTensor):
            return ComplexTensor(ad.prelu(x.re, self.alpha), ad.prelu(x.im, self.alpha))
        return ad.prelu(x, self.alpha)


class LSTM(Module):
    """Single-direction LSTM layer; input [T, B, in] -> output [T, B, hidden]."""

    def __init__(self, input_size, hidden, rng, reverse=False):
        super().__init__()
        self.input_size, self.hidden, self.reverse = input_size, hidden, reverse
        limit = 1.0 / np.sqrt(hidden)
        self.w_ih = parameter(_uniform(rng, (input_size, 4 * hidden), limit))
        self.w_hh = parameter(_uniform(rng, (hidden, 4 * hidden), limit))
        bias = np.zeros(4 * hidden, dtype=dtype())
        bias[hidden:2 * hidden] = 1.0  # forget gate bias keeps early memory open
        self.bias = parameter(bias)

    def forward(self, seq):
        T, B = seq.data.shape[0], seq.data.shape[1]
        if T < 1:
            raise ShapeError("empty sequence")
        H = self.hidden
        h = Tensor(np.zeros((B, H), dtype=seq.data.dtype))
        c = Tensor(np.zeros((B, H), dtype=seq.data.dtype))
        order = range(T - 1, -1, -1) if self.reverse else range(T)
        outs = [None] * T
        for t in order:
            x_t = ad.getitem(seq, t)
            gates = ad.add(ad.add(ad.matmul(x_t, self.w_ih), ad.matmul(h, self.w_hh)), self.bias)
            i = ad.sigmoid(ad.getitem(gates, (slice(None), slice(0, H))))
            f = ad.sigmoid(ad.getitem(gates, (slice(None), slice(H, 2 * H))))
            g = ad.tanh(ad.getitem(gates, (slice(None), slice(2 * H, 3 * H))))
            o = ad.sigmoid(ad.getitem(gates, (slice(None), slice(3 * H, 4 * H))))
            c = ad.add(ad.mul(f, c), ad.mul(i, g))
            h = ad.mul(o, ad.tanh(c))
            outs[t] = h
        return ad.stack(outs, axis=0)


class LSTMStack(Module):
    """Stacked (optionally bidirectional) LSTM layers."""

    def __init__(self, input_size, hidden, layers, rng, bidirectional=False):
        super().__init__()
        self.bidirectional = bidirectional
        self.hidden_out = hidden * (2 if bidirectional else 1)
        size = input_size
        for i in range(layers):
            setattr(self, f"fwd{i}", LSTM(size, hidden, rng))
            if bidirectional:
                setattr(self, f"bwd{i}", LSTM(size, hidden, rng, reverse=True))
            size = self.hidden_out
        self.layers = layers

    def forward(self, seq):
        out = seq
        for i in range(self.layers):
            fwd = getattr(self, f"fwd{i}").forward(out)
            if self.bidirectional:
                bwd = getattr(self, f"bwd{i}").forward(out)
                out = ad.concat([fwd, bwd], axis=2)
            else:
                out = fwd
        return out


class ComplexLSTM(Module):
    """Complex LSTM: two real stacks combined across input planes.

    The default combination is im = (ri - ir); set conventional_sign for the
    usual complex-product sign im = (ri + ir).
    """

    def __init__(self, input_size, hidden, layers, rng, bidirectional=False,
                 conventional_sign=False):
        super().__init__()
        self.lstm_r = LSTMStack(input_size, hidden, layers, rng, bidirectional)
        self.lstm_i = LSTMStack(input_size, hidden, layers, rng, bidirectional)
        self.conventional_sign = conventional_sign
        self.hidden_out = self.lstm_r.hidden_out

    def forward(self, h):
        v_rr = self.lstm_r.forward(h.re)
        v_ir = self.lstm_i.forward(h.re)
        v_ri = self.lstm_r.forward(h.im)
        v_ii = self.lstm_i.forward(h.im)
        re = ad.sub(v_rr, v_ii)
        im = ad.add(v_ri, v_ir) if self.conventional_sign else ad.sub(v_ri, v_ir)
        return ComplexTensor(re, im)


class Linear(Module):
    def __init__(self, in_features, out_features, rng):
        super().__init__()
        self.w = parameter(glorot(rng, (in_features, out_features), in_features, out_features))
        self.b = parameter(np.zeros(out_features, dtype=dtype()))

    def forward(self, x):
        return ad.add(ad.matmul(x, self.w), self.b)


class ComplexLinear(Module):
    def __init__(self, in_features, out_features, rng):
        super().__init__()
        limit = np.sqrt(6.0 / (in_features + out_features)) / np.sqrt(2.0)
        self.wr = parameter(_uniform(rng, (in_features, out_features), limit))
        self.wi = parameter(_uniform(rng, (in_features, out_features), limit))
        self.br = parameter(np.zeros(out_features, dtype=dtype()))
        self.bi = parameter(np.zeros(out_features, dtype=dtype()))

    def forward(self, h):
        re = ad.add(ad.sub(ad.matmul(h.re, self.wr), ad.matmul(h.im, self.wi)), self.br)
        im = ad.add(ad.add(ad.matmul(h.re, self.wi), ad.matmul(h.im, self.wr)), self.bi)
        return ComplexTensor(re, im)


def spectral_normalize(w, u, n_power_iters=1, eps=1e-12):
    """Divide w by its estimated top singular value.

    w is a parameter Tensor viewed as [out, -1]; u is the persistent left
    singular-vector estimate (updated in place by the usual power-iteration
    rule). The singular value is read off the Krylov subspace the iterations
    sweep out (Rayleigh-Ritz), which coincides with the plain estimate for a
    single iteration but converges much faster for many. The resulting u, v
    enter the graph as constants, so gradients flow only through w itself,
    and sigma = u^T W v holds exactly.
    """
    out_dim = w.data.shape[0]
    W = w.data.reshape(out_dim, -1)
    basis = []
    for _ in range(max(n_power_iters, 1)):
        v = W.T @ u
        v /= (np.linalg.norm(v) + eps)
        basis.append(v)
        u_new = W @ v
        u_new /= (np.linalg.norm(u_new) + eps)
        u[:] = u_new
    q, _ = np.linalg.qr(np.stack(basis, axis=1))
    ub, s, vbt = np.linalg.svd(W @ q, full_matrices=False)
    u_best = ub[:, 0]
    v_best = q @ vbt[0]
    sigma_val = s[0]
    w_mat = ad.reshape(w, (out_dim, -1))
    sigma = ad.matmul(Tensor(u_best.astype(w.data.dtype)),
                      ad.matmul(w_mat, Tensor(v_best.astype(w.data.dtype))))
    if abs(sigma_val) < eps:
        return ad.mul(w, 1.0 / eps)
    return ad.div(w, sigma)


class SNConv1d(Module):
    """Spectrally normalized 1-D convolution, symmetric zero padding."""

    def __init__(self, in_ch, out_ch, rng, kernel=31, stride=2, n_power_iters=1):
        super().__init__()
        self.stride = stride
        self.pad = ((kernel - 1) // 2, kernel // 2)
        self.n_power_iters = n_power_iters
        self.w = parameter(glorot(rng, (out_ch, in_ch, kernel),
                                  in_ch * kernel, out_ch * kernel))
        self.b = parameter(np.zeros(out_ch, dtype=dtype()))
        u = rng.standard_normal(out_ch)
        self.register_buffer("u", u / np.linalg.norm(u))

    def forward(self, x):
        w_sn = spectral_normalize(self.w, self.u, self.n_power_iters)
        out = ad.conv1d(x, w_sn, self.stride, self.pad)
        return ad.add(out, ad.reshape(self.b, (1, -1, 1)))


class SNLinear(Module):
    """Spectrally normalized fully connected layer with linear activation."""

    def __init__(self, in_features, out_features, rng, n_power_iters=1):
        super().__init__()
        self.n_power_iters = n_power_iters
        self.w = parameter(glorot(rng, (out_features, in_features), in_features, out_features))
        self.b = parameter(np.zeros(out_features, dtype=dtype()))
        u = rng.standard_normal(out_features)
        self.register_buffer("u", u / np.linalg.norm(u))

    def forward(self, x):
        w_sn = spectral_normalize(self.w, self.u, self.n_power_iters)
        return ad.add(ad.matmul(x, ad.transpose(w_sn)), self.b)
