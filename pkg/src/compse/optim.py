"""Adam update rule with bias correction."""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError


@dataclass
class AdamState:
    """First/second moment estimates for one parameter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(m=np.zeros_like(param.data), v=np.zeros_like(param.data),
                   beta1=beta1, beta2=beta2, eps=eps)


def adam_update(param, state, lr):
    """Apply one bias-corrected Adam step in place; caller zeroes the grad."""
    grad = param.grad
    if grad is None:
        grad = np.zeros_like(param.data)
    if grad.shape != param.data.shape or state.m.shape != param.data.shape:
        raise ShapeError(f"adam state/grad shape mismatch for parameter {param.name or param.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient for parameter {param.name or param.shape}; update refused")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    param.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.data.dtype)


class Adam:
    """Adam over a named parameter list, one AdamState per parameter."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.states = [AdamState.for_param(p, beta1, beta2, eps) for p in self.params]

    def step(self):
        for p, s in zip(self.params, self.states):
            adam_update(p, s, self.lr)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
