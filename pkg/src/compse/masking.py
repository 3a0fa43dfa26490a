"""Complex ratio mask oracle and the three mask application strategies.

Masks carry a mode tag so a mask estimated for one application strategy
cannot silently be applied with another. Application functions accept
numpy planes or autodiff Tensors alike.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .cplx import ComplexTensor
from .errors import ContractError, ShapeError

MASK_MODES = ("crm", "polar", "real")
CRM_EPS = 1e-8


@dataclass
class MaskEstimate:
    """Decoder mask output: two real planes plus the application mode."""

    m_re: object
    m_im: object
    mode: str

    def __post_init__(self):
        if self.mode not in MASK_MODES:
            raise ContractError(f"unknown mask mode {self.mode!r}")
        if tuple(self.m_re.shape) != tuple(self.m_im.shape):
            raise ShapeError(f"mask plane shapes differ: {self.m_re.shape} vs {self.m_im.shape}")


def _check_mode(mask, expected):
    if mask.mode != expected:
        raise ContractError(f"mask mode is {mask.mode!r}, expected {expected!r}")


def oracle_crm(x, y):
    """Ideal complex ratio mask between noisy spectrum x and clean spectrum y.

    Elementwise complex division y/x with the denominator floored; applying
    this mask in crm mode reconstructs y wherever x carries energy.
    """
    if x.shape != y.shape:
        raise ShapeError(f"spectra shapes differ: {x.shape} vs {y.shape}")
    denom = np.maximum(x.re * x.re + x.im * x.im, CRM_EPS)
    m_re = (x.re * y.re + x.im * y.im) / denom
    m_im = (x.re * y.im - x.im * y.re) / denom
    return MaskEstimate(m_re, m_im, "crm")


def apply_mask_crm(x, mask):
    """Complex product of the noisy spectrum with the mask."""
    _check_mode(mask, "crm")
    re = x.re * mask.m_re - x.im * mask.m_im
    im = x.re * mask.m_im + x.im * mask.m_re
    return ComplexTensor(re, im)


def _is_tensor(v):
    return isinstance(v, Tensor)


def apply_mask_polar(x, mask):
    """Multiplicative magnitude, additive phase.

    The mask magnitude is bounded with tanh before use; the phase comes from
    the unbounded mask components via atan2(im, re).
    """
    _check_mode(mask, "polar")
    if _is_tensor(mask.m_re) or _is_tensor(x.re):
        mr, mi = ad.as_tensor(mask.m_re), ad.as_tensor(mask.m_im)
        xr, xi = ad.as_tensor(x.re), ad.as_tensor(x.im)
        m_mag = ad.tanh(ad.sqrt(ad.add(ad.add(ad.mul(mr, mr), ad.mul(mi, mi)), 1e-12)))
        m_phase = ad.atan2(mi, mr)
        x_mag = ad.sqrt(ad.add(ad.add(ad.mul(xr, xr), ad.mul(xi, xi)), 1e-12))
        x_phase = ad.atan2(xi, xr)
        mag = ad.mul(x_mag, m_mag)
        phase = ad.add(x_phase, m_phase)
        return ComplexTensor(ad.mul(mag, ad.cos(phase)), ad.mul(mag, ad.sin(phase)))
    m_mag = np.tanh(np.hypot(mask.m_re, mask.m_im))
    m_phase = np.arctan2(mask.m_im, mask.m_re)
    x_mag = np.hypot(x.re, x.im)
    x_phase = np.arctan2(x.im, x.re)
    mag = x_mag * m_mag
    phase = x_phase + m_phase
    return ComplexTensor(mag * np.cos(phase), mag * np.sin(phase))


def apply_mask_real(x, mask):
    """Plane-wise real masking: re by m_re, im by m_im."""
    _check_mode(mask, "real")
    return ComplexTensor(x.re * mask.m_re, x.im * mask.m_im)


def apply_mask(x, mask):
    return {"crm": apply_mask_crm, "polar": apply_mask_polar, "real": apply_mask_real}[mask.mode](x, mask)
