"""Complex values as split real/imaginary planes.

The planes may be numpy arrays (oracle / data paths) or autodiff Tensors
(model paths); everything here sticks to operations both support.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def _shape(x):
    return tuple(x.shape)


@dataclass
class ComplexTensor:
    """A complex array stored as separate real and imaginary planes."""

    re: object
    im: object

    def __post_init__(self):
        if _shape(self.re) != _shape(self.im):
            raise ShapeError(f"re/im shape mismatch: {_shape(self.re)} vs {_shape(self.im)}")

    @property
    def shape(self):
        return _shape(self.re)

    @classmethod
    def zeros(cls, shape, dtype=np.float64):
        return cls(np.zeros(shape, dtype), np.zeros(shape, dtype))

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z)
        return cls(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))

    def to_complex(self):
        re = self.re.data if hasattr(self.re, "data") else self.re
        im = self.im.data if hasattr(self.im, "data") else self.im
        return np.asarray(re) + 1j * np.asarray(im)

    def conj(self):
        return ComplexTensor(self.re, -self.im)

    def __add__(self, other):
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return ComplexTensor(self.re - other.re, self.im - other.im)

    def __mul__(self, other):
        return complex_elementwise_mul(self, other)


def _broadcast_ok(a, b):
    """b must match a, or be broadcastable against a's trailing dims."""
    try:
        np.broadcast_shapes(a, b)
    except ValueError:
        return False
    return True


def complex_elementwise_mul(a, b):
    """(a.re + j a.im) * (b.re + j b.im), elementwise."""
    if not _broadcast_ok(a.shape, b.shape):
        raise ShapeError(f"complex mul shape mismatch: {a.shape} vs {b.shape}")
    re = a.re * b.re - a.im * b.im
    im = a.re * b.im + a.im * b.re
    return ComplexTensor(re, im)
