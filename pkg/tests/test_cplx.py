"""Split-plane complex container semantics against numpy complex."""

import numpy as np
import pytest

from compse.cplx import ComplexTensor, complex_elementwise_mul
from compse.errors import ShapeError


def test_roundtrip_through_numpy_complex():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    ct = ComplexTensor.from_complex(z)
    assert np.array_equal(ct.to_complex(), z)


def test_elementwise_mul_matches_numpy():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
    b = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
    out = complex_elementwise_mul(ComplexTensor.from_complex(a),
                                  ComplexTensor.from_complex(b))
    assert np.allclose(out.to_complex(), a * b)


def test_operators_and_conj():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((4,)) + 1j * rng.standard_normal((4,))
    b = rng.standard_normal((4,)) + 1j * rng.standard_normal((4,))
    ca, cb = ComplexTensor.from_complex(a), ComplexTensor.from_complex(b)
    assert np.allclose((ca + cb).to_complex(), a + b)
    assert np.allclose((ca - cb).to_complex(), a - b)
    assert np.allclose((ca * cb).to_complex(), a * b)
    assert np.allclose(ca.conj().to_complex(), np.conj(a))


def test_broadcastable_trailing_dims():
    a = ComplexTensor.from_complex(np.ones((2, 3, 4)) + 0j)
    b = ComplexTensor.from_complex(2j * np.ones((3, 4)))
    out = complex_elementwise_mul(a, b)
    assert out.re.shape == (2, 3, 4)
    assert np.allclose(out.to_complex(), 2j * np.ones((2, 3, 4)))


def test_plane_shape_mismatch_rejected():
    with pytest.raises(ShapeError):
        ComplexTensor(np.zeros((2, 3)), np.zeros((3, 2)))


def test_incompatible_mul_shapes_rejected():
    a = ComplexTensor(np.zeros((2, 3)), np.zeros((2, 3)))
    b = ComplexTensor(np.zeros((2, 4)), np.zeros((2, 4)))
    with pytest.raises(ShapeError):
        complex_elementwise_mul(a, b)
