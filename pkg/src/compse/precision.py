"""Global floating-point precision switch.

Gradient checks need float64 headroom, so that is the default; training
flips to float32 for speed. The switch affects newly created tensors only.
"""

import contextlib

import numpy as np

_DTYPE = np.float64


def dtype():
    """Current global floating dtype."""
    return _DTYPE


def set_precision(name):
    """Set the global dtype; name is 'float32'/'f32' or 'float64'/'f64'."""
    global _DTYPE
    table = {
        "float32": np.float32,
        "f32": np.float32,
        "float64": np.float64,
        "f64": np.float64,
    }
    if name not in table:
        raise ValueError(f"unknown precision {name!r}")
    _DTYPE = table[name]


@contextlib.contextmanager
def use_precision(name):
    """Temporarily switch precision inside a with-block."""
    global _DTYPE
    saved = _DTYPE
    set_precision(name)
    try:
        yield
    finally:
        _DTYPE = saved
