import pytest

from compse.precision import set_precision


@pytest.fixture(autouse=True)
def _float64_default():
    """Numerical tests assume 64-bit; training tests switch locally."""
    set_precision("float64")
    yield
    set_precision("float64")
