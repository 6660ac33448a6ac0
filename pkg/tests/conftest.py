import pytest

from lmmtc import autodiff as ad


@pytest.fixture(autouse=True)
def clean_tape():
    ad.active_tape().clear()
    yield
    ad.active_tape().clear()
