import pytest

from anisodiff.domain import AnisotropyParams, DomainBox


@pytest.fixture
def params23():
    return AnisotropyParams(p=2, q=3)


@pytest.fixture
def box64():
    return DomainBox(1.0, 1.0, 64, 64)


@pytest.fixture
def box128():
    return DomainBox(1.0, 1.0, 128, 128)
