import pytest

from helixchaos.io import load_appendix_fixture


@pytest.fixture(scope="session")
def appendix():
    return load_appendix_fixture()
