import pytest

from streamcoach.catalog import default_catalog
from streamcoach.core import build_vocabulary


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def vocab(catalog):
    return build_vocabulary(catalog.all_template_word_sequences())
