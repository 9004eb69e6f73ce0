import pytest

from cargokg.events import VocabularyMap


@pytest.fixture
def vocab():
    return VocabularyMap()


@pytest.fixture(scope="session")
def session_vocab():
    return VocabularyMap()
