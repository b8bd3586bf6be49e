import pytest

from namexpand.abbrev import default_acronym_dict, default_lookup_dict
from namexpand.segment import default_lexicon, default_vocabulary


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def lookup():
    return default_lookup_dict()


@pytest.fixture(scope="session")
def acronyms():
    return default_acronym_dict()
