"""Shared fixtures: dictionary, templates, and cached synthetic corpora."""

import pytest

from crashkit.dictionary import load_dictionary
from crashkit.sampler import SyntheticSpec, generate_synthetic
from crashkit.textualize import load_templates


@pytest.fixture(scope="session")
def dictionary():
    return load_dictionary()


@pytest.fixture(scope="session")
def templates(dictionary):
    return load_templates(dictionary=dictionary)


@pytest.fixture(scope="session")
def corpus_small(dictionary):
    """500 records, enough for text/whatif behavior tests."""
    return generate_synthetic(SyntheticSpec(n_records=500, seed=4242))


@pytest.fixture(scope="session")
def corpus_medium(dictionary):
    """5,000 records, used where class coverage or effect ratios matter."""
    return generate_synthetic(SyntheticSpec(n_records=5000, seed=20220101))
