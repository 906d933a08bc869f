"""Shared fixtures: paths and preloaded toy vocabulary/corpus."""

from pathlib import Path

import pytest

from cuiwb import Corpus, VocabularyIndex, import_corpus, load_index

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def toy_index() -> VocabularyIndex:
    return load_index(FIXTURES / "toy_vocab.tsv")


@pytest.fixture()
def toy_corpus() -> Corpus:
    return import_corpus((FIXTURES / "toy_corpus.json").read_bytes())


@pytest.fixture(scope="session")
def vocab_path() -> Path:
    return FIXTURES / "toy_vocab.tsv"
