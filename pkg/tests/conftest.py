import os

import numpy as np
import pytest

from porte.dataset import scan_corpus
from porte.generate import generate_dataset
from porte.toycorpus import make_toy_corpus

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy_corpus")
    tsv = make_toy_corpus(str(root), seed=0)
    return str(root), tsv


@pytest.fixture(scope="session")
def toy_utterances(toy_corpus):
    root, tsv = toy_corpus
    return scan_corpus(root, tsv).records


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory, toy_corpus, toy_utterances):
    out = str(tmp_path_factory.mktemp("small_dataset"))
    records = generate_dataset(toy_utterances, out, 60, master_seed=11, corpus_root=toy_corpus[0])
    return out, records


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tone(freq, seconds, sr=16000, amp=1.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def dataset_path(root, rel):
    return os.path.join(root, rel)
