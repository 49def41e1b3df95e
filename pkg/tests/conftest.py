import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus_synth import synth_corpus  # noqa: E402

from stegotext.metrics import contexts_from_corpus  # noqa: E402
from stegotext.models import ToyModel, iid_model, train_ngram  # noqa: E402


@pytest.fixture(scope="session")
def news_docs():
    return synth_corpus()


@pytest.fixture(scope="session")
def news_model(news_docs):
    """The built-in evaluation model: order-2, lightly smoothed."""
    return train_ngram(news_docs, order=2, alpha=0.15)


@pytest.fixture(scope="session")
def news_contexts(news_docs, news_model):
    return contexts_from_corpus(news_docs[:24], news_model)


@pytest.fixture(scope="session")
def storybook():
    return ToyModel.storybook()


@pytest.fixture()
def half_quarter_model():
    """i.i.d. {A: 1/2, B: 1/4, C: 1/4}; exactly dyadic."""
    return iid_model({"A": "0.5", "B": "0.25", "C": "0.25"})


@pytest.fixture()
def skewed4_model():
    """i.i.d. {A: 0.4, B: 0.3, C: 0.2, D: 0.1}."""
    return iid_model({"A": "0.4", "B": "0.3", "C": "0.2", "D": "0.1"})
