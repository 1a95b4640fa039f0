import numpy as np
import pytest

from readrank.corpus import Corpus, Document, build_corpus


def make_corpus(rows, dim=None):
    """Corpus from (doc_id, slug, level, vector-or-None) tuples."""
    docs = []
    for doc_id, slug, level, vec in rows:
        vector = None if vec is None else np.asarray(vec, dtype=float)
        docs.append(Document(doc_id=doc_id, slug_id=slug, level=float(level), vector=vector))
    corpus = build_corpus(docs)
    if dim is not None:
        assert corpus.dim == dim
    return corpus


@pytest.fixture
def two_doc_corpus() -> Corpus:
    return make_corpus([
        ("d-hi", "s1", 3.0, [1.0, 0.0]),
        ("d-lo", "s1", 1.0, [0.0, 1.0]),
    ])


@pytest.fixture
def three_level_corpus() -> Corpus:
    return make_corpus([
        ("a2", "s1", 2.0, [2.0, 0.0]),
        ("a1", "s1", 1.0, [1.0, 0.0]),
        ("a0", "s1", 0.0, [0.0, 0.0]),
        ("b2", "s2", 2.0, [2.0, 1.0]),
        ("b1", "s2", 1.0, [1.0, 1.0]),
        ("b0", "s2", 0.0, [0.0, 1.0]),
    ])


def random_separable_corpus(n_slugs, levels, dim, seed, noise=0.05):
    """Thin wrapper over the product generator with mild noise."""
    from readrank.synth import generate_corpus

    corpus, truth, _ = generate_corpus(n_slugs, levels, dim, noise, seed=seed)
    return corpus, truth
