"""Acceptance suite: one test per shipped correctness criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion, including its runtime against the stated budget.
"""

import functools
import itertools
import math
import time

import numpy as np
import pytest

from readrank.corpus import Document, build_corpus
from readrank.errors import ValidationError
from readrank.harness import ExperimentConfig, run_cross_corpus, run_cross_lingual, run_cv
from readrank.metrics import SlugEvaluation, kendall, ndcg, spearman
from readrank.errors import MetricUndefinedError
from readrank.models import (
    TrainConfig,
    init_mlp,
    mse_gradient,
    mse_loss,
    nprm_batch_loss,
    nprm_gradient,
    softmax_ce_gradient,
    softmax_ce_loss,
    train_ols,
)
from readrank.pairs import PairExample, build_pairset, pair_label, subsample_slug
from readrank.ranker import RankingInput, rank_nprm
from readrank.stats import PairedSample, wilcoxon_signed_rank
from readrank.synth import generate_corpus

from conftest import make_corpus
from test_metrics import oracle_kendall, oracle_ndcg, oracle_spearman
from test_stats import oracle_exact_p


def criterion(num, title, budget_seconds):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
                elapsed = time.perf_counter() - start
                assert elapsed < budget_seconds, (
                    f"criterion {num} exceeded its {budget_seconds}s budget: {elapsed:.1f}s"
                )
            except BaseException:
                elapsed = time.perf_counter() - start
                print(f"ACCEPTANCE {num:02d} FAIL {title} ({elapsed:.1f}s)")
                raise
            print(f"ACCEPTANCE {num:02d} PASS {title} ({elapsed:.1f}s)")
        return wrapper
    return decorate


def fd_gradients(loss_fn, arrays, h=1e-5):
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            lp = loss_fn()
            arr[idx] = orig - h
            lm = loss_fn()
            arr[idx] = orig
            g[idx] = (lp - lm) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-5)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


@criterion(1, "gradient correctness vs central finite differences", 60)
def test_criterion_1_gradients():
    rng = np.random.default_rng(1001)
    doc_dim = 3
    corpus = make_corpus([
        ("p0", "s", 3.0, rng.standard_normal(doc_dim).tolist()),
        ("p1", "s", 2.0, rng.standard_normal(doc_dim).tolist()),
        ("p2", "s", 1.0, rng.standard_normal(doc_dim).tolist()),
    ])
    batch = [
        PairExample("p0", "p1", (1, 0)),
        PairExample("p1", "p0", (0, 1)),
        PairExample("p0", "p2", (1, 0)),
        PairExample("p2", "p1", (0, 1)),
    ]
    for draw in range(100):
        l2 = 1e-4 if draw % 2 else 0.0

        params = init_mlp(3 * doc_dim, 4, 2, rng, combiner="concat-diff")
        analytic = nprm_gradient(params, batch, corpus, l2=l2)
        numeric = fd_gradients(lambda: nprm_batch_loss(params, batch, corpus, l2=l2),
                               params.arrays())
        assert max_rel_err(analytic.arrays(), numeric) <= 1e-4

        params = init_mlp(doc_dim, 4, 1, rng)
        x = rng.standard_normal((5, doc_dim))
        y = rng.standard_normal(5)
        analytic = mse_gradient(params, x, y, l2=l2)
        numeric = fd_gradients(lambda: mse_loss(params, x, y, l2=l2), params.arrays())
        assert max_rel_err(analytic.arrays(), numeric) <= 1e-4

        params = init_mlp(doc_dim, 4, 3, rng)
        x = rng.standard_normal((5, doc_dim))
        onehot = np.zeros((5, 3))
        for row in range(5):
            onehot[row, rng.integers(0, 3)] = 1.0
        analytic = softmax_ce_gradient(params, x, onehot, l2=l2)
        numeric = fd_gradients(lambda: softmax_ce_loss(params, x, onehot, l2=l2),
                               params.arrays())
        assert max_rel_err(analytic.arrays(), numeric) <= 1e-4


@criterion(2, "pair construction: swap-closed, intra-slug, >= labels", 10)
def test_criterion_2_pairs():
    rng = np.random.default_rng(2002)
    docs = []
    for s in range(1000):
        size = int(rng.integers(2, 7))
        for i in range(size):
            docs.append(Document(
                doc_id=f"s{s:04d}x{i}", slug_id=f"s{s:04d}",
                level=float(rng.integers(0, 13)),
                vector=rng.standard_normal(2),
            ))
    corpus = build_corpus(docs)
    pairset = build_pairset(corpus, m=3, seed=11)

    by_slug = {}
    seen = {}
    for p in pairset.pairs:
        assert p.left != p.right
        dl = corpus.documents[p.left]
        dr = corpus.documents[p.right]
        assert dl.slug_id == dr.slug_id, "cross-slug pair"
        assert p.label == pair_label(dl.level, dr.level), "label rule violated"
        seen[(p.left, p.right)] = p.label
        by_slug[dl.slug_id] = by_slug.get(dl.slug_id, 0) + 1

    for (left, right), label in seen.items():
        assert (right, left) in seen, "not swap-closed"
        dl, dr = corpus.documents[left], corpus.documents[right]
        if dl.level != dr.level:
            assert seen[(right, left)] == (label[1], label[0])
            assert (label == (1, 0)) != (seen[(right, left)] == (1, 0))

    for slug_id, count in by_slug.items():
        k = len(subsample_slug(corpus.slugs[slug_id], corpus, 3, 11))
        assert count == k * (k - 1)
    assert len(by_slug) == 1000


@criterion(3, "metric oracles: exhaustive brute-force agreement (n <= 5)", 60)
def test_criterion_3_metric_oracles():
    values = (0, 1, 2)
    for n in (2, 3, 4, 5):
        for truth in itertools.product(values, repeat=n):
            truth_l = list(truth)
            for pred in itertools.product(values, repeat=n):
                pred_l = [float(v) for v in pred]
                ev = SlugEvaluation("x", truth_l, pred_l)

                expected = oracle_ndcg(truth_l, list(pred))
                if expected is None:
                    with pytest.raises(MetricUndefinedError):
                        ndcg(ev)
                else:
                    assert abs(ndcg(ev) - expected) <= 1e-12

                expected = oracle_spearman(truth_l, list(pred))
                if expected is None:
                    with pytest.raises(MetricUndefinedError):
                        spearman(ev)
                else:
                    assert abs(spearman(ev) - expected) <= 1e-12

                expected = oracle_kendall(truth_l, list(pred))
                if expected is None:
                    with pytest.raises(MetricUndefinedError):
                        kendall(ev)
                else:
                    assert abs(kendall(ev) - expected) <= 1e-12


@criterion(4, "Wilcoxon exact p equals full 2^n enumeration (n <= 12)", 10)
def test_criterion_4_wilcoxon():
    result = wilcoxon_signed_rank(PairedSample([1, 2, 3, 4, 5, 6], [0] * 6))
    assert result.p_two_sided == 0.03125

    rng = np.random.default_rng(4004)
    checked = 0
    while checked < 80:
        n = int(rng.integers(1, 13))
        a = rng.integers(-4, 5, size=n) / 2.0
        b = rng.integers(-4, 5, size=n) / 2.0
        if np.all(a - b == 0):
            continue
        result = wilcoxon_signed_rank(PairedSample(a, b))
        assert result.method == "exact"
        assert result.p_two_sided == oracle_exact_p((a - b).tolist())
        checked += 1


@criterion(5, "within-corpus CV replication near ceiling", 300)
def test_criterion_5_within_corpus():
    def pooled(seed):
        corpus, _, _ = generate_corpus(200, 3, 16, 0.1, seed=seed)
        cfg = ExperimentConfig(family="nprm", train=TrainConfig(), k=5, m=3, seed=seed)
        return run_cv(cfg, corpus=corpus).metrics.aggregates

    agg7 = pooled(7)
    assert agg7["ra"] >= 0.95
    assert agg7["ndcg"] >= 0.99
    for seed in range(1, 11):
        agg = agg7 if seed == 7 else pooled(seed)
        assert agg["ra"] >= 0.90, f"seed {seed} RA {agg['ra']:.3f} below hard floor"


@criterion(6, "cross-corpus robustness: NPRM drop < regressor drop on >= 4/5 seeds", 600)
def test_criterion_6_cross_corpus_robustness():
    # per-source grade miscalibration (slug-level noise) is the regime where
    # pairwise training's slug scoping pays off; the 30-degree rotation is the
    # distribution shift
    wins = 0
    details = []
    for seed in (1, 2, 3, 4, 5):
        train, _, _ = generate_corpus(200, 3, 16, 0.1, seed=seed, slug_noise=3.0)
        test, _, _ = generate_corpus(150, 3, 16, 0.1, seed=seed + 1000, space_seed=seed,
                                     rotation=30, slug_noise=3.0)
        drops = {}
        for family, tcfg in (("nprm", TrainConfig()),
                             ("mlp-regressor", TrainConfig(learning_rate=0.005))):
            cfg = ExperimentConfig(family=family, train=tcfg, k=5, m=3, seed=seed)
            within = run_cv(cfg, corpus=train).metrics.aggregates["ra"]
            cross = run_cross_corpus(cfg, train_corpus=train,
                                     test_corpus=test).metrics.aggregates["ra"]
            drops[family] = within - cross
        wins += drops["nprm"] < drops["mlp-regressor"]
        details.append(f"seed {seed}: nprm {drops['nprm']:+.3f} "
                       f"regressor {drops['mlp-regressor']:+.3f}")
    assert wins >= 4, "NPRM won only %d/5:\n%s" % (wins, "\n".join(details))


@criterion(7, "cross-lingual: aligned >= 0.8 RA, unaligned < 0.6 with warning", 300)
def test_criterion_7_cross_lingual():
    train, _, _ = generate_corpus(120, 3, 32, 0.1, seed=3)
    aligned, _, _ = generate_corpus(80, 3, 32, 0.1, seed=1003, space_seed=3, lang="fr")
    unaligned, _, _ = generate_corpus(80, 3, 32, 0.1, seed=1003, space_seed=3, lang="fr",
                                      rotation="random")
    cfg = ExperimentConfig(family="nprm", train=TrainConfig(), seed=3)

    report = run_cross_lingual(cfg, train_corpus=train, test_corpus=aligned)
    assert report.metrics.aggregates["ra"] >= 0.8
    assert report.warnings == []
    assert report.languages == {"train": ["en"], "test": ["fr"]}

    report = run_cross_lingual(cfg, train_corpus=train, test_corpus=unaligned)
    assert report.metrics.aggregates["ra"] < 0.6
    assert any("may not be aligned" in w for w in report.warnings)


@criterion(8, "determinism: identical config + seed -> byte-identical report", 120)
def test_criterion_8_determinism():
    corpus, _, _ = generate_corpus(30, 3, 8, 0.1, seed=17)
    test, _, _ = generate_corpus(15, 3, 8, 0.1, seed=18, space_seed=17, lang="es")
    cv_cfg = ExperimentConfig(family="nprm", train=TrainConfig(epochs=8), k=3, seed=17)
    assert run_cv(cv_cfg, corpus=corpus).to_json() == run_cv(cv_cfg, corpus=corpus).to_json()
    xl_cfg = ExperimentConfig(family="ranksvm", train=TrainConfig(epochs=8), seed=17)
    a = run_cross_lingual(xl_cfg, train_corpus=corpus, test_corpus=test).to_json()
    b = run_cross_lingual(xl_cfg, train_corpus=corpus, test_corpus=test).to_json()
    assert a == b


@criterion(9, "OLS matches pseudo-inverse oracle on 100 random systems", 30)
def test_criterion_9_ols():
    rng = np.random.default_rng(9009)
    for _ in range(100):
        n = int(rng.integers(10, 201))
        d = int(rng.integers(1, 33))
        x = rng.standard_normal((n, d))
        y = x @ rng.standard_normal(d) + rng.standard_normal(n)
        corpus = make_corpus([(f"d{i:03d}", "s", float(y[i]), x[i].tolist())
                              for i in range(n)])
        params = train_ols(corpus, list(corpus.documents))
        ids = list(corpus.documents)
        xo = corpus.vector_matrix(ids)
        yo = corpus.levels(ids)
        a = np.hstack([xo, np.ones((n, 1))])
        beta_oracle = np.linalg.pinv(a) @ yo
        r_impl = float(np.linalg.norm(a @ np.append(params.w, params.b) - yo))
        r_oracle = float(np.linalg.norm(a @ beta_oracle - yo))
        assert abs(r_impl - r_oracle) <= 1e-6


@criterion(10, "aggregated scores strictly inside (0, S-1); order permutation-invariant", 60)
def test_criterion_10_score_bounds():
    rng = np.random.default_rng(1010)
    dim = 5
    params = None
    for trial in range(1000):
        if trial % 50 == 0:
            params = init_mlp(3 * dim, 6, 2, rng, combiner="concat-diff")
        s = int(rng.integers(2, 9))
        rows = [(f"d{i}", "slug", float(i), (3.0 * rng.standard_normal(dim)).tolist())
                for i in range(s)]
        corpus = make_corpus(rows)
        ids = [r[0] for r in rows]
        ranking = rank_nprm(params, RankingInput(ids, corpus))
        for value in ranking.scores.values():
            assert 0.0 < value < s - 1
        shuffled = [ids[i] for i in rng.permutation(s)]
        again = rank_nprm(params, RankingInput(shuffled, corpus))
        assert again.order == ranking.order
        assert again.scores == ranking.scores
