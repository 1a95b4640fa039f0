import json
from pathlib import Path

import jsonschema
import pytest

from readrank.cli import main

SCHEMAS = Path(__file__).resolve().parent.parent / "docs" / "schemas"


def invoke(args):
    try:
        return main(args)
    except SystemExit as exc:  # argparse errors
        return exc.code


def load_schema(name):
    return json.loads((SCHEMAS / name).read_text())


@pytest.fixture
def synth_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    rc = invoke([
        "synth", "--slugs", "12", "--levels", "3", "--dim", "8",
        "--noise", "0.05", "--seed", "7", "-o", str(path),
    ])
    assert rc == 0
    return path


@pytest.fixture
def trained_model(tmp_path, synth_corpus):
    model = tmp_path / "model.json"
    rc = invoke([
        "train", "--model", "nprm", "--corpus", str(synth_corpus),
        "--seed", "7", "--epochs", "10", "-o", str(model),
    ])
    assert rc == 0
    return model


class TestSynth:
    def test_size_contract(self, tmp_path):
        path = tmp_path / "c.jsonl"
        rc = invoke(["synth", "--slugs", "200", "--levels", "3", "--dim", "16",
                     "--noise", "0.1", "--seed", "0", "-o", str(path)])
        assert rc == 0
        lines = path.read_text().splitlines()
        assert len(lines) == 600
        schema = load_schema("corpus-record.schema.json")
        for line in lines[:20]:
            jsonschema.validate(json.loads(line), schema)
        assert path.with_suffix(".jsonl.truth.json").exists()

    def test_zero_noise_exactly_linear(self, tmp_path):
        import numpy as np

        path = tmp_path / "c.jsonl"
        invoke(["synth", "--slugs", "5", "--levels", "3", "--dim", "4",
                "--noise", "0", "--seed", "3", "-o", str(path)])
        truth = json.loads(path.with_suffix(".jsonl.truth.json").read_text())
        w = np.array(truth["functional"])
        for line in path.read_text().splitlines():
            rec = json.loads(line)
            assert rec["level"] == pytest.approx(float(w @ np.array(rec["vector"])), abs=1e-9)

    def test_deterministic_files(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        args = ["synth", "--slugs", "6", "--levels", "3", "--dim", "4",
                "--noise", "0.1", "--seed", "5"]
        invoke(args + ["-o", str(a)])
        invoke(args + ["-o", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_text_mode_writes_embeddings(self, tmp_path):
        c = tmp_path / "c.jsonl"
        e = tmp_path / "e.vec"
        rc = invoke(["synth", "--slugs", "4", "--levels", "2", "--dim", "4",
                     "--noise", "0.05", "--seed", "1", "--vocab", "40",
                     "-o", str(c), "--emb-out", str(e)])
        assert rc == 0
        header = e.read_text().splitlines()[0]
        assert header == "40 4"

    def test_vocab_without_emb_out_rejected(self, tmp_path):
        rc = invoke(["synth", "--slugs", "4", "--levels", "2", "--dim", "4",
                     "--noise", "0.05", "--seed", "1", "--vocab", "40",
                     "-o", str(tmp_path / "c.jsonl")])
        assert rc == 1


class TestFeaturizePairs:
    def test_featurize_then_pairs(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        emb = tmp_path / "e.vec"
        invoke(["synth", "--slugs", "4", "--levels", "2", "--dim", "4",
                "--noise", "0.05", "--seed", "1", "--vocab", "60",
                "-o", str(corpus), "--emb-out", str(emb)])
        feats = tmp_path / "f.jsonl"
        rc = invoke(["featurize", "--corpus", str(corpus), "--emb", str(emb), "-o", str(feats)])
        assert rc == 0
        pairs = tmp_path / "p.jsonl"
        rc = invoke(["pairs", "--corpus", str(feats), "-o", str(pairs)])
        assert rc == 0
        schema = load_schema("pair-record.schema.json")
        lines = pairs.read_text().splitlines()
        assert len(lines) == 4 * 2  # 4 slugs x k(k-1) with k=2
        for line in lines:
            jsonschema.validate(json.loads(line), schema)


class TestTrain:
    def test_writes_loadable_model(self, trained_model):
        doc = json.loads(trained_model.read_text())
        jsonschema.validate(doc, load_schema("model.schema.json"))

    def test_missing_corpus_flag_exits_1_with_usage(self, capsys):
        rc = invoke(["train", "--model", "nprm", "-o", "x.json"])
        assert rc == 1
        assert "usage" in capsys.readouterr().err

    def test_rerun_identical_bytes(self, tmp_path, synth_corpus):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        args = ["train", "--model", "ranksvm", "--corpus", str(synth_corpus),
                "--seed", "3", "--epochs", "5"]
        assert invoke(args + ["-o", str(a)]) == 0
        assert invoke(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_all_families_train(self, tmp_path, synth_corpus):
        for family in ("ols", "mlp-regressor"):
            out = tmp_path / f"{family}.json"
            rc = invoke(["train", "--model", family, "--corpus", str(synth_corpus),
                         "--epochs", "3", "--learning-rate", "0.005", "-o", str(out)])
            assert rc == 0, family


class TestRank:
    def test_ranks_slug(self, tmp_path, synth_corpus, trained_model, capsys):
        rc = invoke(["rank", "--model", str(trained_model), "--corpus", str(synth_corpus),
                     "--slug", "slug00000"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        jsonschema.validate(out, load_schema("ranking.schema.json"))
        assert sorted(out["order"]) == sorted(out["input"])
        assert len(out["order"]) == 3

    def test_docs_flag(self, synth_corpus, trained_model, capsys):
        rc = invoke(["rank", "--model", str(trained_model), "--corpus", str(synth_corpus),
                     "--docs", "slug00000-l0,slug00001-l1,slug00002-l2"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out["order"]) == 3

    def test_single_doc_exits_1(self, synth_corpus, trained_model, capsys):
        rc = invoke(["rank", "--model", str(trained_model), "--corpus", str(synth_corpus),
                     "--docs", "slug00000-l0"])
        assert rc == 1
        assert "minimum of two" in capsys.readouterr().err


class TestEvaluate:
    def test_writes_bundle_with_figures(self, tmp_path, synth_corpus, trained_model, capsys):
        outdir = tmp_path / "eval"
        rc = invoke(["evaluate", "--model", str(trained_model), "--corpus", str(synth_corpus),
                     "-o", str(outdir)])
        assert rc == 0
        report = json.loads((outdir / "report.json").read_text())
        jsonschema.validate(report, load_schema("report.schema.json"))
        csv_text = (outdir / "per_slug.csv").read_text().splitlines()
        assert csv_text[0] == "slug_id,n_docs,ndcg,src,ktcc,ra"
        assert len(csv_text) == 1 + 12
        assert (outdir / "summary.txt").exists()
        for fig in ("metrics_summary.png", "per_slug_distributions.png"):
            assert (outdir / fig).stat().st_size > 0

    def test_no_figures_flag(self, tmp_path, synth_corpus, trained_model):
        outdir = tmp_path / "eval"
        rc = invoke(["evaluate", "--model", str(trained_model), "--corpus", str(synth_corpus),
                     "-o", str(outdir), "--no-figures"])
        assert rc == 0
        assert not (outdir / "metrics_summary.png").exists()

    def test_rank_pipes_into_evaluate(self, tmp_path, synth_corpus, trained_model, capsys):
        rc = invoke(["rank", "--model", str(trained_model), "--corpus", str(synth_corpus),
                     "--slug", "slug00003"])
        assert rc == 0
        ranking_json = capsys.readouterr().out
        ranking_path = tmp_path / "ranking.json"
        ranking_path.write_text(ranking_json)

        out_model = tmp_path / "by_model"
        invoke(["evaluate", "--model", str(trained_model), "--corpus", str(synth_corpus),
                "-o", str(out_model), "--no-figures"])
        out_supplied = tmp_path / "by_rankings"
        rc = invoke(["evaluate", "--rankings", str(ranking_path), "--corpus", str(synth_corpus),
                     "-o", str(out_supplied), "--no-figures"])
        assert rc == 0
        full = json.loads((out_model / "report.json").read_text())
        partial = json.loads((out_supplied / "report.json").read_text())
        assert partial["report"]["per_slug"] == {
            "slug00003": full["report"]["per_slug"]["slug00003"]
        }


class TestExperimentCommands:
    def test_cv_deterministic_and_valid(self, tmp_path, synth_corpus):
        out1 = tmp_path / "cv1"
        out2 = tmp_path / "cv2"
        args = ["cv", "--model", "nprm", "--corpus", str(synth_corpus), "-k", "3",
                "--seed", "5", "--epochs", "4", "-o"]
        assert invoke(args + [str(out1)]) == 0
        assert invoke(args + [str(out2)]) == 0
        b1 = (out1 / "report.json").read_bytes()
        assert b1 == (out2 / "report.json").read_bytes()
        jsonschema.validate(json.loads(b1), load_schema("report.schema.json"))
        assert (out1 / "fold_metrics.png").stat().st_size > 0

    def test_cross_requires_test_corpus(self, synth_corpus, tmp_path, capsys):
        rc = invoke(["cross", "--model", "nprm", "--corpus", str(synth_corpus),
                     "-o", str(tmp_path / "x")])
        assert rc == 1
        assert "test corpus" in capsys.readouterr().err

    def test_crossling_flow(self, tmp_path, synth_corpus):
        test_corpus = tmp_path / "fr.jsonl"
        invoke(["synth", "--slugs", "6", "--levels", "3", "--dim", "8", "--noise", "0.05",
                "--seed", "99", "--space-seed", "7", "--lang", "fr", "-o", str(test_corpus)])
        outdir = tmp_path / "xl"
        rc = invoke(["crossling", "--model", "nprm", "--corpus", str(synth_corpus),
                     "--test-corpus", str(test_corpus), "--seed", "7", "--epochs", "8",
                     "-o", str(outdir), "--no-figures"])
        assert rc == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["mode"] == "cross_lingual"
        assert report["languages"] == {"test": ["fr"], "train": ["en"]}

    def test_config_file_with_flag_override(self, tmp_path, synth_corpus):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "family": "ols", "corpus": str(synth_corpus), "k": 3, "seed": 1,
        }))
        outdir = tmp_path / "cv"
        rc = invoke(["cv", "--config", str(cfg_path), "-k", "4", "-o", str(outdir),
                     "--no-figures"])
        assert rc == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["config"]["family"] == "ols"
        assert report["config"]["k"] == 4
        assert len(report["folds"]) == 4

    def test_config_env_var(self, tmp_path, synth_corpus, monkeypatch):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"family": "ols", "corpus": str(synth_corpus), "k": 3}))
        monkeypatch.setenv("READRANK_CONFIG", str(cfg_path))
        outdir = tmp_path / "cv"
        assert invoke(["cv", "-o", str(outdir), "--no-figures"]) == 0


class TestCompare:
    def test_compare_two_reports(self, tmp_path, synth_corpus, capsys):
        outs = []
        for family, extra in (("nprm", ["--epochs", "6"]),
                              ("ols", [])):
            outdir = tmp_path / family
            rc = invoke(["cv", "--model", family, "--corpus", str(synth_corpus), "-k", "3",
                         "--seed", "2", *extra, "-o", str(outdir), "--no-figures"])
            assert rc == 0
            outs.append(outdir / "report.json")
        capsys.readouterr()
        rc = invoke(["compare", "--report-a", str(outs[0]), "--report-b", str(outs[1]),
                     "--metric", "ndcg"])
        out = capsys.readouterr().out
        if rc == 0:
            doc = json.loads(out)
            jsonschema.validate(doc, load_schema("comparison.schema.json"))
        else:
            assert rc == 1  # identical per-slug values: undefined test

    def test_disjoint_reports_exit_1(self, tmp_path, capsys):
        def fake_report(path, slugs):
            per_slug = {s: {"n_docs": 3, "ndcg": 0.9, "src": 0.8, "ktcc": 0.7, "ra": 1}
                        for s in slugs}
            path.write_text(json.dumps({"per_slug": per_slug, "aggregates": {}}))

        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        fake_report(a, ["s1"])
        fake_report(b, ["zz"])
        rc = invoke(["compare", "--report-a", str(a), "--report-b", str(b), "--metric", "ra"])
        assert rc == 1

    def test_bare_metric_report_accepted(self, tmp_path, capsys):
        def fake_report(path, value):
            per_slug = {f"s{i}": {"n_docs": 3, "ndcg": value + i * 0.01, "src": 0.8,
                                  "ktcc": 0.7, "ra": 1} for i in range(8)}
            path.write_text(json.dumps({"per_slug": per_slug, "aggregates": {}}))

        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        fake_report(a, 0.9)
        fake_report(b, 0.5)
        rc = invoke(["compare", "--report-a", str(a), "--report-b", str(b), "--metric", "ndcg"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["method"] == "exact"
        assert doc["p"] < 0.05


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert invoke(["frobnicate"]) == 1

    def test_bad_corpus_file_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        rc = invoke(["pairs", "--corpus", str(bad), "-o", str(tmp_path / "p.jsonl")])
        assert rc == 1
