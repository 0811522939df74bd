import json

import pytest

from headline_sentiment import datasets
from headline_sentiment.cli import EXIT_OK, EXIT_VALIDATION, align, main
from headline_sentiment.config import RunConfig
from headline_sentiment.errors import ValidationError
from headline_sentiment.text_pipeline import RawInstance
from synthetic import SyntheticWorld


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    world = SyntheticWorld(seed=5, n_sentiment=40, n_filler=10, d_emb=6)
    world.write(d, n_train=20, seed=1)
    datasets.write(d / "test.tsv", [RawInstance(*r) for r in world.headlines(6, seed=9)])
    config = {
        "model": {"filters_per_width": 3},
        "train": {"n_models": 2, "epochs": 2, "batch_size": 5, "folds": 2},
        "paths": {"embeddings": "embeddings.txt", "affective": "affective.tsv",
                  "valence": "valence.tsv", "data": "train.tsv"},
    }
    (d / "run.json").write_text(json.dumps(config))
    return d


@pytest.fixture(scope="module")
def trained(workspace):
    models = workspace / "models"
    assert main(["train", "--config", str(workspace / "run.json"),
                 "--models-dir", str(models)]) == EXIT_OK
    return models


class TestTrainPredict:
    def test_outputs(self, trained):
        manifest = json.loads((trained / "manifest.json").read_text())
        assert manifest["models"] == ["model_00.hsm", "model_01.hsm"]
        assert manifest["seeds"] == [0, 1]
        assert (trained / "resolved_config.json").is_file()
        traces = (trained / "loss_trace.jsonl").read_text().splitlines()
        assert len(traces) == 4
        assert set(json.loads(traces[0])) == {"epoch", "fold", "model", "value"}

    def test_snapshot_round_trip(self, trained):
        snapshot = RunConfig.load(trained / "resolved_config.json")
        assert snapshot.train.n_models == 2 and snapshot.model.filters_per_width == 3

    def test_predict_and_evaluate(self, workspace, trained, capsys):
        preds = workspace / "preds.tsv"
        assert main(["predict", "--models-dir", str(trained), "--data", str(workspace / "test.tsv"),
                     "--output", str(preds)]) == EXIT_OK
        rows = datasets.ingest(preds).instances
        assert len(rows) == 6 and all(-1 < r.score < 1 for r in rows)
        capsys.readouterr()
        records = workspace / "eval.jsonl"
        assert main(["evaluate", "--predictions", str(preds), "--data", str(workspace / "test.tsv"),
                     "--output", str(records)]) == EXIT_OK
        assert "Test scores" in capsys.readouterr().out
        assert json.loads(records.read_text())["n_instances"] == 6

    def test_predict_is_repeatable(self, workspace, trained, tmp_path):
        outputs = []
        for name in ("one.tsv", "two.tsv"):
            assert main(["predict", "--models-dir", str(trained), "--data",
                         str(workspace / "test.tsv"), "--output", str(tmp_path / name)]) == EXIT_OK
            outputs.append((tmp_path / name).read_bytes())
        assert outputs[0] == outputs[1]

    def test_gold_as_predictions(self, workspace, capsys):
        gold = str(workspace / "test.tsv")
        assert main(["evaluate", "--predictions", gold, "--data", gold]) == EXIT_OK
        assert "1.000" in capsys.readouterr().out

    def test_predict_unlabeled_stdout(self, workspace, trained, capsys):
        path = workspace / "unlabeled.tsv"
        path.write_text("Acme beats sabc forecasts\tAcme\n")
        assert main(["predict", "--models-dir", str(trained), "--data", str(path),
                     "--unlabeled"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("Acme beats sabc forecasts\tAcme\t")

    def test_lexicon_mismatch(self, workspace, trained, tmp_path):
        other = tmp_path / "emb.txt"
        other.write_text((workspace / "embeddings.txt").read_text() + "extra 0 0 0 0 0 0\n")
        assert main(["predict", "--models-dir", str(trained), "--data", str(workspace / "test.tsv"),
                     "--embeddings", str(other)]) == EXIT_VALIDATION


class TestExitCodes:
    def test_bad_data(self, workspace, tmp_path):
        bad = tmp_path / "bad.tsv"
        bad.write_text("x\ty\t7\n")
        assert main(["train", "--config", str(workspace / "run.json"), "--data", str(bad),
                     "--models-dir", str(tmp_path / "m")]) == EXIT_VALIDATION

    def test_missing_embeddings_path(self, workspace, tmp_path):
        assert main(["cv", "--data", str(workspace / "train.tsv"),
                     "--valence", str(workspace / "valence.tsv")]) == EXIT_VALIDATION

    def test_unknown_config_section(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"optimizer": {}}')
        assert main(["cv", "--config", str(cfg)]) == EXIT_VALIDATION

    def test_missing_models_dir(self, workspace, tmp_path):
        assert main(["predict", "--models-dir", str(tmp_path), "--data",
                     str(workspace / "test.tsv")]) == EXIT_VALIDATION


class TestCvAblate:
    def test_cv_writes_reports(self, workspace, capsys):
        out = workspace / "cv"
        assert main(["cv", "--config", str(workspace / "run.json"), "--out", str(out)]) == EXIT_OK
        report = (out / "cv_report.txt").read_text()
        assert "mean±std" in report and "fold 1:" in report
        assert len((out / "cv_records.jsonl").read_text().splitlines()) == 2

    def test_ablate_with_test_set(self, workspace, capsys):
        out = workspace / "ablate"
        assert main(["ablate", "--config", str(workspace / "run.json"), "--n-models", "1",
                     "--test", str(workspace / "test.tsv"), "--out", str(out)]) == EXIT_OK
        lines = (out / "ablation_report.txt").read_text().splitlines()
        assert [l.split("  ")[0].strip() for l in lines[2:5]] == \
            ["Full", "No embeddings", "No pre-processing"]
        assert lines[5].startswith("observed ordering")


class TestAlign:
    def test_pairs_by_key(self):
        gold = [RawInstance("a b", "a", 0.1), RawInstance("c d", "c", -0.2)]
        preds = [RawInstance("c d", "c", -0.5), RawInstance("a b", "a", 0.4)]
        assert align(preds, gold) == [(0.4, 0.1), (-0.5, -0.2)]

    def test_unmatched(self):
        with pytest.raises(ValidationError, match="gold only"):
            align([RawInstance("a b", "a", 0.1)], [RawInstance("x y", "x", 0.1)])
