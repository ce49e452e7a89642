import json

import pytest

from llu.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def synth_args(out_dir, dim=16, classes=4, shots=4, test_per_class=10, seed=0):
    return ["synth", "--dim", dim, "--classes", classes, "--shots", shots,
            "--test-per-class", test_per_class, "--sigma-image", 0.3,
            "--sigma-text", 0.5, "--seed", seed, "--out-dir", out_dir]


@pytest.fixture()
def dataset(tmp_path):
    d = tmp_path / "data"
    assert run(*synth_args(d)) == 0
    return d


class TestSynth:
    def test_writes_three_files(self, dataset):
        for name in ("train.lluf", "test.lluf", "classes.lluf"):
            assert (dataset / name).exists()

    def test_byte_identical_across_runs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(*synth_args(a)) == 0
        assert run(*synth_args(b)) == 0
        for name in ("train.lluf", "test.lluf", "classes.lluf"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(*synth_args(a, seed=0)) == 0
        assert run(*synth_args(b, seed=1)) == 0
        assert (a / "train.lluf").read_bytes() != (b / "train.lluf").read_bytes()

    def test_too_few_classes_is_usage_error(self, tmp_path):
        assert run(*synth_args(tmp_path / "x", classes=1)) == 1


class TestTrain:
    def test_pipeline_deterministic(self, dataset, tmp_path):
        args = ["train", "--train", dataset / "train.lluf",
                "--classes", dataset / "classes.lluf", "--epochs", 10]
        assert run(*args, "--out", tmp_path / "m1.json") == 0
        assert run(*args, "--out", tmp_path / "m2.json") == 0
        assert (tmp_path / "m1.json").read_bytes() == (tmp_path / "m2.json").read_bytes()

    def test_unknown_preset(self, dataset, tmp_path):
        assert run("train", "--train", dataset / "train.lluf",
                   "--classes", dataset / "classes.lluf",
                   "--out", tmp_path / "m.json", "--preset", "bogus") == 1

    def test_missing_input_file(self, tmp_path):
        assert run("train", "--train", tmp_path / "no.lluf",
                   "--classes", tmp_path / "no2.lluf",
                   "--out", tmp_path / "m.json") == 1

    def test_zero_epoch_model_matches_no_model_eval(self, dataset, tmp_path):
        model = tmp_path / "m.json"
        assert run("train", "--train", dataset / "train.lluf",
                   "--classes", dataset / "classes.lluf",
                   "--out", model, "--epochs", 0) == 0
        with_model = tmp_path / "with.json"
        without = tmp_path / "without.json"
        common = ["eval", "--test", dataset / "test.lluf",
                  "--classes", dataset / "classes.lluf", "--split-base-new"]
        assert run(*common, "--model", model, "--report", with_model) == 0
        assert run(*common, "--report", without) == 0
        a = json.loads(with_model.read_text())
        b = json.loads(without.read_text())
        for key in ("base", "new", "H", "accuracy", "per_class", "n_eval"):
            assert a[key] == b[key]

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow on purpose
    def test_divergent_settings_exit_2(self, dataset, tmp_path):
        assert run("train", "--train", dataset / "train.lluf",
                   "--classes", dataset / "classes.lluf",
                   "--out", tmp_path / "m.json", "--epochs", 30,
                   "--lr", 1e6, "--lambda", 1e6) == 2


class TestEval:
    def test_report_harmonic_mean_consistent(self, dataset, tmp_path):
        report = tmp_path / "r.json"
        assert run("eval", "--test", dataset / "test.lluf",
                   "--classes", dataset / "classes.lluf",
                   "--split-base-new", "--report", report) == 0
        doc = json.loads(report.read_text())
        b, n = doc["base"], doc["new"]
        expected = 0.0 if b + n == 0 else 2 * b * n / (b + n)
        assert doc["H"] == pytest.approx(expected, abs=1e-12)
        assert doc["model_fingerprint"] is None

    def test_restrict_base_counts(self, dataset, tmp_path):
        report = tmp_path / "r.json"
        assert run("eval", "--test", dataset / "test.lluf",
                   "--classes", dataset / "classes.lluf",
                   "--restrict", "base", "--report", report) == 0
        doc = json.loads(report.read_text())
        assert doc["new"] is None and doc["H"] is None
        assert doc["n_eval"] == 20  # 2 base classes x 10 test records

    def test_eval_reports_model_fingerprint(self, dataset, tmp_path):
        model = tmp_path / "m.json"
        assert run("train", "--train", dataset / "train.lluf",
                   "--classes", dataset / "classes.lluf",
                   "--out", model, "--epochs", 2) == 0
        report = tmp_path / "r.json"
        assert run("eval", "--test", dataset / "test.lluf",
                   "--classes", dataset / "classes.lluf",
                   "--model", model, "--report", report) == 0
        doc = json.loads(report.read_text())
        assert isinstance(doc["model_fingerprint"], str)


class TestGradcheck:
    def test_passes_at_default_tolerance(self, capsys):
        assert run("gradcheck", "--trials", 2) == 0
        assert "max relative error" in capsys.readouterr().out

    def test_fails_at_impossible_tolerance(self):
        assert run("gradcheck", "--trials", 1, "--tolerance", 1e-14) == 1


class TestInspect:
    def test_prints_summary(self, dataset, tmp_path, capsys):
        model = tmp_path / "m.json"
        assert run("train", "--train", dataset / "train.lluf",
                   "--classes", dataset / "classes.lluf",
                   "--out", model, "--epochs", 2) == 0
        capsys.readouterr()
        assert run("inspect", "--model", model) == 0
        out = capsys.readouterr().out
        assert "dim:" in out and "16" in out
        assert "mask:" in out and "smooth" in out

    def test_missing_model(self, tmp_path):
        assert run("inspect", "--model", tmp_path / "absent.json") == 1


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        run("train")  # missing required arguments
    assert exc.value.code == 1
