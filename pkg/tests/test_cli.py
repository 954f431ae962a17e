import json

import numpy as np
import pytest

from proa import container
from proa.cli import (
    EXIT_CONFIG,
    EXIT_DATASET,
    EXIT_MODEL,
    LABELS_FILENAME,
    DatasetError,
    load_dataset,
    main,
)
from proa.demo import build_demo
from proa.stats import TestVerdict, hypothesis_decision
from proa.verifier import Verdict


@pytest.fixture(scope="module")
def demo(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo")
    model_path, dataset_dir = build_demo(root)
    return str(model_path), str(dataset_dir)


def run_certify(demo, out_dir, *extra):
    model, dataset = demo
    argv = [
        "certify", "--model", model, "--dataset", dataset,
        "--perturbation", "rotation", "--n0", "50", "--nmax", "500",
        "--delta", "0.01", "--seed", "7", "--out", str(out_dir), *extra,
    ]
    return main(argv)


class TestCertifyCommand:
    def test_writes_reports(self, demo, tmp_path):
        out = tmp_path / "run"
        assert run_certify(demo, out) == 0
        report = (out / "report.csv").read_text().splitlines()
        assert report[0] == (
            "image_id,family,verdict,mu_hat,epsilon,samples_used,margin_d"
        )
        assert len(report) == 1 + 16
        summary = json.loads((out / "summary.json").read_text())
        total_pct = (
            summary["certified_pct"] + summary["violated_pct"]
            + summary["undetermined_pct"] + summary["misclassified_pct"]
        )
        assert total_pct == pytest.approx(100.0, abs=0.01)
        assert (out / "timings.csv").exists()

    def test_seeded_runs_byte_identical(self, demo, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_certify(demo, out1) == 0
        assert run_certify(demo, out2) == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()

    def test_workers_do_not_change_report(self, demo, tmp_path):
        out1, out2 = tmp_path / "serial", tmp_path / "threads"
        assert run_certify(demo, out1) == 0
        assert run_certify(demo, out2, "--workers", "4") == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()

    def test_verdicts_rederivable_from_rows(self, demo, tmp_path):
        out = tmp_path / "run"
        assert run_certify(demo, out) == 0
        rows = (out / "report.csv").read_text().splitlines()[1:]
        mapping = {
            TestVerdict.CERTIFIED_HOLDS: "certified",
            TestVerdict.CERTIFIED_VIOLATED: "violated",
            TestVerdict.UNDECIDED: "undetermined",
        }
        checked = 0
        for row in rows:
            _, _, verdict, mu_hat, epsilon, _, _ = row.split(",")
            if verdict == "misclassified":
                continue
            redone = hypothesis_decision(float(mu_hat), float(epsilon), 0.05)
            assert mapping[redone] == verdict
            checked += 1
        assert checked > 0

    def test_mix_of_verdicts_present(self, demo, tmp_path):
        out = tmp_path / "run"
        assert run_certify(demo, out) == 0
        verdicts = {
            row.split(",")[2]
            for row in (out / "report.csv").read_text().splitlines()[1:]
        }
        assert "misclassified" in verdicts  # demo plants wrong labels

    def test_avg_samples_matches_predicted_stopping_time(self, tmp_path):
        # Zero weights + bias (ln 9, 0) make a constant [0.9, 0.1] model:
        # every stability bit is 1, so each image stops at the first
        # batch multiple where the bound reaches tau (oracle: 3900).
        import math

        import oracles
        from proa import container
        from proa.cli import LABELS_FILENAME

        model_path = tmp_path / "constant.nnw"
        container.save_nnw(
            model_path, (1, 1, 1),
            [(np.zeros((2, 1), dtype=np.float32),
              np.array([math.log(9.0), 0.0], dtype=np.float32))],
        )
        dataset = tmp_path / "data"
        dataset.mkdir()
        rng = np.random.default_rng(0)
        rows = []
        for i in range(4):
            name = f"p{i}.imt"
            container.save_imt(dataset / name,
                               rng.random((1, 1, 1)).astype(np.float32))
            rows.append(f"{name}\t0")
        (dataset / LABELS_FILENAME).write_text("\n".join(rows) + "\n")

        out = tmp_path / "out"
        code = main([
            "certify", "--model", str(model_path), "--dataset", str(dataset),
            "--perturbation", "brightness_contrast", "--delta", "1e-4",
            "--seed", "3", "--out", str(out),
        ])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        predicted = oracles.first_certifying_count(1e-4, 0.05, 100, 10_000)
        assert summary["avg_samples"] == predicted
        assert summary["certified_pct"] == 100.0

    def test_missing_model_is_config_error(self, demo, tmp_path, capsys):
        _, dataset = demo
        code = main(["certify", "--dataset", dataset, "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_bad_model_path_is_model_error(self, demo, tmp_path):
        _, dataset = demo
        code = main([
            "certify", "--model", str(tmp_path / "missing.nnw"),
            "--dataset", dataset, "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_MODEL

    def test_bad_dataset_is_dataset_error(self, demo, tmp_path):
        model, _ = demo
        code = main([
            "certify", "--model", model,
            "--dataset", str(tmp_path / "nowhere"),
            "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_DATASET

    def test_invalid_tau_is_config_error(self, demo, tmp_path):
        model, dataset = demo
        code = main([
            "certify", "--model", model, "--dataset", dataset,
            "--tau", "1.5", "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_CONFIG

    def test_config_file_with_flag_override(self, demo, tmp_path):
        model, dataset = demo
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"model={model}\ndataset={dataset}\nperturbation=rotation\n"
            f"n0=50\nnmax=500\ndelta=0.01\nseed=3\nout={tmp_path / 'from-file'}\n"
        )
        assert main(["certify", "--config", str(cfg)]) == 0
        assert (tmp_path / "from-file" / "report.csv").exists()
        # flag overrides the file value
        assert main([
            "certify", "--config", str(cfg), "--out", str(tmp_path / "flagged"),
        ]) == 0
        assert (tmp_path / "flagged" / "report.csv").exists()

    def test_box_override(self, demo, tmp_path):
        model, dataset = demo
        code = main([
            "certify", "--model", model, "--dataset", dataset,
            "--perturbation", "brightness_contrast",
            "--box=-0.1:0.1,-0.05:0.05",  # '=' keeps argparse off the dash
            "--n0", "50", "--nmax", "200", "--out", str(tmp_path / "o"),
        ])
        assert code == 0

    def test_malformed_box_is_config_error(self, demo, tmp_path):
        model, dataset = demo
        code = main([
            "certify", "--model", model, "--dataset", dataset,
            "--box", "nonsense", "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_CONFIG


class TestBaselineCommand:
    def test_grid_on_demo(self, demo, tmp_path):
        model, dataset = demo
        out = tmp_path / "base"
        code = main([
            "baseline", "--model", model, "--dataset", dataset,
            "--perturbation", "brightness_contrast", "--grid-points", "3",
            "--seed", "7", "--out", str(out),
        ])
        assert code == 0
        rows = (out / "report_grid.csv").read_text().splitlines()[1:]
        assert len(rows) == 16
        summary = json.loads((out / "baseline_summary.json").read_text())
        assert summary["grid"]["enabled"] is True
        assert summary["ac"]["enabled"] is False
        assert not (out / "report_ac.csv").exists()

    def test_ac_and_random_enabled(self, demo, tmp_path):
        model, dataset = demo
        out = tmp_path / "base2"
        code = main([
            "baseline", "--model", model, "--dataset", dataset,
            "--perturbation", "rotation", "--ac-n", "200", "--rand-n", "50",
            "--delta", "0.05", "--seed", "7", "--out", str(out),
        ])
        assert code == 0
        assert (out / "report_ac.csv").exists()
        assert (out / "report_random.csv").exists()
        summary = json.loads((out / "baseline_summary.json").read_text())
        assert summary["ac"]["n_fixed"] == 200
        assert summary["random"]["n_random"] == 50

    def test_all_disabled_still_succeeds(self, demo, tmp_path):
        model, dataset = demo
        out = tmp_path / "base3"
        code = main([
            "baseline", "--model", model, "--dataset", dataset,
            "--out", str(out),
        ])
        assert code == 0
        summary = json.loads((out / "baseline_summary.json").read_text())
        assert all(
            summary[key]["enabled"] is False for key in ("ac", "grid", "random")
        )


class TestInspectCommand:
    def test_model_and_dataset(self, demo, capsys):
        model, dataset = demo
        assert main(["inspect", "--model", model, "--dataset", dataset]) == 0
        out = capsys.readouterr().out
        assert "8x8x1" in out
        assert "classes: 3" in out
        assert "images: 16" in out

    def test_needs_something(self):
        assert main(["inspect"]) == EXIT_CONFIG


class TestLoadDataset:
    def make_dataset(self, tmp_path, rows, tensors):
        for name, pixels in tensors.items():
            container.save_imt(tmp_path / name, pixels)
        (tmp_path / LABELS_FILENAME).write_text("\n".join(rows) + "\n")
        return tmp_path

    def test_missing_tensor_becomes_warning(self, tmp_path):
        rng = np.random.default_rng(0)
        root = self.make_dataset(
            tmp_path,
            ["a.imt\t0", "ghost.imt\t1"],
            {"a.imt": rng.random((2, 2, 1)).astype(np.float32)},
        )
        items, warnings = load_dataset(root)
        assert len(items) == 1
        assert any("ghost.imt" in w for w in warnings)

    def test_out_of_range_tensor_rejected(self, tmp_path):
        bad = np.full((2, 2, 1), 1.5, dtype=np.float32)
        good = np.full((2, 2, 1), 0.5, dtype=np.float32)
        root = self.make_dataset(
            tmp_path, ["bad.imt\t0", "good.imt\t0"],
            {"bad.imt": bad, "good.imt": good},
        )
        items, warnings = load_dataset(root)
        assert [item.name for item in items] == ["good.imt"]
        assert any("[0, 1]" in w for w in warnings)

    def test_zero_usable_rows_fails(self, tmp_path):
        root = self.make_dataset(tmp_path, ["ghost.imt\t0"], {})
        with pytest.raises(DatasetError):
            load_dataset(root)

    def test_label_range_checked_against_model(self, tmp_path):
        rng = np.random.default_rng(1)
        root = self.make_dataset(
            tmp_path, ["a.imt\t0", "b.imt\t9"],
            {"a.imt": rng.random((2, 2, 1)).astype(np.float32),
             "b.imt": rng.random((2, 2, 1)).astype(np.float32)},
        )
        items, warnings = load_dataset(root, num_classes=3)
        assert len(items) == 1
        assert any("label 9" in w for w in warnings)

    def test_indices_follow_file_order(self, tmp_path):
        rng = np.random.default_rng(2)
        root = self.make_dataset(
            tmp_path, ["z.imt\t0", "a.imt\t1"],
            {"z.imt": rng.random((2, 2, 1)).astype(np.float32),
             "a.imt": rng.random((2, 2, 1)).astype(np.float32)},
        )
        items, _ = load_dataset(root)
        assert [(item.name, item.index) for item in items] == [
            ("z.imt", 0), ("a.imt", 1)
        ]
