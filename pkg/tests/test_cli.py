import json

from fedsim.cli import EXIT_CONFIG, EXIT_DATASET, EXIT_OK, EXIT_RUNTIME, main


def write_config(tmp_path, **overrides):
    config = {
        "dataset": "synthetic",
        "dataset_params": {"num_classes": 4, "per_class": 25, "input_dim": 6, "spread": 0.2},
        "devices": 4,
        "rounds": 2,
        "local_epochs": 1,
        "batch_size": 8,
        "learning_rate": 0.3,
        "queue_fraction": 0.2,
        "selection_fraction": 0.9,
        "partition_mode": "one_class",
        "aggregator": "ddfl",
        "hidden_dims": [6],
        "seed": 3,
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestRunCommand:
    def test_success(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        code = main(["run", "--config", str(config), "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "metrics.csv").is_file()
        assert "final accuracy" in capsys.readouterr().out

    def test_flag_overrides(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        code = main([
            "run", "--config", str(config), "--out", str(out),
            "--seed", "9", "--aggregator", "fedavg",
        ])
        assert code == EXIT_OK
        resolved = json.loads((out / "config_resolved.json").read_text())
        assert resolved["seed"] == 9
        assert resolved["aggregator"] == "fedavg_count"

    def test_bad_config_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{broken")
        assert main(["run", "--config", str(path)]) == EXIT_CONFIG

    def test_invalid_config_value(self, tmp_path):
        config = write_config(tmp_path, rounds=0)
        assert main(["run", "--config", str(config)]) == EXIT_CONFIG

    def test_missing_dataset_dir(self, tmp_path):
        config = write_config(
            tmp_path, dataset="mnist", data_dir=str(tmp_path / "nowhere")
        )
        assert main(["run", "--config", str(config)]) == EXIT_DATASET

    def test_unknown_flag(self, tmp_path):
        config = write_config(tmp_path)
        assert main(["run", "--config", str(config), "--bogus"]) == EXIT_CONFIG


class TestSweepCommand:
    def test_success(self, tmp_path, capsys):
        config = write_config(tmp_path, rounds=1)
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"local_epochs": [1]}))
        out = tmp_path / "sweep"
        code = main([
            "sweep", "--config", str(config), "--grid", str(grid), "--out", str(out),
        ])
        assert code == EXIT_OK
        assert (out / "sweep_table.csv").is_file()
        assert "boost" in capsys.readouterr().out

    def test_bad_grid(self, tmp_path):
        config = write_config(tmp_path)
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"batch_size": [1]}))
        assert main(["sweep", "--config", str(config), "--grid", str(grid)]) == EXIT_CONFIG

    def test_missing_grid_file(self, tmp_path):
        config = write_config(tmp_path)
        missing = tmp_path / "grid.json"
        assert main(["sweep", "--config", str(config), "--grid", str(missing)]) == EXIT_CONFIG


class TestPlotCommand:
    def test_success(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", "--config", str(config), "--out", str(out)]) == EXIT_OK
        code = main(["plot", "--rows", str(out / "metrics.csv"), "--kind", "accuracy_curve"])
        assert code == EXIT_OK
        assert (out / "metrics_accuracy_curve.csv").is_file()

    def test_unknown_kind_is_config_error(self, tmp_path):
        assert main(["plot", "--rows", "x.csv", "--kind", "scatter"]) == EXIT_CONFIG

    def test_missing_rows_file_is_runtime_error(self, tmp_path):
        missing = tmp_path / "rows.csv"
        code = main(["plot", "--rows", str(missing), "--kind", "accuracy_curve"])
        assert code == EXIT_RUNTIME
