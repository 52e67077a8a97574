"""
命令行与配置单元测试
"""

import json
import os
import sys

import pandas as pd
import pytest
from numpy.testing import assert_array_equal

# 添加项目根目录到路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.cli.commands import cmd_prepare, read_summary, summarize_runs  # noqa: E402
from src.cli.config import OUTPUT_ROOT_ENV, load_config, parse_override  # noqa: E402
from src.core.dataset import load_dataset_cache  # noqa: E402
from src.core.errors import ConfigError  # noqa: E402
from src.core.model_utils import read_trace  # noqa: E402
from src.main import EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE, EXIT_OK, main  # noqa: E402


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)


@pytest.fixture
def config_file(tmp_path, adult_csv, adult_columns) -> str:
    sections = {
        "data": {
            "source": adult_csv,
            "columns": adult_columns,
            "label_positive": ">50K",
            "sensitive_positive": "Male",
            "correlations": [0.5],
        },
        "optimizer": {"iterations": 8},
        "experiment": {"algorithms": ["ngd_modified"], "seeds": [0]},
        "output": {"root": str(tmp_path / "out")},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(sections), encoding="utf-8")
    return str(path)


@pytest.fixture
def prepared(config_file) -> str:
    """准备好 corr=0.5 的缓存，返回缓存路径"""
    manifest = cmd_prepare(load_config(config_file))
    return manifest["datasets"][0]["path"]


def _read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# ==================== 配置 ====================

def test_parse_override_values():
    assert parse_override("optimizer.eta2=0.05") == ("optimizer.eta2", 0.05)
    assert parse_override("data.correlations=[0.3, 0.5]") == ("data.correlations", [0.3, 0.5])
    assert parse_override("data.label_positive=>50K") == ("data.label_positive", ">50K")
    assert parse_override("optimizer.threshold=null") == ("optimizer.threshold", None)
    with pytest.raises(ConfigError):
        parse_override("novalue")


def test_unknown_key_is_rejected(config_file):
    with pytest.raises(ConfigError):
        load_config(config_file, ["optimizer.learning_rate=0.1"])


def test_override_precedence(config_file, tmp_path):
    config = load_config(config_file, ["optimizer.iterations=20"], {"optimizer.iterations": 30},
                         environ={OUTPUT_ROOT_ENV: str(tmp_path / "env")})
    assert config["optimizer.iterations"] == 30
    assert config.output_root == str(tmp_path / "env")
    assert config.optimizer_config().iterations == 30


def test_correlations_out_of_range(config_file):
    with pytest.raises(ConfigError):
        load_config(config_file, ["data.correlations=[0.5, 1.2]"])


# ==================== prepare ====================

def test_prepare_full_correlation(config_file):
    manifest = cmd_prepare(load_config(config_file, ["data.correlations=[1.0]"]))
    data = load_dataset_cache(manifest["datasets"][0]["path"])
    assert_array_equal(data.labels, data.sensitive)


def test_prepare_several_targets(config_file):
    manifest = cmd_prepare(load_config(config_file, ["data.correlations=[0.3, 0.5, 0.8]"]))
    entries = manifest["datasets"]
    assert len(entries) == 3
    for entry in entries:
        assert os.path.exists(entry["path"])
        assert abs(entry["measured"] - entry["target"]) <= 0.02


def test_prepare_empty_targets_is_config_error(config_file):
    assert main(["prepare", "--config", config_file, "--set", "data.correlations=[]"]) == EXIT_CONFIG


# ==================== train ====================

def test_train_single_iteration(config_file, prepared, tmp_path):
    code = main(["train", "--config", config_file, "--dataset", prepared, "--iterations", "1"])
    assert code == EXIT_OK
    run_dir = tmp_path / "out" / "run"
    assert len(read_trace(str(run_dir / "trace.csv"))) == 1
    for name in ("checkpoint_final.txt", "checkpoint_threshold.txt", "metrics.json"):
        assert (run_dir / name).exists()


def test_train_is_byte_deterministic(config_file, prepared, tmp_path):
    for name in ("a", "b"):
        assert main(["train", "--config", config_file, "--dataset", prepared,
                     "--set", f"output.name={name}"]) == EXIT_OK
    a = (tmp_path / "out" / "a" / "trace.csv").read_bytes()
    b = (tmp_path / "out" / "b" / "trace.csv").read_bytes()
    assert a == b


def test_train_agd_threshold_checkpoint(config_file, prepared, tmp_path):
    code = main(["train", "--config", config_file, "--dataset", prepared,
                 "--algorithm", "agd_modified", "--threshold", "0.8", "--iterations", "30"])
    assert code == EXIT_OK
    metrics = _read_json(tmp_path / "out" / "run" / "metrics.json")
    assert not metrics["below_threshold"]
    assert metrics["train"]["statistical_rate"] >= 0.8
    assert metrics["smoothness"][0] > 0


def test_train_divergence_exit_code(config_file, prepared, tmp_path):
    code = main(["train", "--config", config_file, "--dataset", prepared, "--algorithm", "normal_gda",
                 "--set", "optimizer.eta2=1e12", "--set", "optimizer.alpha0=0"])
    assert code == EXIT_DIVERGENCE
    assert (tmp_path / "out" / "run" / "trace.csv").exists()


def test_train_missing_dataset_exit_code(config_file, tmp_path):
    code = main(["train", "--config", config_file, "--dataset", str(tmp_path / "missing.csv")])
    assert code == EXIT_DATA


# ==================== sweep / alpha-sweep ====================

def test_single_cell_sweep_matches_train(config_file, prepared, tmp_path):
    assert main(["sweep", "--config", config_file]) == EXIT_OK
    summary = read_summary(str(tmp_path / "out" / "sweep" / "summary.csv"))
    assert len(summary) == 1
    row = summary.iloc[0]
    assert row["n_runs"] == 1 and row["n_errors"] == 0

    assert main(["train", "--config", config_file, "--dataset", prepared]) == EXIT_OK
    metrics = _read_json(tmp_path / "out" / "run" / "metrics.json")
    assert row["test_accuracy"] == metrics["test"]["accuracy"]
    assert row["test_fairness"] == metrics["test"]["statistical_rate"]


def test_summary_is_recomputable_from_run_directories(config_file, prepared, tmp_path):
    assert main(["sweep", "--config", config_file]) == EXIT_OK
    sweep_dir = str(tmp_path / "out" / "sweep")
    first = read_summary(os.path.join(sweep_dir, "summary.csv"))
    os.remove(os.path.join(sweep_dir, "summary.csv"))
    summarize_runs(sweep_dir)
    pd.testing.assert_frame_equal(first, read_summary(os.path.join(sweep_dir, "summary.csv")))


def test_sweep_records_failed_cells(config_file, prepared, tmp_path):
    code = main(["sweep", "--config", config_file, "--set", "optimizer.eta2=1e12",
                 "--set", "optimizer.alpha0=0", "--set", 'experiment.algorithms=["normal_gda"]'])
    assert code == EXIT_OK
    summary = read_summary(str(tmp_path / "out" / "sweep" / "summary.csv"))
    assert summary.iloc[0]["n_errors"] == 1
    assert summary.iloc[0]["error"] == "DivergenceError"


def test_failed_rerun_drops_stale_metrics(config_file, prepared, tmp_path):
    """同一单元格先成功再失败：旧的 metrics.json 不能让失败被计为成功"""
    assert main(["sweep", "--config", config_file]) == EXIT_OK
    code = main(["sweep", "--config", config_file, "--set", "optimizer.eta2=1e12",
                 "--set", "optimizer.alpha0=0"])
    assert code == EXIT_OK
    sweep_dir = tmp_path / "out" / "sweep"
    summary = read_summary(str(sweep_dir / "summary.csv"))
    assert len(summary) == 1
    assert summary.iloc[0]["n_errors"] == 1
    assert summary.iloc[0]["n_runs"] == 0

    cell_dirs = [root for root, _, files in os.walk(sweep_dir) if "cell.json" in files]
    assert cell_dirs
    for root in cell_dirs:
        assert not os.path.exists(os.path.join(root, "metrics.json"))
        assert os.path.exists(os.path.join(root, "error.json"))


def test_alpha_sweep_has_one_row_per_power(config_file, prepared, tmp_path):
    assert main(["alpha-sweep", "--config", config_file, "--iterations", "3"]) == EXIT_OK
    summary = read_summary(str(tmp_path / "out" / "alpha_sweep" / "summary.csv"))
    assert len(summary) == 10
    assert sorted(summary["alpha_power"].round(2)) == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


# ==================== evaluate ====================

def test_evaluate_checkpoint(config_file, prepared, tmp_path):
    assert main(["train", "--config", config_file, "--dataset", prepared]) == EXIT_OK
    report_path = tmp_path / "report.json"
    checkpoint = str(tmp_path / "out" / "run" / "checkpoint_final.txt")
    code = main(["evaluate", "--config", config_file, "--dataset", prepared,
                 "--checkpoint", checkpoint, "--report", str(report_path)])
    assert code == EXIT_OK
    report = _read_json(report_path)
    assert 0.0 <= report["accuracy"] <= 1.0
    assert 0.0 <= report["statistical_rate"] <= 1.0
