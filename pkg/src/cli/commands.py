"""
命令实现模块

prepare:     由原始 CSV 生成指定相关系数的合成数据集缓存与 manifest.json
train:       单次训练，输出 trace / 检查点 / 指标
sweep:       相关系数 × 算法 × 种子 的网格实验，输出 summary.csv
alpha-sweep: 在单个数据集上扫描 α = α₀·t^{-p} 的指数 p
evaluate:    在数据集上评估已有检查点

网格中的每个单元格写入独立的运行目录，summary.csv 只由这些目录重新计算得到。
"""

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from scipy import stats

from src.core.core_math import pearson_correlation
from src.core.dataset import Dataset, load_csv, load_dataset_cache, make_synthetic, save_dataset_cache
from src.core.errors import ConfigError, DataError, DivergenceError, FairGDAError
from src.core.fairness_metrics import MetricReport
from src.core.model_utils import write_trace
from src.core.optimizers import Algorithm
from src.core.predict import evaluate_checkpoint
from src.core.train import (
    FINAL_CHECKPOINT,
    METRICS_FILE,
    THRESHOLD_CHECKPOINT,
    TRACE_FILE,
    prepare_run_data,
    save_run,
    train_model,
)

from .config import ExperimentConfig


logger = logging.getLogger(__name__)

DATASET_DIR = "datasets"
MANIFEST_FILE = "manifest.json"
CELL_FILE = "cell.json"
ERROR_FILE = "error.json"
SUMMARY_FILE = "summary.csv"

# 重新运行单元格前清除的旧产物
RUN_ARTIFACTS = (METRICS_FILE, ERROR_FILE, TRACE_FILE, FINAL_CHECKPOINT, THRESHOLD_CHECKPOINT)

SUMMARY_KEYS = ("correlation", "algorithm", "alpha_power")
SUMMARY_VALUES = ("test_accuracy", "test_fairness", "noise_weight_ratio", "iterations_to_threshold")


# ==================== 数据 ====================

def _dataset_dir(config: ExperimentConfig) -> str:
    return os.path.join(config.output_root, DATASET_DIR)


def load_dataset(config: ExperimentConfig, path: str | None = None) -> Dataset:
    """
    按配置读取数据集

    优先使用 path 或 data.dataset 指向的缓存文件，否则按 data.columns 读取 data.source。
    """
    cache = path or config["data.dataset"]
    if cache:
        return load_dataset_cache(cache)
    source = config["data.source"]
    if not source:
        raise ConfigError("需要 data.dataset（缓存文件）或 data.source（原始 CSV）")
    return load_csv(source, config.schema(), scale=bool(config["data.scale"]))


def cmd_prepare(config: ExperimentConfig) -> dict[str, Any]:
    """
    生成合成数据集缓存

    每个目标相关系数写出 datasets/corr_<c>.csv，并在 manifest.json 中记录实测相关系数。
    单个目标失败只记录错误，其余目标照常生成。

    返回:
        manifest 字典

    异常:
        ConfigError: 目标列表为空或缺少 data.source
        DataError: 原始数据无法读取，或所有目标都失败
    """
    targets = config.correlations
    if not targets:
        raise ConfigError("data.correlations 不能为空")
    if not config["data.source"]:
        raise ConfigError("prepare 需要 data.source")

    base = load_csv(config["data.source"], config.schema(), scale=bool(config["data.scale"]))
    out_dir = _dataset_dir(config)
    os.makedirs(out_dir, exist_ok=True)
    seed = config.seeds[0]

    entries = []
    for target in targets:
        entry: dict[str, Any] = {"target": target}
        try:
            data = make_synthetic(base, target, seed)
            path = os.path.join(out_dir, f"corr_{target:.2f}.csv")
            save_dataset_cache(data, path)
            entry.update(path=path, measured=pearson_correlation(data.labels, data.sensitive),
                         n_samples=data.n_samples)
            logger.info("目标 %.2f → %s（实测 %.4f）", target, path, entry["measured"])
        except FairGDAError as exc:
            entry["error"] = str(exc)
            logger.error("目标相关系数 %.2f 生成失败: %s", target, exc)
        entries.append(entry)

    manifest = {"source": os.path.abspath(config["data.source"]), "seed": seed, "datasets": entries}
    with open(os.path.join(out_dir, MANIFEST_FILE), "w", encoding="utf-8") as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2)

    if all("error" in e for e in entries):
        raise DataError("所有目标相关系数都无法生成")
    return manifest


def _read_manifest(config: ExperimentConfig) -> list[dict[str, Any]]:
    path = os.path.join(_dataset_dir(config), MANIFEST_FILE)
    if not os.path.exists(path):
        raise DataError(f"找不到 {path}，请先运行 prepare")
    with open(path, "r", encoding="utf-8") as f:
        return [e for e in json.load(f)["datasets"] if "error" not in e]


# ==================== 单次训练 ====================

def _train_into(config: ExperimentConfig, data: Dataset, run_dir: str, seed: int, **overrides) -> str:
    optimizer = config.optimizer_config(seed=seed, **overrides)
    train, test = prepare_run_data(data, float(config["data.test_fraction"]), config.augmentation, seed)
    try:
        outcome = train_model(train, test, config.adversary_spec(), optimizer)
    except DivergenceError as exc:
        write_trace(exc.trace or [], os.path.join(run_dir, TRACE_FILE))
        logger.error("训练在第 %d 次迭代发散，已保存部分 trace: %s", exc.iteration, run_dir)
        raise
    echo = config.echo()
    echo.update({f"optimizer.{k}": (v.value if hasattr(v, "value") else v) for k, v in overrides.items()})
    echo["optimizer.seed"] = seed
    return save_run(outcome, run_dir, echo)


def cmd_train(config: ExperimentConfig) -> str:
    """
    单次训练

    返回:
        运行目录路径

    异常:
        DivergenceError: 发散时已将部分 trace 写入运行目录
    """
    data = load_dataset(config)
    run_dir = os.path.join(config.output_root, config["output.name"])
    os.makedirs(run_dir, exist_ok=True)
    return _train_into(config, data, run_dir, config.seeds[0])


# ==================== 网格实验 ====================

@dataclass(frozen=True)
class Cell:
    """网格中的一个运行单元"""
    dataset: str
    correlation: float | None
    algorithm: str
    seed: int
    run_dir: str
    alpha_power: float | None = None

    def metadata(self) -> dict[str, Any]:
        return {"dataset": self.dataset, "correlation": self.correlation, "algorithm": self.algorithm,
                "seed": self.seed, "alpha_power": self.alpha_power}


def _run_cell(config: ExperimentConfig, cell: Cell) -> bool:
    """运行单元格；失败写入 error.json 并返回 False。先删除上一次运行留下的产物"""
    os.makedirs(cell.run_dir, exist_ok=True)
    for name in RUN_ARTIFACTS:
        stale = os.path.join(cell.run_dir, name)
        if os.path.exists(stale):
            os.remove(stale)
    with open(os.path.join(cell.run_dir, CELL_FILE), "w", encoding="utf-8") as f:
        json.dump(cell.metadata(), f, indent=2)

    overrides: dict[str, Any] = {"algorithm": Algorithm(cell.algorithm)}
    if cell.alpha_power is not None:
        overrides["alpha_power"] = cell.alpha_power
    try:
        data = load_dataset_cache(cell.dataset)
        _train_into(config, data, cell.run_dir, cell.seed, **overrides)
        return True
    except FairGDAError as exc:
        logger.error("单元格 %s 失败: %s", cell.run_dir, exc)
        with open(os.path.join(cell.run_dir, ERROR_FILE), "w", encoding="utf-8") as f:
            json.dump({"error": type(exc).__name__, "message": str(exc)}, f, ensure_ascii=False, indent=2)
        return False


def _run_cells(config: ExperimentConfig, cells: list[Cell]) -> None:
    if config.workers > 1 and len(cells) > 1:
        logger.info("使用 %d 个进程运行 %d 个单元格", config.workers, len(cells))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(_run_cell, [config] * len(cells), cells))
        return
    for i, cell in enumerate(cells, start=1):
        logger.info("单元格 %d/%d: %s", i, len(cells), cell.run_dir)
        _run_cell(config, cell)


def _fairness_value(metrics: dict[str, Any]) -> float:
    value = metrics["test"][metrics["fairness_metric"]]
    return math.nan if value is None else float(value)


def summarize_runs(sweep_dir: str) -> pd.DataFrame:
    """
    由各单元格运行目录重新计算汇总表并写入 summary.csv

    按 (correlation, algorithm, alpha_power) 分组，对种子取均值与最小/最大值。
    失败的单元格计入 n_errors，并把首个错误信息写入 error 列；
    目录中存在 error.json 时即视为失败，不论是否残留 metrics.json。

    返回:
        汇总 DataFrame
    """
    records = []
    for root, _, files in sorted(os.walk(sweep_dir)):
        if CELL_FILE not in files:
            continue
        with open(os.path.join(root, CELL_FILE), "r", encoding="utf-8") as f:
            cell = json.load(f)
        record = {key: cell.get(key) for key in SUMMARY_KEYS}
        record["seed"] = cell["seed"]
        if METRICS_FILE in files and ERROR_FILE not in files:
            with open(os.path.join(root, METRICS_FILE), "r", encoding="utf-8") as f:
                metrics = json.load(f)
            iterations = metrics["iterations_to_threshold"]
            record.update(
                test_accuracy=float(metrics["test"]["accuracy"]),
                test_fairness=_fairness_value(metrics),
                noise_weight_ratio=float(metrics["noise_weight_ratio"]),
                iterations_to_threshold=math.nan if iterations is None else float(iterations),
                error=None,
            )
        else:
            message = "unknown"
            if ERROR_FILE in files:
                with open(os.path.join(root, ERROR_FILE), "r", encoding="utf-8") as f:
                    message = json.load(f)["error"]
            record.update({key: math.nan for key in SUMMARY_VALUES}, error=message)
        records.append(record)

    if not records:
        raise DataError(f"{sweep_dir} 下没有任何运行目录")

    frame = pd.DataFrame.from_records(records)
    rows = []
    group_keys = list(SUMMARY_KEYS)
    for keys, group in frame.groupby(group_keys, dropna=False, sort=True):
        ok = group[group["error"].isna()]
        row = dict(zip(group_keys, keys))
        row.update(n_runs=int(len(ok)), n_errors=int(len(group) - len(ok)))
        for column in SUMMARY_VALUES:
            values = ok[column].to_numpy(dtype=np.float64)
            finite = values[~np.isnan(values)]
            row[column] = float(np.mean(finite)) if finite.size else math.nan
            row[f"{column}_min"] = float(np.min(finite)) if finite.size else math.nan
            row[f"{column}_max"] = float(np.max(finite)) if finite.size else math.nan
        errors = group["error"].dropna()
        row["error"] = errors.iloc[0] if len(errors) else ""
        rows.append(row)

    summary = pd.DataFrame(rows)
    summary.to_csv(os.path.join(sweep_dir, SUMMARY_FILE), index=False, float_format="%.17g")
    return summary


def read_summary(path: str) -> pd.DataFrame:
    """读取 summary.csv"""
    return pd.read_csv(path, float_precision="round_trip", keep_default_na=True)


def _log_noise_trend(summary: pd.DataFrame) -> float | None:
    usable = summary.dropna(subset=["correlation", "noise_weight_ratio"])
    usable = usable[np.isfinite(usable["noise_weight_ratio"])]
    if usable["correlation"].nunique() < 3:
        return None
    rho, _ = stats.spearmanr(usable["correlation"], usable["noise_weight_ratio"])
    logger.info("噪声权重比与相关系数的 Spearman 秩相关: %.4f", rho)
    return float(rho)


def cmd_sweep(config: ExperimentConfig) -> pd.DataFrame:
    """
    相关系数网格实验

    对 manifest 中每个数据集、experiment.algorithms 中每个算法、每个种子训练一次，
    输出 sweep/summary.csv。

    返回:
        汇总 DataFrame
    """
    entries = _read_manifest(config)
    if not entries:
        raise DataError("manifest 中没有可用的数据集")
    sweep_dir = os.path.join(config.output_root, "sweep")

    cells = [
        Cell(dataset=entry["path"], correlation=float(entry["target"]), algorithm=algorithm.value,
             seed=seed, run_dir=os.path.join(sweep_dir, f"corr_{entry['target']:.2f}",
                                             algorithm.value, f"seed_{seed}"))
        for entry in entries
        for algorithm in config.algorithms
        for seed in config.seeds
    ]
    _run_cells(config, cells)
    summary = summarize_runs(sweep_dir)
    _log_noise_trend(summary)
    return summary


def cmd_alpha_sweep(config: ExperimentConfig) -> pd.DataFrame:
    """
    α 衰减指数扫描

    在单个数据集（data.dataset，缺省为 manifest 中第一个）上，
    用 optimizer.algorithm 对 experiment.alpha_powers 中每个 p 训练一次。
    """
    dataset = config["data.dataset"]
    correlation = None
    if not dataset:
        entries = _read_manifest(config)
        if not entries:
            raise DataError("没有可用于 alpha-sweep 的数据集")
        dataset, correlation = entries[0]["path"], float(entries[0]["target"])
    powers = config.alpha_powers
    if not powers:
        raise ConfigError("experiment.alpha_powers 不能为空")

    algorithm = config.optimizer_config().algorithm.value
    sweep_dir = os.path.join(config.output_root, "alpha_sweep")
    cells = [
        Cell(dataset=dataset, correlation=correlation, algorithm=algorithm, seed=seed,
             run_dir=os.path.join(sweep_dir, f"p_{p:.2f}", f"seed_{seed}"), alpha_power=p)
        for p in powers
        for seed in config.seeds
    ]
    _run_cells(config, cells)
    return summarize_runs(sweep_dir)


# ==================== 评估 ====================

def cmd_evaluate(config: ExperimentConfig, checkpoint: str, report_path: str | None = None) -> MetricReport:
    """
    在数据集上评估检查点，结果打印到标准输出，可选写入 JSON
    """
    data = load_dataset(config)
    report = evaluate_checkpoint(checkpoint, data, seed=config.seeds[0])
    text = json.dumps(report.to_dict(), ensure_ascii=False, indent=2)
    print(text)
    if report_path:
        os.makedirs(os.path.dirname(os.path.abspath(report_path)), exist_ok=True)
        with open(report_path, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    return report
