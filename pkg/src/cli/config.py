"""
实验配置模块

配置来源按优先级从低到高：内置默认值 < JSON 配置文件 < --set key=value 与命令行参数
< 环境变量 FAIRGDA_OUTPUT_ROOT（仅覆盖输出根目录）。
JSON 文件按 app / data / adversary / optimizer / experiment / output 分节，
内部展平为 "optimizer.eta1" 形式的点分键。
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

from src.core.dataset import AugmentationMode, ColumnSchema
from src.core.errors import ConfigError
from src.core.models import AdversarySpec
from src.core.optimizers import Algorithm, OptimizerConfig


logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "FAIRGDA_OUTPUT_ROOT"

DEFAULTS: dict[str, Any] = {
    "app.name": "Fair GDA",
    "app.version": "1.0.0",
    "data.source": None,
    "data.dataset": None,
    "data.columns": {},
    "data.label_positive": None,
    "data.sensitive_positive": None,
    "data.scale": True,
    "data.correlations": [],
    "data.test_fraction": 0.3,
    "data.augmentation": "noise",
    "adversary.kind": "statistical_parity",
    "adversary.degree": 2,
    "adversary.mu": 1.0,
    "adversary.normalization": "mean",
    "optimizer.algorithm": "ngd_modified",
    "optimizer.eta1": 0.1,
    "optimizer.eta2": 0.1,
    "optimizer.alpha0": 0.1,
    "optimizer.alpha_power": 0.5,
    "optimizer.iterations": 100,
    "optimizer.threshold": None,
    "optimizer.alpha_mode": "decay",
    "optimizer.init_scale": 0.0,
    "optimizer.smoothness": None,
    "optimizer.smoothness_samples": 10,
    "optimizer.smoothness_radius": 1.0,
    "experiment.algorithms": ["ngd_modified", "normal_gda"],
    "experiment.seeds": [0],
    "experiment.alpha_powers": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    "experiment.workers": 1,
    "output.root": "outputs",
    "output.name": "run",
}


def flatten(sections: Mapping[str, Any]) -> dict[str, Any]:
    """把分节的 JSON 配置展平为点分键（只展开一层，data.columns 等映射值保持原样）"""
    flat: dict[str, Any] = {}
    for section, values in sections.items():
        if not isinstance(values, Mapping):
            raise ConfigError(f"配置节 {section!r} 必须是对象")
        for key, value in values.items():
            flat[f"{section}.{key}"] = value
    return flat


def parse_override(item: str) -> tuple[str, Any]:
    """
    解析 key=value

    value 能按 JSON 解析（数字、布尔、列表、null）时取解析结果，否则保留字符串。
    """
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"覆盖项格式应为 key=value: {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


@dataclass(frozen=True)
class ExperimentConfig:
    """
    展平后的实验配置

    values 为完整的点分键 → 值映射，其余方法按需构造各模块的配置对象。
    """
    values: dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        unknown = sorted(set(overrides) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"未知的配置项: {unknown}")
        merged = dict(self.values)
        merged.update(overrides)
        return replace(self, values=merged)

    # ---------- 数据 ----------

    @property
    def correlations(self) -> list[float]:
        return [float(c) for c in self.values["data.correlations"]]

    @property
    def augmentation(self) -> AugmentationMode:
        try:
            return AugmentationMode(self.values["data.augmentation"])
        except ValueError as exc:
            raise ConfigError(f"未知的增广方式: {self.values['data.augmentation']}") from exc

    def schema(self) -> ColumnSchema:
        return ColumnSchema.from_mapping(self.values["data.columns"] or {},
                                         self.values["data.label_positive"],
                                         self.values["data.sensitive_positive"])

    # ---------- 模型 / 优化 ----------

    def adversary_spec(self) -> AdversarySpec:
        return AdversarySpec(kind=self.values["adversary.kind"],
                             degree=self.values["adversary.degree"],
                             mu=self.values["adversary.mu"],
                             normalization=self.values["adversary.normalization"])

    def optimizer_config(self, **overrides) -> OptimizerConfig:
        smoothness = self.values["optimizer.smoothness"]
        kwargs = dict(
            algorithm=self.values["optimizer.algorithm"],
            eta1=float(self.values["optimizer.eta1"]),
            eta2=float(self.values["optimizer.eta2"]),
            alpha0=float(self.values["optimizer.alpha0"]),
            alpha_power=float(self.values["optimizer.alpha_power"]),
            iterations=self.values["optimizer.iterations"],
            threshold=self.values["optimizer.threshold"],
            alpha_mode=self.values["optimizer.alpha_mode"],
            init_scale=float(self.values["optimizer.init_scale"]),
            smoothness=None if smoothness is None else tuple(smoothness),
            smoothness_samples=self.values["optimizer.smoothness_samples"],
            smoothness_radius=float(self.values["optimizer.smoothness_radius"]),
        )
        kwargs.update(overrides)
        return OptimizerConfig(**kwargs)

    # ---------- 实验 ----------

    @property
    def algorithms(self) -> list[Algorithm]:
        try:
            return [Algorithm(a) for a in self.values["experiment.algorithms"]]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def seeds(self) -> list[int]:
        return [int(s) for s in self.values["experiment.seeds"]]

    @property
    def alpha_powers(self) -> list[float]:
        return [float(p) for p in self.values["experiment.alpha_powers"]]

    @property
    def workers(self) -> int:
        return max(1, int(self.values["experiment.workers"]))

    @property
    def output_root(self) -> str:
        return os.path.abspath(self.values["output.root"])

    def validate(self) -> "ExperimentConfig":
        """检查取值范围，并确认输出目录可写"""
        for c in self.correlations:
            if not 0.0 < c <= 1.0:
                raise ConfigError(f"目标相关系数必须位于 (0,1]: {c}")
        if not 0.0 < float(self.values["data.test_fraction"]) < 1.0:
            raise ConfigError(f"data.test_fraction 必须位于 (0,1): {self.values['data.test_fraction']}")
        if not self.seeds:
            raise ConfigError("experiment.seeds 不能为空")
        # 以下构造在取值无效时抛出 ConfigError
        _ = (self.augmentation, self.adversary_spec(), self.optimizer_config(), self.algorithms)

        existing = self.output_root
        while not os.path.exists(existing):
            parent = os.path.dirname(existing)
            if parent == existing:
                break
            existing = parent
        if not os.access(existing, os.W_OK):
            raise ConfigError(f"输出目录不可写: {self.output_root}")
        return self

    def echo(self) -> dict[str, Any]:
        """用于写入 metrics.json 的配置副本"""
        return dict(self.values)


def load_config(path: str | None = None, overrides: Sequence[str] = (),
                flags: Mapping[str, Any] | None = None,
                environ: Mapping[str, str] | None = None) -> ExperimentConfig:
    """
    构造实验配置

    参数:
        path: JSON 配置文件（可选）
        overrides: "key=value" 形式的覆盖项
        flags: 命令行参数映射到的点分键（值为 None 的项忽略）
        environ: 环境变量（默认 os.environ）

    返回:
        ExperimentConfig

    异常:
        ConfigError: 文件无法读取、JSON 无效或出现未知键
    """
    config = ExperimentConfig()

    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                sections = json.load(f)
        except FileNotFoundError as exc:
            raise ConfigError(f"配置文件不存在: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"配置文件不是有效的 JSON: {exc}") from exc
        config = config.with_overrides(flatten(sections))
        logger.debug("已加载配置文件: %s", path)

    config = config.with_overrides(dict(parse_override(item) for item in overrides))
    if flags:
        config = config.with_overrides({k: v for k, v in flags.items() if v is not None})

    environ = os.environ if environ is None else environ
    if environ.get(OUTPUT_ROOT_ENV):
        config = config.with_overrides({"output.root": environ[OUTPUT_ROOT_ENV]})
        logger.info("输出根目录由环境变量 %s 覆盖: %s", OUTPUT_ROOT_ENV, environ[OUTPUT_ROOT_ENV])

    return config.validate()
