"""
异常定义模块

项目内所有异常的统一层级。命令行入口按类别映射退出码：
配置错误 → 2，数据错误 → 3，训练发散 → 4。
"""

from typing import Any


class FairGDAError(Exception):
    """项目异常基类"""


class DimensionError(FairGDAError, ValueError):
    """向量/矩阵维度不匹配"""


class DegenerateVarianceError(FairGDAError, ValueError):
    """方差为零（常数向量），相关系数无定义"""


class NumericalError(FairGDAError, ArithmeticError):
    """出现 NaN/∞ 等非有限数值"""


class ConfigError(FairGDAError):
    """配置缺失或取值非法"""


class DataError(FairGDAError):
    """数据相关错误的基类"""


class IngestionError(DataError):
    """CSV 读取失败，尽量指出出错的行和列"""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        location = []
        if row is not None:
            location.append(f"行 {row}")
        if column is not None:
            location.append(f"列 '{column}'")
        if location:
            message = f"{message}（{', '.join(location)}）"
        super().__init__(message)
        self.row = row
        self.column = column


class PreconditionError(DataError):
    """操作前置条件不满足（例如目标相关系数不可达）"""


class SplitError(DataError):
    """数据集过小，无法分层划分"""


class MetricError(DataError):
    """指标无法计算（例如某个敏感属性分组为空）"""


class DivergenceError(FairGDAError):
    """训练过程发散：损失非有限或超出上限"""

    def __init__(self, message: str, iteration: int, trace: list[Any] | None = None):
        super().__init__(f"{message}（迭代 {iteration}）")
        self.iteration = iteration
        # 发散前已记录的迭代，供调用方落盘
        self.trace = list(trace) if trace is not None else []
