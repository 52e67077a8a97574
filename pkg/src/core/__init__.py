"""
核心模块包

包含数据集、模型与损失、公平性指标和训练算法等核心功能。
"""

from .errors import (
    FairGDAError,
    ConfigError,
    DataError,
    DivergenceError,
)

from .dataset import (
    Dataset,
    AugmentedDataset,
    AugmentationMode,
    ColumnSchema,
    load_csv,
    augment,
    make_synthetic,
    split,
)

from .fairness_metrics import (
    MetricReport,
    statistical_rate,
    false_discovery_rate,
    accuracy,
    noise_weight_ratio,
)

from .models import (
    AdversaryKind,
    AdversarySpec,
    ModelParams,
    classify_soft,
    classification_loss,
    adversary_loss,
    gradients,
)

from .optimizers import (
    Algorithm,
    OptimizerConfig,
    ThresholdTracker,
    modified_gradient,
    run_normal_gda,
    run_ngd_modified,
    run_agd_modified,
    estimate_smoothness,
    diagnose_convergence,
)

__all__ = [
    # 异常
    'FairGDAError',
    'ConfigError',
    'DataError',
    'DivergenceError',
    # 数据集
    'Dataset',
    'AugmentedDataset',
    'AugmentationMode',
    'ColumnSchema',
    'load_csv',
    'augment',
    'make_synthetic',
    'split',
    # 指标
    'MetricReport',
    'statistical_rate',
    'false_discovery_rate',
    'accuracy',
    'noise_weight_ratio',
    # 模型
    'AdversaryKind',
    'AdversarySpec',
    'ModelParams',
    'classify_soft',
    'classification_loss',
    'adversary_loss',
    'gradients',
    # 训练算法
    'Algorithm',
    'OptimizerConfig',
    'ThresholdTracker',
    'modified_gradient',
    'run_normal_gda',
    'run_ngd_modified',
    'run_agd_modified',
    'estimate_smoothness',
    'diagnose_convergence',
]
