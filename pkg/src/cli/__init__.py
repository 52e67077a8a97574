"""
命令行子包

配置加载与各子命令的实现。
"""

from .config import ExperimentConfig, load_config
from .commands import (
    cmd_prepare,
    cmd_train,
    cmd_sweep,
    cmd_alpha_sweep,
    cmd_evaluate,
    summarize_runs,
)

__all__ = [
    'ExperimentConfig',
    'load_config',
    'cmd_prepare',
    'cmd_train',
    'cmd_sweep',
    'cmd_alpha_sweep',
    'cmd_evaluate',
    'summarize_runs',
]
