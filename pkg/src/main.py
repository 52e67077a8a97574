"""
主程序入口

公平分类对抗训练的命令行工具：
1. 配置日志系统
2. 合并配置文件 / --set 覆盖项 / 命令行参数 / 环境变量
3. 分派子命令 prepare / train / sweep / alpha-sweep / evaluate
4. 把异常映射为退出码：0 成功，2 配置错误，3 数据错误，4 训练发散
"""

import argparse
import logging
import os
import sys
from logging.handlers import RotatingFileHandler

# 确保项目根目录在 sys.path 中
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if BASE_DIR not in sys.path:
    sys.path.insert(0, BASE_DIR)

from src.cli.commands import (  # noqa: E402
    cmd_alpha_sweep,
    cmd_evaluate,
    cmd_prepare,
    cmd_sweep,
    cmd_train,
)
from src.cli.config import load_config  # noqa: E402
from src.core.errors import ConfigError, DivergenceError, FairGDAError  # noqa: E402


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


def setup_logging(log_level: str = "INFO", log_file: str | None = None) -> None:
    """
    配置日志系统

    参数:
        log_level: 日志级别（DEBUG/INFO/WARNING/ERROR）
        log_file: 日志文件路径（可选）
    """
    level = getattr(logging, log_level.upper(), logging.INFO)

    log_format = "[%(asctime)s] [%(levelname)s] %(name)s - %(message)s"
    date_format = "%Y-%m-%d %H:%M:%S"

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stdout)]

    if log_file:
        log_file_path = os.path.abspath(log_file)
        os.makedirs(os.path.dirname(log_file_path), exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file_path, maxBytes=5 * 1024 * 1024, backupCount=3, encoding="utf-8"
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(log_format, date_format))
        handlers.append(file_handler)

    logging.basicConfig(
        level=level,
        format=log_format,
        datefmt=date_format,
        handlers=handlers,
        force=True,
    )

    logging.info("日志系统已初始化，级别: %s", log_level.upper())


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"应为逗号分隔的数字: {text}") from exc


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """解析命令行参数"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON 配置文件路径")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="覆盖配置项，例如 --set optimizer.eta2=0.05（可重复）")
    common.add_argument("--output-dir", type=str, default=None, help="输出根目录（output.root）")
    common.add_argument("--dataset", type=str, default=None, help="已准备的数据集缓存（data.dataset）")
    common.add_argument("--seed", type=int, default=None, help="随机种子（experiment.seeds=[seed]）")
    common.add_argument("--algorithm", type=str, default=None,
                        choices=["normal_gda", "ngd_modified", "agd_modified", "accuracy_only", "fairness_only"],
                        help="训练算法（optimizer.algorithm）")
    common.add_argument("--iterations", type=int, default=None, help="迭代次数 T")
    common.add_argument("--threshold", type=float, default=None, help="阈值 τ")
    common.add_argument("--workers", type=int, default=None, help="并行进程数（experiment.workers）")
    common.add_argument("--log-level", type=str, default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="日志级别（默认: INFO）")
    common.add_argument("--log-file", type=str, default=None, help="日志文件路径（可选）")

    parser = argparse.ArgumentParser(description="公平分类对抗训练（修正梯度更新）")
    sub = parser.add_subparsers(dest="command", required=True)

    prepare = sub.add_parser("prepare", parents=[common], help="生成指定相关系数的合成数据集")
    prepare.add_argument("--source", type=str, default=None, help="原始 CSV（data.source）")
    prepare.add_argument("--correlations", type=_float_list, default=None,
                         help="目标相关系数，逗号分隔，例如 0.3,0.5,0.8")

    sub.add_parser("train", parents=[common], help="单次训练")
    sub.add_parser("sweep", parents=[common], help="相关系数 × 算法网格实验")
    sub.add_parser("alpha-sweep", parents=[common], help="α 衰减指数扫描")

    evaluate = sub.add_parser("evaluate", parents=[common], help="评估已有检查点")
    evaluate.add_argument("--checkpoint", type=str, required=True, help="检查点文件")
    evaluate.add_argument("--report", type=str, default=None, help="指标 JSON 输出路径（可选）")

    return parser.parse_args(argv)


def _flag_overrides(args: argparse.Namespace) -> dict[str, object]:
    flags = {
        "output.root": args.output_dir,
        "data.dataset": args.dataset,
        "experiment.seeds": None if args.seed is None else [args.seed],
        "optimizer.algorithm": args.algorithm,
        "optimizer.iterations": args.iterations,
        "optimizer.threshold": args.threshold,
        "experiment.workers": args.workers,
    }
    if args.command == "prepare":
        flags["data.source"] = args.source
        flags["data.correlations"] = args.correlations
    return flags


def main(argv: list[str] | None = None) -> int:
    """主函数：执行子命令并返回退出码"""
    args = parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    logger = logging.getLogger("main")

    try:
        config = load_config(args.config, args.overrides, _flag_overrides(args))
        logger.info("命令: %s, 输出根目录: %s", args.command, config.output_root)

        if args.command == "prepare":
            cmd_prepare(config)
        elif args.command == "train":
            run_dir = cmd_train(config)
            logger.info("运行目录: %s", run_dir)
        elif args.command == "sweep":
            cmd_sweep(config)
        elif args.command == "alpha-sweep":
            cmd_alpha_sweep(config)
        elif args.command == "evaluate":
            cmd_evaluate(config, args.checkpoint, args.report)
    except ConfigError as exc:
        logger.error("配置错误: %s", exc)
        return EXIT_CONFIG
    except DivergenceError as exc:
        logger.error("训练发散（第 %d 次迭代）: %s", exc.iteration, exc)
        return EXIT_DIVERGENCE
    except FairGDAError as exc:
        # DataError 及其余数据相关异常
        logger.error("数据错误: %s", exc)
        return EXIT_DATA

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
