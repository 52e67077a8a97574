"""
命令行启动脚本

方便从项目根目录运行的入口文件，例如:
    python run.py prepare --source data/adult.csv --correlations 0.3,0.5,0.7,0.9
    python run.py sweep --config config/config.json
"""

import os
import sys

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.main import main

if __name__ == '__main__':
    sys.exit(main())
