"""
Fair GDA 主包

基于对抗梯度下降-上升的公平二分类训练工具。
"""

__version__ = "1.0.0"
__author__ = "Fair GDA Team"
__description__ = "修正梯度更新的公平分类对抗训练"
