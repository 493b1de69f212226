"""
FreezeML - 基于约束的类型推断
约束生成、栈式求解器与判定器
"""

__version__ = "1.0.0"
__author__ = "FreezeML"
