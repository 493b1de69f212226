"""
测试公共配置：前导、名字供给与 slow 标记
"""
import os
import sys

# 添加项目根目录到 Python 路径
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

import pytest

from src.config import DEFAULT_PRELUDE
from src.surface import load_prelude
from src.syntax import NameSupply


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 大规模随机化检查")


@pytest.fixture(scope="session")
def prelude():
    return load_prelude(DEFAULT_PRELUDE)


@pytest.fixture(scope="session")
def gamma(prelude):
    return prelude.to_context()


@pytest.fixture
def supply():
    return NameSupply()
