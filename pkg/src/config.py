"""
配置模块 - FreezeML 类型推断引擎配置管理
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# 加载 .env 文件
# 查找项目根目录的 .env 文件
PROJECT_ROOT = Path(__file__).parent.parent
env_path = PROJECT_ROOT / '.env'
load_dotenv(dotenv_path=env_path)

# ============================================================================
# 辅助函数
# ============================================================================
def _get_env_int(key: str, default: int) -> int:
    """获取整数环境变量，处理空字符串情况"""
    value = os.getenv(key)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        return default


def _get_env_bool(key: str, default: bool) -> bool:
    """获取布尔环境变量，接受 1/0、true/false、yes/no"""
    value = os.getenv(key)
    if value is None or value == "":
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")

# ============================================================================
# 求解器配置
# ============================================================================
# 每一步都检查状态良构性、度量递减、规则确定性
CHECK_INVARIANTS = _get_env_bool("FREEZEML_CHECK_INVARIANTS", True)

# partition 实现: "scan" (扫描代换值域) 或 "rank" (基于秩)
PARTITION_STRATEGY = os.getenv("FREEZEML_PARTITION", "scan")

# 步数上限 = FACTOR × (初始度量第二分量 + SLACK)，只作断言兜底
STEP_BUDGET_FACTOR = _get_env_int("FREEZEML_STEP_BUDGET_FACTOR", 10)
STEP_BUDGET_SLACK = _get_env_int("FREEZEML_STEP_BUDGET_SLACK", 100)

# 跟踪记录中约束文本的截断宽度
TRACE_WIDTH = _get_env_int("FREEZEML_TRACE_WIDTH", 80)

# ============================================================================
# 判定器 (oracle) 配置
# ============================================================================
# 原子（零元构造子、类型变量）为第 0 层
SEARCH_DEPTH = _get_env_int("FREEZEML_SEARCH_DEPTH", 2)
SEARCH_QUANTIFIERS = _get_env_int("FREEZEML_SEARCH_QUANTIFIERS", 2)

# ============================================================================
# 自检配置
# ============================================================================
SELFTEST_SEED = _get_env_int("FREEZEML_SELFTEST_SEED", 42)
SELFTEST_COUNT = _get_env_int("FREEZEML_SELFTEST_COUNT", 200)
SELFTEST_TERM_SIZE = _get_env_int("FREEZEML_TERM_SIZE", 25)

# ============================================================================
# 前导 (prelude) 配置
# ============================================================================
DEFAULT_PRELUDE = os.getenv(
    "FREEZEML_PRELUDE",
    str(PROJECT_ROOT / "prelude" / "std.fml")
)

# ============================================================================
# 类型构造子注册表
# ============================================================================
ARROW = "->"
PRODUCT = "*"

CONSTRUCTORS = {
    ARROW: {
        "arity": 2,
        "display": "->",
        "description": "函数类型，右结合"
    },
    PRODUCT: {
        "arity": 2,
        "display": "(_, _)",
        "description": "二元积类型，写作 (A, B)"
    },
    "Int": {
        "arity": 0,
        "display": "Int",
        "description": "整数，数字字面量的类型"
    },
    "Unit": {
        "arity": 0,
        "display": "Unit",
        "description": "单元类型"
    },
    "Bool": {
        "arity": 0,
        "display": "Bool",
        "description": "布尔类型"
    },
    "List": {
        "arity": 1,
        "display": "List",
        "description": "列表"
    },
}

# 数字字面量的类型
LITERAL_TYPE = "Int"


def get_constructor_info(name: str) -> dict:
    """获取构造子信息，未注册返回 None"""
    return CONSTRUCTORS.get(name)
