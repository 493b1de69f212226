#!/usr/bin/env python3
"""
FreezeML 类型推断主入口
infer: 推断文件或表达式的类型，可输出约束、逐步跟踪与 JSON 报告
selftest: 随机化自检
"""
import argparse
import os
import sys

# 添加项目根目录到 Python 路径
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from src.config import DEFAULT_PRELUDE, SELFTEST_COUNT, SELFTEST_SEED
from src.constraints import congen, dump_constraint
from src.errors import FreezeMLError, InferenceError, InvariantViolation, ParseError
from src.report import error_report, ok_report
from src.selftest import SelfTest
from src.solver import infer, literal_context
from src.surface import Prelude, load_prelude, parse_term, print_result
from src.syntax import NameSupply, TVar, check_term

# 退出码
EXIT_OK = 0
EXIT_TYPE_ERROR = 1
EXIT_PARSE_ERROR = 2
EXIT_INTERNAL = 3


def print_banner():
    """打印程序横幅"""
    banner = """
╔════════════════════════════════════════════════════════════╗
║                                                            ║
║   FreezeML - 基于约束的类型推断                            ║
║                                                            ║
║   约束生成 · 栈式求解器 · 判定器交叉验证                   ║
║                                                            ║
╚════════════════════════════════════════════════════════════╝
"""
    print(banner, file=sys.stderr)


def err(text: str):
    print(text, file=sys.stderr)


def read_prelude(path: str) -> Prelude:
    """
    读取前导文件

    Raises:
        ParseError: 文件不存在或语法错误
    """
    if not os.path.exists(path):
        raise ParseError(f"prelude not found: {path}")
    return load_prelude(path)


def read_source(args) -> str:
    if args.expr is not None:
        return args.expr
    if args.file is None:
        raise ParseError("no input: give FILE or -e EXPR")
    try:
        with open(args.file, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise ParseError(f"cannot read {args.file}: {e.strerror}")


def print_constraint(gamma, m, stream):
    """求解之前输出 ⟦m : a⟧"""
    supply = NameSupply()
    scoped = literal_context(gamma, m)
    check_term((), scoped, m)
    c = congen(m, TVar(supply.fresh("a")), supply, in_scope=scoped)
    print(dump_constraint(c), file=stream)


def cmd_infer(args) -> int:
    """
    推断一个表达式的类型

    Returns:
        退出码：0 成功，1 类型错误，2 解析错误，3 内部不变式失败
    """
    try:
        prelude = read_prelude(args.prelude)
        m = parse_term(read_source(args))
    except ParseError as e:
        if args.json:
            print(error_report("parse-error", e).model_dump_json(indent=2))
        err(f"❌ parse error: {e}")
        return EXIT_PARSE_ERROR

    gamma = prelude.to_context()
    try:
        if args.constraint:
            print_constraint(gamma, m, sys.stderr if args.json else sys.stdout)
        result = infer((), gamma, m)
    except RecursionError:
        e = InvariantViolation("term is nested too deeply for constraint solving")
        if args.json:
            print(error_report("internal-error", e).model_dump_json(indent=2))
        err(f"❌ internal error: {e}")
        return EXIT_INTERNAL
    except InvariantViolation as e:
        if args.json:
            print(error_report("internal-error", e).model_dump_json(indent=2))
        err(f"❌ internal error: {e}")
        return EXIT_INTERNAL
    except InferenceError as e:
        trace = getattr(e, "trace", None) if args.trace else None
        if args.json:
            print(error_report("type-error", e, trace).model_dump_json(indent=2))
        else:
            for entry in trace or []:
                print(entry.render())
        err(f"❌ type error: {e}")
        return EXIT_TYPE_ERROR

    if args.json:
        print(ok_report(result, with_trace=args.trace).model_dump_json(indent=2))
        return EXIT_OK

    print(print_result(result.result_type, result.residual))
    if args.trace:
        for entry in result.trace:
            print(entry.render())
    return EXIT_OK


def cmd_selftest(args) -> int:
    """
    随机化自检

    Returns:
        0 全部通过，1 有性质失败
    """
    print_banner()
    try:
        prelude = read_prelude(args.prelude)
    except ParseError as e:
        err(f"❌ parse error: {e}")
        return EXIT_PARSE_ERROR

    suites = SelfTest(prelude, seed=args.seed, count=args.count).run()
    err("")
    for suite in suites:
        print(suite.summary())
        for failure in suite.failures:
            print(f"   - {failure}")

    if all(suite.passed for suite in suites):
        err("✅ 自检通过")
        return EXIT_OK
    err("❌ 自检失败")
    return EXIT_TYPE_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freezeml", description="FreezeML 类型推断")
    sub = parser.add_subparsers(dest="command", required=True)

    p_infer = sub.add_parser("infer", help="推断表达式的类型")
    p_infer.add_argument("file", nargs="?", help=".fml 源文件")
    p_infer.add_argument("-e", "--expr", help="直接给出表达式")
    p_infer.add_argument("--prelude", default=DEFAULT_PRELUDE, help="前导文件")
    p_infer.add_argument("--trace", action="store_true", help="输出逐步跟踪")
    p_infer.add_argument("--constraint", action="store_true", help="求解前输出生成的约束")
    p_infer.add_argument("--json", action="store_true", help="输出 JSON 报告")
    p_infer.set_defaults(handler=cmd_infer)

    p_self = sub.add_parser("selftest", help="随机化自检")
    p_self.add_argument("--seed", type=int, default=SELFTEST_SEED)
    p_self.add_argument("--count", type=int, default=SELFTEST_COUNT)
    p_self.add_argument("--prelude", default=DEFAULT_PRELUDE, help="前导文件")
    p_self.set_defaults(handler=cmd_selftest)
    return parser


def main(argv=None) -> int:
    """主函数"""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except KeyboardInterrupt:
        err("\n⚠️ 用户中断")
        return 130
    except RecursionError:
        err("\n❌ internal error: input is nested too deeply")
        return EXIT_INTERNAL
    except FreezeMLError as e:
        err(f"\n[错误] {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
