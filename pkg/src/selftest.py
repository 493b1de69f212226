"""
SelfTest - 随机化自检
在随机项与随机合一问题上检查求解器的性质，并用判定器交叉验证：
规则确定性、度量递减、状态良构、partition 与秩一致、可靠性、合一子最一般性、语料
"""
import random
import sys
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from src.config import SELFTEST_COUNT, SELFTEST_SEED, SELFTEST_TERM_SIZE
from src.constraints import congen
from src.corpus import CorpusEntry, all_entries, error_kind
from src.errors import FreezeMLError, InferenceError, InvariantViolation, UnifyError
from src.generators import TermGenerator, UnificationProblem, shrink, unification_problem
from src.oracle import check_constraint_sat, check_typing, match_instance
from src.solver import InferenceResult, Solver, infer, literal_context
from src.surface import Prelude, parse_term, print_result, print_term, print_type
from src.syntax import (
    NameSupply, Restriction, TCon, Term, TermContext, Type, TVar, apply_type_subst,
    check_term, forall, ftv_ordered, is_monotype, product,
)
from src.unify import RestrictionContext, unify

INT = TCon("Int", ())


@dataclass
class SuiteResult:
    """一个性质套件的结果"""
    name: str
    checked: int = 0
    skipped: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        icon = "✅" if self.passed else "❌"
        text = f"{icon} {self.name}: {self.checked} 项检查, {len(self.failures)} 项失败"
        if self.skipped:
            text += f", {self.skipped} 项跳过"
        return text


# ============================================================================
# 单项性质
# ============================================================================
def run_solver(gamma: TermContext, m: Term) -> Tuple[Optional[InferenceResult], Optional[str], int]:
    """
    打开不变式检查推断 m

    Returns:
        (推断结果或 None, 不变式失败信息或 None, partition 调用次数)
    """
    solver = Solver(NameSupply(), check_invariants=True)
    try:
        result = infer((), gamma, m, solver=solver)
    except InvariantViolation as e:
        return None, str(e), solver.partition_calls
    except InferenceError:
        return None, None, solver.partition_calls
    return result, None, solver.partition_calls


def ground_residuals(result: InferenceResult) -> Type:
    """剩余柔性变量（• 与 ⋆）都取 Int"""
    return apply_type_subst({var: INT for var in result.residual}, result.result_type)


def solver_failure(gamma: TermContext, m: Term) -> Optional[str]:
    """确定性、度量、良构、partition 一致性：任何一项失败都报告为 InvariantViolation"""
    _, problem, _ = run_solver(gamma, m)
    return problem


def soundness_failure(gamma: TermContext, m: Term) -> Optional[str]:
    """求解器给出的类型（剩余变量取 Int）必须被判定器接受"""
    result, problem, _ = run_solver(gamma, m)
    if problem is not None:
        return problem
    if result is None:
        return None
    grounded = ground_residuals(result)
    if not check_typing((), gamma, m, grounded):
        return f"判定器拒绝了求解器给出的类型 {print_type(grounded)}"
    return None


def unifier_failure(problem: UnificationProblem) -> Optional[str]:
    """
    合一子最一般性：已知的地面合一子 σ 必须经由返回的 θ′ 分解，
    且分解 ρ 把 Θ′ 中的 • 变量映射到单态类型
    """
    theta_env = RestrictionContext(problem.theta_env)
    try:
        new_env, subst = unify((), theta_env, problem.left, problem.right)
    except UnifyError as e:
        if problem.ground is not None:
            return f"存在地面合一子却合一失败: {e}"
        return None
    if problem.ground is None:
        return None

    flexible = list(theta_env)
    images = [subst.apply(TVar(var)) for var in flexible]
    targets = [problem.ground[var] for var in flexible]
    pattern_vars = []
    for image in images:
        for var in ftv_ordered(image):
            if var not in pattern_vars:
                pattern_vars.append(var)

    pattern, target = images[0], targets[0]
    for image, ground in zip(images[1:], targets[1:]):
        pattern, target = product(pattern, image), product(target, ground)

    factor = match_instance(forall(pattern_vars, pattern), target)
    if factor is None:
        return f"σ 不能经由 θ′ 分解: {print_type(problem.left)} ≗ {print_type(problem.right)}"
    for var in pattern_vars:
        if new_env.get(var) is Restriction.MONO and not is_monotype(factor[var]):
            return f"分解把单态变量 {var.text} 映射到了 {print_type(factor[var])}"
    return None


def corpus_failure(gamma: TermContext, entry: CorpusEntry) -> Optional[str]:
    """语料条目：期望的打印结果或错误种类"""
    try:
        m = parse_term(entry.source)
        result = infer((), gamma, m, solver=Solver(NameSupply(), check_invariants=True))
    except InvariantViolation as e:
        return f"{entry.name}: {e}"
    except FreezeMLError as e:
        if entry.error is None:
            return f"{entry.name}: 期望 {entry.expected}，实际报错 {error_kind(e)}"
        if error_kind(e) != entry.error:
            return f"{entry.name}: 期望错误 {entry.error}，实际 {error_kind(e)}"
        return None
    if entry.error is not None:
        return f"{entry.name}: 期望错误 {entry.error}，实际得到类型"
    printed = print_result(result.result_type, result.residual)
    if printed != entry.expected:
        return f"{entry.name}: 期望 {entry.expected}，实际 {printed}"
    return None


def generation_failure(gamma: TermContext, entry: CorpusEntry) -> Optional[str]:
    """
    约束生成的可靠性与完备性：对候选类型 A，
    Δ;Γ ⊢ M : A 当且仅当 ⟦M : a⟧ 在 a ↦ A 下成立
    """
    m = parse_term(entry.source)
    scoped = literal_context(gamma, m)
    try:
        check_term((), scoped, m)
    except InferenceError:
        return None

    candidates = [INT, product(INT, INT)]
    try:
        result = infer((), gamma, m)
        candidates.insert(0, ground_residuals(result))
    except InferenceError:
        pass

    supply = NameSupply()
    a = supply.fresh("a")
    c = congen(m, TVar(a), supply, in_scope=scoped)
    for candidate in candidates:
        typed = check_typing((), gamma, m, candidate)
        satisfied = check_constraint_sat((), [a], scoped, {a: candidate}, c)
        if typed != satisfied:
            return (f"{entry.name}: 候选类型 {print_type(candidate)} 上 "
                    f"typing={typed} constraint={satisfied}")
    return None


# ============================================================================
# 自检
# ============================================================================
class SelfTest:
    """
    随机化自检

    Args:
        prelude: 前导，随机项在它的 Γ 上生成
        seed: 随机种子
        count: 随机项与随机合一问题的个数
        term_size: 随机项的最大结点数
        log: 进度输出，默认写到 stderr
    """

    def __init__(self, prelude: Prelude, seed: int = SELFTEST_SEED,
                 count: int = SELFTEST_COUNT, term_size: int = SELFTEST_TERM_SIZE,
                 log: Optional[Callable[[str], None]] = None):
        self.gamma = prelude.to_context()
        self.seed = seed
        self.count = count
        self.term_size = term_size
        self.log = log or (lambda text: print(text, file=sys.stderr))

    def _counterexample(self, m: Term, still_fails: Callable[[Term], bool], message: str) -> str:
        smallest = shrink(m, still_fails)
        return f"{message}\n   反例: {print_term(smallest)}"

    def solver_suite(self) -> Tuple[SuiteResult, SuiteResult]:
        """求解器不变式与可靠性，共用同一批随机项"""
        invariants = SuiteResult("求解器不变式")
        sound = SuiteResult("可靠性")
        rng = random.Random(self.seed)
        generator = TermGenerator(rng, self.gamma, self.term_size)
        partition_calls = 0

        for _ in range(self.count):
            m = generator.term()
            result, problem, calls = run_solver(self.gamma, m)
            partition_calls += calls
            invariants.checked += 1
            if problem is not None:
                invariants.failures.append(self._counterexample(
                    m, lambda t: self._fails(solver_failure, t), problem))
                continue
            if result is None:
                sound.skipped += 1
                continue
            sound.checked += 1
            message = soundness_failure(self.gamma, m)
            if message is not None:
                sound.failures.append(self._counterexample(
                    m, lambda t: self._fails(soundness_failure, t), message))

        self.log(f"   partition 调用 {partition_calls} 次，基于秩的实现全部一致"
                 if invariants.passed else f"   partition 调用 {partition_calls} 次")
        return invariants, sound

    def _fails(self, prop: Callable[[TermContext, Term], Optional[str]], m: Term) -> bool:
        try:
            return prop(self.gamma, m) is not None
        except FreezeMLError:
            return False

    def unifier_suite(self) -> SuiteResult:
        suite = SuiteResult("合一子最一般性")
        rng = random.Random(self.seed + 1)
        for _ in range(self.count):
            problem = unification_problem(rng)
            if problem.ground is None:
                suite.skipped += 1
                continue
            suite.checked += 1
            message = unifier_failure(problem)
            if message is not None:
                suite.failures.append(message)
        return suite

    def corpus_suite(self) -> SuiteResult:
        suite = SuiteResult("语料")
        for entry in all_entries():
            suite.checked += 1
            for check in (corpus_failure, generation_failure):
                message = check(self.gamma, entry)
                if message is not None:
                    suite.failures.append(message)
        return suite

    def run(self) -> List[SuiteResult]:
        """
        运行全部套件

        Returns:
            各套件结果；count 为 0 时随机套件不做任何检查
        """
        self.log(f"[自检] seed={self.seed} count={self.count} term_size={self.term_size}")
        self.log("[步骤 1/3] 随机项：不变式与可靠性...")
        invariants, sound = self.solver_suite()
        self.log("[步骤 2/3] 随机合一问题...")
        unifier = self.unifier_suite()
        self.log("[步骤 3/3] 语料...")
        corpus = self.corpus_suite()
        return [invariants, sound, unifier, corpus]


def run_selftest(prelude: Prelude, seed: int = SELFTEST_SEED,
                 count: int = SELFTEST_COUNT) -> List[SuiteResult]:
    return SelfTest(prelude, seed, count).run()
