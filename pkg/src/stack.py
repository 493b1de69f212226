"""
Stack - 求解器状态
栈帧、状态 (F, Θ, θ, C)、从栈中提取上下文、状态良构性、终止度量与 partition
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from src.constraints import (
    CAnd, CDef, CEq, CExists, CForall, CMono, Constraint, ConstraintContext,
    conj, constraint_size, count_instances, make_let, wf_constraint,
)
from src.errors import SourceSpan
from src.syntax import (
    Restriction, TermContext, Type, TypeContext, TypeVarName, TVar, closed_over,
    ftv_ordered, wf_type,
)
from src.unify import RestrictionContext, Subst


# ============================================================================
# 栈帧
# ============================================================================
@dataclass(frozen=True)
class ConjFrame:
    """□ ∧ C"""
    rest: Constraint


@dataclass(frozen=True)
class ForallFrame:
    var: TypeVarName
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class ExistsFrame:
    var: TypeVarName


@dataclass(frozen=True)
class LetFrame:
    """let_R x = ⊓a.□ in C"""
    restriction: Restriction
    name: str
    var: TypeVarName
    rest: Constraint
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class DefFrame:
    name: str
    type: Type
    span: Optional[SourceSpan] = field(default=None, compare=False)


Frame = Union[ConjFrame, ForallFrame, ExistsFrame, LetFrame, DefFrame]
Stack = Tuple[Frame, ...]


@dataclass(frozen=True)
class SolverState:
    """(F, Θ, θ, C)，栈自底向上"""
    stack: Stack
    theta_env: RestrictionContext
    subst: Subst
    current: Constraint


# ============================================================================
# 提取
# ============================================================================
def delta_of(stack: Sequence[Frame]) -> TypeContext:
    """∀ 帧绑定的刚性变量"""
    return TypeContext(f.var for f in stack if isinstance(f, ForallFrame))


def xi_of(stack: Sequence[Frame]) -> TypeContext:
    """∃ 帧与 let 帧绑定的柔性变量"""
    return TypeContext(f.var for f in stack if isinstance(f, (ExistsFrame, LetFrame)))


def gamma_of(stack: Sequence[Frame]) -> TermContext:
    """def 帧绑定的项变量"""
    return TermContext((f.name, f.type) for f in stack if isinstance(f, DefFrame))


def atv(stack: Sequence[Frame]) -> List[TypeVarName]:
    """栈上绑定的全部类型变量（刚性与柔性交错），由外向内"""
    return [f.var for f in stack if isinstance(f, (ForallFrame, ExistsFrame, LetFrame))]


def bound_terms(stack: Sequence[Frame]) -> List[str]:
    return [f.name for f in stack if isinstance(f, (DefFrame, LetFrame))]


def top_exists_run(stack: Sequence[Frame]) -> int:
    """栈顶连续 ∃ 帧的个数"""
    count = 0
    for frame in reversed(stack):
        if not isinstance(frame, ExistsFrame):
            break
        count += 1
    return count


def is_final_shape(stack: Sequence[Frame]) -> bool:
    """∀Δ :: ∃Ξ：若干 ∀ 帧之后只有 ∃ 帧"""
    seen_exists = False
    for frame in stack:
        if isinstance(frame, ForallFrame):
            if seen_exists:
                return False
        elif isinstance(frame, ExistsFrame):
            seen_exists = True
        else:
            return False
    return True


# ============================================================================
# 还原为约束
# ============================================================================
def plug(stack: Sequence[Frame], c: Constraint) -> Constraint:
    """F[C]：从栈顶往下逐帧包裹"""
    for frame in reversed(stack):
        if isinstance(frame, ConjFrame):
            c = CAnd(c, frame.rest)
        elif isinstance(frame, ForallFrame):
            c = CForall(frame.var, c)
        elif isinstance(frame, ExistsFrame):
            c = CExists(frame.var, c)
        elif isinstance(frame, LetFrame):
            c = make_let(frame.restriction, frame.name, frame.var, c, frame.rest)
        else:
            c = CDef(frame.name, frame.type, c)
    return c


def unification_constraint(theta_env: RestrictionContext, subst: Subst) -> Constraint:
    """𝔘(Θ, θ)：• 变量的 mono 约束，加上每个变量 a ≗ θ(a)"""
    monos = [CMono(var) for var, r in theta_env.items() if r is Restriction.MONO]
    equations = [CEq(TVar(var), subst[var]) for var in theta_env if var in subst]
    return conj(monos + equations)


def reify_state(s: SolverState) -> Constraint:
    """F[C ∧ 𝔘(Θ, θ)]"""
    return plug(s.stack, CAnd(s.current, unification_constraint(s.theta_env, s.subst)))


# ============================================================================
# 度量
# ============================================================================
def measure(s: SolverState) -> Tuple[int, int, int, int]:
    """
    终止度量，按字典序严格递减

    Returns:
        (F[C] 中实例约束个数, |F[C]|, |C|, 最上面的 ∃ 帧在栈中的位置（从 0 起，没有则 0）)
    """
    plugged = plug(s.stack, s.current)
    top_exists = 0
    for index in range(len(s.stack) - 1, -1, -1):
        if isinstance(s.stack[index], ExistsFrame):
            top_exists = index
            break
    return (
        count_instances(plugged),
        constraint_size(plugged),
        constraint_size(s.current),
        top_exists,
    )


# ============================================================================
# 良构性
# ============================================================================
def state_problems(s: SolverState) -> List[str]:
    """逐条检查状态不变式，返回违反的条目（空列表表示良构）"""
    problems = []
    stack = s.stack
    theta_env = s.theta_env
    subst = s.subst
    delta = delta_of(stack)
    keys = theta_env.keys_set()

    # 绑定两两不同
    binders = atv(stack)
    if len(set(binders)) != len(binders):
        problems.append("栈上的类型变量绑定有重复")
    names = bound_terms(stack)
    if len(set(names)) != len(names):
        problems.append("栈上的项变量绑定有重复")
    if keys & delta.as_set():
        problems.append("Θ 与刚性变量相交")

    # Θ 恰好是 ∃/let 帧绑定的变量
    if set(xi_of(stack)) != set(keys):
        problems.append("Θ 与栈上的柔性变量不一致")

    # Δof ⊢ θ : Θ ⇒ Θ
    if set(subst) != set(keys):
        problems.append("θ 的定义域与 Θ 不一致")
    for var in keys:
        if var in subst and not wf_type(delta, theta_env, theta_env[var], subst[var]):
            problems.append(f"θ({var.text}) 不满足限制 {theta_env[var]}")
    if not subst.is_idempotent():
        problems.append("θ 不幂等")

    # 逐帧检查
    below: List[Frame] = []
    for frame in stack:
        below_delta = delta_of(below)
        below_gamma = gamma_of(below)
        if isinstance(frame, ConjFrame):
            ctx = ConstraintContext(below_delta, TypeContext(keys), below_gamma)
            if not wf_constraint(ctx, frame.rest):
                problems.append("□ ∧ C 帧中的约束不良构")
        elif isinstance(frame, LetFrame):
            # 只看名字，x 的类型此时还未确定
            scoped = below_gamma.extend(frame.name, TVar(frame.var))
            ctx = ConstraintContext(below_delta, TypeContext(keys), scoped)
            if not wf_constraint(ctx, frame.rest):
                problems.append(f"let {frame.name} 帧中的约束不良构")
        elif isinstance(frame, DefFrame):
            scope = below_delta.as_set() | keys
            if not closed_over(scope, frame.type):
                problems.append(f"def {frame.name} 的类型不良构")
            for var in ftv_ordered(frame.type):
                if var in below_delta:
                    continue
                if theta_env.get(var) is not Restriction.MONO:
                    problems.append(f"def {frame.name} 中的 {var.text} 不是单态的")
        below.append(frame)

    # 当前约束
    ctx = ConstraintContext(delta, xi_of(stack), gamma_of(stack))
    if not wf_constraint(ctx, s.current):
        problems.append("当前约束不良构")
    return problems


def state_wf(s: SolverState) -> bool:
    """⊢ wf (F, Θ, θ, C)"""
    return not state_problems(s)


# ============================================================================
# partition
# ============================================================================
def partition(xi: Sequence[TypeVarName], subst: Subst,
              theta_env: RestrictionContext) -> Tuple[List[TypeVarName], List[TypeVarName]]:
    """
    partition(Ξ, θ, Θ) = Ξ′ ; Ξ″

    Ξ″ 是出现在 θ|(Θ − Ξ) 值域中的变量（需要保留并下移），Ξ′ 是其余的；
    两者都保持 xi 中的顺序
    """
    group = set(xi)
    outside = [var for var in theta_env if var not in group]
    referenced = subst.range_ftv(outside)
    kept_out = [var for var in xi if var not in referenced]
    lowered = [var for var in xi if var in referenced]
    return kept_out, lowered


def ranks(stack: Sequence[Frame], subst: Subst) -> dict:
    """rank(b) = 最小的 i 使 b ∈ ftv(θ(a_i))，a_i 取 atv(F)，编号从 1 开始"""
    result = {}
    for index, var in enumerate(atv(stack), start=1):
        image = subst.get(var, TVar(var))
        for occurring in ftv_ordered(image):
            if occurring not in result:
                result[occurring] = index
    return result


def rank_partition(xi: Sequence[TypeVarName], subst: Subst,
                   stack_lower: Sequence[Frame],
                   stack_upper: Sequence[Frame]) -> Tuple[List[TypeVarName], List[TypeVarName]]:
    """
    基于秩的 partition′(Ξ, θ, F1, F2)

    F1 :: F2 是当前栈，Ξ 是 F2 绑定的柔性变量；秩不小于 |atv(F1)| + 1 的可以移除/泛化，
    其余的被下层引用
    """
    rank_of = ranks(tuple(stack_lower) + tuple(stack_upper), subst)
    boundary = len(atv(stack_lower)) + 1
    infinity = float("inf")
    kept_out = [var for var in xi if rank_of.get(var, infinity) >= boundary]
    lowered = [var for var in xi if rank_of.get(var, infinity) < boundary]
    return kept_out, lowered
