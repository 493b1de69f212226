"""
Solver - 约束求解栈机器
确定性的重写规则、运行循环（带不变式断言与步数兜底）、推断入口
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

from src.config import (
    CHECK_INVARIANTS, LITERAL_TYPE, PARTITION_STRATEGY, STEP_BUDGET_FACTOR,
    STEP_BUDGET_SLACK, TRACE_WIDTH,
)
from src.constraints import (
    CAnd, CDef, CEq, CExists, CForall, CFreeze, CInst, CLet, CMono, CTrue, Constraint,
    TRUE, congen, dump_constraint, exists_many, forall_many,
)
from src.errors import (
    DefMonoFailure, InferenceError, InvariantViolation, MonoFailure, RigidEscape,
    UnboundVariable, UnificationFailure, UnifyError,
)
from src.stack import (
    ConjFrame, DefFrame, ExistsFrame, ForallFrame, Frame, LetFrame, SolverState,
    delta_of, gamma_of, is_final_shape, measure, partition, rank_partition,
    state_problems, top_exists_run,
)
from src.surface import Namer, print_type
from src.syntax import (
    NameSupply, Restriction, TCon, TermContext, Type, TypeVarName, TVar,
    apply_type_subst, check_term, forall, ftv_ordered, quantifier_prefix,
    term_literals, wf_type,
)
from src.unify import RestrictionContext, Subst, compose, unify


# ============================================================================
# 单步结果
# ============================================================================
@dataclass(frozen=True)
class Stepped:
    rule: str
    state: SolverState


@dataclass(frozen=True)
class Final:
    state: SolverState


@dataclass(frozen=True)
class Stuck:
    error: InferenceError


StepOutcome = Union[Stepped, Final, Stuck]


@dataclass(frozen=True)
class TraceEntry:
    """一步的跟踪记录"""
    step: int
    rule: str
    stack_depth: int
    measure: Tuple[int, int, int, int]
    constraint: str

    def render(self) -> str:
        m = ",".join(str(x) for x in self.measure)
        return (f"step={self.step} rule={self.rule} measure=({m}) "
                f"stack={self.stack_depth} constraint={self.constraint}")


@dataclass
class RunResult:
    final: SolverState
    trace: List[TraceEntry] = field(default_factory=list)
    steps: int = 0


@dataclass
class InferenceResult:
    """
    推断结果

    result_type 中的柔性变量都在 residual 里（带限制），其余变量都是 Δ 中的刚性变量
    """
    result_type: Type
    residual: RestrictionContext
    trace: List[TraceEntry]
    constraint: Constraint
    final: SolverState


# ============================================================================
# 规则
# ============================================================================
def _top(s: SolverState) -> Optional[Frame]:
    return s.stack[-1] if s.stack else None


def _popping(frame_type) -> Callable[[SolverState], bool]:
    def guard(s: SolverState) -> bool:
        return isinstance(s.current, CTrue) and isinstance(_top(s), frame_type)
    return guard


def _forall_pop_guard(s: SolverState) -> bool:
    # ∀Δ :: ∃Ξ 形状已是终态，底部的 ∀ 帧不弹出
    return _popping(ForallFrame)(s) and not is_final_shape(s.stack)


def _exists_lower_guard(s: SolverState) -> bool:
    if not isinstance(s.current, CTrue) or is_final_shape(s.stack):
        return False
    run = top_exists_run(s.stack)
    if run == 0 or run == len(s.stack):
        return False
    below = s.stack[-run - 1]
    return not isinstance(below, (LetFrame, ExistsFrame))


def _let_pop_guard(restriction: Restriction) -> Callable[[SolverState], bool]:
    def guard(s: SolverState) -> bool:
        if not isinstance(s.current, CTrue):
            return False
        run = top_exists_run(s.stack)
        if run == len(s.stack):
            return False
        frame = s.stack[-run - 1]
        return isinstance(frame, LetFrame) and frame.restriction is restriction
    return guard


class Solver:
    """
    约束求解器

    一个实例对应一次求解：持有名字供给、partition 策略与 partition 调用记录
    """

    def __init__(self, supply: Optional[NameSupply] = None,
                 check_invariants: bool = CHECK_INVARIANTS,
                 partition_strategy: str = PARTITION_STRATEGY,
                 trace_width: int = TRACE_WIDTH):
        if partition_strategy not in ("scan", "rank"):
            raise ValueError(f"未知的 partition 策略: {partition_strategy}")
        self.supply = supply or NameSupply()
        self.check_invariants = check_invariants
        self.partition_strategy = partition_strategy
        self.trace_width = trace_width
        self.partition_calls = 0
        self.namer = Namer()

        # (名称, 守卫, 动作)：守卫两两互斥
        self.rules: List[Tuple[str, Callable, Callable]] = [
            ("S-Eq", lambda s: isinstance(s.current, CEq), self._eq),
            ("S-Freeze", lambda s: isinstance(s.current, CFreeze), self._freeze),
            ("S-Inst", lambda s: isinstance(s.current, CInst), self._inst),
            ("S-Mono", lambda s: isinstance(s.current, CMono), self._mono),
            ("S-ConjPush", lambda s: isinstance(s.current, CAnd), self._conj_push),
            ("S-ConjPop", _popping(ConjFrame), self._conj_pop),
            ("S-ExistsPush", lambda s: isinstance(s.current, CExists), self._exists_push),
            ("S-ExistsLower", _exists_lower_guard, self._exists_lower),
            ("S-ForallPush", lambda s: isinstance(s.current, CForall), self._forall_push),
            ("S-ForallPop", _forall_pop_guard, self._forall_pop),
            ("S-DefPush", lambda s: isinstance(s.current, CDef), self._def_push),
            ("S-DefPop", _popping(DefFrame), self._def_pop),
            ("S-LetPush", lambda s: isinstance(s.current, CLet), self._let_push),
            ("S-LetPolyPop", _let_pop_guard(Restriction.POLY), self._let_poly_pop),
            ("S-LetMonoPop", _let_pop_guard(Restriction.MONO), self._let_mono_pop),
        ]

    # ------------------------------------------------------------------
    # 原子约束
    # ------------------------------------------------------------------
    def _eq(self, s: SolverState) -> SolverState:
        c = s.current
        delta = delta_of(s.stack)
        try:
            env, step = unify(delta, s.theta_env, s.subst.apply(c.left), s.subst.apply(c.right))
        except UnifyError as e:
            raise UnificationFailure(e, c.span)
        return SolverState(s.stack, env, compose(step, s.subst), TRUE)

    def _lookup(self, s: SolverState, name: str, span) -> Type:
        gamma = gamma_of(s.stack)
        if name not in gamma:
            raise UnboundVariable(name, span)
        return gamma[name]

    def _freeze(self, s: SolverState) -> SolverState:
        c = s.current
        scheme = self._lookup(s, c.name, c.span)
        return SolverState(s.stack, s.theta_env, s.subst, CEq(scheme, c.type, c.span))

    def _inst(self, s: SolverState) -> SolverState:
        c = s.current
        scheme = self._lookup(s, c.name, c.span)
        bound, body = quantifier_prefix(scheme)
        renamed = [self.supply.fresh(var.text) for var in bound]
        body = apply_type_subst({old: TVar(new) for old, new in zip(bound, renamed)}, body)
        current = exists_many(renamed, CEq(body, c.type, c.span), c.span)
        return SolverState(s.stack, s.theta_env, s.subst, current)

    def _mono(self, s: SolverState) -> SolverState:
        c = s.current
        delta = delta_of(s.stack)
        image = s.subst.apply(TVar(c.var))
        env = s.theta_env.demoted(v for v in ftv_ordered(image) if v not in delta)
        if not wf_type(delta, env, Restriction.MONO, image):
            raise MonoFailure(c.var.text, print_type(image, self.namer), c.span)
        return SolverState(s.stack, env, s.subst, TRUE)

    # ------------------------------------------------------------------
    # 合取
    # ------------------------------------------------------------------
    def _conj_push(self, s: SolverState) -> SolverState:
        c = s.current
        return SolverState(s.stack + (ConjFrame(c.right),), s.theta_env, s.subst, c.left)

    def _conj_pop(self, s: SolverState) -> SolverState:
        frame = s.stack[-1]
        return SolverState(s.stack[:-1], s.theta_env, s.subst, frame.rest)

    # ------------------------------------------------------------------
    # 量词
    # ------------------------------------------------------------------
    def _exists_push(self, s: SolverState) -> SolverState:
        c = s.current
        return SolverState(
            s.stack + (ExistsFrame(c.var),),
            s.theta_env.extend(c.var, Restriction.POLY),
            s.subst.extend(c.var, TVar(c.var)),
            c.body,
        )

    def _exists_lower(self, s: SolverState) -> SolverState:
        run = top_exists_run(s.stack)
        upper = s.stack[-run:]
        lower = s.stack[:-run - 1]
        frame = s.stack[-run - 1]
        xi = [f.var for f in upper]
        dropped, lowered = self._partition(xi, s, s.stack[:-run], upper)
        env = s.theta_env.remove(dropped)
        stack = lower + tuple(ExistsFrame(var) for var in lowered) + (frame,)
        return SolverState(stack, env, s.subst.restrict(env), TRUE)

    def _forall_push(self, s: SolverState) -> SolverState:
        c = s.current
        return SolverState(s.stack + (ForallFrame(c.var, c.span),), s.theta_env, s.subst, c.body)

    def _forall_pop(self, s: SolverState) -> SolverState:
        frame = s.stack[-1]
        if frame.var in s.subst.range_ftv():
            raise RigidEscape(frame.var.text, frame.span)
        return SolverState(s.stack[:-1], s.theta_env, s.subst, TRUE)

    # ------------------------------------------------------------------
    # def / let
    # ------------------------------------------------------------------
    def _def_push(self, s: SolverState) -> SolverState:
        c = s.current
        delta = delta_of(s.stack)
        candidates = ftv_ordered(s.subst.apply(c.type)) + ftv_ordered(c.type)
        env = s.theta_env.demoted(v for v in candidates if v not in delta)
        for var in ftv_ordered(c.type):
            image = s.subst.apply(TVar(var))
            if not wf_type(delta, env, Restriction.MONO, image):
                raise DefMonoFailure(c.name, var.text, print_type(image, self.namer), c.span)
        return SolverState(s.stack + (DefFrame(c.name, c.type, c.span),), env, s.subst, c.body)

    def _def_pop(self, s: SolverState) -> SolverState:
        return SolverState(s.stack[:-1], s.theta_env, s.subst, TRUE)

    def _let_push(self, s: SolverState) -> SolverState:
        c = s.current
        frame = LetFrame(c.restriction, c.name, c.var, c.body, c.span)
        return SolverState(
            s.stack + (frame,),
            s.theta_env.extend(c.var, Restriction.POLY),
            s.subst.extend(c.var, TVar(c.var)),
            c.bound,
        )

    def _let_parts(self, s: SolverState):
        run = top_exists_run(s.stack)
        upper = s.stack[len(s.stack) - run:]
        frame = s.stack[-run - 1]
        lower = s.stack[:-run - 1]
        # 按绑定顺序：let 的变量在下，∃ 在上
        xi = [frame.var] + [f.var for f in upper]
        generalisable, kept = self._partition(xi, s, lower, s.stack[len(lower):])
        body = s.subst.apply(TVar(frame.var))
        quantified = [v for v in ftv_ordered(body) if v in set(generalisable)]
        return frame, lower, xi, generalisable, kept, body, quantified

    def _let_poly_pop(self, s: SolverState) -> SolverState:
        frame, lower, _, generalisable, kept, body, quantified = self._let_parts(s)
        env = s.theta_env.remove(generalisable)
        stack = lower + tuple(ExistsFrame(var) for var in kept)
        current = CDef(frame.name, forall(quantified, body), frame.rest, frame.span)
        return SolverState(stack, env, s.subst.restrict(env), current)

    def _let_mono_pop(self, s: SolverState) -> SolverState:
        frame, lower, xi, generalisable, kept, body, quantified = self._let_parts(s)
        dropped = [v for v in generalisable if v not in set(quantified)]
        env = s.theta_env.remove(dropped)
        survivors = set(quantified) | set(kept)
        stack = lower + tuple(ExistsFrame(var) for var in xi if var in survivors)
        current = CDef(frame.name, body, frame.rest, frame.span)
        return SolverState(stack, env, s.subst.restrict(env), current)

    # ------------------------------------------------------------------
    # partition
    # ------------------------------------------------------------------
    def _partition(self, xi: Sequence[TypeVarName], s: SolverState,
                   stack_lower: Sequence[Frame], stack_upper: Sequence[Frame]):
        """按配置的策略计算 partition；检查不变式时两种实现必须一致"""
        self.partition_calls += 1
        if self.partition_strategy == "rank":
            result = rank_partition(xi, s.subst, stack_lower, stack_upper)
        else:
            result = partition(xi, s.subst, s.theta_env)
        if self.check_invariants:
            if self.partition_strategy == "rank":
                other = partition(xi, s.subst, s.theta_env)
            else:
                other = rank_partition(xi, s.subst, stack_lower, stack_upper)
            if other != result:
                raise InvariantViolation(
                    f"partition 与基于秩的 partition 结果不一致: {result!r} vs {other!r}"
                )
        return result

    # ------------------------------------------------------------------
    # 驱动
    # ------------------------------------------------------------------
    def matching_rules(self, s: SolverState) -> List[str]:
        """所有守卫成立的规则名"""
        return [name for name, guard, _ in self.rules if guard(s)]

    def step(self, s: SolverState) -> StepOutcome:
        if isinstance(s.current, CTrue) and is_final_shape(s.stack):
            return Final(s)
        for name, guard, action in self.rules:
            if guard(s):
                try:
                    return Stepped(name, action(s))
                except InferenceError as e:
                    return Stuck(e)
        raise InvariantViolation(f"没有规则适用: {dump_constraint(s.current, self.namer)}")

    def _record(self, index: int, rule: str, s: SolverState) -> TraceEntry:
        text = dump_constraint(s.current, self.namer)
        if len(text) > self.trace_width:
            text = text[:max(self.trace_width - 3, 0)] + "..."
        return TraceEntry(index, rule, len(s.stack), measure(s), text)

    def _check_state(self, s: SolverState, rule: str):
        problems = state_problems(s)
        if problems:
            raise InvariantViolation(f"{rule} 之后状态不良构: " + "; ".join(problems))

    def run(self, initial: SolverState, step_budget: Optional[int] = None,
            record_trace: bool = True) -> RunResult:
        """
        反复 step 直到 Final 或 Stuck

        Args:
            initial: 初始状态
            step_budget: 步数上限，默认 FACTOR × (|F[C]| + SLACK)
            record_trace: 是否记录每一步

        Returns:
            RunResult

        Raises:
            InferenceError: Stuck 携带的错误（附带 trace 属性）
            InvariantViolation: 不变式断言失败或超出步数上限
        """
        if step_budget is None:
            step_budget = STEP_BUDGET_FACTOR * (measure(initial)[1] + STEP_BUDGET_SLACK)

        trace: List[TraceEntry] = []
        if record_trace:
            trace.append(self._record(0, "init", initial))
        if self.check_invariants:
            self._check_state(initial, "init")

        state = initial
        current_measure = measure(initial)
        steps = 0
        while True:
            if self.check_invariants:
                matched = self.matching_rules(state)
                final = isinstance(state.current, CTrue) and is_final_shape(state.stack)
                if len(matched) > 1 or (final and matched) or (not final and not matched):
                    raise InvariantViolation(f"规则匹配不确定: {matched}")

            outcome = self.step(state)
            if isinstance(outcome, Final):
                return RunResult(state, trace, steps)
            if isinstance(outcome, Stuck):
                outcome.error.trace = trace
                raise outcome.error

            steps += 1
            if steps > step_budget:
                raise InvariantViolation(f"超出步数上限 {step_budget}")
            state = outcome.state
            next_measure = measure(state)
            if self.check_invariants:
                self._check_state(state, outcome.rule)
                if not next_measure < current_measure:
                    raise InvariantViolation(
                        f"{outcome.rule} 之后度量没有下降: {current_measure} -> {next_measure}"
                    )
            current_measure = next_measure
            if record_trace:
                trace.append(self._record(steps, outcome.rule, state))


# ============================================================================
# 便捷函数
# ============================================================================
def initial_state(c: Constraint) -> SolverState:
    return SolverState((), RestrictionContext(), Subst(), c)


def closing_constraint(delta: Sequence[TypeVarName], xi: Sequence[TypeVarName],
                       gamma: TermContext, c: Constraint) -> Constraint:
    """∀Δ.∃Ξ.def Γ in C"""
    body = c
    for name, t in reversed(list(gamma.items())):
        body = CDef(name, t, body)
    return forall_many(delta, exists_many(xi, body))


def step(s: SolverState) -> StepOutcome:
    return Solver().step(s)


def matching_rules(s: SolverState) -> List[str]:
    return Solver().matching_rules(s)


def run(initial: SolverState, step_budget: Optional[int] = None) -> RunResult:
    return Solver().run(initial, step_budget)


def solve_constraint(delta: Sequence[TypeVarName], xi: Sequence[TypeVarName],
                     gamma: TermContext, c: Constraint,
                     solver: Optional[Solver] = None) -> RunResult:
    """
    求解 ∀Δ.∃Ξ.def Γ in C

    Returns:
        RunResult；最终栈为 ∀Δ :: ∃Ξ′，Ξ 中的变量都还在 Θ 里
    """
    solver = solver or Solver()
    return solver.run(initial_state(closing_constraint(delta, xi, gamma, c)))


def literal_context(gamma: TermContext, m) -> TermContext:
    """为项中出现、Γ 中未绑定的整数字面量补上 n : Int"""
    for literal in term_literals(m):
        if literal not in gamma:
            gamma = gamma.extend(literal, TCon(LITERAL_TYPE, ()))
    return gamma


def infer(delta: Sequence[TypeVarName], gamma: TermContext, m,
          supply: Optional[NameSupply] = None,
          solver: Optional[Solver] = None) -> InferenceResult:
    """
    推断 Δ;Γ ⊢ m 的类型

    Args:
        delta: 刚性类型变量
        gamma: 项上下文（类型需在 Δ 上封闭）
        m: 项
        supply: 名字供给，默认新建
        solver: 求解器实例，默认按配置新建

    Returns:
        InferenceResult

    Raises:
        InferenceError: 项不良构或无法定型
        InvariantViolation: 求解器内部断言失败
    """
    solver = solver or Solver(supply)
    gamma = literal_context(gamma, m)
    check_term(delta, gamma, m)

    a = solver.supply.fresh("a")
    c = congen(m, TVar(a), solver.supply, in_scope=gamma)
    result = solve_constraint(delta, [a], gamma, c, solver)

    final = result.final
    result_type = final.subst.apply(TVar(a))
    residual_vars = [v for v in ftv_ordered(result_type) if v in final.theta_env]
    residual = RestrictionContext({v: final.theta_env[v] for v in residual_vars})
    return InferenceResult(result_type, residual, result.trace, c, final)
