"""
Oracle - 声明式判定器
直接按类型规则与约束语义做检查，用来交叉验证求解器：
实例化检查、实例匹配、类型检查、主类型、约束可满足性
"""
import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from src.config import CONSTRUCTORS, SEARCH_DEPTH, SEARCH_QUANTIFIERS
from src.constraints import (
    CAnd, CDef, CEq, CExists, CForall, CFreeze, CInst, CLet, CMono, CTrue, Constraint,
    ConstraintContext, conj, congen, wf_constraint,
)
from src.errors import InferenceError
from src.solver import Solver, infer, literal_context, solve_constraint
from src.syntax import (
    App, FrozenVar, Lam, LamAnn, Let, LetAnn, NameSupply, Restriction, TCon, TForall,
    TermContext, Type, TypeContext, TypeVarName, TVar, Var, alpha_equal, apply_type_subst,
    check_term, closed_over, forall, fresh_var, ftv, ftv_ordered, is_guarded_value,
    is_monotype, quantifier_prefix, refresh, split, wf_type,
)

Instantiation = Dict[TypeVarName, Type]


class _Reject(Exception):
    """判定失败（内部使用）"""


# ============================================================================
# 实例化
# ============================================================================
def check_instantiation(delta: Iterable[TypeVarName], inst: Mapping[TypeVarName, Type],
                        domain: Iterable[TypeVarName], r: Restriction,
                        extra: Iterable[TypeVarName] = ()) -> bool:
    """
    Δ ⊢ δ : Δ′ ⇒_R Δ″

    Args:
        delta: Δ
        inst: δ
        domain: Δ′，δ 必须覆盖
        r: 每个像需满足的限制
        extra: Δ″

    Returns:
        每个像都在 (Δ, Δ″) 上以 r 良构时为 True
    """
    scope = frozenset(delta) | frozenset(extra)
    return all(var in inst and wf_type(scope, {}, r, inst[var]) for var in domain)


def match_instance(scheme: Type, target: Type) -> Optional[Instantiation]:
    """
    把 ∀ā.H 的 H 匹配到 target

    Returns:
        δ 使 δ(H) 与 target α 等价；没有在 H 中出现的量词变量映射到 Int；匹配失败返回 None
    """
    bound, body = quantifier_prefix(scheme)
    holes = set(bound)
    solution: Instantiation = {}

    def match(p: Type, t: Type, env_p: Dict, env_t: Dict, depth: int) -> bool:
        if isinstance(p, TVar):
            if p.name in env_p:
                return isinstance(t, TVar) and env_t.get(t.name) == env_p[p.name]
            if p.name in holes:
                if ftv(t) & set(env_t):
                    return False
                if p.name in solution:
                    return alpha_equal(solution[p.name], t)
                solution[p.name] = t
                return True
            return isinstance(t, TVar) and t.name == p.name and t.name not in env_t
        if isinstance(p, TCon):
            return (isinstance(t, TCon) and p.ctor == t.ctor and len(p.args) == len(t.args)
                    and all(match(x, y, env_p, env_t, depth) for x, y in zip(p.args, t.args)))
        if not isinstance(t, TForall):
            return False
        return match(p.body, t.body, {**env_p, p.bound: depth}, {**env_t, t.bound: depth}, depth + 1)

    if not match(body, target, {}, {}, 0):
        return None
    for var in bound:
        solution.setdefault(var, TCon("Int", ()))
    return solution


# ============================================================================
# 洞（待定类型）
# ============================================================================
class _Holes:
    """
    待定类型的等式上下文

    洞是柔性变量：• 洞只能取单态类型，⋆ 洞不限。绑定按三角形式保存，
    读取时逐层展开；∀ 下的约束变量按深度对应，与 match_instance 的做法一致
    """

    def __init__(self, supply: NameSupply):
        self.supply = supply
        self.env: Dict[TypeVarName, Restriction] = {}
        self.bindings: Dict[TypeVarName, Type] = {}

    def new(self, r: Restriction = Restriction.POLY, text: str = "h") -> TVar:
        var = self.supply.fresh(text)
        self.adopt(var, r)
        return TVar(var)

    def adopt(self, var: TypeVarName, r: Restriction):
        if var in self.env:
            raise _Reject(f"重复的洞 {var.text}")
        self.env[var] = r

    def demote(self, variables: Iterable[TypeVarName]):
        for var in variables:
            if var in self.env:
                self.env[var] = Restriction.MONO

    def resolve(self, t: Type) -> Type:
        while ftv(t) & self.bindings.keys():
            t = apply_type_subst(self.bindings, t)
        return t

    def _walk(self, t: Type) -> Type:
        while isinstance(t, TVar) and t.name in self.bindings:
            t = self.bindings[t.name]
        return t

    def _is_hole(self, t: Type) -> bool:
        return isinstance(t, TVar) and t.name in self.env and t.name not in self.bindings

    def equate(self, rigid: Sequence[TypeVarName], a: Type, b: Type):
        """令 a 与 b α 等价，必要时填洞；无解时抛出 _Reject"""
        a, b = self.resolve(a), self.resolve(b)
        if not (ftv(a) | ftv(b)) & self.env.keys():
            if not alpha_equal(a, b):
                raise _Reject("类型不相等")
            return
        self._equate(a, b, {}, {}, 0)

    def _equate(self, p: Type, q: Type, env_p: Dict, env_q: Dict, depth: int):
        p, q = self._walk(p), self._walk(q)
        p_local = isinstance(p, TVar) and p.name in env_p
        q_local = isinstance(q, TVar) and q.name in env_q
        if p_local or q_local:
            if not (p_local and q_local and env_p[p.name] == env_q[q.name]):
                raise _Reject("约束变量不对应")
            return
        if self._is_hole(p) and self._is_hole(q) and p.name == q.name:
            return
        if self._is_hole(p):
            self._fill(p.name, q, env_q)
            return
        if self._is_hole(q):
            self._fill(q.name, p, env_p)
            return
        if isinstance(p, TVar) or isinstance(q, TVar):
            if not (isinstance(p, TVar) and isinstance(q, TVar) and p.name == q.name):
                raise _Reject("类型变量不相等")
            return
        if isinstance(p, TCon) and isinstance(q, TCon):
            if p.ctor != q.ctor or len(p.args) != len(q.args):
                raise _Reject("构造子不相等")
            for x, y in zip(p.args, q.args):
                self._equate(x, y, env_p, env_q, depth)
            return
        if isinstance(p, TForall) and isinstance(q, TForall):
            self._equate(p.body, q.body, {**env_p, p.bound: depth},
                         {**env_q, q.bound: depth}, depth + 1)
            return
        raise _Reject("量词结构不相等")

    def _fill(self, hole: TypeVarName, t: Type, env_t: Dict):
        t = self.resolve(t)
        free = ftv(t)
        if hole in free:
            raise _Reject("洞出现在自己的解中")
        if free & env_t.keys():
            raise _Reject("约束变量逃出量词")
        if self.env[hole] is Restriction.MONO:
            self.demote(free)
            if not is_monotype(t):
                raise _Reject("单态洞不能取多态类型")
        self.bindings[hole] = t

    def require_mono(self, rigid: Sequence[TypeVarName], t: Type):
        image = self.resolve(t)
        self.demote(v for v in ftv(image) if v not in rigid)
        if not is_monotype(image):
            raise _Reject("不是单态类型")

    def names(self) -> List[TypeVarName]:
        return list(self.env)

    def undetermined(self) -> List[TypeVarName]:
        return [var for var in self.env if var not in self.bindings]

    def check_escape(self, earlier: Iterable[TypeVarName], scoped: Iterable[TypeVarName]):
        """作用域结束时，之前就存在的洞不能引用该作用域的刚性变量"""
        leaked = set()
        for var in earlier:
            leaked |= ftv(self.resolve(TVar(var)))
        if leaked & set(scoped):
            raise _Reject("刚性变量逃逸")

    def solve(self, rigid: Sequence[TypeVarName], gamma: TermContext,
              xi: Sequence[TypeVarName], c: Constraint):
        """
        把未定的洞与 xi 一起作为柔性变量交给求解器

        Returns:
            (传入的洞, 最终状态)
        """
        passed = self.undetermined()
        resolved = TermContext((name, self.resolve(t)) for name, t in gamma.items())
        monos = [CMono(h) for h in passed if self.env[h] is Restriction.MONO]
        solver = Solver(self.supply, check_invariants=False)
        result = solve_constraint(list(rigid), passed + list(xi), resolved,
                                  conj(monos + [c]), solver)
        return passed, result.final


# ============================================================================
# 类型检查
# ============================================================================
def _range_ordered(subst: Mapping[TypeVarName, Type], keys: Iterable[TypeVarName]) -> List[TypeVarName]:
    """θ|keys 值域中的变量，按出现顺序"""
    found: List[TypeVarName] = []
    for key in keys:
        for var in ftv_ordered(subst.get(key, TVar(key))):
            if var not in found:
                found.append(var)
    return found


class TypingChecker:
    """
    Δ;Γ ⊢ M : A 的语法制导检查

    规则要求猜测的类型（应用的参数类型、λ 参数的单态类型、实例化）用洞表示，
    由洞上的等式确定（不经过求解器的合一）；LetPlain 的主类型由求解器给出
    """

    def __init__(self, supply: Optional[NameSupply] = None):
        self.supply = supply or NameSupply()
        self.holes = _Holes(self.supply)

    def check(self, delta: Sequence[TypeVarName], gamma: TermContext, m, a: Type) -> bool:
        try:
            check_term(delta, gamma, m)
            self._check(tuple(delta), gamma, m, a)
        except (_Reject, InferenceError):
            return False
        return True

    def _check(self, rigid: Tuple[TypeVarName, ...], gamma: TermContext, m, t: Type):
        holes = self.holes

        if isinstance(m, FrozenVar):
            holes.equate(rigid, gamma[m.name], t)

        elif isinstance(m, Var):
            scheme = holes.resolve(gamma[m.name])
            resolved = holes.resolve(t)
            if not (ftv(resolved) | ftv(scheme)) & holes.env.keys():
                # 没有洞时直接匹配
                delta = match_instance(scheme, resolved)
                if delta is None:
                    raise _Reject(f"{m.name} 的类型不能实例化为目标类型")
                bound, _ = quantifier_prefix(scheme)
                if not check_instantiation(rigid, delta, bound, Restriction.POLY):
                    raise _Reject("实例化不良构")
                return
            bound, body = quantifier_prefix(scheme)
            mapping = {var: holes.new(Restriction.POLY, var.text) for var in bound}
            holes.equate(rigid, apply_type_subst(mapping, body), t)

        elif isinstance(m, App):
            argument = holes.new(Restriction.POLY)
            self._check(rigid, gamma, m.fun, TCon("->", (argument, t)))
            self._check(rigid, gamma, m.arg, argument)

        elif isinstance(m, Lam):
            domain = holes.new(Restriction.MONO)
            codomain = holes.new(Restriction.POLY)
            holes.equate(rigid, TCon("->", (domain, codomain)), t)
            self._check(rigid, gamma.extend(m.param, domain), m.body, codomain)

        elif isinstance(m, LamAnn):
            codomain = holes.new(Restriction.POLY)
            holes.equate(rigid, TCon("->", (m.annotation, codomain)), t)
            self._check(rigid, gamma.extend(m.param, m.annotation), m.body, codomain)

        elif isinstance(m, LetAnn):
            prefix, guarded = split(m.annotation, m.bound)
            earlier = holes.names()
            self._check(rigid + tuple(prefix), gamma, m.bound, guarded)
            holes.check_escape(earlier, prefix)
            self._check(rigid, gamma.extend(m.name, m.annotation), m.body, t)

        elif isinstance(m, Let):
            bound_type = self._let_type(rigid, gamma, m.bound)
            self._check(rigid, gamma.extend(m.name, bound_type), m.body, t)

        else:
            raise TypeError(f"未知的项: {m!r}")

    def _let_type(self, rigid: Tuple[TypeVarName, ...], gamma: TermContext, bound) -> Type:
        """主类型加 ⇕：GVal 泛化，否则剩余变量单态实例化"""
        holes = self.holes
        b = self.supply.fresh("b")
        c = congen(bound, TVar(b), self.supply, in_scope=gamma)
        passed, final = holes.solve(rigid, gamma, [b], c)

        scope = frozenset(rigid)
        referenced = [v for v in _range_ordered(final.subst, passed) if v not in scope]
        for var in referenced:
            if var not in holes.env:
                holes.adopt(var, final.theta_env[var])
        holes.demote(var for var in referenced if final.theta_env.get(var) is Restriction.MONO)
        for var in passed:
            holes.equate(rigid, TVar(var), final.subst[var])

        principal = final.subst.apply(TVar(b))
        fresh = [v for v in ftv_ordered(principal) if v not in scope and v not in referenced]
        if is_guarded_value(bound):
            return forall(fresh, principal)
        for var in fresh:
            holes.adopt(var, Restriction.MONO)
        return principal


def check_typing(delta: Sequence[TypeVarName], gamma: TermContext, m, a: Type) -> bool:
    """
    Δ;Γ ⊢ M : A 是否成立

    Args:
        delta: 刚性变量
        gamma: 项上下文（项中的整数字面量自动补上 Int）
        m: 项
        a: 待检查的类型（在 Δ 上封闭）

    Returns:
        bool
    """
    if not all(closed_over(delta, t) for t in gamma.values()) or not closed_over(delta, a):
        return False
    return TypingChecker().check(delta, literal_context(gamma, m), m, a)


@dataclass
class Principal:
    """主类型 (Δ′, A′)，Δ′ 中变量的限制记在 restrictions 里"""
    fresh_vars: TypeContext
    type: Type
    restrictions: Dict[TypeVarName, Restriction]


def principal_via_solver(delta: Sequence[TypeVarName], gamma: TermContext, m) -> Principal:
    """
    用求解器得到主类型：剩余柔性变量重新读作新的刚性变量

    Raises:
        InferenceError: 项无法定型
    """
    result = infer(delta, gamma, m)
    renaming = {}
    restrictions = {}
    for var, r in result.residual.items():
        fresh = refresh(var)
        renaming[var] = TVar(fresh)
        restrictions[fresh] = r
    fresh_vars = TypeContext(v.name for v in renaming.values())
    return Principal(fresh_vars, apply_type_subst(renaming, result.result_type), restrictions)


# ============================================================================
# 约束可满足性
# ============================================================================
def _atoms(scope: Sequence[TypeVarName]) -> List[Type]:
    nullary = [TCon(name, ()) for name, info in CONSTRUCTORS.items() if info["arity"] == 0]
    return nullary + [TVar(var) for var in scope]


def _types_upto(scope: Tuple[TypeVarName, ...], level: int, quantifiers: int) -> List[Type]:
    if level == 0:
        return _atoms(scope)
    smaller = _types_upto(scope, level - 1, quantifiers)
    found = list(smaller)
    for name, info in CONSTRUCTORS.items():
        arity = info["arity"]
        if arity == 0:
            continue
        for args in itertools.product(smaller, repeat=arity):
            t = TCon(name, tuple(args))
            if max(_level(arg) for arg in args) == level - 1:
                found.append(t)
    if quantifiers > 0:
        bound = fresh_var("q")
        for body in _types_upto(scope + (bound,), level - 1, quantifiers - 1):
            if bound in ftv(body) and _level(body) == level - 1:
                found.append(TForall(bound, body))
    return found


def _level(t: Type) -> int:
    if isinstance(t, TVar):
        return 0
    if isinstance(t, TCon):
        return 1 + max((_level(arg) for arg in t.args), default=-1)
    return 1 + _level(t.body)


def enumerate_types(delta: Sequence[TypeVarName], depth: int = SEARCH_DEPTH,
                    max_quantifiers: int = SEARCH_QUANTIFIERS) -> Iterator[Type]:
    """
    按深度从小到大列举类型（不重复）：原子为零元构造子与 Δ 中的变量，
    只生成量词变量确实出现在体中的 ∀ 类型
    """
    scope = tuple(delta)
    for level in range(depth + 1):
        for t in _types_upto(scope, level, max_quantifiers):
            if _level(t) == level:
                yield t


class ConstraintChecker:
    """
    Δ;Ξ;Γ;δ ⊢ C

    symbolic 模式下，∃ 的见证与 Inst 的实例化用洞表示，由洞上的等式确定；
    let 约束的 mostgen 由求解器给出。enumerate 模式只接受不含 let 的约束，
    逐个枚举 ∃ 见证
    """

    def __init__(self, mode: str = "symbolic", depth: int = SEARCH_DEPTH,
                 max_quantifiers: int = SEARCH_QUANTIFIERS,
                 supply: Optional[NameSupply] = None):
        if mode not in ("symbolic", "enumerate"):
            raise ValueError(f"未知的模式: {mode}")
        self.mode = mode
        self.depth = depth
        self.max_quantifiers = max_quantifiers
        self.supply = supply or NameSupply()
        self.holes = _Holes(self.supply)

    def check(self, delta: Sequence[TypeVarName], xi: Sequence[TypeVarName],
              gamma: TermContext, inst: Mapping[TypeVarName, Type], c: Constraint) -> bool:
        ctx = ConstraintContext(TypeContext(delta), TypeContext(xi), gamma)
        if not wf_constraint(ctx, c):
            return False
        if not check_instantiation(delta, inst, xi, Restriction.POLY):
            return False
        if self.mode == "enumerate":
            return self._enumerate(tuple(delta), dict(inst), gamma, c)
        try:
            self._symbolic(tuple(delta), dict(inst), list(xi), gamma, c)
        except (_Reject, InferenceError):
            return False
        return True

    # ------------------------------------------------------------------
    # symbolic
    # ------------------------------------------------------------------
    def _symbolic(self, rigid: Tuple[TypeVarName, ...], inst: Instantiation,
                  xi: List[TypeVarName], gamma: TermContext, c: Constraint):
        holes = self.holes

        def close(t: Type) -> Type:
            return apply_type_subst(inst, t)

        if isinstance(c, CTrue):
            return
        if isinstance(c, CAnd):
            self._symbolic(rigid, inst, xi, gamma, c.left)
            self._symbolic(rigid, inst, xi, gamma, c.right)
        elif isinstance(c, CEq):
            holes.equate(rigid, close(c.left), close(c.right))
        elif isinstance(c, CFreeze):
            holes.equate(rigid, gamma[c.name], close(c.type))
        elif isinstance(c, CInst):
            bound, body = quantifier_prefix(holes.resolve(gamma[c.name]))
            mapping = {var: holes.new(Restriction.POLY, var.text) for var in bound}
            holes.equate(rigid, apply_type_subst(mapping, body), close(c.type))
        elif isinstance(c, CForall):
            earlier = holes.names()
            self._symbolic(rigid + (c.var,), inst, xi, gamma, c.body)
            holes.check_escape(earlier, [c.var])
        elif isinstance(c, CExists):
            witness = holes.new(Restriction.POLY, c.var.text)
            self._symbolic(rigid, {**inst, c.var: witness}, xi + [c.var], gamma, c.body)
        elif isinstance(c, CMono):
            holes.require_mono(rigid, close(TVar(c.var)))
        elif isinstance(c, CDef):
            for var in ftv_ordered(c.type):
                if var not in rigid:
                    holes.require_mono(rigid, close(TVar(var)))
            self._symbolic(rigid, inst, xi, gamma.extend(c.name, close(c.type)), c.body)
        elif isinstance(c, CLet):
            self._symbolic_let(rigid, inst, xi, gamma, c)
        else:
            raise TypeError(f"未知的约束: {c!r}")

    def _symbolic_let(self, rigid, inst, xi, gamma, c: CLet):
        holes = self.holes
        # mostgen：外层柔性变量与洞一起自由求解
        passed, final = holes.solve(rigid, gamma, xi + [c.var], c.bound)
        outer = final.subst.range_ftv(passed + xi)
        solution = final.subst.apply(TVar(c.var))
        scope = frozenset(rigid)

        renaming: Dict[TypeVarName, Type] = {}
        generalised: List[TypeVarName] = []
        for var in ftv_ordered(solution):
            if var in scope:
                continue
            if c.restriction is Restriction.POLY and var not in outer:
                fresh = refresh(var)
                generalised.append(fresh)
                renaming[var] = TVar(fresh)
            else:
                renaming[var] = holes.new(Restriction.MONO, var.text)
        a = apply_type_subst(renaming, solution)

        earlier = holes.names()
        self._symbolic(rigid + tuple(generalised), {**inst, c.var: a}, xi + [c.var], gamma, c.bound)
        holes.check_escape(earlier, generalised)
        self._symbolic(rigid, inst, xi, gamma.extend(c.name, forall(generalised, a)), c.body)

    # ------------------------------------------------------------------
    # enumerate
    # ------------------------------------------------------------------
    def _enumerate(self, rigid: Tuple[TypeVarName, ...], inst: Instantiation,
                   gamma: TermContext, c: Constraint) -> bool:
        def close(t: Type) -> Type:
            return apply_type_subst(inst, t)

        if isinstance(c, CTrue):
            return True
        if isinstance(c, CAnd):
            return (self._enumerate(rigid, inst, gamma, c.left)
                    and self._enumerate(rigid, inst, gamma, c.right))
        if isinstance(c, CEq):
            return alpha_equal(close(c.left), close(c.right))
        if isinstance(c, CFreeze):
            return alpha_equal(gamma[c.name], close(c.type))
        if isinstance(c, CInst):
            delta = match_instance(gamma[c.name], close(c.type))
            return delta is not None
        if isinstance(c, CForall):
            return self._enumerate(rigid + (c.var,), inst, gamma, c.body)
        if isinstance(c, CExists):
            for witness in enumerate_types(rigid, self.depth, self.max_quantifiers):
                if self._enumerate(rigid, {**inst, c.var: witness}, gamma, c.body):
                    return True
            return False
        if isinstance(c, CMono):
            return is_monotype(close(TVar(c.var)))
        if isinstance(c, CDef):
            if not all(is_monotype(close(TVar(v))) for v in ftv_ordered(c.type) if v not in rigid):
                return False
            return self._enumerate(rigid, inst, gamma.extend(c.name, close(c.type)), c.body)
        if isinstance(c, CLet):
            raise ValueError("enumerate 模式不支持 let 约束")
        raise TypeError(f"未知的约束: {c!r}")


def check_constraint_sat(delta: Sequence[TypeVarName], xi: Sequence[TypeVarName],
                         gamma: TermContext, inst: Mapping[TypeVarName, Type],
                         c: Constraint, mode: str = "symbolic",
                         depth: int = SEARCH_DEPTH,
                         max_quantifiers: int = SEARCH_QUANTIFIERS) -> bool:
    """
    约束语义 Δ;Ξ;Γ;δ ⊢ C

    Args:
        delta, xi, gamma: 上下文
        inst: δ，必须覆盖 xi，像在 Δ 上封闭
        c: 约束
        mode: "symbolic"（默认）或 "enumerate"（仅限不含 let 的约束，有界且不完备）
        depth, max_quantifiers: enumerate 模式的枚举范围

    Returns:
        bool
    """
    checker = ConstraintChecker(mode, depth, max_quantifiers)
    return checker.check(delta, xi, gamma, inst, c)
