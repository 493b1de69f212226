"""
Constraints - 约束语言
约束 AST、约束良构性、项到约束的翻译 ⟦M : A⟧，以及约束的文本转储
"""
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Union

from src.errors import SourceSpan
from src.surface import Namer, print_type
from src.syntax import (
    App, FrozenVar, Lam, LamAnn, Let, LetAnn, NameSupply, Restriction, TermContext,
    Term, Type, TypeContext, TypeVarName, TVar, Var, arrow, closed_over, ftv_ordered,
    is_guarded_value, quantifier_prefix,
)


# ============================================================================
# 约束
# ============================================================================
@dataclass(frozen=True)
class CTrue:
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CAnd:
    left: "Constraint"
    right: "Constraint"
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CEq:
    left: Type
    right: Type
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CFreeze:
    name: str
    type: Type
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CInst:
    name: str
    type: Type
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CForall:
    var: TypeVarName
    body: "Constraint"
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CExists:
    var: TypeVarName
    body: "Constraint"
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CMono:
    var: TypeVarName
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CDef:
    name: str
    type: Type
    body: "Constraint"
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class CLet:
    """let_R x = ⊓a.C1 in C2，R 由子类决定"""
    name: str
    var: TypeVarName
    bound: "Constraint"
    body: "Constraint"
    span: Optional[SourceSpan] = field(default=None, compare=False)

    restriction = Restriction.POLY


@dataclass(frozen=True)
class CLetPoly(CLet):
    restriction = Restriction.POLY


@dataclass(frozen=True)
class CLetMono(CLet):
    restriction = Restriction.MONO


Constraint = Union[CTrue, CAnd, CEq, CFreeze, CInst, CForall, CExists, CMono, CDef, CLetPoly, CLetMono]

TRUE = CTrue()


def make_let(restriction: Restriction, name: str, var: TypeVarName,
             bound: "Constraint", body: "Constraint",
             span: Optional[SourceSpan] = None) -> CLet:
    cls = CLetPoly if restriction is Restriction.POLY else CLetMono
    return cls(name, var, bound, body, span)


def exists_many(variables: Iterable[TypeVarName], body: "Constraint",
                span: Optional[SourceSpan] = None) -> "Constraint":
    """∃ā.C，每个变量一个绑定"""
    result = body
    for var in reversed(list(variables)):
        result = CExists(var, result, span)
    return result


def forall_many(variables: Iterable[TypeVarName], body: "Constraint",
                span: Optional[SourceSpan] = None) -> "Constraint":
    result = body
    for var in reversed(list(variables)):
        result = CForall(var, result, span)
    return result


def conj(parts: List["Constraint"]) -> "Constraint":
    """右嵌套合取；空列表为 true，单个元素为其本身"""
    if not parts:
        return TRUE
    result = parts[-1]
    for part in reversed(parts[:-1]):
        result = CAnd(part, result)
    return result


@dataclass(frozen=True)
class ConstraintContext:
    """Δ（刚性）、Ξ（柔性）、Γ"""
    delta: TypeContext = field(default_factory=TypeContext)
    xi: TypeContext = field(default_factory=TypeContext)
    gamma: TermContext = field(default_factory=TermContext)


# ============================================================================
# 约束生成
# ============================================================================
class ConstraintGenerator:
    """
    ⟦M : A⟧

    新柔性变量在翻译过程中从左到右立即分配；被绑定的项变量如果与作用域中
    已有的名字重名，会换成 x'N 形式的新名字，保证栈上的项绑定两两不同
    """

    def __init__(self, supply: Optional[NameSupply] = None):
        self.supply = supply or NameSupply()

    def generate(self, m: Term, a: Type, in_scope: Iterable[str] = ()) -> "Constraint":
        """
        Args:
            m: 项（已通过良构检查）
            a: 目标类型，通常是一个新柔性变量
            in_scope: 外层已绑定的项变量名（例如 Γ 的名字）

        Returns:
            约束
        """
        return self._gen(m, a, {name: name for name in in_scope})

    def _bind(self, name: str, scope: Dict[str, str]) -> str:
        if name in scope or name in scope.values():
            return self.supply.fresh_term(name)
        return name

    def _gen(self, m: Term, a: Type, scope: Dict[str, str]) -> "Constraint":
        if isinstance(m, FrozenVar):
            return CFreeze(scope.get(m.name, m.name), a, m.span)

        if isinstance(m, Var):
            return CInst(scope.get(m.name, m.name), a, m.span)

        if isinstance(m, App):
            a1 = self.supply.fresh("a")
            fun = self._gen(m.fun, arrow(TVar(a1), a), scope)
            arg = self._gen(m.arg, TVar(a1), scope)
            return CExists(a1, CAnd(fun, arg, m.span), m.span)

        if isinstance(m, Lam):
            a1 = self.supply.fresh("a")
            a2 = self.supply.fresh("a")
            x = self._bind(m.param, scope)
            body = self._gen(m.body, TVar(a2), {**scope, m.param: x})
            return CExists(a1, CExists(a2, CAnd(
                CEq(arrow(TVar(a1), TVar(a2)), a, m.span),
                CDef(x, TVar(a1), body, m.span),
                m.span,
            ), m.span), m.span)

        if isinstance(m, LamAnn):
            a1 = self.supply.fresh("a")
            x = self._bind(m.param, scope)
            body = self._gen(m.body, TVar(a1), {**scope, m.param: x})
            return CExists(a1, CAnd(
                CEq(arrow(m.annotation, TVar(a1)), a, m.span),
                CDef(x, m.annotation, body, m.span),
                m.span,
            ), m.span)

        if isinstance(m, LetAnn):
            if is_guarded_value(m.bound):
                prefix, guarded = quantifier_prefix(m.annotation)
                bound = forall_many(prefix, self._gen(m.bound, guarded, scope), m.span)
            else:
                bound = self._gen(m.bound, m.annotation, scope)
            x = self._bind(m.name, scope)
            body = self._gen(m.body, a, {**scope, m.name: x})
            return CAnd(bound, CDef(x, m.annotation, body, m.span), m.span)

        if isinstance(m, Let):
            b = self.supply.fresh("b")
            bound = self._gen(m.bound, TVar(b), scope)
            x = self._bind(m.name, scope)
            body = self._gen(m.body, a, {**scope, m.name: x})
            restriction = Restriction.POLY if is_guarded_value(m.bound) else Restriction.MONO
            return make_let(restriction, x, b, bound, body, m.span)

        raise TypeError(f"未知的项: {m!r}")


def congen(m: Term, a: Type, supply: Optional[NameSupply] = None,
           in_scope: Iterable[str] = ()) -> "Constraint":
    """便捷函数：⟦m : a⟧"""
    return ConstraintGenerator(supply).generate(m, a, in_scope)


# ============================================================================
# 良构性
# ============================================================================
def wf_constraint(ctx: ConstraintContext, c: "Constraint") -> bool:
    """
    Δ;Ξ;Γ ⊢ wf C

    Γ 只记录项变量是否存在，不看类型
    """
    def ok(delta: FrozenSet, xi: FrozenSet, gamma: FrozenSet, c) -> bool:
        scope = delta | xi
        if isinstance(c, CTrue):
            return True
        if isinstance(c, CAnd):
            return ok(delta, xi, gamma, c.left) and ok(delta, xi, gamma, c.right)
        if isinstance(c, CEq):
            return closed_over(scope, c.left) and closed_over(scope, c.right)
        if isinstance(c, (CFreeze, CInst)):
            return c.name in gamma and closed_over(scope, c.type)
        if isinstance(c, CForall):
            return ok(delta | {c.var}, xi, gamma, c.body)
        if isinstance(c, CExists):
            return ok(delta, xi | {c.var}, gamma, c.body)
        if isinstance(c, CMono):
            return c.var in scope
        if isinstance(c, CDef):
            return closed_over(scope, c.type) and ok(delta, xi, gamma | {c.name}, c.body)
        if isinstance(c, CLet):
            return (ok(delta, xi | {c.var}, gamma, c.bound)
                    and ok(delta, xi, gamma | {c.name}, c.body))
        return False

    return ok(ctx.delta.as_set(), ctx.xi.as_set(), frozenset(ctx.gamma), c)


# ============================================================================
# 度量
# ============================================================================
def constraint_size(c: "Constraint") -> int:
    """约束大小：true 为 0，mono/≗ 为 1，冻结/实例为 2，绑定 +1，∧ +1，let +3"""
    if isinstance(c, CTrue):
        return 0
    if isinstance(c, (CMono, CEq)):
        return 1
    if isinstance(c, (CFreeze, CInst)):
        return 2
    if isinstance(c, (CForall, CExists, CDef)):
        return 1 + constraint_size(c.body)
    if isinstance(c, CAnd):
        return 1 + constraint_size(c.left) + constraint_size(c.right)
    if isinstance(c, CLet):
        return 3 + constraint_size(c.bound) + constraint_size(c.body)
    raise TypeError(f"未知的约束: {c!r}")


def count_instances(c: "Constraint") -> int:
    """x ⪯ A 约束的个数"""
    if isinstance(c, CInst):
        return 1
    if isinstance(c, CAnd):
        return count_instances(c.left) + count_instances(c.right)
    if isinstance(c, (CForall, CExists, CDef)):
        return count_instances(c.body)
    if isinstance(c, CLet):
        return count_instances(c.bound) + count_instances(c.body)
    return 0


def constraint_ftv(c: "Constraint") -> List[TypeVarName]:
    """约束的自由类型变量（按出现顺序）"""
    found: List[TypeVarName] = []

    def add(vars_, bound):
        for var in vars_:
            if var not in bound and var not in found:
                found.append(var)

    def walk(c, bound: FrozenSet):
        if isinstance(c, CAnd):
            walk(c.left, bound)
            walk(c.right, bound)
        elif isinstance(c, CEq):
            add(ftv_ordered(c.left), bound)
            add(ftv_ordered(c.right), bound)
        elif isinstance(c, (CFreeze, CInst)):
            add(ftv_ordered(c.type), bound)
        elif isinstance(c, (CForall, CExists)):
            walk(c.body, bound | {c.var})
        elif isinstance(c, CMono):
            add([c.var], bound)
        elif isinstance(c, CDef):
            add(ftv_ordered(c.type), bound)
            walk(c.body, bound)
        elif isinstance(c, CLet):
            walk(c.bound, bound | {c.var})
            walk(c.body, bound)

    walk(c, frozenset())
    return found


# ============================================================================
# 转储
# ============================================================================
def dump_constraint(c: "Constraint", namer: Optional[Namer] = None) -> str:
    """
    完全加括号的约束文本，每个 ∃/∀ 一个绑定；⋆/• let 分别写作 let* / let@

    例: (let* x = ^b. (y <= b) in (x <= a))
    """
    namer = namer or Namer()

    def ty(t: Type) -> str:
        return print_type(t, namer)

    def go(c) -> str:
        if isinstance(c, CTrue):
            return "true"
        if isinstance(c, CAnd):
            return f"({go(c.left)} /\\ {go(c.right)})"
        if isinstance(c, CEq):
            return f"({ty(c.left)} == {ty(c.right)})"
        if isinstance(c, CFreeze):
            return f"[~{c.name} : {ty(c.type)}]"
        if isinstance(c, CInst):
            return f"({c.name} <= {ty(c.type)})"
        if isinstance(c, CForall):
            return f"(forall {namer.name(c.var)}. {go(c.body)})"
        if isinstance(c, CExists):
            return f"(exists {namer.name(c.var)}. {go(c.body)})"
        if isinstance(c, CMono):
            return f"mono({namer.name(c.var)})"
        if isinstance(c, CDef):
            return f"(def {c.name} : {ty(c.type)} in {go(c.body)})"
        if isinstance(c, CLet):
            marker = "*" if c.restriction is Restriction.POLY else "@"
            return (f"(let{marker} {c.name} = ^{namer.name(c.var)}. "
                    f"{go(c.bound)} in {go(c.body)})")
        raise TypeError(f"未知的约束: {c!r}")

    return go(c)
