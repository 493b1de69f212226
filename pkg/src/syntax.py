"""
Syntax - 类型、项与上下文
System F 类型（有序量词）、FreezeML 项、类型/项上下文，以及纯结构判断：
自由变量、α 等价、值分类、split、良构性与代换
"""
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

from src.config import ARROW, PRODUCT, get_constructor_info
from src.errors import SourceSpan, UnboundTypeVariable, UnboundVariable, InferenceError

# 进程级唯一编号，任何两次分配都不会重复
_UIDS = itertools.count(1)


# ============================================================================
# 类型变量
# ============================================================================
@dataclass(frozen=True)
class TypeVarName:
    """类型变量名：按 uid 判等，text 只用于显示"""
    text: str = field(compare=False)
    uid: int = 0

    def __repr__(self) -> str:
        return f"{self.text}#{self.uid}"


def fresh_var(text: str = "a") -> TypeVarName:
    """分配一个全新的类型变量"""
    return TypeVarName(text, next(_UIDS))


def refresh(var: TypeVarName) -> TypeVarName:
    """同名新变量（α 重命名用）"""
    return fresh_var(var.text)


class NameSupply:
    """
    单次推断运行的新名字供给

    类型变量的 uid 全局唯一；项变量的重命名计数按运行独立
    """

    def __init__(self):
        self._term_counter = itertools.count(1)
        self.allocated = 0

    def fresh(self, text: str = "a") -> TypeVarName:
        """新类型变量"""
        self.allocated += 1
        return fresh_var(text)

    def fresh_many(self, texts: Iterable[str]) -> List[TypeVarName]:
        return [self.fresh(text) for text in texts]

    def fresh_term(self, base: str) -> str:
        """新项变量名，形如 x'3，具体语法中无法写出，不会与用户名字冲突"""
        root = base.split("'")[0]
        return f"{root}'{next(self._term_counter)}"


# ============================================================================
# 类型
# ============================================================================
@dataclass(frozen=True)
class TVar:
    name: TypeVarName


@dataclass(frozen=True)
class TCon:
    ctor: str
    args: Tuple["Type", ...] = ()


@dataclass(frozen=True)
class TForall:
    bound: TypeVarName
    body: "Type"


Type = Union[TVar, TCon, TForall]


class Restriction(Enum):
    """限制：• 只能取单态类型，⋆ 无限制"""
    MONO = "•"
    POLY = "⋆"

    def admits(self, other: "Restriction") -> bool:
        """self 处能否放入 other 限制的东西（• ⊂ ⋆）"""
        return self is Restriction.POLY or other is Restriction.MONO

    def __str__(self) -> str:
        return self.value


def tvar(name: TypeVarName) -> TVar:
    return TVar(name)


def con(ctor: str, *args: Type) -> TCon:
    return TCon(ctor, tuple(args))


def arrow(domain: Type, codomain: Type) -> TCon:
    return TCon(ARROW, (domain, codomain))


def product(left: Type, right: Type) -> TCon:
    return TCon(PRODUCT, (left, right))


def forall(bound: Iterable[TypeVarName], body: Type) -> Type:
    """∀ā.body，ā 为空时返回 body 本身"""
    result = body
    for var in reversed(list(bound)):
        result = TForall(var, result)
    return result


def quantifier_prefix(t: Type) -> Tuple[List[TypeVarName], Type]:
    """剥出最大顶层量词前缀，返回 (ā, H)"""
    prefix = []
    while isinstance(t, TForall):
        prefix.append(t.bound)
        t = t.body
    return prefix, t


def is_arrow(t: Type) -> bool:
    return isinstance(t, TCon) and t.ctor == ARROW


# ============================================================================
# 项
# ============================================================================
@dataclass(frozen=True)
class FrozenVar:
    name: str
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class App:
    fun: "Term"
    arg: "Term"
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Lam:
    param: str
    body: "Term"
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class LamAnn:
    param: str
    annotation: Type
    body: "Term"
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Term"
    body: "Term"
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class LetAnn:
    name: str
    annotation: Type
    bound: "Term"
    body: "Term"
    span: Optional[SourceSpan] = field(default=None, compare=False)


Term = Union[FrozenVar, Var, App, Lam, LamAnn, Let, LetAnn]


def is_literal(name: str) -> bool:
    """数字字面量以普通变量出现，其类型由字面量上下文提供"""
    return name.isdigit()


def term_literals(m: Term) -> List[str]:
    """项中出现的数字字面量（按出现顺序，去重）"""
    found: List[str] = []

    def walk(m: Term):
        if isinstance(m, (Var, FrozenVar)):
            if is_literal(m.name) and m.name not in found:
                found.append(m.name)
        elif isinstance(m, App):
            walk(m.fun)
            walk(m.arg)
        elif isinstance(m, (Lam, LamAnn)):
            walk(m.body)
        elif isinstance(m, (Let, LetAnn)):
            walk(m.bound)
            walk(m.body)

    walk(m)
    return found


def term_size(m: Term) -> int:
    """项的结点数"""
    if isinstance(m, (Var, FrozenVar)):
        return 1
    if isinstance(m, App):
        return 1 + term_size(m.fun) + term_size(m.arg)
    if isinstance(m, (Lam, LamAnn)):
        return 1 + term_size(m.body)
    return 1 + term_size(m.bound) + term_size(m.body)


# ============================================================================
# 上下文
# ============================================================================
class TypeContext:
    """有序类型变量上下文（Δ 或 Ξ），不允许重复"""

    def __init__(self, names: Iterable[TypeVarName] = ()):
        self._names = tuple(names)
        if len(set(self._names)) != len(self._names):
            raise ValueError(f"类型上下文中有重复变量: {self._names}")
        self._set = frozenset(self._names)

    def extend(self, *names: TypeVarName) -> "TypeContext":
        return TypeContext(self._names + tuple(names))

    def without(self, names: Iterable[TypeVarName]) -> "TypeContext":
        drop = set(names)
        return TypeContext(n for n in self._names if n not in drop)

    def as_set(self) -> FrozenSet[TypeVarName]:
        return self._set

    def __contains__(self, name: object) -> bool:
        return name in self._set

    def __iter__(self) -> Iterator[TypeVarName]:
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TypeContext) and self._names == other._names

    def __hash__(self) -> int:
        return hash(self._names)

    def __repr__(self) -> str:
        return f"TypeContext({list(self._names)!r})"


class TermContext(Mapping):
    """
    项上下文 Γ：项变量到类型的有序映射

    extend 遇到同名变量时覆盖旧绑定并移到末尾，上下文中不会出现重复名字
    """

    def __init__(self, bindings: Iterable[Tuple[str, Type]] = ()):
        self._bindings: Dict[str, Type] = {}
        for name, t in bindings:
            self._bindings.pop(name, None)
            self._bindings[name] = t

    def extend(self, name: str, t: Type) -> "TermContext":
        return TermContext(list(self._bindings.items()) + [(name, t)])

    def __getitem__(self, name: str) -> Type:
        return self._bindings[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._bindings)

    def __len__(self) -> int:
        return len(self._bindings)

    def __repr__(self) -> str:
        return f"TermContext({list(self._bindings.items())!r})"


# ============================================================================
# 自由变量与 α 等价
# ============================================================================
def ftv_ordered(t: Type) -> List[TypeVarName]:
    """
    自由类型变量，按首次出现的顺序（先序、参数从左到右），无重复

    Args:
        t: 类型

    Returns:
        有序变量列表
    """
    found: List[TypeVarName] = []
    seen = set()

    def walk(t: Type, bound: FrozenSet[TypeVarName]):
        if isinstance(t, TVar):
            if t.name not in bound and t.name not in seen:
                seen.add(t.name)
                found.append(t.name)
        elif isinstance(t, TCon):
            for arg in t.args:
                walk(arg, bound)
        else:
            walk(t.body, bound | {t.bound})

    walk(t, frozenset())
    return found


def ftv(t: Type) -> FrozenSet[TypeVarName]:
    return frozenset(ftv_ordered(t))


def alpha_equal(a: Type, b: Type) -> bool:
    """
    α 等价：只允许一致地重命名 ∀ 绑定变量，量词顺序和多余量词都有意义
    """
    def eq(a: Type, b: Type, env_a: Dict, env_b: Dict, depth: int) -> bool:
        if isinstance(a, TVar) and isinstance(b, TVar):
            level_a = env_a.get(a.name)
            level_b = env_b.get(b.name)
            if level_a is None and level_b is None:
                return a.name == b.name
            return level_a == level_b
        if isinstance(a, TCon) and isinstance(b, TCon):
            return (
                a.ctor == b.ctor
                and len(a.args) == len(b.args)
                and all(eq(x, y, env_a, env_b, depth) for x, y in zip(a.args, b.args))
            )
        if isinstance(a, TForall) and isinstance(b, TForall):
            return eq(
                a.body, b.body,
                {**env_a, a.bound: depth}, {**env_b, b.bound: depth},
                depth + 1,
            )
        return False

    return eq(a, b, {}, {}, 0)


def is_monotype(t: Type) -> bool:
    """没有任何 ∀"""
    if isinstance(t, TVar):
        return True
    if isinstance(t, TCon):
        return all(is_monotype(arg) for arg in t.args)
    return False


def is_guarded(t: Type) -> bool:
    """根部不是 ∀"""
    return not isinstance(t, TForall)


def type_depth(t: Type) -> int:
    if isinstance(t, TVar):
        return 0
    if isinstance(t, TCon):
        return 1 + max((type_depth(arg) for arg in t.args), default=0)
    return 1 + type_depth(t.body)


def count_quantifiers(t: Type) -> int:
    if isinstance(t, TVar):
        return 0
    if isinstance(t, TCon):
        return sum(count_quantifiers(arg) for arg in t.args)
    return 1 + count_quantifiers(t.body)


# ============================================================================
# 值分类
# ============================================================================
class ValueClass(Enum):
    GUARDED_VALUE = "GuardedValue"
    VALUE_ONLY = "ValueOnly"
    NON_VALUE = "NonValue"


def is_value(m: Term) -> bool:
    """Val：不含应用"""
    if isinstance(m, (FrozenVar, Var, Lam, LamAnn)):
        return True
    if isinstance(m, (Let, LetAnn)):
        return is_value(m.bound) and is_value(m.body)
    return False


def is_guarded_value(m: Term) -> bool:
    """GVal：值，且结果位置不是冻结变量"""
    if isinstance(m, (Var, Lam, LamAnn)):
        return True
    if isinstance(m, (Let, LetAnn)):
        return is_value(m.bound) and is_guarded_value(m.body)
    return False


def classify_value(m: Term) -> ValueClass:
    if is_guarded_value(m):
        return ValueClass.GUARDED_VALUE
    if is_value(m):
        return ValueClass.VALUE_ONLY
    return ValueClass.NON_VALUE


def split(a: Type, m: Term) -> Tuple[List[TypeVarName], Type]:
    """
    按值限制拆分标注类型

    Args:
        a: 标注类型
        m: 被绑定的项

    Returns:
        m 为 GVal 时返回 (最大顶层量词前缀, 剩余的 guarded 类型)，否则 ([], a)
    """
    if is_guarded_value(m):
        return quantifier_prefix(a)
    return [], a


# ============================================================================
# 良构性
# ============================================================================
def wf_type(delta: Iterable[TypeVarName], theta_env: Mapping,
            r: Restriction, a: Type) -> bool:
    """
    Δ;Θ ⊢_R A

    刚性变量是单态的；柔性变量的限制由 Θ 给出；∀ 类型只在 ⋆ 下良构；
    未知变量或元数不符一律返回 False
    """
    rigid = delta if isinstance(delta, (set, frozenset, TypeContext)) else frozenset(delta)

    def ok(t: Type, bound: FrozenSet[TypeVarName], r: Restriction) -> bool:
        if isinstance(t, TVar):
            if t.name in bound or t.name in rigid:
                return True
            restriction = theta_env.get(t.name)
            if restriction is None:
                return False
            return r.admits(restriction)
        if isinstance(t, TCon):
            info = get_constructor_info(t.ctor)
            if info is None or info["arity"] != len(t.args):
                return False
            return all(ok(arg, bound, r) for arg in t.args)
        if r is Restriction.MONO:
            return False
        return ok(t.body, bound | {t.bound}, Restriction.POLY)

    return ok(a, frozenset(), r)


def closed_over(delta: Iterable[TypeVarName], a: Type) -> bool:
    """Δ ⊢ wf A（⋆，无柔性变量）"""
    return wf_type(delta, {}, Restriction.POLY, a)


def check_term(delta: Iterable[TypeVarName], gamma: Iterable[str], m: Term) -> None:
    """
    Δ;Γ ⊢ wf M，失败时抛出 UnboundVariable / UnboundTypeVariable

    Γ 只看变量是否存在，不看类型
    """
    def check_annotation(rigid: FrozenSet[TypeVarName], a: Type, span):
        if closed_over(rigid, a):
            return
        for var in ftv_ordered(a):
            if var not in rigid:
                raise UnboundTypeVariable(var.text, span)
        raise UnboundTypeVariable(str(a), span)

    def walk(rigid: FrozenSet[TypeVarName], names: FrozenSet[str], m: Term):
        if isinstance(m, (Var, FrozenVar)):
            if m.name not in names:
                raise UnboundVariable(m.name, m.span)
        elif isinstance(m, App):
            walk(rigid, names, m.fun)
            walk(rigid, names, m.arg)
        elif isinstance(m, Lam):
            walk(rigid, names | {m.param}, m.body)
        elif isinstance(m, LamAnn):
            check_annotation(rigid, m.annotation, m.span)
            walk(rigid, names | {m.param}, m.body)
        elif isinstance(m, Let):
            walk(rigid, names, m.bound)
            walk(rigid, names | {m.name}, m.body)
        elif isinstance(m, LetAnn):
            check_annotation(rigid, m.annotation, m.span)
            prefix, _ = split(m.annotation, m.bound)
            walk(rigid | frozenset(prefix), names, m.bound)
            walk(rigid, names | {m.name}, m.body)
        else:
            raise TypeError(f"未知的项: {m!r}")

    walk(frozenset(delta), frozenset(gamma), m)


def wf_term(delta: Iterable[TypeVarName], gamma: Iterable[str], m: Term) -> bool:
    """Δ;Γ ⊢ wf M"""
    try:
        check_term(delta, gamma, m)
    except InferenceError:
        return False
    return True


# ============================================================================
# 代换
# ============================================================================
def apply_type_subst(mapping: Mapping, t: Type) -> Type:
    """
    同时、避免捕获的代换

    Args:
        mapping: TypeVarName → Type
        t: 类型

    Returns:
        代换后的类型；∀ 绑定变量与值域冲突时换成新 uid
    """
    if not mapping:
        return t

    def go(t: Type, m: Mapping) -> Type:
        if isinstance(t, TVar):
            return m.get(t.name, t)
        if isinstance(t, TCon):
            if not t.args:
                return t
            args = tuple(go(arg, m) for arg in t.args)
            if all(x is y for x, y in zip(args, t.args)):
                return t
            return TCon(t.ctor, args)
        inner = {k: v for k, v in m.items() if k != t.bound}
        if not inner:
            return t
        range_vars = set()
        for value in inner.values():
            range_vars.update(ftv_ordered(value))
        if t.bound in range_vars:
            renamed = refresh(t.bound)
            inner[t.bound] = TVar(renamed)
            return TForall(renamed, go(t.body, inner))
        body = go(t.body, inner)
        if body is t.body:
            return t
        return TForall(t.bound, body)

    return go(t, mapping)


def rename_bound(t: Type, var: TypeVarName, replacement: TypeVarName) -> Type:
    """A[c/a]：把自由出现的 var 换成 replacement"""
    return apply_type_subst({var: TVar(replacement)}, t)
