"""
Unify - 带限制的合一
System F 类型（有序量词）上的一阶合一：柔性变量带 •/⋆ 限制，合一时按需降级
"""
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

from src.errors import (
    ArityMismatch, CtorClash, InvariantViolation, OccursViolation, QuantifierEscape,
    QuantifierMismatch, RestrictionViolation,
)
from src.surface import print_type
from src.syntax import (
    Restriction, TCon, TForall, TVar, Type, TypeVarName, apply_type_subst, ftv,
    ftv_ordered, refresh, rename_bound, wf_type,
)


# ============================================================================
# 限制上下文 Θ
# ============================================================================
class RestrictionContext(Mapping):
    """柔性变量到限制的有序映射；所有修改都返回新对象"""

    def __init__(self, entries=None):
        self._entries: Dict[TypeVarName, Restriction] = dict(entries or {})

    def __getitem__(self, var: TypeVarName) -> Restriction:
        return self._entries[var]

    def __iter__(self) -> Iterator[TypeVarName]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, RestrictionContext):
            return list(self._entries.items()) == list(other._entries.items())
        return NotImplemented

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r}:{v}" for k, v in self._entries.items())
        return f"Θ{{{inner}}}"

    def extend(self, var: TypeVarName, r: Restriction = Restriction.POLY) -> "RestrictionContext":
        if var in self._entries:
            raise InvariantViolation(f"Θ 中已有变量 {var!r}")
        entries = dict(self._entries)
        entries[var] = r
        return RestrictionContext(entries)

    def remove(self, variables: Iterable[TypeVarName]) -> "RestrictionContext":
        drop = set(variables)
        return RestrictionContext({k: v for k, v in self._entries.items() if k not in drop})

    def demoted(self, variables: Iterable[TypeVarName]) -> "RestrictionContext":
        """把列出的（且在 Θ 中的）变量改成 •，其余不变"""
        targets = set(variables)
        return RestrictionContext({
            k: (Restriction.MONO if k in targets else v) for k, v in self._entries.items()
        })

    def keys_set(self) -> frozenset:
        return frozenset(self._entries)


# ============================================================================
# 代换 θ
# ============================================================================
class Subst(Mapping):
    """柔性变量到类型的映射"""

    def __init__(self, bindings=None):
        self._map: Dict[TypeVarName, Type] = dict(bindings or {})

    def __getitem__(self, var: TypeVarName) -> Type:
        return self._map[var]

    def __iter__(self) -> Iterator[TypeVarName]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r}↦{print_type(v)}" for k, v in self._map.items())
        return f"θ[{inner}]"

    def apply(self, t: Type) -> Type:
        return apply_type_subst(self._map, t)

    def extend(self, var: TypeVarName, t: Type) -> "Subst":
        bindings = dict(self._map)
        bindings[var] = t
        return Subst(bindings)

    def restrict(self, keys: Iterable[TypeVarName]) -> "Subst":
        """θ|keys"""
        keep = set(keys)
        return Subst({k: v for k, v in self._map.items() if k in keep})

    def range_ftv(self, keys: Optional[Iterable[TypeVarName]] = None) -> set:
        """ftv(θ|keys)，keys 为 None 时取整个定义域"""
        selected = self._map if keys is None else {
            k: self._map[k] for k in keys if k in self._map
        }
        found = set()
        for value in selected.values():
            found.update(ftv_ordered(value))
        return found

    def is_idempotent(self) -> bool:
        """θ∘θ = θ：值域中出现的定义域变量都映射到自身"""
        for value in self._map.values():
            for var in ftv_ordered(value):
                image = self._map.get(var)
                if image is not None and image != TVar(var):
                    return False
        return True

    def equivalent(self, other: "Subst") -> bool:
        from src.syntax import alpha_equal
        if set(self._map) != set(other._map):
            return False
        return all(alpha_equal(self._map[k], other._map[k]) for k in self._map)


IDENTITY = Subst()


def compose(outer: Subst, inner: Subst) -> Subst:
    """
    outer ∘ inner：先 inner 后 outer

    Returns:
        复合代换；结果不幂等时抛出 InvariantViolation
    """
    bindings = {var: outer.apply(t) for var, t in inner.items()}
    for var, t in outer.items():
        if var not in bindings:
            bindings[var] = t
    result = Subst(bindings)
    if not result.is_idempotent():
        raise InvariantViolation(f"代换复合后不幂等: {result!r}")
    return result


def demote(r: Restriction, theta_env: RestrictionContext,
           variables: Iterable[TypeVarName]) -> RestrictionContext:
    """demote(⋆, Θ, ā) = Θ；demote(•, Θ, ā) 把 ā 标成 •"""
    if r is Restriction.POLY:
        return theta_env
    return theta_env.demoted(variables)


# ============================================================================
# 合一
# ============================================================================
def _head(t: Type) -> str:
    if isinstance(t, TCon):
        return t.ctor if t.ctor[:1].isalpha() else f"({print_type(t)})"
    return print_type(t)


def unify(delta: Iterable[TypeVarName], theta_env: RestrictionContext,
          a: Type, b: Type) -> Tuple[RestrictionContext, Subst]:
    """
    U(Δ, Θ, A, B)，子句按顺序首先匹配者生效

    Args:
        delta: 刚性变量
        theta_env: Θ
        a, b: 已应用过当前代换的类型

    Returns:
        (Θ′, θ′)：Θ′ 与 Θ 的键相同（限制只会 ⋆→•），θ′ 为最一般合一子

    Raises:
        UnifyError 的各个子类
    """
    rigid = frozenset(delta)
    return _unify(rigid, theta_env, a, b)


def _unify(rigid: frozenset, theta_env: RestrictionContext,
           a: Type, b: Type) -> Tuple[RestrictionContext, Subst]:
    # (a, a)
    if isinstance(a, TVar) and isinstance(b, TVar) and a.name == b.name:
        return theta_env, IDENTITY

    # 柔性变量，左右两边都试
    if isinstance(a, TVar) and a.name in theta_env:
        return _bind(rigid, theta_env, a.name, b)
    if isinstance(b, TVar) and b.name in theta_env:
        return _bind(rigid, theta_env, b.name, a)

    # D Ā vs D B̄
    if isinstance(a, TCon) and isinstance(b, TCon):
        if a.ctor != b.ctor:
            raise CtorClash(_head(a), _head(b))
        if len(a.args) != len(b.args):
            raise ArityMismatch(a.ctor, len(a.args), len(b.args))
        env = theta_env
        subst = IDENTITY
        for left, right in zip(a.args, b.args):
            env, step = _unify(rigid, env, subst.apply(left), subst.apply(right))
            subst = compose(step, subst)
        return env, subst

    # ∀a.A vs ∀b.B：共享一个新刚性变量
    if isinstance(a, TForall) and isinstance(b, TForall):
        c = refresh(a.bound)
        env, subst = _unify(
            rigid | {c}, theta_env,
            rename_bound(a.body, a.bound, c), rename_bound(b.body, b.bound, c),
        )
        if c in subst.range_ftv():
            raise QuantifierEscape(c.text)
        return env, subst

    if isinstance(a, TForall) or isinstance(b, TForall):
        raise QuantifierMismatch(print_type(a), print_type(b))

    raise CtorClash(_head(a), _head(b))


def _bind(rigid: frozenset, theta_env: RestrictionContext,
          var: TypeVarName, t: Type) -> Tuple[RestrictionContext, Subst]:
    if var in ftv(t):
        raise OccursViolation(var.text, print_type(t))
    r = theta_env[var]
    env = demote(r, theta_env, [v for v in ftv_ordered(t) if v not in rigid])
    if not wf_type(rigid, env, r, t):
        raise RestrictionViolation(var.text, print_type(t))
    return env, Subst({var: t})
