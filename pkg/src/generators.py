"""
Generators - 随机输入生成
随机类型、随机良构项、带已知地面合一子的合一问题，以及反例收缩
"""
import random
from typing import Callable, Dict, Iterator, List, Optional, Sequence

from src.config import CONSTRUCTORS, SELFTEST_TERM_SIZE
from src.syntax import (
    App, FrozenVar, Lam, LamAnn, Let, LetAnn, Restriction, TCon, TForall, Term,
    TermContext, Type, TypeVarName, TVar, Var, apply_type_subst, fresh_var,
    is_guarded_value, quantifier_prefix, term_size,
)

# λ/let 绑定使用的名字
TERM_NAMES = ["x", "y", "z", "f", "g"]
LITERALS = ["0", "1", "2"]


# ============================================================================
# 类型
# ============================================================================
class TypeGenerator:
    """
    随机类型

    Args:
        rng: 随机数源
        max_depth: 最大深度
        max_quantifiers: 最多出现的 ∀ 个数
    """

    def __init__(self, rng: random.Random, max_depth: int = 3, max_quantifiers: int = 2):
        self.rng = rng
        self.max_depth = max_depth
        self.max_quantifiers = max_quantifiers
        self._nullary = [name for name, info in CONSTRUCTORS.items() if info["arity"] == 0]
        self._others = [name for name, info in CONSTRUCTORS.items() if info["arity"] > 0]

    def type(self, scope: Sequence[TypeVarName] = (), monotype: bool = False) -> Type:
        budget = [0 if monotype else self.max_quantifiers]
        return self._type(list(scope), self.max_depth, budget)

    def _type(self, scope: List[TypeVarName], depth: int, budget: List[int]) -> Type:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.3:
            if scope and rng.random() < 0.6:
                return TVar(rng.choice(scope))
            return TCon(rng.choice(self._nullary), ())
        if budget[0] > 0 and rng.random() < 0.25:
            budget[0] -= 1
            var = fresh_var(rng.choice("abcd"))
            return TForall(var, self._type(scope + [var], depth - 1, budget))
        name = rng.choice(self._others)
        arity = CONSTRUCTORS[name]["arity"]
        return TCon(name, tuple(self._type(scope, depth - 1, budget) for _ in range(arity)))


# ============================================================================
# 项
# ============================================================================
class TermGenerator:
    """
    随机良构项：变量都在作用域内，标注只引用作用域内的类型变量

    项不保证可定型，偏向前导中的函数应用以提高可定型的比例
    """

    def __init__(self, rng: random.Random, gamma: TermContext,
                 max_size: int = SELFTEST_TERM_SIZE):
        self.rng = rng
        self.gamma = gamma
        self.max_size = max_size
        self.types = TypeGenerator(rng, max_depth=2, max_quantifiers=1)

    def term(self, size: Optional[int] = None) -> Term:
        if size is None:
            size = self.rng.randint(1, self.max_size)
        return self._term(size, list(self.gamma), [])

    def _leaf(self, names: List[str]) -> Term:
        rng = self.rng
        roll = rng.random()
        if roll < 0.1:
            return Var(rng.choice(LITERALS))
        name = rng.choice(names)
        if roll < 0.3:
            return FrozenVar(name)
        return Var(name)

    def _term(self, size: int, names: List[str], rigid: List[TypeVarName]) -> Term:
        rng = self.rng
        if size <= 1:
            return self._leaf(names)
        roll = rng.random()
        if roll < 0.4 and size >= 3:
            left = rng.randint(1, size - 2)
            right = size - 1 - left
            return App(self._term(left, names, rigid), self._term(right, names, rigid))
        if roll < 0.6:
            param = rng.choice(TERM_NAMES)
            return Lam(param, self._term(size - 1, names + [param], rigid))
        if roll < 0.68:
            param = rng.choice(TERM_NAMES)
            annotation = self.types.type(rigid)
            return LamAnn(param, annotation, self._term(size - 1, names + [param], rigid))
        if roll < 0.9 and size >= 3:
            name = rng.choice(TERM_NAMES)
            left = rng.randint(1, size - 2)
            bound = self._term(left, names, rigid)
            return Let(name, bound, self._term(size - 1 - left, names + [name], rigid))
        if size >= 3:
            name = rng.choice(TERM_NAMES)
            left = rng.randint(1, size - 2)
            annotation = self.types.type(rigid)
            prefix, _ = quantifier_prefix(annotation)
            # 先按 GVal 假设生成，不是 GVal 时量词前缀不进入作用域
            bound = self._term(left, names, rigid + prefix)
            if not is_guarded_value(bound):
                bound = self._term(left, names, rigid)
            body = self._term(size - 1 - left, names + [name], rigid)
            return LetAnn(name, annotation, bound, body)
        return self._leaf(names)


# ============================================================================
# 合一问题
# ============================================================================
class UnificationProblem:
    """
    A ≗ B，带柔性变量的限制和一个已知的地面合一子 σ（σ 尊重限制；可能为 None）
    """

    def __init__(self, left: Type, right: Type, theta_env: Dict[TypeVarName, Restriction],
                 ground: Optional[Dict[TypeVarName, Type]]):
        self.left = left
        self.right = right
        self.theta_env = theta_env
        self.ground = ground


def unification_problem(rng: random.Random, max_depth: int = 4,
                        max_quantifiers: int = 2) -> UnificationProblem:
    """
    生成合一问题

    一半的问题由同一个类型部分代换得到，因此必然有地面合一子；另一半是两个独立随机类型
    """
    count = rng.randint(1, 3)
    flexible = [fresh_var(text) for text in "uvw"[:count]]
    theta_env = {
        var: (Restriction.MONO if rng.random() < 0.4 else Restriction.POLY) for var in flexible
    }
    types = TypeGenerator(rng, max_depth=max_depth, max_quantifiers=max_quantifiers)
    closed = TypeGenerator(rng, max_depth=2, max_quantifiers=1)
    ground = {
        var: closed.type((), monotype=(r is Restriction.MONO)) for var, r in theta_env.items()
    }
    left = types.type(flexible)
    if rng.random() < 0.5:
        chosen = {var: ground[var] for var in flexible if rng.random() < 0.5}
        right = apply_type_subst(chosen, left)
        return UnificationProblem(left, right, theta_env, ground)
    right = types.type(flexible)
    if apply_type_subst(ground, left) == apply_type_subst(ground, right):
        return UnificationProblem(left, right, theta_env, ground)
    return UnificationProblem(left, right, theta_env, None)


# ============================================================================
# 收缩
# ============================================================================
def shrink_candidates(m: Term) -> Iterator[Term]:
    """比 m 小的候选项：子项、去掉一层绑定、缩小子项"""
    if isinstance(m, App):
        yield m.fun
        yield m.arg
        for smaller in shrink_candidates(m.fun):
            yield App(smaller, m.arg)
        for smaller in shrink_candidates(m.arg):
            yield App(m.fun, smaller)
    elif isinstance(m, (Lam, LamAnn)):
        yield m.body
        for smaller in shrink_candidates(m.body):
            yield Lam(m.param, smaller) if isinstance(m, Lam) else LamAnn(m.param, m.annotation, smaller)
    elif isinstance(m, (Let, LetAnn)):
        yield m.bound
        yield m.body
        for smaller in shrink_candidates(m.body):
            if isinstance(m, Let):
                yield Let(m.name, m.bound, smaller)
            else:
                yield LetAnn(m.name, m.annotation, m.bound, smaller)


def shrink(m: Term, still_fails: Callable[[Term], bool], max_rounds: int = 200) -> Term:
    """
    贪心收缩反例

    Args:
        m: 失败的项
        still_fails: 对候选项重新判定，返回 True 表示仍然失败（候选项可能不良构，由调用方处理）
        max_rounds: 最多收缩轮数

    Returns:
        仍然失败的最小项
    """
    current = m
    for _ in range(max_rounds):
        for candidate in shrink_candidates(current):
            if term_size(candidate) < term_size(current) and still_fails(candidate):
                current = candidate
                break
        else:
            return current
    return current
