import random

import pytest

from src.errors import (
    ArityMismatch, CtorClash, InvariantViolation, OccursViolation, QuantifierEscape,
    QuantifierMismatch, RestrictionViolation, UnifyError,
)
from src.generators import unification_problem
from src.oracle import match_instance
from src.syntax import (
    Restriction, TCon, TVar, alpha_equal, arrow, forall, fresh_var, ftv_ordered, product,
)
from src.unify import IDENTITY, RestrictionContext, Subst, compose, demote, unify

INT = TCon("Int", ())
BOOL = TCon("Bool", ())


def identity_type():
    a = fresh_var("a")
    return forall([a], arrow(TVar(a), TVar(a)))


def flexible(*restrictions):
    variables = [fresh_var(text) for text in "uvw"[:len(restrictions)]]
    return variables, RestrictionContext(dict(zip(variables, restrictions)))


def test_binds_flexible_variable():
    (u,), env = flexible(Restriction.POLY)
    new_env, subst = unify([], env, TVar(u), arrow(INT, BOOL))
    assert subst[u] == arrow(INT, BOOL)
    assert new_env == env


def test_same_variable_is_identity():
    (u,), env = flexible(Restriction.MONO)
    assert unify([], env, TVar(u), TVar(u)) == (env, IDENTITY)


def test_occurs_check():
    (u,), env = flexible(Restriction.POLY)
    with pytest.raises(OccursViolation):
        unify([], env, TVar(u), arrow(TVar(u), INT))


def test_monomorphic_variable_rejects_polytype():
    (u,), env = flexible(Restriction.MONO)
    with pytest.raises(RestrictionViolation):
        unify([], env, TVar(u), identity_type())


def test_polymorphic_variable_accepts_polytype():
    (u,), env = flexible(Restriction.POLY)
    _, subst = unify([], env, identity_type(), TVar(u))
    assert alpha_equal(subst[u], identity_type())


def test_binding_monomorphic_variable_demotes():
    (u, v), env = flexible(Restriction.MONO, Restriction.POLY)
    new_env, _ = unify([], env, TVar(u), arrow(TVar(v), INT))
    assert new_env[v] is Restriction.MONO
    assert new_env[u] is Restriction.MONO


def test_rigid_variables_only_unify_with_themselves():
    r, s = fresh_var("r"), fresh_var("s")
    env = RestrictionContext()
    assert unify([r], env, TVar(r), TVar(r)) == (env, IDENTITY)
    with pytest.raises(CtorClash):
        unify([r, s], env, TVar(r), TVar(s))
    with pytest.raises(CtorClash):
        unify([r], env, TVar(r), INT)


def test_constructor_clash_and_arity():
    env = RestrictionContext()
    with pytest.raises(CtorClash):
        unify([], env, INT, BOOL)
    with pytest.raises(CtorClash):
        unify([], env, arrow(INT, INT), TCon("List", (INT,)))
    with pytest.raises(ArityMismatch):
        unify([], env, TCon("List", (INT,)), TCon("List", (INT, INT)))


def test_quantified_types_alpha_equivalent():
    env = RestrictionContext()
    assert unify([], env, identity_type(), identity_type()) == (env, IDENTITY)


def test_quantifier_order_matters():
    a, b = fresh_var("a"), fresh_var("b")
    left = forall([a, b], arrow(TVar(a), TVar(b)))
    right = forall([b, a], arrow(TVar(a), TVar(b)))
    with pytest.raises(CtorClash):
        unify([], RestrictionContext(), left, right)


def test_quantifier_mismatch():
    with pytest.raises(QuantifierMismatch):
        unify([], RestrictionContext(), identity_type(), arrow(INT, INT))


def test_quantified_variable_cannot_escape():
    (u,), env = flexible(Restriction.POLY)
    a = fresh_var("a")
    left = forall([a], arrow(TVar(a), TVar(u)))
    with pytest.raises(QuantifierEscape):
        unify([], env, left, identity_type())


def test_unifier_under_quantifier():
    (u,), env = flexible(Restriction.MONO)
    a = fresh_var("a")
    left = forall([a], arrow(TVar(a), TVar(u)))
    b = fresh_var("b")
    right = forall([b], arrow(TVar(b), INT))
    _, subst = unify([], env, left, right)
    assert subst[u] == INT


def test_nested_unifier_is_composed():
    (u, v), env = flexible(Restriction.POLY, Restriction.POLY)
    _, subst = unify([], env, arrow(TVar(u), TVar(v)), arrow(TVar(v), INT))
    assert subst.apply(TVar(u)) == INT
    assert subst.apply(TVar(v)) == INT
    assert subst.is_idempotent()


def test_compose_applies_outer_to_inner():
    u, v = fresh_var("u"), fresh_var("v")
    inner = Subst({u: arrow(TVar(v), INT)})
    outer = Subst({v: BOOL})
    composed = compose(outer, inner)
    assert composed[u] == arrow(BOOL, INT)
    assert composed[v] == BOOL


def test_compose_rejects_non_idempotent_result():
    u, v = fresh_var("u"), fresh_var("v")
    with pytest.raises(InvariantViolation):
        compose(Subst({u: TVar(v)}), Subst({v: arrow(TVar(u), INT)}))


def test_demote_only_for_monomorphic():
    (u,), env = flexible(Restriction.POLY)
    assert demote(Restriction.POLY, env, [u]) == env
    assert demote(Restriction.MONO, env, [u])[u] is Restriction.MONO


def test_restriction_context_extend_rejects_duplicates():
    (u,), env = flexible(Restriction.POLY)
    with pytest.raises(InvariantViolation):
        env.extend(u)


def images(subst, variables):
    """把 θ 在 variables 上的像拼成一个类型，便于整体比较"""
    result = subst.apply(TVar(variables[0]))
    for var in variables[1:]:
        result = product(result, subst.apply(TVar(var)))
    return result


def instance_of(general, specific):
    pattern_vars = ftv_ordered(general)
    return match_instance(forall(pattern_vars, general), specific) is not None


@pytest.mark.parametrize("seed", range(5))
def test_unify_is_symmetric(seed):
    rng = random.Random(seed)
    for _ in range(100):
        problem = unification_problem(rng)
        env = RestrictionContext(problem.theta_env)
        outcomes = []
        for left, right in ((problem.left, problem.right), (problem.right, problem.left)):
            try:
                outcomes.append(unify([], env, left, right))
            except UnifyError:
                outcomes.append(None)
        forward, backward = outcomes
        assert (forward is None) == (backward is None)
        if forward is None:
            continue
        flexible = list(env)
        first, second = images(forward[1], flexible), images(backward[1], flexible)
        # 两个最一般合一子只差一个变量改名
        assert instance_of(first, second) and instance_of(second, first)
        for _, subst in (forward, backward):
            assert alpha_equal(subst.apply(problem.left), subst.apply(problem.right))
