from src.constraints import CAnd, CDef, CEq, CExists, CInst, CMono, CTrue
from src.stack import (
    ConjFrame, DefFrame, ExistsFrame, ForallFrame, LetFrame, SolverState, atv, delta_of,
    gamma_of, is_final_shape, measure, partition, plug, rank_partition, ranks,
    reify_state, state_problems, state_wf, top_exists_run, unification_constraint, xi_of,
)
from src.syntax import Restriction, TCon, TVar, arrow, fresh_var
from src.unify import RestrictionContext, Subst

INT = TCon("Int", ())


def test_plug_wraps_from_top():
    a = fresh_var("a")
    c1, c2 = CMono(a), CEq(TVar(a), INT)
    stack = (ExistsFrame(a), ConjFrame(c2))
    assert plug(stack, c1) == CExists(a, CAnd(c1, c2))


def test_plug_let_and_def_frames():
    a, b = fresh_var("a"), fresh_var("b")
    rest = CInst("x", TVar(a))
    stack = (LetFrame(Restriction.MONO, "x", b, rest), DefFrame("y", INT))
    plugged = plug(stack, CTrue())
    assert plugged.restriction is Restriction.MONO
    assert plugged.bound == CDef("y", INT, CTrue())
    assert plugged.body == rest


def test_context_extraction():
    r, a, b = fresh_var("r"), fresh_var("a"), fresh_var("b")
    stack = (ForallFrame(r), ExistsFrame(a), DefFrame("x", TVar(a)),
             LetFrame(Restriction.POLY, "y", b, CTrue()))
    assert list(delta_of(stack)) == [r]
    assert list(xi_of(stack)) == [a, b]
    assert list(gamma_of(stack)) == ["x"]
    assert atv(stack) == [r, a, b]


def test_final_shape():
    r, a = fresh_var("r"), fresh_var("a")
    assert is_final_shape(())
    assert is_final_shape((ForallFrame(r), ExistsFrame(a)))
    assert not is_final_shape((ExistsFrame(a), ForallFrame(r)))
    assert not is_final_shape((ConjFrame(CTrue()),))
    assert top_exists_run((ForallFrame(r), ExistsFrame(a), ExistsFrame(fresh_var()))) == 2
    assert top_exists_run((ExistsFrame(a), ForallFrame(r))) == 0


def test_measure_components():
    s = SolverState((), RestrictionContext(), Subst(), CInst("x", INT))
    assert measure(s) == (1, 2, 2, 0)
    a, b = fresh_var("a"), fresh_var("b")
    stack = (ExistsFrame(a), ConjFrame(CTrue()), ExistsFrame(b))
    s = SolverState(stack, RestrictionContext(), Subst(), CTrue())
    assert measure(s)[3] == 2


def test_unification_constraint_and_reify():
    a, b = fresh_var("a"), fresh_var("b")
    env = RestrictionContext({a: Restriction.MONO, b: Restriction.POLY})
    subst = Subst({a: INT, b: TVar(b)})
    expected = CAnd(CMono(a), CAnd(CEq(TVar(a), INT), CEq(TVar(b), TVar(b))))
    assert unification_constraint(env, subst) == expected
    s = SolverState((ExistsFrame(a), ExistsFrame(b)), env, subst, CTrue())
    assert reify_state(s) == CExists(a, CExists(b, CAnd(CTrue(), expected)))


def _state(stack, env, subst, current=CTrue()):
    return SolverState(stack, RestrictionContext(env), Subst(subst), current)


def test_state_wf_accepts_consistent_state():
    a = fresh_var("a")
    s = _state((ExistsFrame(a),), {a: Restriction.POLY}, {a: TVar(a)})
    assert state_wf(s)


def test_state_problems_detects_inconsistencies():
    a = fresh_var("a")
    missing = _state((ExistsFrame(a),), {a: Restriction.POLY}, {})
    assert state_problems(missing)
    stray = _state((), {a: Restriction.POLY}, {a: TVar(a)})
    assert state_problems(stray)
    monotype_image = _state((ExistsFrame(a),), {a: Restriction.MONO},
                            {a: arrow(INT, INT)})
    assert state_wf(monotype_image)


def test_state_problems_def_requires_monomorphic_variables():
    a = fresh_var("a")
    s = _state((ExistsFrame(a), DefFrame("x", TVar(a))), {a: Restriction.POLY}, {a: TVar(a)})
    assert any("x" in problem for problem in state_problems(s))
    s = _state((ExistsFrame(a), DefFrame("x", TVar(a))), {a: Restriction.MONO}, {a: TVar(a)})
    assert state_wf(s)


def test_state_problems_unbound_current_constraint():
    s = _state((), {}, {}, CInst("missing", INT))
    assert state_problems(s)


def test_partition_and_rank_partition_agree_on_lowering():
    a, b = fresh_var("a"), fresh_var("b")
    env = RestrictionContext({a: Restriction.POLY, b: Restriction.POLY})
    lower = (ExistsFrame(a), DefFrame("x", TVar(a)))
    upper = (ExistsFrame(b),)

    referenced = Subst({a: arrow(TVar(b), INT), b: TVar(b)})
    assert partition([b], referenced, env) == ([], [b])
    assert rank_partition([b], referenced, lower, upper) == ([], [b])

    unreferenced = Subst({a: INT, b: TVar(b)})
    assert partition([b], unreferenced, env) == ([b], [])
    assert rank_partition([b], unreferenced, lower, upper) == ([b], [])


def test_ranks_use_first_binding_position():
    a, b = fresh_var("a"), fresh_var("b")
    stack = (ExistsFrame(a), ExistsFrame(b))
    assert ranks(stack, Subst({a: TVar(b), b: TVar(b)})) == {b: 1}


def test_state_problems_duplicate_existential_binder():
    a = fresh_var("a")
    s = _state((ExistsFrame(a), ExistsFrame(a)), {a: Restriction.POLY}, {a: TVar(a)})
    assert not state_wf(s)
    assert "栈上的类型变量绑定有重复" in state_problems(s)


def test_state_problems_duplicate_term_binder():
    a = fresh_var("a")
    stack = (ExistsFrame(a), DefFrame("x", TVar(a)), DefFrame("x", TVar(a)))
    s = _state(stack, {a: Restriction.MONO}, {a: TVar(a)})
    assert "栈上的项变量绑定有重复" in state_problems(s)


def test_partition_follows_range_of_outer_variables():
    a, b, c = fresh_var("a"), fresh_var("b"), fresh_var("c")
    env = RestrictionContext({a: Restriction.POLY, b: Restriction.POLY, c: Restriction.POLY})
    # 非幂等的 θ 也按定义计算：只看 θ|{c} 的值域
    chained = Subst({a: TVar(a), b: TVar(a), c: TVar(b)})
    assert partition([a, b], chained, env) == ([a], [b])

    assert partition([a], Subst({a: TVar(a)}), RestrictionContext({a: Restriction.POLY})) == ([a], [])

    arrow_image = Subst({a: TVar(a), b: TVar(b), c: arrow(TVar(a), TVar(a))})
    assert partition([a, b], arrow_image, env) == ([b], [a])


def test_rank_partition_on_idempotent_substitution():
    a, b, c = fresh_var("a"), fresh_var("b"), fresh_var("c")
    env = RestrictionContext({c: Restriction.POLY, a: Restriction.POLY, b: Restriction.POLY})
    subst = Subst({c: TVar(a), a: TVar(a), b: TVar(a)})
    lower = (ExistsFrame(c),)
    upper = (ExistsFrame(a), ExistsFrame(b))
    assert ranks(lower + upper, subst) == {a: 1}
    assert rank_partition([a, b], subst, lower, upper) == ([b], [a])
    assert partition([a, b], subst, env) == ([b], [a])
