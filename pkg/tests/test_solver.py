import itertools
import random
import re

import pytest

from src.constraints import CAnd, CDef, CEq, CExists, CForall, CMono, CTrue
from src.corpus import error_kind
from src.errors import (
    DefMonoFailure, InferenceError, InvariantViolation, MonoFailure, RigidEscape,
    UnificationFailure,
)
from src.generators import TermGenerator
from src.solver import (
    Final, Solver, Stepped, Stuck, infer, initial_state, literal_context, matching_rules,
    run, solve_constraint, step,
)
from src.stack import ConjFrame
from src.surface import parse_term, print_result
from src.syntax import (
    App, FrozenVar, Lam, LamAnn, Let, LetAnn, Restriction, TCon, TermContext, TVar, Var,
    alpha_equal, arrow, forall, fresh_var,
)

INT = TCon("Int", ())
BOOL = TCon("Bool", ())


def identity_type():
    a = fresh_var("a")
    return forall([a], arrow(TVar(a), TVar(a)))


def test_single_equation_steps_to_final():
    outcome = step(initial_state(CEq(INT, INT)))
    assert isinstance(outcome, Stepped)
    assert outcome.rule == "S-Eq"
    assert isinstance(step(outcome.state), Final)


def test_failed_equation_is_stuck():
    outcome = step(initial_state(CEq(INT, BOOL)))
    assert isinstance(outcome, Stuck)
    assert isinstance(outcome.error, UnificationFailure)


def test_conjunction_push_and_pop():
    s = initial_state(CAnd(CTrue(), CTrue()))
    assert matching_rules(s) == ["S-ConjPush"]
    pushed = step(s).state
    assert pushed.stack == (ConjFrame(CTrue()),)
    assert matching_rules(pushed) == ["S-ConjPop"]


def test_run_records_trace():
    result = run(initial_state(CAnd(CEq(INT, INT), CTrue())))
    assert result.trace[0].rule == "init"
    assert [entry.rule for entry in result.trace[1:]] == ["S-ConjPush", "S-Eq", "S-ConjPop"]
    assert result.steps == 3
    pattern = r"step=0 rule=init measure=\(\d+,\d+,\d+,\d+\) stack=0 constraint=.*"
    assert re.fullmatch(pattern, result.trace[0].render())


def test_measure_decreases_along_trace(gamma):
    result = infer((), gamma, parse_term("let f = fun x -> x in pair (f 1) (f unit)"))
    measures = [entry.measure for entry in result.trace]
    assert all(later < earlier for earlier, later in zip(measures, measures[1:]))


def test_rigid_escape_on_forall_pop():
    u, r = fresh_var("u"), fresh_var("r")
    c = CExists(u, CForall(r, CEq(TVar(u), TVar(r))))
    with pytest.raises(RigidEscape) as exc_info:
        run(initial_state(c))
    assert exc_info.value.trace


def test_mono_failure():
    u = fresh_var("u")
    c = CExists(u, CAnd(CEq(TVar(u), identity_type()), CMono(u)))
    with pytest.raises(MonoFailure):
        run(initial_state(c))


def test_def_requires_monomorphic_type():
    u = fresh_var("u")
    c = CExists(u, CAnd(CEq(TVar(u), identity_type()), CDef("x", TVar(u), CTrue())))
    with pytest.raises(DefMonoFailure):
        run(initial_state(c))


def test_def_push_demotes_variables():
    u = fresh_var("u")
    c = CExists(u, CDef("x", TVar(u), CEq(TVar(u), INT)))
    final = run(initial_state(c)).final
    assert final.theta_env[u] is Restriction.MONO
    assert final.subst[u] == INT


def test_step_budget_is_enforced():
    c = CAnd(CEq(INT, INT), CAnd(CEq(INT, INT), CEq(INT, INT)))
    with pytest.raises(InvariantViolation):
        Solver().run(initial_state(c), step_budget=2)


def test_unknown_partition_strategy():
    with pytest.raises(ValueError):
        Solver(partition_strategy="bogus")


def test_solve_constraint_closes_over_context(gamma, supply):
    from src.constraints import congen
    a = supply.fresh("a")
    c = congen(parse_term("id ~id"), TVar(a), supply, in_scope=gamma)
    final = solve_constraint((), [a], gamma, c, Solver(supply)).final
    assert alpha_equal(final.subst.apply(TVar(a)), identity_type())
    assert a in final.theta_env


def test_final_state_shape_with_rigid_context():
    r = fresh_var("r")
    gamma = TermContext([("x", TVar(r))])
    result = infer([r], gamma, parse_term("fun y -> x"))
    assert result.final.stack[0].var == r
    assert print_result(result.result_type, result.residual) == "_1 -> r  where _1 is monomorphic"


def test_literal_context_adds_int():
    gamma = literal_context(TermContext(), parse_term("pair 1 (f 22)"))
    assert list(gamma) == ["1", "22"]
    assert gamma["22"] == INT


def test_literal_context_keeps_existing_binding():
    gamma = literal_context(TermContext([("1", BOOL)]), parse_term("1"))
    assert gamma["1"] == BOOL


def test_value_restriction_leaves_monomorphic_residual(gamma):
    result = infer((), gamma, parse_term("let x = id id in x"))
    assert list(result.residual.values()) == [Restriction.MONO]


def test_generalised_let_is_polymorphic(gamma):
    result = infer((), gamma, parse_term("let f = fun x -> x in ~f"))
    assert alpha_equal(result.result_type, identity_type())
    assert not result.residual


@pytest.mark.parametrize("strategy", ["scan", "rank"])
def test_partition_strategies_give_same_results(gamma, strategy):
    source = "fun z -> let f = fun x -> choose x z in pair (f z) $(fun y -> y)"
    result = infer((), gamma, parse_term(source), solver=Solver(partition_strategy=strategy))
    printed = print_result(result.result_type, result.residual)
    assert printed == "_1 -> (_1, forall a. a -> a)  where _1 is monomorphic"


def test_partition_calls_are_counted(gamma):
    solver = Solver()
    infer((), gamma, parse_term("let f = fun x -> x in f 1"), solver=solver)
    assert solver.partition_calls > 0


def rename_binders(m, env=None, counter=None):
    """把每个 λ / let 绑定的名字换成新名字，自由变量不动"""
    env = env or {}
    counter = counter if counter is not None else itertools.count()
    if isinstance(m, Var):
        return Var(env.get(m.name, m.name))
    if isinstance(m, FrozenVar):
        return FrozenVar(env.get(m.name, m.name))
    if isinstance(m, App):
        return App(rename_binders(m.fun, env, counter), rename_binders(m.arg, env, counter))
    fresh = f"renamed{next(counter)}"
    if isinstance(m, Lam):
        return Lam(fresh, rename_binders(m.body, {**env, m.param: fresh}, counter))
    if isinstance(m, LamAnn):
        return LamAnn(fresh, m.annotation,
                      rename_binders(m.body, {**env, m.param: fresh}, counter))
    bound = rename_binders(m.bound, env, counter)
    body = rename_binders(m.body, {**env, m.name: fresh}, counter)
    if isinstance(m, Let):
        return Let(fresh, bound, body)
    return LetAnn(fresh, m.annotation, bound, body)


def outcome_of(gamma, m):
    try:
        result = infer((), gamma, m)
    except InferenceError as e:
        return ("error", error_kind(e))
    return ("ok", print_result(result.result_type, result.residual))


@pytest.mark.parametrize("seed", range(4))
def test_inference_ignores_binder_names(gamma, seed):
    terms = TermGenerator(random.Random(seed), gamma, max_size=12)
    for _ in range(40):
        m = terms.term()
        assert outcome_of(gamma, m) == outcome_of(gamma, rename_binders(m))


def test_renaming_helper_keeps_shadowing():
    m = parse_term("fun x -> fun x -> x")
    renamed = rename_binders(m)
    assert renamed.body.body == Var(renamed.body.param)
    assert renamed.param != renamed.body.param


def test_inference_output_is_repeatable_within_one_process(gamma):
    source = "let f = fun x -> x in pair (f 1) (~f)"
    m = parse_term(source)

    def render():
        result = infer((), gamma, m)
        return (print_result(result.result_type, result.residual),
                [entry.render() for entry in result.trace])

    first = render()
    for other in ("id ~id", "fun f -> f 1", "choose id"):
        outcome_of(gamma, parse_term(other))
    assert render() == first


def test_existential_under_rigid_may_mention_it():
    b, c = fresh_var("b"), fresh_var("c")
    solve_constraint([], [], TermContext(), CForall(c, CExists(b, CEq(TVar(b), TVar(c)))))


def test_existential_outside_rigid_cannot_capture_it():
    b, c = fresh_var("b"), fresh_var("c")
    with pytest.raises(RigidEscape):
        solve_constraint([], [], TermContext(), CExists(b, CForall(c, CEq(TVar(b), TVar(c)))))
