from src.constraints import (
    CAnd, CDef, CEq, CExists, CForall, CFreeze, CInst, CLetMono, CLetPoly, CMono, CTrue,
    ConstraintContext, congen, conj, constraint_ftv, constraint_size, count_instances,
    dump_constraint, exists_many, wf_constraint,
)
from src.surface import parse_term
from src.syntax import TermContext, TypeContext, TCon, TVar, arrow, fresh_var

INT = TCon("Int", ())


def test_congen_variables(supply):
    a = TVar(supply.fresh("a"))
    assert congen(parse_term("x"), a, supply) == CInst("x", a)
    assert congen(parse_term("~x"), a, supply) == CFreeze("x", a)


def test_congen_application_shape(supply):
    a = TVar(supply.fresh("a"))
    c = congen(parse_term("f x"), a, supply)
    assert isinstance(c, CExists)
    a1 = TVar(c.var)
    assert c.body == CAnd(CInst("f", arrow(a1, a)), CInst("x", a1))


def test_congen_lambda_shape(supply):
    a = TVar(supply.fresh("a"))
    c = congen(parse_term("fun x -> x"), a, supply)
    a1 = c.var
    a2 = c.body.var
    assert c.body.body == CAnd(
        CEq(arrow(TVar(a1), TVar(a2)), a),
        CDef("x", TVar(a1), CInst("x", TVar(a2))),
    )


def test_congen_let_restriction_follows_value_class(supply):
    a = TVar(supply.fresh("a"))
    assert isinstance(congen(parse_term("let f = fun x -> x in f"), a, supply), CLetPoly)
    assert isinstance(congen(parse_term("let f = id id in f"), a, supply), CLetMono)
    assert isinstance(congen(parse_term("let f = ~id in f"), a, supply), CLetMono)


def test_congen_annotated_let_value_binds_prefix(supply):
    a = TVar(supply.fresh("a"))
    m = parse_term("let (f : forall a. a -> a) = fun x -> x in f")
    c = congen(m, a, supply)
    assert isinstance(c, CAnd)
    assert isinstance(c.left, CForall)
    assert c.left.var == m.annotation.bound
    assert c.right.name == "f"
    assert c.right.type == m.annotation


def test_congen_annotated_let_non_value_keeps_annotation(supply):
    a = TVar(supply.fresh("a"))
    m = parse_term("let (f : forall a. a -> a) = id ~id in f")
    c = congen(m, a, supply)
    assert isinstance(c.left, CExists)


def test_congen_freshens_shadowed_binders(supply):
    a = TVar(supply.fresh("a"))
    c = congen(parse_term("fun x -> fun x -> x"), a, supply)
    outer_def = c.body.body.right
    inner_def = outer_def.body.body.body.right
    assert outer_def.name == "x"
    assert inner_def.name == "x'1"
    assert inner_def.body.name == "x'1"


def test_congen_freshens_names_from_context(supply):
    a = TVar(supply.fresh("a"))
    c = congen(parse_term("fun id -> id"), a, supply, in_scope=["id"])
    assert c.body.body.right.name == "id'1"


def test_wf_constraint_checks_scopes(supply):
    a = supply.fresh("a")
    c = congen(parse_term("id x"), TVar(a), supply)
    gamma = TermContext([("id", INT), ("x", INT)])
    assert wf_constraint(ConstraintContext(TypeContext(), TypeContext([a]), gamma), c)
    assert not wf_constraint(ConstraintContext(TypeContext(), TypeContext(), gamma), c)
    assert not wf_constraint(
        ConstraintContext(TypeContext(), TypeContext([a]), TermContext([("id", INT)])), c
    )


def test_wf_constraint_binders():
    b = fresh_var("b")
    assert wf_constraint(ConstraintContext(), CExists(b, CMono(b)))
    assert wf_constraint(ConstraintContext(), CForall(b, CEq(TVar(b), TVar(b))))
    assert not wf_constraint(ConstraintContext(), CMono(b))


def test_size_and_instance_count(supply):
    a = TVar(supply.fresh("a"))
    c = congen(parse_term("f x"), a, supply)
    assert constraint_size(c) == 6
    assert count_instances(c) == 2
    assert constraint_size(CTrue()) == 0


def test_conj_and_exists_many():
    a, b = fresh_var("a"), fresh_var("b")
    parts = [CMono(a), CMono(b), CEq(TVar(a), TVar(b))]
    assert conj([]) == CTrue()
    assert conj(parts[:1]) == parts[0]
    assert conj(parts) == CAnd(parts[0], CAnd(parts[1], parts[2]))
    assert exists_many([a, b], CTrue()) == CExists(a, CExists(b, CTrue()))


def test_constraint_ftv_skips_bound(supply):
    a = supply.fresh("a")
    c = congen(parse_term("fun x -> x"), TVar(a), supply)
    assert constraint_ftv(c) == [a]


def test_dump_constraint_format(supply):
    a = TVar(supply.fresh("a"))
    assert dump_constraint(congen(parse_term("x"), a, supply)) == "(x <= a)"
    assert dump_constraint(congen(parse_term("~x"), a, supply)) == "[~x : a]"
    text = dump_constraint(congen(parse_term("let y = fun x -> x in y"), a, supply))
    assert text.startswith("(let* y = ^b. ")
