from src.corpus import error_kind
from src.errors import CtorClash, ParseError, SourceSpan, UnificationFailure
from src.report import error_report, ok_report
from src.solver import infer
from src.surface import parse_term


def test_ok_report_lists_residuals(gamma):
    result = infer((), gamma, parse_term("let x = id id in x"))
    report = ok_report(result)
    assert report.status == "ok"
    assert report.type == "_1 -> _1  where _1 is monomorphic"
    assert [(r.name, r.restriction) for r in report.residuals] == [("_1", "mono")]
    assert report.trace is None


def test_ok_report_poly_residual(gamma):
    report = ok_report(infer((), gamma, parse_term("id")))
    assert [(r.name, r.restriction) for r in report.residuals] == [("_1", "poly")]


def test_ok_report_with_trace(gamma):
    report = ok_report(infer((), gamma, parse_term("id 3")), with_trace=True)
    assert report.trace[0].rule == "init"
    assert report.trace[0].step == 0
    assert len(report.trace[0].measure) == 4


def test_error_report_carries_position():
    error = ParseError("unexpected end of input", SourceSpan(4, 4, 2, 3), ["NAME"])
    report = error_report("parse-error", error)
    assert report.error.kind == "ParseError"
    assert (report.error.line, report.error.column) == (2, 3)
    assert report.type is None


def test_error_kind_unwraps_unification_failure():
    error = UnificationFailure(CtorClash("Int", "Bool"))
    assert error_kind(error) == "CtorClash"
    assert error_report("type-error", error).error.kind == "UnificationFailure"
