"""
Report - 推断报告
--json 输出的结构化文档
"""
from typing import List, Literal, Optional

from pydantic import BaseModel

from src.errors import FreezeMLError
from src.solver import InferenceResult, TraceEntry
from src.surface import print_result, residual_names
from src.syntax import Restriction

Status = Literal["ok", "type-error", "parse-error", "internal-error"]


class ResidualEntry(BaseModel):
    name: str
    restriction: Literal["mono", "poly"]


class ErrorInfo(BaseModel):
    kind: str
    message: str
    line: Optional[int] = None
    column: Optional[int] = None


class TraceRecord(BaseModel):
    step: int
    rule: str
    measure: List[int]
    stack: int
    constraint: str


class Report(BaseModel):
    """status 为 ok 时 type/residuals 有值，否则 error 有值"""
    status: Status
    type: Optional[str] = None
    residuals: List[ResidualEntry] = []
    error: Optional[ErrorInfo] = None
    trace: Optional[List[TraceRecord]] = None


def trace_records(trace: List[TraceEntry]) -> List[TraceRecord]:
    return [
        TraceRecord(step=e.step, rule=e.rule, measure=list(e.measure),
                    stack=e.stack_depth, constraint=e.constraint)
        for e in trace
    ]


def ok_report(result: InferenceResult, with_trace: bool = False) -> Report:
    """
    从推断结果构造报告

    Args:
        result: 推断结果
        with_trace: 是否附带逐步跟踪

    Returns:
        Report
    """
    names = residual_names(result.result_type, result.residual)
    residuals = [
        ResidualEntry(name=names[var],
                      restriction="mono" if r is Restriction.MONO else "poly")
        for var, r in result.residual.items()
        if var in names
    ]
    return Report(
        status="ok",
        type=print_result(result.result_type, result.residual),
        residuals=residuals,
        trace=trace_records(result.trace) if with_trace else None,
    )


def error_report(status: Status, error: FreezeMLError,
                 trace: Optional[List[TraceEntry]] = None) -> Report:
    span = error.span
    info = ErrorInfo(
        kind=type(error).__name__,
        message=error.message,
        line=span.line if span else None,
        column=span.column if span else None,
    )
    return Report(status=status, error=info,
                  trace=trace_records(trace) if trace is not None else None)
