"""
Errors - 错误类型
解析错误、合一错误、类型错误与内部不变式错误
"""
from dataclasses import dataclass
from typing import List, Optional


@dataclass(frozen=True)
class SourceSpan:
    """源码区间（偏移从 0 开始，行列从 1 开始）"""
    start: int
    end: int
    line: int
    column: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"非法区间: {self.start} > {self.end}")

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class FreezeMLError(Exception):
    """所有错误的基类"""

    def __init__(self, message: str, span: Optional[SourceSpan] = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def with_span(self, span: Optional[SourceSpan]) -> "FreezeMLError":
        """补上区间（已有区间时保持不变）"""
        if self.span is None and span is not None:
            self.span = span
        return self

    def __str__(self) -> str:
        if self.span is not None:
            return f"{self.span}: {self.message}"
        return self.message


# ============================================================================
# 解析错误
# ============================================================================
class ParseError(FreezeMLError):
    """具体语法解析失败"""

    def __init__(self, message: str, span: Optional[SourceSpan] = None,
                 expected: Optional[List[str]] = None):
        super().__init__(message, span)
        self.expected = sorted(expected or [])

    def __str__(self) -> str:
        text = super().__str__()
        if self.expected:
            shown = ", ".join(self.expected[:8])
            more = "" if len(self.expected) <= 8 else ", ..."
            text += f" (expected one of: {shown}{more})"
        return text


# ============================================================================
# 合一错误
# ============================================================================
class UnifyError(FreezeMLError):
    """合一失败"""


class CtorClash(UnifyError):
    def __init__(self, left: str, right: str):
        super().__init__(f"cannot unify {left} with {right}")
        self.left = left
        self.right = right


class ArityMismatch(UnifyError):
    def __init__(self, ctor: str, left: int, right: int):
        super().__init__(f"constructor {ctor} applied to {left} and {right} arguments")
        self.ctor = ctor


class OccursViolation(UnifyError):
    def __init__(self, var: str, type_text: str):
        super().__init__(f"type variable {var} occurs in {type_text}")
        self.var = var
        self.type_text = type_text


class RestrictionViolation(UnifyError):
    def __init__(self, var: str, type_text: str):
        super().__init__(
            f"monomorphic type variable {var} cannot be instantiated to {type_text}"
        )
        self.var = var
        self.type_text = type_text


class QuantifierEscape(UnifyError):
    def __init__(self, var: str):
        super().__init__(f"quantified type variable {var} escapes its scope")
        self.var = var


class QuantifierMismatch(UnifyError):
    def __init__(self, left: str, right: str):
        super().__init__(
            f"quantifier mismatch: cannot unify polymorphic {left} with {right}"
        )
        self.left = left
        self.right = right


# ============================================================================
# 类型错误
# ============================================================================
class InferenceError(FreezeMLError):
    """类型推断失败"""


class UnificationFailure(InferenceError):
    """包装一个 UnifyError"""

    def __init__(self, cause: UnifyError, span: Optional[SourceSpan] = None):
        super().__init__(f"type mismatch: {cause.message}", span)
        self.cause = cause


class MonoFailure(InferenceError):
    def __init__(self, var: str, type_text: str, span: Optional[SourceSpan] = None):
        super().__init__(
            f"type variable {var} must be monomorphic but is {type_text}", span
        )
        self.var = var
        self.type_text = type_text


class DefMonoFailure(InferenceError):
    def __init__(self, name: str, var: str, type_text: str,
                 span: Optional[SourceSpan] = None):
        super().__init__(
            f"type of {name} must be monomorphic, but {var} is {type_text}", span
        )
        self.name = name
        self.var = var
        self.type_text = type_text


class RigidEscape(InferenceError):
    def __init__(self, var: str, span: Optional[SourceSpan] = None):
        super().__init__(f"rigid type variable {var} escapes its scope", span)
        self.var = var


class UnboundVariable(InferenceError):
    def __init__(self, name: str, span: Optional[SourceSpan] = None):
        super().__init__(f"unbound variable {name}", span)
        self.name = name


class UnboundTypeVariable(InferenceError):
    def __init__(self, name: str, span: Optional[SourceSpan] = None):
        super().__init__(f"unbound type variable {name} in annotation", span)
        self.name = name


# ============================================================================
# 内部错误
# ============================================================================
class InvariantViolation(FreezeMLError):
    """求解器内部不变式被破坏（状态良构、度量递减、确定性、步数上限）"""
