"""
Corpus - 示例程序集
书面示例与精选语料：源码、期望的打印结果或期望的错误种类，测试与 selftest 共用
"""
from dataclasses import dataclass
from typing import List, Optional

from src.errors import FreezeMLError, UnificationFailure


@dataclass(frozen=True)
class CorpusEntry:
    """
    一个语料条目

    expected 为 print_result 的输出；error 为错误种类（见 error_kind），两者恰有一个非空
    """
    name: str
    source: str
    expected: Optional[str] = None
    error: Optional[str] = None

    @property
    def typable(self) -> bool:
        return self.error is None


def error_kind(error: FreezeMLError) -> str:
    """合一失败报告其原因的类名，其余报告错误本身的类名"""
    if isinstance(error, UnificationFailure):
        return type(error.cause).__name__
    return type(error).__name__


# 书面示例
WORKED_EXAMPLES: List[CorpusEntry] = [
    CorpusEntry("id-frozen-id", "id ~id", "forall a. a -> a"),
    CorpusEntry("let-then-freeze", "let f = fun x -> x in ~f", "forall a. a -> a"),
    CorpusEntry("mono-let", "let x = id id in x", "_1 -> _1  where _1 is monomorphic"),
    CorpusEntry("annotated-self-app", "fun (f : forall a. a -> a) -> f f",
                "(forall a. a -> a) -> _1 -> _1"),
    CorpusEntry("f1", "$(fun (u : Unit) -> single choose)",
                "forall a. Unit -> List (a -> a -> a)"),
    CorpusEntry("f2", "fun (u : Unit) -> single ~choose",
                "Unit -> List (forall a. a -> a -> a)"),
    CorpusEntry("frozen-id-applied", "~id 3", error="QuantifierMismatch"),
    CorpusEntry("self-app", "fun f -> f f", error="OccursViolation"),
]

# 精选语料
CURATED: List[CorpusEntry] = [
    CorpusEntry("identity", "fun x -> x", "_1 -> _1  where _1 is monomorphic"),
    CorpusEntry("identity-generalised", "$(fun x -> x)", "forall a. a -> a"),
    CorpusEntry("k-generalised", "$(fun x -> fun y -> y)", "forall a b. a -> b -> b"),
    CorpusEntry("plain-id", "id", "_1 -> _1"),
    CorpusEntry("frozen-id", "~id", "forall a. a -> a"),
    CorpusEntry("id-literal", "id 3", "Int"),
    CorpusEntry("let-literal", "let x = 3 in x", "Int"),
    CorpusEntry("choose-id", "choose id", "(_1 -> _1) -> _1 -> _1"),
    CorpusEntry("choose-frozen-id", "choose ~id", "(forall a. a -> a) -> forall a. a -> a"),
    CorpusEntry("single-frozen-id", "single ~id", "List (forall a. a -> a)"),
    CorpusEntry("single-id", "single id", "List (_1 -> _1)"),
    CorpusEntry("pair-literal-unit", "pair 1 unit", "(Int, Unit)"),
    CorpusEntry("head-ids", "head ids", "forall a. a -> a"),
    CorpusEntry("cons-frozen-id", "cons ~id ids", "List (forall a. a -> a)"),
    CorpusEntry("cons-nil", "cons ~id nil", "List (forall a. a -> a)"),
    CorpusEntry("poly-frozen-id", "poly ~id", "(Int, Bool)"),
    CorpusEntry("poly-generalised-id", "poly $id", "(Int, Bool)"),
    CorpusEntry("auto-frozen-id", "auto ~id", "forall a. a -> a"),
    CorpusEntry("revapp-poly", "revapp ~id poly", "(Int, Bool)"),
    CorpusEntry("app-poly", "app poly ~id", "(Int, Bool)"),
    CorpusEntry("annotated-literal", "fun (x : forall a. a -> a) -> x 3",
                "(forall a. a -> a) -> Int"),
    CorpusEntry("annotated-let", "let (f : forall a. a -> a) = fun x -> x in ~f",
                "forall a. a -> a"),
    CorpusEntry("let-polymorphism", "let f = fun x -> x in pair (f 1) (f unit)", "(Int, Unit)"),
    CorpusEntry("value-let-frozen", "let x = ~id in x", "_1 -> _1"),
    CorpusEntry("lambda-let", "fun x -> let y = x in y", "_1 -> _1  where _1 is monomorphic"),
    CorpusEntry("poly-id", "poly id", error="QuantifierMismatch"),
    CorpusEntry("poly-lambda", "poly (fun x -> x)", error="QuantifierMismatch"),
    CorpusEntry("cons-id", "cons id ids", error="QuantifierMismatch"),
    CorpusEntry("lambda-bound-twice", "fun f -> pair (f 1) (f unit)", error="CtorClash"),
    CorpusEntry("annotation-clash", "let (f : forall a. a -> a) = fun x -> 3 in f",
                error="CtorClash"),
    CorpusEntry("rigid-escape",
                "fun z -> let (f : forall a. a -> a) = fun y -> choose y z in f",
                error="RigidEscape"),
    CorpusEntry("unbound", "fun x -> w", error="UnboundVariable"),
]


def all_entries() -> List[CorpusEntry]:
    return WORKED_EXAMPLES + CURATED
