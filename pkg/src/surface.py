"""
Surface - 具体语法
FreezeML 项与类型的解析器（lark LALR）和打印器，以及前导文件 (prelude) 的读写
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from lark import Lark, Token, Tree
from lark.exceptions import LarkError, UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken
from lark.visitors import Interpreter

from src.config import ARROW, PRODUCT, get_constructor_info
from src.errors import ParseError, SourceSpan
from src.syntax import (
    App, FrozenVar, Lam, LamAnn, Let, LetAnn, Restriction, TCon, TForall, TVar,
    Term, TermContext, Type, TypeVarName, Var, forall, fresh_var, ftv_ordered,
    is_guarded_value,
)

GRAMMAR = r"""
    ?term: "fun" NAME _ARROW term                              -> lam
         | "fun" "(" NAME ":" type ")" _ARROW term             -> lam_ann
         | "let" NAME "=" term "in" term                       -> let
         | "let" "(" NAME ":" type ")" "=" term "in" term      -> let_ann
         | aterm+                                              -> spine

    ?aterm: NAME                                               -> var
          | INT                                                -> literal
          | "~" NAME                                           -> frozen
          | "$" aterm                                          -> generalise
          | "(" term ")"

    ?type: "forall" NAME+ "." type                             -> forall
         | tspine _ARROW type                                  -> arrow
         | tspine

    tspine: atype+

    ?atype: NAME                                               -> tvar
          | CTOR                                               -> tcon
          | "(" type "," type ")"                              -> product
          | "(" type ")"

    prelude: decl*
    decl: "val" NAME ":" type

    _ARROW: "->" | "→"
    NAME: /[a-z_][A-Za-z0-9_]*/
    CTOR: /[A-Z][A-Za-z0-9_]*/
    INT: /[0-9]+/
    COMMENT: /#[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

# 显式泛化 $V 展开成 let 时使用的绑定名，具体语法中写不出
GENERALISE_BINDER = "$g"

_PARSER = Lark(
    GRAMMAR,
    start=["term", "type", "prelude"],
    parser="lalr",
    propagate_positions=True,
    maybe_placeholders=False,
)


# ============================================================================
# 区间
# ============================================================================
def _span_of(node) -> Optional[SourceSpan]:
    """从 lark 结点或 token 取区间"""
    if isinstance(node, Token):
        if node.start_pos is None:
            return None
        return SourceSpan(node.start_pos, node.end_pos, node.line, node.column)
    meta = getattr(node, "meta", None)
    if meta is None or getattr(meta, "empty", True):
        return None
    return SourceSpan(meta.start_pos, meta.end_pos, meta.line, meta.column)


def _error_span(src: str, error: UnexpectedInput) -> SourceSpan:
    pos = getattr(error, "pos_in_stream", None)
    if not isinstance(pos, int) or pos < 0 or pos > len(src):
        pos = len(src)
    line = getattr(error, "line", None)
    column = getattr(error, "column", None)
    if not isinstance(line, int) or line < 1:
        line = src.count("\n", 0, pos) + 1
        column = pos - (src.rfind("\n", 0, pos) + 1) + 1
    return SourceSpan(pos, pos, line, column)


def _convert_error(src: str, error: UnexpectedInput) -> ParseError:
    span = _error_span(src, error)
    if isinstance(error, UnexpectedEOF):
        return ParseError("unexpected end of input", span, list(error.expected))
    if isinstance(error, UnexpectedToken):
        token = error.token
        shown = "end of input" if token.type == "$END" else repr(str(token))
        return ParseError(f"unexpected {shown}", span, list(error.expected))
    if isinstance(error, UnexpectedCharacters):
        char = src[error.pos_in_stream] if error.pos_in_stream < len(src) else ""
        return ParseError(f"unexpected character {char!r}", span, list(error.allowed or []))
    return ParseError(str(error).splitlines()[0], span)


# ============================================================================
# 语法树 → AST
# ============================================================================
class _Builder(Interpreter):
    """
    自顶向下构造 AST，跟踪类型变量作用域

    标注里未绑定的类型变量在本次解析内共享同一个变量，由良构检查报告
    """

    def __init__(self):
        super().__init__()
        self.scope: Dict[str, TypeVarName] = {}
        self.free: Dict[str, TypeVarName] = {}

    # ---------------------------------------------------------------- 类型
    def lookup(self, text: str) -> TypeVarName:
        if text in self.scope:
            return self.scope[text]
        if text not in self.free:
            self.free[text] = fresh_var(text)
        return self.free[text]

    def tvar(self, tree: Tree) -> Type:
        return TVar(self.lookup(str(tree.children[0])))

    def tcon(self, tree: Tree) -> Type:
        return self._constructor(tree.children[0], [], tree)

    def product(self, tree: Tree) -> Type:
        left, right = (self.visit(child) for child in tree.children)
        return TCon(PRODUCT, (left, right))

    def arrow(self, tree: Tree) -> Type:
        domain = self.visit(tree.children[0])
        codomain = self.visit(tree.children[1])
        return TCon(ARROW, (domain, codomain))

    def forall(self, tree: Tree) -> Type:
        *names, body_tree = tree.children
        saved = dict(self.scope)
        bound = []
        for name in names:
            var = fresh_var(str(name))
            self.scope[str(name)] = var
            bound.append(var)
        try:
            body = self.visit(body_tree)
        finally:
            self.scope = saved
        return forall(bound, body)

    def tspine(self, tree: Tree) -> Type:
        head, *rest = tree.children
        if not rest:
            return self.visit(head)
        if isinstance(head, Tree) and head.data == "tcon":
            args = [self.visit(child) for child in rest]
            return self._constructor(head.children[0], args, tree)
        raise ParseError("only type constructors can be applied to arguments", _span_of(tree))

    def _constructor(self, name: Token, args: List[Type], tree: Tree) -> Type:
        info = get_constructor_info(str(name))
        if info is None:
            raise ParseError(f"unknown type constructor {name}", _span_of(name))
        if info["arity"] != len(args):
            raise ParseError(
                f"type constructor {name} expects {info['arity']} argument(s), got {len(args)}",
                _span_of(tree),
            )
        return TCon(str(name), tuple(args))

    # ---------------------------------------------------------------- 项
    def var(self, tree: Tree) -> Term:
        return Var(str(tree.children[0]), _span_of(tree))

    def literal(self, tree: Tree) -> Term:
        return Var(str(int(tree.children[0])), _span_of(tree))

    def frozen(self, tree: Tree) -> Term:
        return FrozenVar(str(tree.children[0]), _span_of(tree))

    def generalise(self, tree: Tree) -> Term:
        span = _span_of(tree)
        value = self.visit(tree.children[0])
        return Let(GENERALISE_BINDER, value, FrozenVar(GENERALISE_BINDER, span), span)

    def spine(self, tree: Tree) -> Term:
        result = self.visit(tree.children[0])
        for child in tree.children[1:]:
            arg = self.visit(child)
            span = None
            if result.span is not None and arg.span is not None:
                span = SourceSpan(result.span.start, arg.span.end,
                                  result.span.line, result.span.column)
            result = App(result, arg, span)
        return result

    def lam(self, tree: Tree) -> Term:
        name, body = tree.children
        return Lam(str(name), self.visit(body), _span_of(tree))

    def lam_ann(self, tree: Tree) -> Term:
        name, annotation, body = tree.children
        return LamAnn(str(name), self.visit(annotation), self.visit(body), _span_of(tree))

    def let(self, tree: Tree) -> Term:
        name, bound, body = tree.children
        return Let(str(name), self.visit(bound), self.visit(body), _span_of(tree))

    def let_ann(self, tree: Tree) -> Term:
        name, annotation_tree, bound_tree, body_tree = tree.children
        annotation = self.visit(annotation_tree)
        prefix = []
        inner = annotation
        while isinstance(inner, TForall):
            prefix.append(inner.bound)
            inner = inner.body

        # 先假定被绑定项是 GVal，量词在其中可见；不是的话去掉前缀重建
        saved = dict(self.scope)
        saved_free = dict(self.free)
        for var in prefix:
            self.scope[var.text] = var
        try:
            bound = self.visit(bound_tree)
        finally:
            self.scope = dict(saved)
        if prefix and not is_guarded_value(bound):
            self.free = saved_free
            bound = self.visit(bound_tree)
        body = self.visit(body_tree)
        return LetAnn(str(name), annotation, bound, body, _span_of(tree))

    # ---------------------------------------------------------------- 前导
    def prelude(self, tree: Tree) -> List[Tuple[str, Type, Optional[SourceSpan]]]:
        return [self.visit(child) for child in tree.children]

    def decl(self, tree: Tree) -> Tuple[str, Type, Optional[SourceSpan]]:
        name, type_tree = tree.children
        self.free = {}
        t = self.visit(type_tree)
        if self.free:
            names = ", ".join(sorted(self.free))
            raise ParseError(f"free type variable(s) {names} in declaration of {name}",
                             _span_of(tree))
        return str(name), t, _span_of(tree)


def _parse(src: Union[str, bytes], start: str):
    if isinstance(src, bytes):
        try:
            src = src.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"input is not valid UTF-8: {e.reason}",
                             SourceSpan(e.start, e.start, 1, e.start + 1)) from None
    try:
        tree = _PARSER.parse(src, start=start)
    except UnexpectedInput as e:
        raise _convert_error(src, e) from None
    except LarkError as e:
        raise ParseError(str(e).splitlines()[0] if str(e) else "parse error",
                         SourceSpan(0, 0, 1, 1)) from None
    try:
        return _Builder().visit(tree)
    except RecursionError:
        raise ParseError("input is nested too deeply", SourceSpan(0, 0, 1, 1)) from None


def parse_term(src: Union[str, bytes]) -> Term:
    """
    解析 FreezeML 项

    Args:
        src: 源码

    Returns:
        项；语法错误抛出 ParseError
    """
    return _parse(src, "term")


def parse_type(src: Union[str, bytes]) -> Type:
    """解析类型，自由类型变量按名字共享"""
    return _parse(src, "type")


# ============================================================================
# 前导
# ============================================================================
@dataclass
class Prelude:
    """前导：有序的 (名字, 闭类型) 绑定"""
    bindings: List[Tuple[str, Type]] = field(default_factory=list)
    source: Optional[str] = None

    def names(self) -> List[str]:
        return [name for name, _ in self.bindings]

    def lookup(self, name: str) -> Optional[Type]:
        for bound, t in self.bindings:
            if bound == name:
                return t
        return None

    def to_context(self) -> TermContext:
        return TermContext(self.bindings)


def parse_prelude(src: Union[str, bytes], source: Optional[str] = None) -> Prelude:
    """解析 "val NAME : TYPE" 行，名字不能重复，类型必须是闭的"""
    decls = _parse(src, "prelude")
    seen = set()
    bindings = []
    for name, t, span in decls:
        if name in seen:
            raise ParseError(f"duplicate declaration of {name}", span)
        seen.add(name)
        bindings.append((name, t))
    return Prelude(bindings, source)


def load_prelude(path: Union[str, Path]) -> Prelude:
    """从文件读取前导"""
    path = Path(path)
    return parse_prelude(path.read_text(encoding="utf-8"), str(path))


# ============================================================================
# 打印
# ============================================================================
class Namer:
    """
    给类型变量分配稳定的显示名

    同一个 Namer 内，不同变量的名字互不相同；文本冲突时加数字后缀
    """

    def __init__(self, overrides: Optional[Mapping[TypeVarName, str]] = None):
        self._names: Dict[TypeVarName, str] = dict(overrides or {})
        self._used = set(self._names.values())

    def name(self, var: TypeVarName) -> str:
        if var in self._names:
            return self._names[var]
        base = var.text or "t"
        candidate = base
        suffix = 1
        while candidate in self._used:
            candidate = f"{base}{suffix}"
            suffix += 1
        self._names[var] = candidate
        self._used.add(candidate)
        return candidate

    def is_named(self, var: TypeVarName) -> bool:
        return var in self._names


def _letters():
    n = 0
    while True:
        for i in range(26):
            yield chr(ord("a") + i) if n == 0 else f"{chr(ord('a') + i)}{n}"
        n += 1


def print_type(t: Type, namer: Optional[Namer] = None, letters: bool = True) -> str:
    """
    打印类型

    Args:
        t: 类型
        namer: 自由变量的命名器（默认按变量文本命名）
        letters: True 时绑定变量按首次出现依次取 a, b, c…；
                 False 时绑定变量也交给 namer（项中的标注需要前后一致）

    Returns:
        可重新解析的文本，括号最少
    """
    namer = namer or Namer()
    free_names = {namer.name(var) for var in ftv_ordered(t)}

    def bind(var: TypeVarName, env: Dict[TypeVarName, str]) -> str:
        if not letters:
            return namer.name(var)
        taken = free_names | set(env.values())
        for candidate in _letters():
            if candidate not in taken:
                return candidate

    def name_of(var: TypeVarName, env: Dict[TypeVarName, str]) -> str:
        if var in env:
            return env[var]
        return namer.name(var)

    def top(t: Type, env) -> str:
        if isinstance(t, TForall):
            names = []
            inner_env = dict(env)
            while isinstance(t, TForall):
                shown = bind(t.bound, inner_env)
                inner_env[t.bound] = shown
                names.append(shown)
                t = t.body
            return f"forall {' '.join(names)}. {top(t, inner_env)}"
        if isinstance(t, TCon) and t.ctor == ARROW:
            return f"{operand(t.args[0], env)} -> {top(t.args[1], env)}"
        return application(t, env)

    def operand(t: Type, env) -> str:
        if isinstance(t, TForall) or (isinstance(t, TCon) and t.ctor == ARROW):
            return f"({top(t, env)})"
        return application(t, env)

    def application(t: Type, env) -> str:
        if isinstance(t, TCon) and t.ctor not in (ARROW, PRODUCT) and t.args:
            return " ".join([t.ctor] + [atom(arg, env) for arg in t.args])
        return atom(t, env)

    def atom(t: Type, env) -> str:
        if isinstance(t, TVar):
            return name_of(t.name, env)
        if isinstance(t, TCon):
            if t.ctor == PRODUCT:
                return f"({top(t.args[0], env)}, {top(t.args[1], env)})"
            if not t.args:
                return t.ctor
        return f"({top(t, env)})"

    return top(t, {})


def residual_names(t: Type, residual: Mapping[TypeVarName, Restriction]) -> Dict[TypeVarName, str]:
    """剩余柔性变量按在 t 中首次出现的顺序命名为 _1, _2, …"""
    names = {}
    for var in ftv_ordered(t):
        if var in residual:
            names[var] = f"_{len(names) + 1}"
    return names


def print_result(t: Type, residual: Mapping[TypeVarName, Restriction]) -> str:
    """
    打印推断结果，单态剩余变量在末尾注明

    例: "_1 -> _1  where _1 is monomorphic"
    """
    names = residual_names(t, residual)
    text = print_type(t, Namer(names))
    mono = [names[var] for var in names if residual[var] is Restriction.MONO]
    if len(mono) == 1:
        text += f"  where {mono[0]} is monomorphic"
    elif mono:
        text += f"  where {', '.join(mono)} are monomorphic"
    return text


def print_term(m: Term, namer: Optional[Namer] = None) -> str:
    """打印项，重新解析后结构相同（区间除外）"""
    namer = namer or Namer()

    def annotation(t: Type) -> str:
        return print_type(t, namer, letters=False)

    def top(m: Term) -> str:
        if isinstance(m, Lam):
            return f"fun {m.param} -> {top(m.body)}"
        if isinstance(m, LamAnn):
            return f"fun ({m.param} : {annotation(m.annotation)}) -> {top(m.body)}"
        if isinstance(m, Let):
            if m.name == GENERALISE_BINDER and m.body == FrozenVar(GENERALISE_BINDER):
                return f"${atom(m.bound)}"
            return f"let {m.name} = {top(m.bound)} in {top(m.body)}"
        if isinstance(m, LetAnn):
            return (f"let ({m.name} : {annotation(m.annotation)}) = "
                    f"{top(m.bound)} in {top(m.body)}")
        return application(m)

    def application(m: Term) -> str:
        if isinstance(m, App):
            return f"{application(m.fun)} {atom(m.arg)}"
        return atom(m)

    def atom(m: Term) -> str:
        if isinstance(m, Var):
            return m.name
        if isinstance(m, FrozenVar):
            return f"~{m.name}"
        if (isinstance(m, Let) and m.name == GENERALISE_BINDER
                and m.body == FrozenVar(GENERALISE_BINDER)):
            return top(m)
        return f"({top(m)})"

    return top(m)
