"""A mini-Python frontend: parser and syntax-directed graph construction.

The language is just large enough to exercise cross-file name resolution:
star imports, single-inheritance classes whose bodies hold field
assignments, top-level assignments, and expression statements over names,
attribute access, zero-argument calls, integer literals, and a builtin
``print(...)`` form. Statements are one per line; class bodies are
indentation-delimited.

Graph construction emits one gadget per construct:

- module: root -> pop(module name, definition) -> pop(.) -> last scope,
  where the module name is inferred from the file name.
- sequencing: one scope per top-level statement, each with an edge to the
  previous statement's scope.
- ``from m import *``: scope -> push(.) -> push(m, reference) -> fresh root.
- ``class C(B)``: the definition chain pops C/./ into a members scope, an
  instance chain pops C/()/. into an instance scope that also reaches the
  members scope; base lookups push ./B from the members scope and ./()/B
  from the instance scope (sharing one reference node) into the scope
  before the class statement.
- field and top-level assignments pop the target name as a definition.
- expression references push innermost-last: ``B().x`` becomes
  push(x) -> push(.) -> push(()) -> push(B) -> enclosing scope.

``print`` produces no node, and assignment right-hand sides produce
reference gadgets but no type flow.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .graph import FileId, NodeId, NodeKind, Span, StackGraph


class ParseError(Exception):
    """Syntax error with 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Name:
    id: str
    span: Span


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Span


@dataclass(frozen=True)
class Attr:
    base: "MiniExpr"
    attr: Name


@dataclass(frozen=True)
class Call:
    callee: "MiniExpr"


@dataclass(frozen=True)
class Print:
    arg: "MiniExpr"


MiniExpr = Union[Name, IntLit, Attr, Call, Print]


@dataclass(frozen=True)
class Assign:
    target: Name
    value: MiniExpr


@dataclass(frozen=True)
class ExprStmt:
    value: MiniExpr


@dataclass(frozen=True)
class ImportStar:
    module: Name


@dataclass(frozen=True)
class ClassDef:
    name: Name
    base: Optional[Name]
    body: list[Assign]


MiniStmt = Union[ImportStar, ClassDef, Assign, ExprStmt]


@dataclass(frozen=True)
class MiniModule:
    name: str
    statements: list[MiniStmt]


# ----- tokenizer ----------------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+|[().=:*]|\S")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT_RE = re.compile(r"\d+\Z")


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    column: int  # 1-based byte column
    byte_start: int


def _tokenize_line(text: str, line_no: int, line_byte_start: int) -> list[_Token]:
    tokens = []
    for match in _TOKEN_RE.finditer(text):
        byte_col = len(text[: match.start()].encode("utf-8"))
        tokens.append(
            _Token(
                text=match.group(),
                line=line_no,
                column=byte_col + 1,
                byte_start=line_byte_start + byte_col,
            )
        )
    return tokens


class _Cursor:
    def __init__(self, tokens: list[_Token], line: int):
        self.tokens = tokens
        self.pos = 0
        self.line = line

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1]
            raise ParseError("unexpected end of line", last.line, last.column + len(last.text))
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok is None or tok.text != text:
            got = tok.text if tok else "end of line"
            where = tok or self.tokens[-1]
            raise ParseError(f"expected {text!r}, got {got!r}", where.line, where.column)
        return self.next()

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def require_end(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.column)


def _name_span(tok: _Token) -> Span:
    width = len(tok.text.encode("utf-8"))
    return Span(
        start_byte=tok.byte_start,
        end_byte=tok.byte_start + width,
        line=tok.line,
        column=tok.column,
        end_line=tok.line,
        end_column=tok.column + width,
    )


def _parse_name(cur: _Cursor) -> Name:
    tok = cur.next()
    if not _NAME_RE.match(tok.text):
        raise ParseError(f"expected a name, got {tok.text!r}", tok.line, tok.column)
    return Name(id=tok.text, span=_name_span(tok))


def _parse_expr(cur: _Cursor) -> MiniExpr:
    tok = cur.peek()
    if tok is None:
        raise ParseError("expected an expression", cur.line, 1)
    node: MiniExpr
    following = cur.tokens[cur.pos + 1] if cur.pos + 1 < len(cur.tokens) else None
    if tok.text == "print" and following is not None and following.text == "(":
        cur.next()
        cur.expect("(")
        arg = _parse_expr(cur)
        cur.expect(")")
        node = Print(arg)
    elif _NAME_RE.match(tok.text):
        node = _parse_name(cur)
    elif _INT_RE.match(tok.text):
        cur.next()
        node = IntLit(value=int(tok.text), span=_name_span(tok))
    else:
        raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.column)
    while True:
        tok = cur.peek()
        if tok is None:
            break
        if tok.text == ".":
            cur.next()
            node = Attr(base=node, attr=_parse_name(cur))
        elif tok.text == "(":
            open_tok = cur.next()
            closing = cur.peek()
            if closing is None or closing.text != ")":
                raise ParseError(
                    "call arguments are not supported", open_tok.line, open_tok.column + 1
                )
            cur.next()
            node = Call(callee=node)
        else:
            break
    return node


def _indent_of(raw: str, line_no: int) -> int:
    indent = 0
    for ch in raw:
        if ch == " ":
            indent += 1
        elif ch == "\t":
            raise ParseError("tab characters are not supported", line_no, indent + 1)
        else:
            break
    return indent


def module_name_of(display_name: str) -> str:
    base = display_name.replace("\\", "/").rsplit("/", 1)[-1]
    if "." in base:
        base = base.rsplit(".", 1)[0]
    return base


def parse(source: bytes, display_name: str) -> MiniModule:
    """Parse UTF-8 source into a module named after the file."""
    try:
        text = source.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = source[: exc.start].count(b"\n") + 1
        raise ParseError("source is not valid UTF-8", line, 1) from None
    name = module_name_of(display_name)
    if not name:
        raise ParseError("file name yields an empty module name", 1, 1)

    lines = text.split("\n")
    starts = []
    offset = 0
    for raw in lines:
        starts.append(offset)
        offset += len(raw.encode("utf-8")) + 1

    statements: list[MiniStmt] = []
    i = 0
    while i < len(lines):
        raw = lines[i]
        if not raw.strip():
            i += 1
            continue
        if _indent_of(raw, i + 1) != 0:
            raise ParseError("unexpected indentation", i + 1, 1)
        tokens = _tokenize_line(raw, i + 1, starts[i])
        cur = _Cursor(tokens, i + 1)
        head = tokens[0].text
        if head == "pass":
            cur.next()
            cur.require_end()
            i += 1
            continue
        if head == "from":
            cur.next()
            module = _parse_name(cur)
            cur.expect("import")
            cur.expect("*")
            cur.require_end()
            statements.append(ImportStar(module=module))
            i += 1
            continue
        if head == "class":
            cur.next()
            cname = _parse_name(cur)
            base = None
            if cur.peek() is not None and cur.peek().text == "(":
                cur.expect("(")
                base = _parse_name(cur)
                cur.expect(")")
            cur.expect(":")
            cur.require_end()
            body, i = _parse_class_body(lines, starts, i + 1)
            statements.append(ClassDef(name=cname, base=base, body=body))
            continue
        stmt, cur = _parse_simple_statement(cur)
        cur.require_end()
        statements.append(stmt)
        i += 1
    return MiniModule(name=name, statements=statements)


def _parse_simple_statement(cur: _Cursor) -> tuple[MiniStmt, _Cursor]:
    first = cur.peek()
    second = cur.tokens[cur.pos + 1] if cur.pos + 1 < len(cur.tokens) else None
    if (
        first is not None
        and _NAME_RE.match(first.text)
        and second is not None
        and second.text == "="
    ):
        target = _parse_name(cur)
        cur.expect("=")
        value = _parse_expr(cur)
        return Assign(target=target, value=value), cur
    return ExprStmt(value=_parse_expr(cur)), cur


def _parse_class_body(
    lines: list[str], starts: list[int], i: int
) -> tuple[list[Assign], int]:
    body: list[Assign] = []
    body_indent: Optional[int] = None
    while i < len(lines):
        raw = lines[i]
        if not raw.strip():
            i += 1
            continue
        indent = _indent_of(raw, i + 1)
        if indent == 0:
            break
        if body_indent is None:
            body_indent = indent
        elif indent != body_indent:
            raise ParseError("inconsistent indentation in class body", i + 1, 1)
        tokens = _tokenize_line(raw, i + 1, starts[i])
        cur = _Cursor(tokens, i + 1)
        if tokens[0].text == "pass":
            cur.next()
            cur.require_end()
            i += 1
            continue
        stmt, cur = _parse_simple_statement(cur)
        cur.require_end()
        if not isinstance(stmt, Assign):
            raise ParseError(
                "class bodies may contain only field assignments",
                tokens[0].line,
                tokens[0].column,
            )
        body.append(stmt)
        i += 1
    return body, i


# ----- graph construction -------------------------------------------------


def build_graph(module: MiniModule, g: StackGraph, file: FileId, source: bytes) -> None:
    """Emit the module's gadgets into an empty file subgraph."""
    if g.nodes_in_file(file):
        raise ValueError(f"file subgraph {file.display_name} is not empty")
    dot = g.symbol(".")
    parens = g.symbol("()")
    root = g.add_node(file, NodeKind.ROOT)

    prev_scope: Optional[NodeId] = None
    # A base lookup on the very first statement needs a scope before it.
    if module.statements:
        first = module.statements[0]
        if isinstance(first, ClassDef) and first.base is not None:
            prev_scope = g.add_node(file, NodeKind.SCOPE)

    def build_expr_ref(expr: MiniExpr, scope: NodeId) -> Optional[NodeId]:
        # Returns the head of the push chain, or None for literal-only
        # expressions, which produce no reference gadget at all.
        if isinstance(expr, Name):
            node = g.add_node(
                file,
                NodeKind.PUSH,
                symbol=g.symbol(expr.id),
                is_reference=True,
                span=expr.span,
            )
            g.add_edge(node, scope)
            return node
        if isinstance(expr, Attr):
            head = g.add_node(
                file,
                NodeKind.PUSH,
                symbol=g.symbol(expr.attr.id),
                is_reference=True,
                span=expr.attr.span,
            )
            dot_push = g.add_node(file, NodeKind.PUSH, symbol=dot)
            g.add_edge(head, dot_push)
            base_head = build_expr_ref(expr.base, scope)
            if base_head is not None:
                g.add_edge(dot_push, base_head)
            return head
        if isinstance(expr, Call):
            paren_push = g.add_node(file, NodeKind.PUSH, symbol=parens)
            callee_head = build_expr_ref(expr.callee, scope)
            if callee_head is not None:
                g.add_edge(paren_push, callee_head)
            return paren_push
        if isinstance(expr, Print):
            return build_expr_ref(expr.arg, scope)
        return None  # IntLit

    for stmt in module.statements:
        scope = g.add_node(file, NodeKind.SCOPE)
        if prev_scope is not None:
            g.add_edge(scope, prev_scope)
        if isinstance(stmt, ImportStar):
            dot_push = g.add_node(file, NodeKind.PUSH, symbol=dot)
            mod_ref = g.add_node(
                file,
                NodeKind.PUSH,
                symbol=g.symbol(stmt.module.id),
                is_reference=True,
                span=stmt.module.span,
            )
            import_root = g.add_node(file, NodeKind.ROOT)
            g.add_edge(scope, dot_push)
            g.add_edge(dot_push, mod_ref)
            g.add_edge(mod_ref, import_root)
        elif isinstance(stmt, ClassDef):
            cdef = g.add_node(
                file,
                NodeKind.POP,
                symbol=g.symbol(stmt.name.id),
                is_definition=True,
                span=stmt.name.span,
            )
            cdot = g.add_node(file, NodeKind.POP, symbol=dot)
            members = g.add_node(file, NodeKind.SCOPE)
            g.add_edge(scope, cdef)
            g.add_edge(cdef, cdot)
            g.add_edge(cdot, members)
            ipar = g.add_node(file, NodeKind.POP, symbol=parens)
            idot = g.add_node(file, NodeKind.POP, symbol=dot)
            instance = g.add_node(file, NodeKind.SCOPE)
            g.add_edge(cdef, ipar)
            g.add_edge(ipar, idot)
            g.add_edge(idot, instance)
            g.add_edge(instance, members)
            if stmt.base is not None:
                base_dot = g.add_node(file, NodeKind.PUSH, symbol=dot)
                base_ref = g.add_node(
                    file,
                    NodeKind.PUSH,
                    symbol=g.symbol(stmt.base.id),
                    is_reference=True,
                    span=stmt.base.span,
                )
                g.add_edge(members, base_dot)
                g.add_edge(base_dot, base_ref)
                g.add_edge(base_ref, prev_scope)
                inst_dot = g.add_node(file, NodeKind.PUSH, symbol=dot)
                inst_par = g.add_node(file, NodeKind.PUSH, symbol=parens)
                g.add_edge(instance, inst_dot)
                g.add_edge(inst_dot, inst_par)
                g.add_edge(inst_par, base_ref)
            for field_assign in stmt.body:
                field_def = g.add_node(
                    file,
                    NodeKind.POP,
                    symbol=g.symbol(field_assign.target.id),
                    is_definition=True,
                    span=field_assign.target.span,
                )
                g.add_edge(members, field_def)
                build_expr_ref(field_assign.value, members)
        elif isinstance(stmt, Assign):
            target_def = g.add_node(
                file,
                NodeKind.POP,
                symbol=g.symbol(stmt.target.id),
                is_definition=True,
                span=stmt.target.span,
            )
            g.add_edge(scope, target_def)
            build_expr_ref(stmt.value, scope)
        else:
            build_expr_ref(stmt.value, scope)
        prev_scope = scope

    if prev_scope is None:
        prev_scope = g.add_node(file, NodeKind.SCOPE)

    text = source.decode("utf-8")
    tail = text.rsplit("\n", 1)[-1]
    module_span = Span(
        start_byte=0,
        end_byte=len(source),
        line=1,
        column=1,
        end_line=text.count("\n") + 1,
        end_column=len(tail.encode("utf-8")) + 1,
    )
    module_def = g.add_node(
        file,
        NodeKind.POP,
        symbol=g.symbol(module.name),
        is_definition=True,
        span=module_span,
    )
    module_dot = g.add_node(file, NodeKind.POP, symbol=dot)
    g.add_edge(root, module_def)
    g.add_edge(module_def, module_dot)
    g.add_edge(module_dot, prev_scope)


def build_file(g: StackGraph, display_name: str, blob: str, source: bytes) -> FileId:
    """Parse, construct, and seal one file's subgraph."""
    module = parse(source, display_name)
    file = g.add_file(display_name, blob)
    build_graph(module, g, file, source)
    g.seal_file(file)
    return file
