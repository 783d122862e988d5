"""Operation-definition language for tuple-based ADTs.

Source format::

    // comment
    adt Account(balance: integer, owner: text)
    op deposit(a: integer) { balance := balance + a }
    op getOwner() -> text { return owner }

Parsing type-checks every operation and attaches its static access vector.
The static vector is purely syntactic: a field is ``W`` if it is the target of
an assignment anywhere in the body (reachable or not), ``R`` if it otherwise
occurs in an expression, and ``N`` otherwise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .core import AccessVector, Mode, vectors_commute

TYPES = ("integer", "boolean", "text")
KEYWORDS = {"adt", "op", "if", "then", "else", "return", "true", "false", "and", "or", "not"}


class DslError(Exception):
    """Base class for diagnostics; carries a 1-based source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class DslSyntaxError(DslError):
    pass


class UnknownIdentifierError(DslError):
    pass


class DslTypeError(DslError):
    pass


class DuplicateNameError(DslError):
    pass


# --------------------------------------------------------------------------
# Lexer

@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, string, op, eof
    text: str
    line: int
    col: int
    value: object = None


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>:=|->|<>|<=|>=|[-+*/=<>(){},:;.])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


def _unescape(body: str, line: int, col: int) -> str:
    out = []
    it = iter(body)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            if nxt not in _ESCAPES:
                raise DslSyntaxError(f"bad escape \\{nxt}", line, col)
            out.append(_ESCAPES[nxt])
        else:
            out.append(ch)
    return "".join(out)


def quote_text(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "int":
            tokens.append(Token("int", text, line, col, int(text)))
        elif kind == "ident":
            tokens.append(Token("ident", text, line, col))
        elif kind == "string":
            tokens.append(Token("string", text, line, col, _unescape(text[1:-1], line, col)))
        elif kind == "op":
            tokens.append(Token("op", text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Const:
    value: Union[int, bool, str]
    type: str
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class FieldRef:
    name: str
    index: int
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class ParamRef:
    name: str
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class LocalRef:
    name: str
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or 'not'
    operand: "Expr"
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


Expr = Union[Const, FieldRef, ParamRef, LocalRef, Unary, Binary]


@dataclass(frozen=True)
class FieldAssign:
    name: str
    index: int
    expr: Expr
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class LocalAssign:
    name: str
    expr: Expr
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    orelse: Optional[tuple] = None
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Return:
    expr: Expr
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


Stmt = Union[FieldAssign, LocalAssign, If, Return]


@dataclass(frozen=True)
class OperationDef:
    name: str
    params: tuple  # ((name, type), ...)
    out_type: Optional[str]
    body: tuple  # (Stmt, ...)
    static_dav: AccessVector = field(compare=False)

    @property
    def param_names(self) -> tuple:
        return tuple(p for p, _ in self.params)


@dataclass(frozen=True)
class AdtSchema:
    name: str
    fields: tuple  # ((name, type), ...)
    operations: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def dimension(self) -> int:
        return len(self.fields)

    @property
    def field_names(self) -> tuple:
        return tuple(f for f, _ in self.fields)

    @property
    def field_types(self) -> tuple:
        return tuple(t for _, t in self.fields)

    def field_index(self, name: str) -> int:
        for i, (fname, _) in enumerate(self.fields):
            if fname == name:
                return i
        raise KeyError(name)

    def operation(self, name: str) -> OperationDef:
        try:
            return self.operations[name]
        except KeyError:
            raise UnknownIdentifierError(f"ADT {self.name} has no operation {name!r}") from None


# --------------------------------------------------------------------------
# Static inference

def iter_expressions(stmts) -> Iterator[Expr]:
    for s in stmts:
        if isinstance(s, (FieldAssign, LocalAssign, Return)):
            yield s.expr
        elif isinstance(s, If):
            yield s.cond
            yield from iter_expressions(s.then)
            if s.orelse is not None:
                yield from iter_expressions(s.orelse)


def iter_field_assigns(stmts) -> Iterator[FieldAssign]:
    for s in stmts:
        if isinstance(s, FieldAssign):
            yield s
        elif isinstance(s, If):
            yield from iter_field_assigns(s.then)
            if s.orelse is not None:
                yield from iter_field_assigns(s.orelse)


def _expr_fields(expr: Expr) -> Iterator[int]:
    if isinstance(expr, FieldRef):
        yield expr.index
    elif isinstance(expr, Unary):
        yield from _expr_fields(expr.operand)
    elif isinstance(expr, Binary):
        yield from _expr_fields(expr.left)
        yield from _expr_fields(expr.right)


def infer_dav(op: OperationDef, schema: AdtSchema) -> AccessVector:
    return _infer(op.body, schema.dimension)


def _infer(body, n: int) -> AccessVector:
    modes = [Mode.NULL] * n
    for expr in iter_expressions(body):
        for i in _expr_fields(expr):
            modes[i] = Mode.READ
    for assign in iter_field_assigns(body):
        modes[assign.index] = Mode.WRITE
    return tuple(modes)


def commutativity_matrix(schema: AdtSchema) -> dict:
    """``{(op_a, op_b): bool}`` over every ordered pair of operations."""
    ops = list(schema.operations.values())
    return {
        (a.name, b.name): vectors_commute(a.static_dav, b.static_dav)
        for a in ops
        for b in ops
    }


# --------------------------------------------------------------------------
# Parser

_BINARY_LEVELS = [
    ("or",),
    ("and",),
    ("=", "<>", "<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/"),
]
_COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")
PRECEDENCE = {op: level for level, ops in enumerate(_BINARY_LEVELS) for op in ops}
UNARY_PRECEDENCE = len(_BINARY_LEVELS)


class _Scope:
    def __init__(self, schema_fields, params):
        self.fields = {name: (i, t) for i, (name, t) in enumerate(schema_fields)}
        self.params = dict(params)
        self.locals: dict[str, str] = {}  # definitely assigned
        self.declared: dict[str, str] = {}  # every local ever assigned, with its type

    def copy_locals(self):
        return dict(self.locals)


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.tok
        return tok.kind in ("op", "ident") and tok.text == text

    def accept(self, text: str) -> Optional[Token]:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            tok = self.tok
            found = tok.text or "end of input"
            raise DslSyntaxError(f"expected {text!r}, found {found!r}", tok.line, tok.col)
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        tok = self.tok
        if tok.kind != "ident" or tok.text in KEYWORDS:
            found = tok.text or "end of input"
            raise DslSyntaxError(f"expected {what}, found {found!r}", tok.line, tok.col)
        return self.advance()

    def type_name(self) -> str:
        tok = self.ident("type")
        if tok.text not in TYPES:
            raise DslTypeError(f"unknown type {tok.text!r}", tok.line, tok.col)
        return tok.text

    # declarations
    def parse_module(self) -> list[AdtSchema]:
        schemas: list[AdtSchema] = []
        seen = set()
        while self.tok.kind != "eof":
            if not self.at("adt"):
                if self.at("op") and not schemas:
                    raise DslSyntaxError("operation before any adt declaration", self.tok.line, self.tok.col)
                raise DslSyntaxError(f"expected 'adt', found {self.tok.text!r}", self.tok.line, self.tok.col)
            tok = self.tok
            schema = self.parse_adt_decl()
            if schema.name in seen:
                raise DuplicateNameError(f"duplicate ADT name {schema.name!r}", tok.line, tok.col)
            seen.add(schema.name)
            schemas.append(schema)
        return schemas

    def parse_adt_decl(self) -> AdtSchema:
        self.expect("adt")
        name = self.ident("ADT name").text
        self.expect("(")
        fields = self.typed_list("field")
        if not fields:
            raise DslSyntaxError(f"ADT {name} must declare at least one field", self.tok.line, self.tok.col)
        schema = AdtSchema(name, tuple(fields), {})
        while self.at("op"):
            tok = self.tok
            op = self.parse_op(schema)
            if op.name in schema.operations:
                raise DuplicateNameError(f"duplicate operation name {op.name!r}", tok.line, tok.col)
            schema.operations[op.name] = op
        return schema

    def typed_list(self, what: str) -> list:
        items = []
        names = set()
        if self.accept(")"):
            return items
        while True:
            tok = self.ident(f"{what} name")
            if tok.text in names:
                raise DuplicateNameError(f"duplicate {what} name {tok.text!r}", tok.line, tok.col)
            names.add(tok.text)
            self.expect(":")
            items.append((tok.text, self.type_name()))
            if self.accept(")"):
                return items
            self.expect(",")

    def parse_op(self, schema: AdtSchema) -> OperationDef:
        self.expect("op")
        name = self.ident("operation name").text
        self.expect("(")
        params = self.typed_list("parameter")
        for pname, _ in params:
            if pname in schema.field_names:
                raise DuplicateNameError(f"parameter {pname!r} shadows a field", self.tok.line, self.tok.col)
        out_type = None
        if self.accept("->"):
            out_type = self.type_name()
        scope = _Scope(schema.fields, params)
        self.scope = scope
        self.out_type = out_type
        body = self.block(scope)
        return OperationDef(name, tuple(params), out_type, body, _infer(body, schema.dimension))

    def block(self, scope: _Scope) -> tuple:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            stmts.append(self.statement(scope))
            if not self.accept(";"):
                break
        self.expect("}")
        return tuple(stmts)

    def branch(self, scope: _Scope) -> tuple:
        # a branch is a braced block or one bare statement
        if self.at("{"):
            return self.block(scope)
        return (self.statement(scope),)

    def statement(self, scope: _Scope) -> Stmt:
        tok = self.tok
        pos = (tok.line, tok.col)
        if self.accept("if"):
            cond = self.expression(scope)
            self._require_type(cond, "boolean", "condition")
            self.expect("then")
            before = scope.copy_locals()
            then = self.branch(scope)
            after_then = scope.locals
            scope.locals = dict(before)
            orelse = None
            if self.accept("else"):
                orelse = self.branch(scope)
                after_else = scope.locals
            else:
                after_else = before
            scope.locals = {k: v for k, v in after_then.items() if after_else.get(k) == v}
            return If(cond, then, orelse, pos)
        if self.accept("return"):
            expr = self.expression(scope)
            if self.out_type is None:
                raise DslTypeError("return with a value in an operation without a result type", *pos)
            self._require_type(expr, self.out_type, "return value")
            return Return(expr, pos)
        target = self.ident("statement")
        self.expect(":=")
        expr = self.expression(scope)
        etype = self.type_of(expr)
        if target.text in scope.fields:
            index, ftype = scope.fields[target.text]
            if etype != ftype:
                raise DslTypeError(f"cannot assign {etype} to field {target.text}: {ftype}", *pos)
            return FieldAssign(target.text, index, expr, pos)
        if target.text in scope.params:
            raise DslTypeError(f"cannot assign to parameter {target.text!r}", *pos)
        declared = scope.declared.get(target.text)
        if declared is not None and declared != etype:
            raise DslTypeError(f"local {target.text} is {declared}, cannot assign {etype}", *pos)
        scope.declared[target.text] = etype
        scope.locals[target.text] = etype
        return LocalAssign(target.text, expr, pos)

    # expressions
    def expression(self, scope: _Scope, level: int = 0) -> Expr:
        if level == len(_BINARY_LEVELS):
            return self.unary(scope)
        ops = _BINARY_LEVELS[level]
        left = self.expression(scope, level + 1)
        while self.tok.kind in ("op", "ident") and self.tok.text in ops:
            tok = self.advance()
            right = self.expression(scope, level + 1)
            left = Binary(tok.text, left, right, (tok.line, tok.col))
            self.type_of(left)
            if tok.text in _COMPARISONS:
                if self.tok.kind == "op" and self.tok.text in _COMPARISONS:
                    raise DslSyntaxError("comparisons do not chain; use parentheses", self.tok.line, self.tok.col)
                break
        return left

    def unary(self, scope: _Scope) -> Expr:
        tok = self.tok
        if self.accept("-"):
            if self.tok.kind == "int":
                lit = self.advance()
                return Const(-lit.value, "integer", (tok.line, tok.col))
            node = Unary("-", self.unary(scope), (tok.line, tok.col))
            self.type_of(node)
            return node
        if self.accept("not"):
            node = Unary("not", self.unary(scope), (tok.line, tok.col))
            self.type_of(node)
            return node
        return self.primary(scope)

    def primary(self, scope: _Scope) -> Expr:
        tok = self.tok
        pos = (tok.line, tok.col)
        if tok.kind == "int":
            self.advance()
            return Const(tok.value, "integer", pos)
        if tok.kind == "string":
            self.advance()
            return Const(tok.value, "text", pos)
        if self.accept("true"):
            return Const(True, "boolean", pos)
        if self.accept("false"):
            return Const(False, "boolean", pos)
        if self.accept("("):
            expr = self.expression(scope)
            self.expect(")")
            return expr
        name = self.ident("expression").text
        if name in scope.fields:
            return FieldRef(name, scope.fields[name][0], pos)
        if name in scope.params:
            return ParamRef(name, pos)
        if name in scope.locals:
            return LocalRef(name, pos)
        raise UnknownIdentifierError(f"unknown identifier {name!r}", *pos)

    # typing
    def _ref_type(self, node) -> str:
        scope = self.scope
        if isinstance(node, FieldRef):
            return scope.fields[node.name][1]
        if isinstance(node, ParamRef):
            return scope.params[node.name]
        return scope.declared[node.name]

    def type_of(self, expr: Expr) -> str:
        return expr_type(expr, self._ref_type)

    def _require_type(self, expr: Expr, expected: str, what: str) -> None:
        actual = self.type_of(expr)
        if actual != expected:
            raise DslTypeError(f"{what} must be {expected}, got {actual}", *expr.pos)


def expr_type(expr: Expr, lookup) -> str:
    """Type of ``expr``; ``lookup(node)`` gives the type of a reference node."""
    if isinstance(expr, Const):
        return expr.type
    if isinstance(expr, (FieldRef, ParamRef, LocalRef)):
        return lookup(expr)
    if isinstance(expr, Unary):
        inner = expr_type(expr.operand, lookup)
        want = "integer" if expr.op == "-" else "boolean"
        if inner != want:
            raise DslTypeError(f"operator {expr.op!r} needs {want}, got {inner}", *expr.pos)
        return want
    left = expr_type(expr.left, lookup)
    right = expr_type(expr.right, lookup)
    op = expr.op
    if op in ("and", "or"):
        if left == right == "boolean":
            return "boolean"
    elif op in ("=", "<>"):
        if left == right:
            return "boolean"
    elif op in ("<", "<=", ">", ">="):
        if left == right == "integer":
            return "boolean"
    elif op == "+":
        if left == right and left in ("integer", "text"):
            return left
    elif left == right == "integer":
        return "integer"
    raise DslTypeError(f"operator {op!r} not defined for {left} and {right}", *expr.pos)


def parse_adts(source: str) -> list[AdtSchema]:
    """Parse every ADT declared in ``source``."""
    return Parser(source).parse_module()


def parse_adt(source: str) -> AdtSchema:
    """Parse a source holding exactly one ADT declaration."""
    schemas = parse_adts(source)
    if len(schemas) != 1:
        raise DslSyntaxError(f"expected exactly one adt declaration, found {len(schemas)}")
    return schemas[0]


# --------------------------------------------------------------------------
# Pretty-printer

def format_expr(expr: Expr, parent: int = -1) -> str:
    if isinstance(expr, Const):
        if expr.type == "boolean":
            return "true" if expr.value else "false"
        if expr.type == "text":
            return quote_text(expr.value)
        return str(expr.value)
    if isinstance(expr, (FieldRef, ParamRef, LocalRef)):
        return expr.name
    if isinstance(expr, Unary):
        inner = format_expr(expr.operand, UNARY_PRECEDENCE)
        if expr.op == "-" and (inner.startswith("-") or isinstance(expr.operand, Const)):
            inner = f"({inner})"
        text = f"not {inner}" if expr.op == "not" else f"-{inner}"
        return f"({text})" if parent > UNARY_PRECEDENCE else text
    prec = PRECEDENCE[expr.op]
    comparison = expr.op in _COMPARISONS
    left = format_expr(expr.left, prec + 1 if comparison else prec)
    right = format_expr(expr.right, prec + 1)
    text = f"{left} {expr.op} {right}"
    return f"({text})" if prec < parent else text


def _format_block(stmts, indent: int) -> list[str]:
    lines = []
    pad = "    " * indent
    for k, s in enumerate(stmts):
        sep = ";" if k < len(stmts) - 1 else ""
        if isinstance(s, If):
            lines.append(f"{pad}if {format_expr(s.cond)} then {{")
            lines.extend(_format_block(s.then, indent + 1))
            if s.orelse is not None:
                lines.append(f"{pad}}} else {{")
                lines.extend(_format_block(s.orelse, indent + 1))
            lines.append(f"{pad}}}{sep}")
        elif isinstance(s, Return):
            lines.append(f"{pad}return {format_expr(s.expr)}{sep}")
        else:
            lines.append(f"{pad}{s.name} := {format_expr(s.expr)}{sep}")
    return lines


def format_operation(op: OperationDef) -> str:
    params = ", ".join(f"{n}: {t}" for n, t in op.params)
    head = f"op {op.name}({params})"
    if op.out_type:
        head += f" -> {op.out_type}"
    if not op.body:
        return head + " { }"
    return "\n".join([head + " {", *_format_block(op.body, 1), "}"])


def format_adt(schema: AdtSchema) -> str:
    fields = ", ".join(f"{n}: {t}" for n, t in schema.fields)
    parts = [f"adt {schema.name}({fields})"]
    parts.extend(format_operation(op) for op in schema.operations.values())
    return "\n".join(parts) + "\n"
