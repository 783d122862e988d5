"""Execution of operation bodies with dynamic access tracking.

While a body runs, every evaluated field reference raises that field's
dynamic mode to at least ``R`` and every field assignment sets it to ``W``.
The first assignment to a field also snapshots the prior value; restoring
those snapshots is the inverse of the execution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .core import AccessVector, Mode
from .dsl import (
    AdtSchema,
    Binary,
    Const,
    FieldAssign,
    FieldRef,
    If,
    LocalAssign,
    LocalRef,
    OperationDef,
    ParamRef,
    Return,
    Unary,
)

_PY_TYPES = {"integer": int, "boolean": bool, "text": str}
_DEFAULTS = {"integer": 0, "boolean": False, "text": ""}


class ExecutionFault(Exception):
    """An operation body failed at run time (division by zero).

    ``record`` holds the partial execution: the fields written so far and
    their before-images, enough to roll the instance back.
    """

    def __init__(self, message: str, record: "ExecutionRecord"):
        super().__init__(message)
        self.record = record


class SchemaMismatch(Exception):
    pass


def conforms(value: Any, type_name: str) -> bool:
    # bool is a subclass of int, keep them apart
    if type_name == "integer":
        return type(value) is int
    return type(value) is _PY_TYPES[type_name]


class InstanceValue:
    """Mutable field values of one ADT instance."""

    def __init__(self, schema: AdtSchema, values: Optional[Sequence[Any]] = None):
        self.schema = schema
        if values is None:
            values = [_DEFAULTS[t] for t in schema.field_types]
        values = list(values)
        if len(values) != schema.dimension:
            raise SchemaMismatch(f"{schema.name} has {schema.dimension} fields, got {len(values)} values")
        for (name, ftype), v in zip(schema.fields, values):
            if not conforms(v, ftype):
                raise SchemaMismatch(f"field {name}: {v!r} is not {ftype}")
        self.values = values

    def copy(self) -> "InstanceValue":
        return InstanceValue(self.schema, self.values)

    def snapshot(self) -> tuple:
        return tuple(self.values)

    def __getitem__(self, name: str) -> Any:
        return self.values[self.schema.field_index(name)]

    def __eq__(self, other) -> bool:
        return isinstance(other, InstanceValue) and other.schema is self.schema and other.values == self.values

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}={v!r}" for n, v in zip(self.schema.field_names, self.values))
        return f"{self.schema.name}({inner})"


@dataclass
class ExecutionRecord:
    op_name: str
    args: tuple
    dynamic_dav: AccessVector
    before_image: dict = field(default_factory=dict)  # field index -> prior value
    result: Any = None
    faulted: bool = False


def inverse_vector(record: ExecutionRecord, dimension: int) -> AccessVector:
    """Access vector of the before-image restoration: W on logged fields only."""
    return tuple(Mode.WRITE if i in record.before_image else Mode.NULL for i in range(dimension))


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


class _Frame:
    __slots__ = ("values", "params", "locals", "modes", "before")

    def __init__(self, values, params):
        self.values = values
        self.params = params
        self.locals = {}
        self.modes = [Mode.NULL] * len(values)
        self.before = {}


def _div(a: int, b: int) -> int:
    # truncate toward zero
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _eval(expr, fr: _Frame):
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, FieldRef):
        if fr.modes[expr.index] is Mode.NULL:
            fr.modes[expr.index] = Mode.READ
        return fr.values[expr.index]
    if isinstance(expr, ParamRef):
        return fr.params[expr.name]
    if isinstance(expr, LocalRef):
        return fr.locals[expr.name]
    if isinstance(expr, Unary):
        v = _eval(expr.operand, fr)
        return -v if expr.op == "-" else not v
    op = expr.op
    if op == "and":
        return _eval(expr.left, fr) and _eval(expr.right, fr)
    if op == "or":
        return _eval(expr.left, fr) or _eval(expr.right, fr)
    a = _eval(expr.left, fr)
    b = _eval(expr.right, fr)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise ZeroDivisionError("division by zero")
        return _div(a, b)
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise AssertionError(f"unknown operator {op}")


def _run(stmts, fr: _Frame) -> None:
    for s in stmts:
        if isinstance(s, FieldAssign):
            value = _eval(s.expr, fr)
            i = s.index
            if i not in fr.before:
                fr.before[i] = fr.values[i]
            fr.values[i] = value
            fr.modes[i] = Mode.WRITE
        elif isinstance(s, LocalAssign):
            fr.locals[s.name] = _eval(s.expr, fr)
        elif isinstance(s, If):
            if _eval(s.cond, fr):
                _run(s.then, fr)
            elif s.orelse is not None:
                _run(s.orelse, fr)
        elif isinstance(s, Return):
            raise _ReturnSignal(_eval(s.expr, fr))


def execute(op: OperationDef, args: Sequence[Any], instance: InstanceValue) -> ExecutionRecord:
    """Run ``op`` on ``instance`` in place and report what it touched."""
    args = tuple(args)
    if len(args) != len(op.params):
        raise TypeError(f"{op.name} takes {len(op.params)} arguments, got {len(args)}")
    for (pname, ptype), v in zip(op.params, args):
        if not conforms(v, ptype):
            raise TypeError(f"{op.name}: argument {pname}={v!r} is not {ptype}")
    if op.static_dav and len(op.static_dav) != len(instance.values):
        raise SchemaMismatch(f"{op.name} expects {len(op.static_dav)} fields")

    fr = _Frame(instance.values, dict(zip(op.param_names, args)))
    result = None
    try:
        _run(op.body, fr)
    except _ReturnSignal as ret:
        result = ret.value
    except ZeroDivisionError as exc:
        record = ExecutionRecord(op.name, args, tuple(fr.modes), dict(fr.before), None, True)
        raise ExecutionFault(f"{op.name}: {exc}", record) from None
    return ExecutionRecord(op.name, args, tuple(fr.modes), dict(fr.before), result)


def apply_inverse(record: ExecutionRecord, instance: InstanceValue) -> None:
    """Restore every field the execution wrote to its logged prior value."""
    n = len(instance.values)
    for i, old in record.before_image.items():
        if not 0 <= i < n:
            raise SchemaMismatch(f"before-image field {i} outside dimension {n}")
        if not conforms(old, instance.schema.field_types[i]):
            raise SchemaMismatch(f"before-image value {old!r} does not fit field {i}")
    for i, old in record.before_image.items():
        instance.values[i] = old
