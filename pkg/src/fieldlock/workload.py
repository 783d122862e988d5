"""Workloads: instances plus transaction scripts.

File format (``.wl``)::

    use account.adt
    instance a: Account(balance=10, owner="ann")
    txn T1 { a.deposit(5); a.getOwner() }
    txn T2 { a.deposit(1); abort }

``abort`` as the last item makes the transaction reject itself instead of
committing. Omitted instance fields take the type's zero value.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .dsl import AdtSchema, DslError, DslSyntaxError, DuplicateNameError, UnknownIdentifierError, parse_adts, tokenize
from .interp import InstanceValue, SchemaMismatch, conforms


@dataclass(frozen=True)
class OpCall:
    instance: str
    op: str
    args: tuple = ()

    def __str__(self) -> str:
        from .txn import format_value

        return f"{self.instance}.{self.op}({', '.join(format_value(a) for a in self.args)})"


@dataclass
class TxnScript:
    name: str
    calls: list = field(default_factory=list)
    abort: bool = False


@dataclass
class Workload:
    schemas: dict = field(default_factory=dict)  # name -> AdtSchema
    instances: dict = field(default_factory=dict)  # name -> (schema name, values tuple)
    transactions: list = field(default_factory=list)  # [TxnScript]

    def fresh_instances(self) -> dict:
        return {name: InstanceValue(self.schemas[s], values) for name, (s, values) in self.instances.items()}

    def schema_of(self, instance: str) -> AdtSchema:
        return self.schemas[self.instances[instance][0]]

    def validate(self) -> None:
        names = set()
        for t in self.transactions:
            if t.name in names:
                raise DuplicateNameError(f"duplicate transaction {t.name!r}")
            names.add(t.name)
            for call in t.calls:
                if call.instance not in self.instances:
                    raise UnknownIdentifierError(f"{t.name}: unknown instance {call.instance!r}")
                op = self.schema_of(call.instance).operation(call.op)
                if len(call.args) != len(op.params):
                    raise SchemaMismatch(f"{t.name}: {call} takes {len(op.params)} arguments")
                for (pname, ptype), value in zip(op.params, call.args):
                    if not conforms(value, ptype):
                        raise SchemaMismatch(f"{t.name}: {call}: {pname} must be {ptype}")


_USE_RE = re.compile(r"^[ \t]*use[ \t]+(\S+)[ \t]*(?://.*)?$", re.MULTILINE)


def parse_workload(source: str, base_dir: Optional[Path] = None, adt_sources: Optional[dict] = None) -> Workload:
    """Parse ``.wl`` text.

    ``use`` targets are looked up in ``adt_sources`` (path -> text) first,
    then read relative to ``base_dir``.
    """
    wl = Workload()
    adt_sources = adt_sources or {}

    def load(path: str, line: int):
        if path in adt_sources:
            text = adt_sources[path]
        else:
            full = Path(base_dir or ".") / path
            try:
                text = full.read_text(encoding="utf-8")
            except OSError as exc:
                raise DslSyntaxError(f"cannot read {path}: {exc.strerror}", line, 1) from None
        for schema in parse_adts(text):
            if schema.name in wl.schemas:
                raise DuplicateNameError(f"ADT {schema.name} defined twice", line, 1)
            wl.schemas[schema.name] = schema

    # blank out `use` lines (paths are not tokens) keeping line numbers
    def take_use(m):
        load(m.group(1), source.count("\n", 0, m.start()) + 1)
        return ""

    rest = _USE_RE.sub(take_use, source)
    _WorkloadParser(tokenize(rest), wl).parse()
    wl.validate()
    return wl


def load_workload(path) -> Workload:
    path = Path(path)
    return parse_workload(path.read_text(encoding="utf-8"), path.parent)


class _WorkloadParser:
    def __init__(self, tokens, wl: Workload):
        self.tokens = tokens
        self.i = 0
        self.wl = wl

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text):
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def expect(self, text):
        if not self.at(text):
            raise DslSyntaxError(f"expected {text!r}, found {self.tok.text or 'end of input'!r}", self.tok.line, self.tok.col)
        return self.advance()

    def name(self, what):
        tok = self.tok
        if tok.kind != "ident":
            raise DslSyntaxError(f"expected {what}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.advance()

    def literal(self) -> Any:
        tok = self.tok
        if self.at("-"):
            self.advance()
            num = self.tok
            if num.kind != "int":
                raise DslSyntaxError("expected integer after '-'", num.line, num.col)
            self.advance()
            return -num.value
        if tok.kind in ("int", "string"):
            self.advance()
            return tok.value
        if self.at("true") or self.at("false"):
            self.advance()
            return tok.text == "true"
        raise DslSyntaxError(f"expected literal, found {tok.text or 'end of input'!r}", tok.line, tok.col)

    def parse(self):
        while self.tok.kind != "eof":
            if self.at("instance"):
                self.instance()
            elif self.at("txn"):
                self.txn()
            else:
                tok = self.tok
                raise DslSyntaxError(f"expected 'use', 'instance' or 'txn', found {tok.text!r}", tok.line, tok.col)

    def instance(self):
        self.expect("instance")
        name_tok = self.name("instance name")
        if name_tok.text in self.wl.instances:
            raise DuplicateNameError(f"duplicate instance {name_tok.text!r}", name_tok.line, name_tok.col)
        self.expect(":")
        adt_tok = self.name("ADT name")
        schema = self.wl.schemas.get(adt_tok.text)
        if schema is None:
            raise UnknownIdentifierError(f"unknown ADT {adt_tok.text!r}", adt_tok.line, adt_tok.col)
        values = list(InstanceValue(schema).values)
        self.expect("(")
        seen = set()
        while not self.at(")"):
            ftok = self.name("field name")
            if ftok.text not in schema.field_names:
                raise UnknownIdentifierError(f"{schema.name} has no field {ftok.text!r}", ftok.line, ftok.col)
            if ftok.text in seen:
                raise DuplicateNameError(f"field {ftok.text!r} given twice", ftok.line, ftok.col)
            seen.add(ftok.text)
            self.expect("=")
            value = self.literal()
            idx = schema.field_index(ftok.text)
            if not conforms(value, schema.field_types[idx]):
                raise SchemaMismatch(f"{ftok.line}:{ftok.col}: field {ftok.text} must be {schema.field_types[idx]}")
            values[idx] = value
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        self.wl.instances[name_tok.text] = (schema.name, tuple(values))

    def txn(self):
        self.expect("txn")
        script = TxnScript(self.name("transaction name").text)
        self.expect("{")
        while not self.at("}"):
            if self.at("abort"):
                self.advance()
                script.abort = True
                self.accept_semicolons()
                break
            inst = self.name("instance").text
            self.expect(".")
            op = self.name("operation").text
            self.expect("(")
            args = []
            while not self.at(")"):
                args.append(self.literal())
                if not self.at(")"):
                    self.expect(",")
            self.expect(")")
            script.calls.append(OpCall(inst, op, tuple(args)))
            if not self.accept_semicolons():
                break
        self.expect("}")
        self.wl.transactions.append(script)

    def accept_semicolons(self) -> bool:
        found = False
        while self.at(";"):
            self.advance()
            found = True
        return found


# --------------------------------------------------------------------------
# random workloads

_FIELD_NAMES = "abcdefgh"


def _random_expr(rng: random.Random, fields, params, depth=0) -> str:
    choices = ["field", "const"] + (["param"] if params else [])
    if depth < 2:
        choices += ["binop", "binop"]
    kind = rng.choice(choices)
    if kind == "field":
        return rng.choice(fields)
    if kind == "param":
        return rng.choice(params)
    if kind == "const":
        return str(rng.randint(0, 3))
    op = rng.choice(["+", "-", "*", "+", "/"])
    return f"({_random_expr(rng, fields, params, depth + 1)} {op} {_random_expr(rng, fields, params, depth + 1)})"


def _random_cond(rng, fields, params) -> str:
    cmp = rng.choice(["<", ">", "=", "<>", "<=", ">="])
    return f"{_random_expr(rng, fields, params, 1)} {cmp} {_random_expr(rng, fields, params, 1)}"


def _random_stmts(rng, fields, params, depth=0, has_result=False) -> list[str]:
    stmts = []
    for _ in range(rng.randint(0 if depth else 1, 2)):
        kind = rng.random()
        if kind < 0.5:
            stmts.append(f"{rng.choice(fields)} := {_random_expr(rng, fields, params)}")
        elif kind < 0.8 and depth < 2:
            then = "; ".join(_random_stmts(rng, fields, params, depth + 1)) or ""
            text = f"if {_random_cond(rng, fields, params)} then {{ {then} }}"
            if rng.random() < 0.5:
                orelse = "; ".join(_random_stmts(rng, fields, params, depth + 1))
                text += f" else {{ {orelse} }}"
            stmts.append(text)
        else:
            stmts.append(f"t := {_random_expr(rng, fields, params)}")
            stmts.append(f"{rng.choice(fields)} := t")
    if has_result and depth == 0:
        stmts.append(f"return {_random_expr(rng, fields, params)}")
    return stmts


def random_adt_source(rng: random.Random, name: str, dimension: int, n_ops: int) -> str:
    """Random integer-only ADT with ``n_ops`` operations."""
    fields = list(_FIELD_NAMES[:dimension])
    lines = [f"adt {name}({', '.join(f'{f}: integer' for f in fields)})"]
    for k in range(n_ops):
        params = ["p"] if rng.random() < 0.5 else []
        result = rng.random() < 0.4
        if rng.random() < 0.15:
            body = ""  # untouched fields / read-only op
            if result:
                body = f"return {rng.choice(fields)}"
        else:
            body = "; ".join(_random_stmts(rng, fields, params, has_result=result))
        sig = ", ".join(f"{p}: integer" for p in params)
        out = " -> integer" if result else ""
        lines.append(f"op op{k}({sig}){out} {{ {body} }}")
    return "\n".join(lines) + "\n"


def random_workload(
    rng: random.Random,
    max_txns: int = 4,
    max_ops: int = 3,
    max_dimension: int = 4,
    max_instances: int = 2,
    abort_rate: float = 0.1,
) -> Workload:
    """Small random workload for oracle-checked runs."""
    wl = Workload()
    n_schemas = rng.randint(1, 2)
    for s in range(n_schemas):
        dim = rng.randint(1, max_dimension)
        src = random_adt_source(rng, f"R{s}", dim, rng.randint(1, 4))
        try:
            (schema,) = parse_adts(src)
        except DslError as exc:  # pragma: no cover - generator bug
            raise AssertionError(f"generated source does not parse: {exc}\n{src}") from None
        wl.schemas[schema.name] = schema
    for k in range(rng.randint(1, max_instances)):
        schema = wl.schemas[rng.choice(sorted(wl.schemas))]
        values = tuple(rng.randint(-2, 3) for _ in range(schema.dimension))
        wl.instances[f"i{k}"] = (schema.name, values)
    for t in range(rng.randint(1, max_txns)):
        script = TxnScript(f"T{t + 1}")
        for _ in range(rng.randint(1, max_ops)):
            inst = rng.choice(sorted(wl.instances))
            schema = wl.schema_of(inst)
            op = schema.operations[rng.choice(sorted(schema.operations))]
            args = tuple(rng.randint(-2, 3) for _ in op.params)
            script.calls.append(OpCall(inst, op.name, args))
        script.abort = rng.random() < abort_rate
        wl.transactions.append(script)
    wl.validate()
    return wl


def format_workload(wl: Workload, adt_paths: dict) -> str:
    """Render ``wl`` back to ``.wl`` text; ``adt_paths`` maps ADT name to its file."""
    from .txn import format_value

    lines = [f"use {p}" for p in dict.fromkeys(adt_paths[s] for s in wl.schemas)]
    for name, (sname, values) in wl.instances.items():
        schema = wl.schemas[sname]
        inner = ", ".join(f"{f}={format_value(v)}" for f, v in zip(schema.field_names, values))
        lines.append(f"instance {name}: {sname}({inner})")
    for t in wl.transactions:
        items = [str(c) for c in t.calls] + (["abort"] if t.abort else [])
        lines.append(f"txn {t.name} {{ {'; '.join(items)} }}")
    return "\n".join(lines) + "\n"
