"""Program model for the 3-address mini-IR.

The IR is deliberately small: one statement per line, explicit
``virtualinvoke``/``staticinvoke`` keywords, angle-bracket member
signatures, ``:=`` for identity statements and ``=`` for assignments.
Method bodies are flat statement lists; control flow uses boolean-guarded
``if``/``goto`` jumps to named labels.

Everything in this module is immutable after construction and safe to
share across concurrent analyses.  Parsing and validation live in
:mod:`slicegen.parser`; this module owns the data types and the pretty
printer (the canonical text form round-trips through the parser).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

# Primitive type names recognized by the IR.  Arrays are "<prim>[]".
PRIMITIVE_TYPES = ("int", "long", "double", "boolean")
STRING_TYPE = "java.lang.String"
NULL_TYPE = "null"
VOID_TYPE = "void"


def is_primitive(type_name: str) -> bool:
    return type_name in PRIMITIVE_TYPES


def is_primitive_array(type_name: str) -> bool:
    return type_name.endswith("[]") and is_primitive(type_name[:-2])


def is_object_type(type_name: str) -> bool:
    """Anything that is neither a primitive, a primitive array, nor void."""
    return not (
        is_primitive(type_name)
        or is_primitive_array(type_name)
        or type_name in (STRING_TYPE, NULL_TYPE, VOID_TYPE)
    )


# ============================================================
# Member signatures
# ============================================================


@dataclass(frozen=True)
class MethodSignature:
    """Identity of a method: all five fields participate in equality."""

    declaring_class: str
    name: str
    param_types: tuple[str, ...]
    return_type: str
    is_static: bool = False

    @property
    def arity(self) -> int:
        return len(self.param_types)

    def __str__(self) -> str:
        params = ", ".join(self.param_types)
        return f"<{self.declaring_class}: {self.return_type} {self.name}({params})>"


@dataclass(frozen=True)
class FieldSignature:
    """Identity of a field; rendered like a method signature without parens."""

    declaring_class: str
    type_name: str
    name: str

    def __str__(self) -> str:
        return f"<{self.declaring_class}: {self.type_name} {self.name}>"


# A target API is either a framework method or a framework field read.
ApiRef = Union[MethodSignature, FieldSignature]


# ============================================================
# Constants and operands
# ============================================================


@dataclass(frozen=True)
class Const:
    """A typed literal: int, long, double, boolean, String, null or a
    primitive array (tuple of element values)."""

    type_name: str
    value: object

    def render(self) -> str:
        if self.type_name == NULL_TYPE:
            return "null"
        if self.type_name == "boolean":
            return "true" if self.value else "false"
        if self.type_name == "int":
            return str(self.value)
        if self.type_name == "long":
            return f"{self.value}L"
        if self.type_name == "double":
            v = float(self.value)  # always keep a decimal point or exponent
            text = repr(v)
            return text if ("." in text or "e" in text or "E" in text) else text + ".0"
        if self.type_name == STRING_TYPE:
            escaped = (
                str(self.value)
                .replace("\\", "\\\\")
                .replace('"', '\\"')
                .replace("\n", "\\n")
                .replace("\t", "\\t")
            )
            return f'"{escaped}"'
        if self.type_name.endswith("[]"):
            elems = ", ".join(
                Const(self.type_name[:-2], v).render() for v in self.value
            )
            return "{" + elems + "}"
        raise ValueError(f"unrenderable constant type {self.type_name}")


# Invoke arguments and field-store sources are either a variable name or a
# literal constant.
Operand = Union[str, Const]


def _render_operand(op: Operand) -> str:
    return op.render() if isinstance(op, Const) else op


def _operand_uses(ops: Iterator[Operand]) -> tuple[str, ...]:
    return tuple(o for o in ops if isinstance(o, str))


# ============================================================
# Statements
# ============================================================


@dataclass(frozen=True)
class Statement:
    """Base statement.  ``line`` is source metadata and excluded from
    structural equality so pretty-print round trips compare equal."""

    line: int = field(default=0, compare=False, kw_only=True)

    @property
    def def_var(self) -> Optional[str]:
        return None

    @property
    def uses(self) -> tuple[str, ...]:
        return ()

    def render(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class IdentityParam(Statement):
    var: str
    index: int
    type_name: str

    @property
    def def_var(self):
        return self.var

    def render(self) -> str:
        return f"{self.var} := @parameter{self.index}: {self.type_name};"


@dataclass(frozen=True)
class IdentityThis(Statement):
    var: str
    type_name: str

    @property
    def def_var(self):
        return self.var

    def render(self) -> str:
        return f"{self.var} := @this: {self.type_name};"


@dataclass(frozen=True)
class AssignConst(Statement):
    var: str
    const: Const

    @property
    def def_var(self):
        return self.var

    def render(self) -> str:
        return f"{self.var} = {self.const.render()};"


@dataclass(frozen=True)
class AssignCast(Statement):
    var: str
    type_name: str
    src: str

    @property
    def def_var(self):
        return self.var

    @property
    def uses(self):
        return (self.src,)

    def render(self) -> str:
        return f"{self.var} = ({self.type_name}) {self.src};"


@dataclass(frozen=True)
class AssignNew(Statement):
    var: str
    type_name: str

    @property
    def def_var(self):
        return self.var

    def render(self) -> str:
        return f"{self.var} = new {self.type_name};"


@dataclass(frozen=True)
class AssignInvoke(Statement):
    var: str
    callee: MethodSignature
    receiver: Optional[str]
    args: tuple[Operand, ...]

    @property
    def def_var(self):
        return self.var

    @property
    def uses(self):
        recv = (self.receiver,) if self.receiver is not None else ()
        return recv + _operand_uses(iter(self.args))

    def render(self) -> str:
        args = ", ".join(_render_operand(a) for a in self.args)
        if self.callee.is_static:
            return f"{self.var} = staticinvoke {self.callee}({args});"
        return f"{self.var} = virtualinvoke {self.receiver}.{self.callee}({args});"


@dataclass(frozen=True)
class InvokeVoid(Statement):
    callee: MethodSignature
    receiver: Optional[str]
    args: tuple[Operand, ...]

    @property
    def uses(self):
        recv = (self.receiver,) if self.receiver is not None else ()
        return recv + _operand_uses(iter(self.args))

    def render(self) -> str:
        args = ", ".join(_render_operand(a) for a in self.args)
        if self.callee.is_static:
            return f"staticinvoke {self.callee}({args});"
        return f"virtualinvoke {self.receiver}.{self.callee}({args});"


@dataclass(frozen=True)
class AssignFieldLoad(Statement):
    var: str
    fieldsig: FieldSignature
    receiver: Optional[str]  # None for a static field

    @property
    def def_var(self):
        return self.var

    @property
    def uses(self):
        return (self.receiver,) if self.receiver is not None else ()

    def render(self) -> str:
        if self.receiver is None:
            return f"{self.var} = {self.fieldsig};"
        return f"{self.var} = {self.receiver}.{self.fieldsig};"


@dataclass(frozen=True)
class FieldStore(Statement):
    fieldsig: FieldSignature
    receiver: Optional[str]
    src: Operand

    @property
    def uses(self):
        recv = (self.receiver,) if self.receiver is not None else ()
        return recv + _operand_uses(iter((self.src,)))

    def render(self) -> str:
        rhs = _render_operand(self.src)
        if self.receiver is None:
            return f"{self.fieldsig} = {rhs};"
        return f"{self.receiver}.{self.fieldsig} = {rhs};"


@dataclass(frozen=True)
class Return(Statement):
    var: str

    @property
    def uses(self):
        return (self.var,)

    def render(self) -> str:
        return f"return {self.var};"


@dataclass(frozen=True)
class ReturnVoid(Statement):
    def render(self) -> str:
        return "return;"


@dataclass(frozen=True)
class If(Statement):
    cond: str
    target: str

    @property
    def uses(self):
        return (self.cond,)

    def render(self) -> str:
        return f"if {self.cond} goto {self.target};"


@dataclass(frozen=True)
class Goto(Statement):
    target: str

    def render(self) -> str:
        return f"goto {self.target};"


@dataclass(frozen=True)
class Label(Statement):
    name: str

    def render(self) -> str:
        return f"{self.name}:"


def is_invoke(stmt: Statement) -> bool:
    return isinstance(stmt, (AssignInvoke, InvokeVoid))


def callee_of(stmt: Statement) -> Optional[MethodSignature]:
    if isinstance(stmt, (AssignInvoke, InvokeVoid)):
        return stmt.callee
    return None


def is_terminator(stmt: Statement) -> bool:
    return isinstance(stmt, (Return, ReturnVoid, Goto))


# ============================================================
# Methods, classes, programs
# ============================================================


@dataclass(frozen=True)
class FieldDecl:
    type_name: str
    name: str


@dataclass(frozen=True)
class IRMethod:
    signature: MethodSignature
    body: tuple[Statement, ...]

    def local_types(self) -> dict[str, str]:
        """Variable -> type, inferred from the first defining statement."""
        out: dict[str, str] = {}
        for stmt in self.body:
            v = stmt.def_var
            if v is None or v in out:
                continue
            if isinstance(stmt, (IdentityParam, IdentityThis, AssignCast, AssignNew)):
                out[v] = stmt.type_name
            elif isinstance(stmt, AssignConst):
                out[v] = stmt.const.type_name
            elif isinstance(stmt, AssignInvoke):
                out[v] = stmt.callee.return_type
            elif isinstance(stmt, AssignFieldLoad):
                out[v] = stmt.fieldsig.type_name
        return out

    def return_indices(self) -> tuple[int, ...]:
        return tuple(
            i for i, s in enumerate(self.body) if isinstance(s, (Return, ReturnVoid))
        )


@dataclass(frozen=True)
class IRClass:
    name: str
    fields: tuple[FieldDecl, ...]
    methods: tuple[IRMethod, ...]

    def field_decl(self, name: str) -> Optional[FieldDecl]:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class IRProgram:
    """A parsed program: application classes plus the declared framework
    boundary (method signatures the program may call but does not define)."""

    classes: dict[str, IRClass]
    framework_api_list: frozenset[MethodSignature]

    def lookup_method(self, sig: MethodSignature) -> Optional[IRMethod]:
        cls = self.classes.get(sig.declaring_class)
        if cls is None:
            return None
        for m in cls.methods:
            if m.signature == sig:
                return m
        return None

    def is_framework(self, sig: MethodSignature) -> bool:
        return sig in self.framework_api_list

    def is_app_class(self, class_name: str) -> bool:
        return class_name in self.classes

    def iter_methods(self) -> Iterator[IRMethod]:
        for cls in self.classes.values():
            yield from cls.methods

    def framework_field_reads(self) -> list[FieldSignature]:
        """Distinct framework-class field signatures read anywhere, in first
        textual occurrence order.  Field reads of non-application classes
        count as framework API usage (they can raise NoSuchFieldError)."""
        seen: list[FieldSignature] = []
        for method in self.iter_methods():
            for stmt in method.body:
                if isinstance(stmt, AssignFieldLoad):
                    fs = stmt.fieldsig
                    if not self.is_app_class(fs.declaring_class) and fs not in seen:
                        seen.append(fs)
        return seen


# ============================================================
# Pretty printer
# ============================================================


def pretty_print(program: IRProgram) -> str:
    """Canonical text form; reparsing yields a structurally equal program."""
    lines: list[str] = []
    for sig in sorted(program.framework_api_list, key=str):
        prefix = "framework static" if sig.is_static else "framework"
        lines.append(f"{prefix} {sig};")
    if program.framework_api_list:
        lines.append("")
    for cls in program.classes.values():
        lines.append(f"class {cls.name} {{")
        for f in cls.fields:
            lines.append(f"  field {f.type_name} {f.name};")
        for method in cls.methods:
            sig = method.signature
            mods = "static " if sig.is_static else ""
            params = ", ".join(sig.param_types)
            lines.append(f"  {mods}{sig.return_type} {sig.name}({params}) {{")
            for stmt in method.body:
                indent = "  " if isinstance(stmt, Label) else "    "
                lines.append(indent + stmt.render())
            lines.append("  }")
        lines.append("}")
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"
