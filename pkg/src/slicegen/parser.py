"""Parser and static validator for the textual mini-IR.

``parse_program`` is total: malformed input produces diagnostics with
line/column positions, never an exception.  ``validate_program`` checks
the structural invariants (labels, identity statements, callee
resolution, arity, path-sensitive definite assignment) and returns one
diagnostic per violation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .ir import (
    AssignCast,
    AssignConst,
    AssignFieldLoad,
    AssignInvoke,
    AssignNew,
    Const,
    FieldDecl,
    FieldSignature,
    FieldStore,
    Goto,
    IdentityParam,
    IdentityThis,
    If,
    InvokeVoid,
    IRClass,
    IRMethod,
    IRProgram,
    Label,
    MethodSignature,
    Operand,
    Return,
    ReturnVoid,
    Statement,
    STRING_TYPE,
)

# Diagnostic codes
SYNTAX_ERROR = "SyntaxError"
UNRESOLVED_REFERENCE = "UnresolvedReference"
USE_BEFORE_DEF = "UseBeforeDef"
MISSING_LABEL = "MissingLabel"
DUPLICATE_LABEL = "DuplicateLabel"
ARITY_MISMATCH = "ArityMismatch"
DUPLICATE_IDENTITY_THIS = "DuplicateIdentityThis"
IDENTITY_THIS_IN_STATIC = "IdentityThisInStatic"
DUPLICATE_PARAM_INDEX = "DuplicateParamIndex"
BAD_PARAM_INDEX = "BadParamIndex"
UNKNOWN_FIELD = "UnknownField"
DUPLICATE_CLASS = "DuplicateClass"
DUPLICATE_METHOD = "DuplicateMethod"
DUPLICATE_FIELD = "DuplicateField"
FRAMEWORK_OVERLAP = "FrameworkOverlap"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int = 0
    col: int = 0
    locus: str = ""

    def __str__(self) -> str:
        where = f"{self.line}:{self.col}"
        locus = f" [{self.locus}]" if self.locus else ""
        return f"{where}: {self.code}: {self.message}{locus}"


@dataclass
class ParseResult:
    program: Optional[IRProgram]
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.program is not None and not self.diagnostics


# ============================================================
# Member-reference strings
# ============================================================

_QNAME = r"[A-Za-z_$][A-Za-z0-9_$]*(?:\.[A-Za-z_$][A-Za-z0-9_$]*)*"
_TYPE = _QNAME + r"(?:\[\])*"
_METHOD_RE = re.compile(
    rf"^<({_QNAME})\s*:\s*({_TYPE})\s+([A-Za-z_$][A-Za-z0-9_$]*|<init>)\s*\(([^)]*)\)>$"
)
_FIELD_RE = re.compile(rf"^<({_QNAME})\s*:\s*({_TYPE})\s+([A-Za-z_$][A-Za-z0-9_$]*)>$")


def parse_member_ref(
    text: str, is_static: bool = False
) -> Union[MethodSignature, FieldSignature, None]:
    """Parse ``<Class: ret name(params)>`` or ``<Class: type name>``.

    Also used for signature strings in target lists and version profiles.
    Returns None on malformed input.
    """
    text = text.strip()
    m = _METHOD_RE.match(text)
    if m:
        cls, ret, name, params = m.groups()
        param_types = tuple(p.strip() for p in params.split(",") if p.strip())
        for p in param_types:
            if not re.fullmatch(_TYPE, p):
                return None
        return MethodSignature(cls, name, param_types, ret, is_static)
    m = _FIELD_RE.match(text)
    if m:
        cls, type_name, name = m.groups()
        return FieldSignature(cls, type_name, name)
    return None


# ============================================================
# Lexer
# ============================================================

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>-?\d+\.\d+(?:[eE][+-]?\d+)?|-?\d+[eE][+-]?\d+|-?\d+[lL]|-?\d+)
  | (?P<sigref><[^<>]*(?:<init>)?[^<>]*>)
  | (?P<assign_id>:=)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<sym>[{}();,:.=@\[\]])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "class",
    "field",
    "framework",
    "static",
    "new",
    "virtualinvoke",
    "staticinvoke",
    "return",
    "if",
    "goto",
    "true",
    "false",
    "null",
}


@dataclass(frozen=True)
class Token:
    kind: str  # ident/keyword/string/number/sigref/sym/assign_id/eof
    text: str
    line: int
    col: int


def _lex(text: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    line, col, pos = 1, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            diags.append(
                Diagnostic(
                    SYNTAX_ERROR, f"unexpected character {text[pos]!r}", line, col
                )
            )
            pos += 1
            col += 1
            continue
        kind = m.lastgroup or ""
        tok = m.group()
        if kind == "newline":
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(tok)
        else:
            if kind == "ident" and tok in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, tok, line, col))
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens, diags


# ============================================================
# Parser
# ============================================================


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.diags: list[Diagnostic] = []

    # -------- token helpers --------

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        if self.at(kind, text):
            return self.next()
        return None

    def error(self, message: str, tok: Optional[Token] = None) -> None:
        tok = tok or self.peek()
        self.diags.append(Diagnostic(SYNTAX_ERROR, message, tok.line, tok.col))

    def expect(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        tok = self.accept(kind, text)
        if tok is None:
            want = text or kind
            self.error(f"expected {want!r}, found {self.peek().text!r}")
        return tok

    def sync_to(self, *stop_texts: str) -> None:
        """Skip tokens until one of the stop symbols (consumed if ';')."""
        while not self.at("eof"):
            tok = self.peek()
            if tok.kind == "sym" and tok.text in stop_texts:
                if tok.text == ";":
                    self.next()
                return
            self.next()

    # -------- grammar pieces --------

    def qname(self) -> Optional[str]:
        tok = self.accept("ident")
        if tok is None:
            return None
        parts = [tok.text]
        while self.at("sym", ".") and self.peek(1).kind == "ident":
            self.next()
            parts.append(self.next().text)
        return ".".join(parts)

    def type_name(self) -> Optional[str]:
        name = self.qname()
        if name is None:
            return None
        while self.at("sym", "[") and self.peek(1).text == "]":
            self.next()
            self.next()
            name += "[]"
        return name

    def member_ref(self, is_static: bool) -> Union[MethodSignature, FieldSignature, None]:
        tok = self.expect("sigref")
        if tok is None:
            return None
        ref = parse_member_ref(tok.text, is_static)
        if ref is None:
            self.error(f"malformed signature {tok.text}", tok)
        return ref

    def const(self) -> Optional[Const]:
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            text = tok.text
            if text.endswith(("l", "L")):
                return Const("long", int(text[:-1]))
            if "." in text or "e" in text or "E" in text:
                return Const("double", float(text))
            return Const("int", int(text))
        if tok.kind == "string":
            self.next()
            raw = tok.text[1:-1]
            value = (
                raw.replace("\\n", "\n")
                .replace("\\t", "\t")
                .replace('\\"', '"')
                .replace("\\\\", "\\")
            )
            return Const(STRING_TYPE, value)
        if tok.kind == "keyword" and tok.text in ("true", "false"):
            self.next()
            return Const("boolean", tok.text == "true")
        if tok.kind == "keyword" and tok.text == "null":
            self.next()
            return Const("null", None)
        if tok.kind == "sym" and tok.text == "{":
            return self.array_const()
        return None

    def array_const(self) -> Optional[Const]:
        self.expect("sym", "{")
        elems: list[Const] = []
        if not self.at("sym", "}"):
            while True:
                c = self.const()
                if c is None:
                    self.error("expected constant in array literal")
                    return None
                elems.append(c)
                if not self.accept("sym", ","):
                    break
        self.expect("sym", "}")
        if not elems:
            self.error("empty array literal")
            return None
        elem_type = elems[0].type_name
        if any(e.type_name != elem_type for e in elems):
            self.error("mixed element types in array literal")
            return None
        return Const(elem_type + "[]", tuple(e.value for e in elems))

    def operand(self) -> Optional[Operand]:
        c = self.const()
        if c is not None:
            return c
        tok = self.accept("ident")
        if tok is not None:
            return tok.text
        self.error(f"expected variable or constant, found {self.peek().text!r}")
        return None

    def arg_list(self) -> Optional[tuple[Operand, ...]]:
        if self.expect("sym", "(") is None:
            return None
        args: list[Operand] = []
        if not self.at("sym", ")"):
            while True:
                op = self.operand()
                if op is None:
                    return None
                args.append(op)
                if not self.accept("sym", ","):
                    break
        if self.expect("sym", ")") is None:
            return None
        return tuple(args)

    # -------- statements --------

    def statement(self) -> Optional[Statement]:
        tok = self.peek()
        line = tok.line

        # label: `name:`
        if tok.kind == "ident" and self.peek(1).kind == "sym" and self.peek(1).text == ":":
            self.next()
            self.next()
            return Label(tok.text, line=line)

        if tok.kind == "keyword":
            if tok.text == "return":
                self.next()
                if self.accept("sym", ";"):
                    return ReturnVoid(line=line)
                var = self.expect("ident")
                if var is None or self.expect("sym", ";") is None:
                    return None
                return Return(var.text, line=line)
            if tok.text == "if":
                self.next()
                cond = self.expect("ident")
                if cond is None or self.expect("keyword", "goto") is None:
                    return None
                target = self.expect("ident")
                if target is None or self.expect("sym", ";") is None:
                    return None
                return If(cond.text, target.text, line=line)
            if tok.text == "goto":
                self.next()
                target = self.expect("ident")
                if target is None or self.expect("sym", ";") is None:
                    return None
                return Goto(target.text, line=line)
            if tok.text in ("virtualinvoke", "staticinvoke"):
                inv = self.invoke_expr()
                if inv is None or self.expect("sym", ";") is None:
                    return None
                callee, receiver, args = inv
                return InvokeVoid(callee, receiver, args, line=line)

        # static field store:  <sig> = operand ;
        if tok.kind == "sigref":
            ref = self.member_ref(is_static=False)
            if not isinstance(ref, FieldSignature):
                self.error("expected field signature", tok)
                return None
            if self.expect("sym", "=") is None:
                return None
            src = self.operand()
            if src is None or self.expect("sym", ";") is None:
                return None
            return FieldStore(ref, None, src, line=line)

        if tok.kind != "ident":
            self.error(f"unexpected token {tok.text!r}")
            return None

        var = self.next().text

        # identity: `var := @parameterN: type;` | `var := @this: type;`
        if self.accept("assign_id"):
            return self.identity_stmt(var, line)

        # instance field store:  var.<sig> = operand ;
        if self.at("sym", ".") and self.peek(1).kind == "sigref":
            self.next()
            ref = self.member_ref(is_static=False)
            if not isinstance(ref, FieldSignature):
                self.error("expected field signature")
                return None
            if self.expect("sym", "=") is None:
                return None
            src = self.operand()
            if src is None or self.expect("sym", ";") is None:
                return None
            return FieldStore(ref, var, src, line=line)

        if self.expect("sym", "=") is None:
            return None
        return self.assign_rhs(var, line)

    def identity_stmt(self, var: str, line: int) -> Optional[Statement]:
        if self.expect("sym", "@") is None:
            return None
        what = self.expect("ident")
        if what is None:
            return None
        if self.expect("sym", ":") is None:
            return None
        type_name = self.type_name()
        if type_name is None or self.expect("sym", ";") is None:
            self.error("expected type name in identity statement")
            return None
        if what.text == "this":
            return IdentityThis(var, type_name, line=line)
        m = re.fullmatch(r"parameter(\d+)", what.text)
        if m is None:
            self.error(f"unknown identity reference @{what.text}", what)
            return None
        return IdentityParam(var, int(m.group(1)), type_name, line=line)

    def invoke_expr(
        self,
    ) -> Optional[tuple[MethodSignature, Optional[str], tuple[Operand, ...]]]:
        if self.accept("keyword", "staticinvoke"):
            sig = self.member_ref(is_static=True)
            if not isinstance(sig, MethodSignature):
                self.error("expected method signature after staticinvoke")
                return None
            args = self.arg_list()
            if args is None:
                return None
            return sig, None, args
        if self.expect("keyword", "virtualinvoke") is None:
            return None
        recv = self.expect("ident")
        if recv is None or self.expect("sym", ".") is None:
            return None
        sig = self.member_ref(is_static=False)
        if not isinstance(sig, MethodSignature):
            self.error("expected method signature after receiver")
            return None
        args = self.arg_list()
        if args is None:
            return None
        return sig, recv.text, args

    def assign_rhs(self, var: str, line: int) -> Optional[Statement]:
        tok = self.peek()

        if tok.kind == "sym" and tok.text == "(":
            self.next()
            type_name = self.type_name()
            if type_name is None or self.expect("sym", ")") is None:
                self.error("expected type name in cast")
                return None
            src = self.expect("ident")
            if src is None or self.expect("sym", ";") is None:
                return None
            return AssignCast(var, type_name, src.text, line=line)

        if tok.kind == "keyword" and tok.text == "new":
            self.next()
            type_name = self.type_name()
            if type_name is None or self.expect("sym", ";") is None:
                self.error("expected type name after new")
                return None
            return AssignNew(var, type_name, line=line)

        if tok.kind == "keyword" and tok.text in ("virtualinvoke", "staticinvoke"):
            inv = self.invoke_expr()
            if inv is None or self.expect("sym", ";") is None:
                return None
            callee, receiver, args = inv
            return AssignInvoke(var, callee, receiver, args, line=line)

        # static field load:  var = <sig> ;
        if tok.kind == "sigref":
            ref = self.member_ref(is_static=False)
            if not isinstance(ref, FieldSignature):
                self.error("expected field signature", tok)
                return None
            if self.expect("sym", ";") is None:
                return None
            return AssignFieldLoad(var, ref, None, line=line)

        # instance field load:  var = recv.<sig> ;
        if tok.kind == "ident" and self.peek(1).text == "." and self.peek(2).kind == "sigref":
            recv = self.next().text
            self.next()
            ref = self.member_ref(is_static=False)
            if not isinstance(ref, FieldSignature):
                self.error("expected field signature")
                return None
            if self.expect("sym", ";") is None:
                return None
            return AssignFieldLoad(var, ref, recv, line=line)

        c = self.const()
        if c is not None:
            if self.expect("sym", ";") is None:
                return None
            return AssignConst(var, c, line=line)

        self.error(f"unexpected assignment right-hand side at {tok.text!r}")
        return None

    # -------- declarations --------

    def method_body(self) -> tuple[Statement, ...]:
        stmts: list[Statement] = []
        while not self.at("sym", "}") and not self.at("eof"):
            before = self.pos
            stmt = self.statement()
            if stmt is not None:
                stmts.append(stmt)
            else:
                self.sync_to(";", "}")
                if self.pos == before:  # safety against stalls
                    self.next()
        self.expect("sym", "}")
        return tuple(stmts)

    def class_decl(self, declared: set[str]) -> Optional[IRClass]:
        name = self.qname()
        if name is None:
            self.error("expected class name")
            self.sync_to("}")
            return None
        if self.expect("sym", "{") is None:
            self.sync_to("}")
            return None
        fields: list[FieldDecl] = []
        methods: list[IRMethod] = []
        field_names: set[str] = set()
        method_sigs: set[MethodSignature] = set()
        while not self.at("sym", "}") and not self.at("eof"):
            tok = self.peek()
            if tok.kind == "keyword" and tok.text == "field":
                self.next()
                ftype = self.type_name()
                fname = self.expect("ident")
                if ftype is None or fname is None or self.expect("sym", ";") is None:
                    self.sync_to(";", "}")
                    continue
                if fname.text in field_names:
                    self.diags.append(
                        Diagnostic(
                            DUPLICATE_FIELD,
                            f"field {fname.text} declared twice",
                            fname.line,
                            fname.col,
                            locus=name,
                        )
                    )
                    continue
                field_names.add(fname.text)
                fields.append(FieldDecl(ftype, fname.text))
                continue
            method = self.method_decl(name, method_sigs)
            if method is not None:
                methods.append(method)
        self.expect("sym", "}")
        if name in declared:
            self.diags.append(
                Diagnostic(DUPLICATE_CLASS, f"class {name} declared twice", 0, 0)
            )
            return None
        declared.add(name)
        return IRClass(name, tuple(fields), tuple(methods))

    def method_decl(
        self, class_name: str, seen: set[MethodSignature]
    ) -> Optional[IRMethod]:
        start = self.peek()
        is_static = self.accept("keyword", "static") is not None
        ret = self.type_name()
        if ret is None:
            self.error("expected method return type")
            self.sync_to(";", "}")
            return None
        mname = self.expect("ident")
        if mname is None or self.expect("sym", "(") is None:
            self.sync_to(";", "}")
            return None
        params: list[str] = []
        if not self.at("sym", ")"):
            while True:
                p = self.type_name()
                if p is None:
                    self.error("expected parameter type")
                    self.sync_to(")")
                    break
                params.append(p)
                if not self.accept("sym", ","):
                    break
        self.expect("sym", ")")
        if self.expect("sym", "{") is None:
            self.sync_to("}")
            return None
        body = self.method_body()
        sig = MethodSignature(class_name, mname.text, tuple(params), ret, is_static)
        if sig in seen:
            self.diags.append(
                Diagnostic(
                    DUPLICATE_METHOD,
                    f"method {sig} declared twice",
                    start.line,
                    start.col,
                    locus=class_name,
                )
            )
            return None
        seen.add(sig)
        return IRMethod(sig, body)

    def program(self) -> IRProgram:
        classes: dict[str, IRClass] = {}
        framework: list[MethodSignature] = []
        declared: set[str] = set()
        while not self.at("eof"):
            tok = self.peek()
            if tok.kind == "keyword" and tok.text == "framework":
                self.next()
                is_static = self.accept("keyword", "static") is not None
                ref = self.member_ref(is_static)
                if not isinstance(ref, MethodSignature):
                    self.error("expected method signature after framework")
                    self.sync_to(";")
                    continue
                self.expect("sym", ";")
                framework.append(ref)
            elif tok.kind == "keyword" and tok.text == "class":
                self.next()
                cls = self.class_decl(declared)
                if cls is not None:
                    classes[cls.name] = cls
            else:
                self.error(f"expected declaration, found {tok.text!r}")
                self.next()
        return IRProgram(classes, frozenset(framework))


def parse_program(text: str, resolve: bool = True) -> ParseResult:
    """Parse IR source text.  Diagnostics cover syntax errors plus
    unresolved callee references; the program is returned whenever the
    overall structure could be recovered.  Pass ``resolve=False`` for a
    unit that will be merged with others before reference resolution."""
    tokens, diags = _lex(text)
    parser = _Parser(tokens)
    program = parser.program()
    diags = diags + parser.diags
    if resolve and not any(d.code == SYNTAX_ERROR for d in diags):
        diags += _resolution_diagnostics(program)
    return ParseResult(program, diags)


def parse_statements(text: str) -> tuple[list[Statement], list[Diagnostic]]:
    """Parse a bare statement sequence (one per line, as embedded in suite
    manifests).  No callee resolution is performed."""
    tokens, diags = _lex(text)
    parser = _Parser(tokens)
    stmts: list[Statement] = []
    while not parser.at("eof"):
        before = parser.pos
        stmt = parser.statement()
        if stmt is not None:
            stmts.append(stmt)
        else:
            parser.sync_to(";")
            if parser.pos == before:
                parser.next()
    return stmts, diags + parser.diags


def merge_programs(programs: list[IRProgram]) -> tuple[IRProgram, list[Diagnostic]]:
    """Union several parsed units into one program (one app corpus).
    Callee references may cross units; run validate_program on the result
    to resolve them."""
    classes: dict[str, IRClass] = {}
    framework: set[MethodSignature] = set()
    diags: list[Diagnostic] = []
    for p in programs:
        for name, cls in p.classes.items():
            if name in classes:
                diags.append(
                    Diagnostic(DUPLICATE_CLASS, f"class {name} declared in two units")
                )
                continue
            classes[name] = cls
        framework |= p.framework_api_list
    return IRProgram(classes, frozenset(framework)), diags


# ============================================================
# Validation
# ============================================================


def _locus(sig: MethodSignature, index: int) -> str:
    return f"{sig.declaring_class}.{sig.name}#{index}"


def _resolution_diagnostics(program: IRProgram) -> list[Diagnostic]:
    """Callee / field reference resolution (IRProgram invariants)."""
    diags: list[Diagnostic] = []
    defined = {m.signature for m in program.iter_methods()}
    for overlap in sorted(defined & program.framework_api_list, key=str):
        diags.append(
            Diagnostic(
                FRAMEWORK_OVERLAP,
                f"{overlap} is both defined and declared framework",
            )
        )
    for method in program.iter_methods():
        for i, stmt in enumerate(method.body):
            callee = None
            if isinstance(stmt, (AssignInvoke, InvokeVoid)):
                callee = stmt.callee
            if callee is None:
                continue
            if callee in defined or callee in program.framework_api_list:
                continue
            diags.append(
                Diagnostic(
                    UNRESOLVED_REFERENCE,
                    f"callee {callee} resolves to no defined method or framework API",
                    stmt.line,
                    0,
                    locus=_locus(method.signature, i),
                )
            )
    return diags


def _stmt_successors(body: tuple[Statement, ...]) -> list[list[int]]:
    labels = {s.name: i for i, s in enumerate(body) if isinstance(s, Label)}
    succs: list[list[int]] = []
    for i, stmt in enumerate(body):
        out: list[int] = []
        if isinstance(stmt, (Return, ReturnVoid)):
            pass
        elif isinstance(stmt, Goto):
            if stmt.target in labels:
                out.append(labels[stmt.target])
        elif isinstance(stmt, If):
            if i + 1 < len(body):
                out.append(i + 1)
            if stmt.target in labels:
                out.append(labels[stmt.target])
        else:
            if i + 1 < len(body):
                out.append(i + 1)
        succs.append(out)
    return succs


def _reachable(succs: list[list[int]]) -> set[int]:
    seen: set[int] = set()
    work = [0] if succs else []
    while work:
        i = work.pop()
        if i in seen:
            continue
        seen.add(i)
        work.extend(succs[i])
    return seen


def _check_definite_assignment(method: IRMethod) -> list[Diagnostic]:
    """Forward must-analysis over statements: a use is flagged when some
    path from entry reaches it without defining the variable."""
    body = method.body
    if not body:
        return []
    diags: list[Diagnostic] = []
    all_vars = {s.def_var for s in body if s.def_var} | {
        u for s in body for u in s.uses
    }
    never_defined = {
        u for s in body for u in s.uses
    } - {s.def_var for s in body if s.def_var}
    succs = _stmt_successors(body)
    reachable = _reachable(succs)
    for i, stmt in enumerate(body):
        if i not in reachable:
            continue  # no path reaches dead code, so nothing to violate
        for u in stmt.uses:
            if u in never_defined:
                diags.append(
                    Diagnostic(
                        UNRESOLVED_REFERENCE,
                        f"variable {u} is never defined",
                        stmt.line,
                        0,
                        locus=_locus(method.signature, i),
                    )
                )
    preds: list[list[int]] = [[] for _ in body]
    for i, out in enumerate(succs):
        for j in out:
            preds[j].append(i)

    # definitely-assigned-before(statement); fixpoint with set intersection
    top = frozenset(all_vars)
    before: list[frozenset[str]] = [top] * len(body)
    before[0] = frozenset()
    changed = True
    while changed:
        changed = False
        for i in range(len(body)):
            if i not in reachable:
                continue
            if i == 0:
                inset: frozenset[str] = frozenset()
            else:
                ins = [
                    before[p] | ({body[p].def_var} if body[p].def_var else set())
                    for p in preds[i]
                    if p in reachable
                ]
                inset = frozenset.intersection(*ins) if ins else frozenset()
            if inset != before[i]:
                before[i] = inset
                changed = True

    for i, stmt in enumerate(body):
        if i not in reachable:
            continue
        for u in stmt.uses:
            if u in never_defined:
                continue  # already reported above
            if u not in before[i]:
                diags.append(
                    Diagnostic(
                        USE_BEFORE_DEF,
                        f"variable {u} may be used before assignment",
                        stmt.line,
                        0,
                        locus=_locus(method.signature, i),
                    )
                )
    return diags


def _check_method(program: IRProgram, method: IRMethod) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    sig = method.signature
    body = method.body

    # labels referenced by If/Goto exist exactly once
    label_counts: dict[str, int] = {}
    for s in body:
        if isinstance(s, Label):
            label_counts[s.name] = label_counts.get(s.name, 0) + 1
    for name, count in sorted(label_counts.items()):
        if count > 1:
            diags.append(
                Diagnostic(
                    DUPLICATE_LABEL,
                    f"label {name} defined {count} times",
                    locus=f"{sig.declaring_class}.{sig.name}",
                )
            )
    for i, s in enumerate(body):
        target = s.target if isinstance(s, (If, Goto)) else None
        if target is not None and target not in label_counts:
            diags.append(
                Diagnostic(
                    MISSING_LABEL,
                    f"jump to undefined label {target}",
                    s.line,
                    0,
                    locus=_locus(sig, i),
                )
            )

    # identity statements
    seen_this = False
    seen_params: set[int] = set()
    for i, s in enumerate(body):
        if isinstance(s, IdentityThis):
            if sig.is_static:
                diags.append(
                    Diagnostic(
                        IDENTITY_THIS_IN_STATIC,
                        "@this in a static method",
                        s.line,
                        0,
                        locus=_locus(sig, i),
                    )
                )
            if seen_this:
                diags.append(
                    Diagnostic(
                        DUPLICATE_IDENTITY_THIS,
                        "more than one @this identity statement",
                        s.line,
                        0,
                        locus=_locus(sig, i),
                    )
                )
            seen_this = True
        elif isinstance(s, IdentityParam):
            if s.index in seen_params:
                diags.append(
                    Diagnostic(
                        DUPLICATE_PARAM_INDEX,
                        f"@parameter{s.index} bound twice",
                        s.line,
                        0,
                        locus=_locus(sig, i),
                    )
                )
            if s.index >= sig.arity:
                diags.append(
                    Diagnostic(
                        BAD_PARAM_INDEX,
                        f"@parameter{s.index} exceeds arity {sig.arity}",
                        s.line,
                        0,
                        locus=_locus(sig, i),
                    )
                )
            seen_params.add(s.index)

    # invoke arity; app-class field references must be declared
    for i, s in enumerate(body):
        if isinstance(s, (AssignInvoke, InvokeVoid)):
            if len(s.args) != s.callee.arity:
                diags.append(
                    Diagnostic(
                        ARITY_MISMATCH,
                        f"{s.callee} called with {len(s.args)} argument(s)",
                        s.line,
                        0,
                        locus=_locus(sig, i),
                    )
                )
        fieldsig = s.fieldsig if isinstance(s, (AssignFieldLoad, FieldStore)) else None
        if fieldsig is not None and program.is_app_class(fieldsig.declaring_class):
            cls = program.classes[fieldsig.declaring_class]
            decl = cls.field_decl(fieldsig.name)
            if decl is None or decl.type_name != fieldsig.type_name:
                diags.append(
                    Diagnostic(
                        UNKNOWN_FIELD,
                        f"field {fieldsig} not declared",
                        s.line,
                        0,
                        locus=_locus(sig, i),
                    )
                )

    diags += _check_definite_assignment(method)
    return diags


def validate_program(program: IRProgram) -> list[Diagnostic]:
    """Empty list iff all statement/method/program invariants hold."""
    diags = _resolution_diagnostics(program)
    for method in program.iter_methods():
        diags += _check_method(program, method)
    return diags
