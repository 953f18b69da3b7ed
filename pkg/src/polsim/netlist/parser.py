"""Lexer and recursive-descent parser for ``.net`` optical-table files.

Grammar::

    file      = { line } ;
    line      = [ stmt ] [ comment ] NEWLINE ;
    stmt      = "source" ident lines kvs
              | "elem"   ident lines [ "->" lines ] kvs
              | "det"    ident line  kvs
              | "herald" line outcome
              | "scan"   ident "on" line "from" num "to" num "steps" int
              | "set"    ident "=" value ;
    lines     = line-id { line-id } ;     outcome = "H"|"V"|"P"|"M"|"L"|"R" ;
    line-id   = ident ;  kvs = { ident "=" value } ;  value = num | ident ;

Line lists are read up to the arity of the named source or element kind, so
``elem pbs 2 3 -> 2p 3p extra`` is rejected at ``extra``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

KEYWORDS = ("source", "elem", "det", "herald", "scan", "set")
OUTCOMES = ("H", "V", "P", "M", "L", "R")

SOURCE_ARITY = {"spdc": 2, "coherent": 1, "single": 1, "vacuum": 1}
ELEM_ARITY = {"hwp": 1, "qwp": 1, "polarizer": 1, "mismatch": 1, "pauli": 1,
              "pbs": 2, "pbs45": 2}

_WORD_EXTRA = set("_.'+-")


class NetlistError(Exception):
    """A diagnostic with a source location (1-based line and column)."""

    code = "NetlistError"

    def __init__(self, message: str, line: int, column: int, length: int = 1):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.length = length

    def format(self, filename: str = "<netlist>") -> str:
        return f"{filename}:{self.line}:{self.column}: {self.code}: {self.message}"

    def __str__(self):
        return self.format()


class NetlistSyntaxError(NetlistError):
    code = "SyntaxError"

    def __init__(self, message, line, column, expected=(), length=1):
        super().__init__(message, line, column, length)
        self.expected = tuple(expected)


class UnknownKeyword(NetlistError):
    code = "UnknownKeyword"


class DuplicateSetKey(NetlistError):
    code = "DuplicateSetKey"


@dataclass(frozen=True)
class Token:
    kind: str  # "word", "=", "->"
    text: str
    line: int
    column: int

    @property
    def end(self) -> int:
        return self.column + len(self.text)


@dataclass(frozen=True)
class Loc:
    line: int
    column: int


@dataclass(frozen=True)
class Param:
    key: str
    value: float | str
    raw: str
    loc: Loc = field(compare=False)
    value_loc: Loc = field(compare=False)


@dataclass(frozen=True)
class LineRef:
    name: str
    loc: Loc = field(compare=False)


@dataclass(frozen=True)
class Statement:
    loc: Loc = field(compare=False)


@dataclass(frozen=True)
class SourceStmt(Statement):
    kind: str = ""
    kind_loc: Loc = field(default=None, compare=False)
    lines: tuple[LineRef, ...] = ()
    params: tuple[Param, ...] = ()


@dataclass(frozen=True)
class ElemStmt(Statement):
    kind: str = ""
    kind_loc: Loc = field(default=None, compare=False)
    lines: tuple[LineRef, ...] = ()
    outputs: tuple[LineRef, ...] = ()
    params: tuple[Param, ...] = ()


@dataclass(frozen=True)
class DetStmt(Statement):
    kind: str = ""
    kind_loc: Loc = field(default=None, compare=False)
    line: LineRef = None
    params: tuple[Param, ...] = ()


@dataclass(frozen=True)
class HeraldStmt(Statement):
    line: LineRef = None
    outcome: str = ""


@dataclass(frozen=True)
class ScanStmt(Statement):
    var: str = ""
    var_loc: Loc = field(default=None, compare=False)
    line: LineRef = None
    start: float = 0.0
    stop: float = 0.0
    steps: int = 0
    steps_loc: Loc = field(default=None, compare=False)


@dataclass(frozen=True)
class SetStmt(Statement):
    key: str = ""
    value: float | str = ""
    raw: str = ""
    key_loc: Loc = field(default=None, compare=False)
    value_loc: Loc = field(default=None, compare=False)


@dataclass(frozen=True)
class NetlistAst:
    statements: tuple[Statement, ...]


def _is_word_char(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch in _WORD_EXTRA)


def tokenize_line(text: str, lineno: int) -> list[Token]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\f\v":
            i += 1
        elif ch == "#":
            break
        elif text.startswith("->", i):
            tokens.append(Token("->", "->", lineno, i + 1))
            i += 2
        elif ch == "=":
            tokens.append(Token("=", "=", lineno, i + 1))
            i += 1
        elif _is_word_char(ch):
            j = i
            while j < n and _is_word_char(text[j]) and not text.startswith("->", j):
                j += 1
            tokens.append(Token("word", text[i:j], lineno, i + 1))
            i = j
        else:
            raise NetlistSyntaxError(f"unexpected character {ch!r}", lineno, i + 1,
                                     expected=("identifier", "number", "=", "->", "#"))
    return tokens


def parse_number(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    if value != value or value in (float("inf"), float("-inf")):
        return None
    return value


class _LineParser:
    def __init__(self, tokens: list[Token], lineno: int, line_len: int):
        self.toks = tokens
        self.pos = 0
        self.lineno = lineno
        self.eol_col = line_len + 1

    def peek(self, offset: int = 0) -> Token | None:
        k = self.pos + offset
        return self.toks[k] if k < len(self.toks) else None

    def error(self, expected, got: Token | None = None, message: str | None = None):
        got = got if got is not None else self.peek()
        exp = tuple(expected)
        if got is None:
            msg = message or f"unexpected end of line, expected {' or '.join(exp)}"
            raise NetlistSyntaxError(msg, self.lineno, self.eol_col, exp)
        msg = message or f"unexpected {got.text!r}, expected {' or '.join(exp)}"
        raise NetlistSyntaxError(msg, got.line, got.column, exp, len(got.text))

    def next_word(self, what: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != "word":
            self.error([what])
        self.pos += 1
        return tok

    def expect_word(self, text: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != "word" or tok.text != text:
            self.error([repr(text)])
        self.pos += 1
        return tok

    def expect_number(self, what: str = "number") -> tuple[float, Token]:
        tok = self.next_word(what)
        value = parse_number(tok.text)
        if value is None:
            self.error([what], tok)
        return value, tok

    def line_ref(self) -> LineRef:
        tok = self.peek()
        if tok is None or tok.kind != "word" or (self.peek(1) and self.peek(1).kind == "="):
            self.error(["line id"])
        self.pos += 1
        return LineRef(tok.text, Loc(tok.line, tok.column))

    def lines(self, arity: int | None) -> tuple[LineRef, ...]:
        out = [self.line_ref()]
        while True:
            if arity is not None and len(out) >= arity:
                break
            tok, nxt = self.peek(), self.peek(1)
            if tok is None or tok.kind != "word" or (nxt is not None and nxt.kind == "="):
                break
            out.append(self.line_ref())
        if arity is not None and len(out) < arity:
            self.error([f"{arity} line ids"])
        return tuple(out)

    def kvs(self) -> tuple[Param, ...]:
        out = []
        while self.peek() is not None:
            key = self.peek()
            if key.kind != "word":
                self.error(["key=value", "end of line"], key)
            eq = self.peek(1)
            if eq is None or eq.kind != "=":
                self.error(["key=value", "end of line"], key)
            self.pos += 2
            val = self.peek()
            if val is None or val.kind != "word":
                self.error(["value"])
            self.pos += 1
            num = parse_number(val.text)
            out.append(Param(key.text, num if num is not None else val.text, val.text,
                             Loc(key.line, key.column), Loc(val.line, val.column)))
        return tuple(out)

    def end(self):
        if self.peek() is not None:
            self.error(["end of line"])

    def statement(self) -> Statement:
        head = self.peek()
        if head.kind != "word" or head.text not in KEYWORDS:
            raise UnknownKeyword(f"unknown keyword {head.text!r} (expected one of "
                                 f"{', '.join(KEYWORDS)})", head.line, head.column, len(head.text))
        self.pos += 1
        loc = Loc(head.line, head.column)
        kw = head.text
        if kw == "source":
            kind = self.next_word("source kind")
            lines = self.lines(SOURCE_ARITY.get(kind.text))
            params = self.kvs()
            return SourceStmt(loc, kind.text, Loc(kind.line, kind.column), lines, params)
        if kw == "elem":
            kind = self.next_word("element kind")
            arity = ELEM_ARITY.get(kind.text)
            lines = self.lines(arity)
            outputs = ()
            tok = self.peek()
            if tok is not None and tok.kind == "->":
                self.pos += 1
                outputs = self.lines(len(lines) if arity is not None else None)
            params = self.kvs()
            return ElemStmt(loc, kind.text, Loc(kind.line, kind.column), lines, outputs, params)
        if kw == "det":
            kind = self.next_word("detector kind")
            line = self.line_ref()
            params = self.kvs()
            return DetStmt(loc, kind.text, Loc(kind.line, kind.column), line, params)
        if kw == "herald":
            line = self.line_ref()
            tok = self.peek()
            if tok is None or tok.kind != "word" or tok.text not in OUTCOMES:
                self.error(OUTCOMES)
            self.pos += 1
            self.end()
            return HeraldStmt(loc, line, tok.text)
        if kw == "scan":
            var = self.next_word("scan variable")
            self.expect_word("on")
            line = self.line_ref()
            self.expect_word("from")
            start, _ = self.expect_number()
            self.expect_word("to")
            stop, _ = self.expect_number()
            self.expect_word("steps")
            steps, tok = self.expect_number("integer")
            if steps != int(steps):
                self.error(["integer"], tok)
            self.end()
            return ScanStmt(loc, var.text, Loc(var.line, var.column), line, start, stop,
                            int(steps), Loc(tok.line, tok.column))
        # set
        key = self.next_word("setting name")
        tok = self.peek()
        if tok is None or tok.kind != "=":
            self.error(["="])
        self.pos += 1
        val = self.next_word("value")
        self.end()
        num = parse_number(val.text)
        return SetStmt(loc, key.text, num if num is not None else val.text, val.text,
                       Loc(key.line, key.column), Loc(val.line, val.column))


def parse(text: str | bytes) -> NetlistAst:
    """Parse netlist text into an AST; raises :class:`NetlistError` subclasses."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            # locate the offending byte
            prefix = text[:exc.start]
            line = prefix.count(b"\n") + 1
            col = exc.start - (prefix.rfind(b"\n") + 1) + 1
            raise NetlistSyntaxError("input is not valid UTF-8", line, col) from None
    statements = []
    seen_sets: dict[str, Loc] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        tokens = tokenize_line(raw, lineno)
        if not tokens:
            continue
        stmt = _LineParser(tokens, lineno, len(raw.rstrip("\r"))).statement()
        if isinstance(stmt, SetStmt):
            if stmt.key in seen_sets:
                first = seen_sets[stmt.key]
                raise DuplicateSetKey(f"setting {stmt.key!r} already set on line {first.line}",
                                      stmt.key_loc.line, stmt.key_loc.column, len(stmt.key))
            seen_sets[stmt.key] = stmt.loc
        statements.append(stmt)
    return NetlistAst(tuple(statements))
