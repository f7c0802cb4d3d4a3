"""QML object-tree extraction.

A small recursive-descent parser covers the declarative grammar (imports,
object declarations, property/signal/function members, bindings whose value
is an object or a list of objects). JavaScript in binding values and function
bodies is skipped as balanced token runs. When the grammar parse fails the
file is re-read with a line-oriented pattern extractor that recovers a subset
of the same entities.
"""

from __future__ import annotations

import bisect
import logging
import re
from typing import Optional

from ..model import EntityKind, Language, RelationKind, RepoPath
from .base import Entity, ParsedUnit, UnitBuilder

logger = logging.getLogger(__name__)

_TOKEN = re.compile(
    r"""
    (?P<lc>//[^\n]*)
  | (?P<bc>/\*.*?\*/)
  | (?P<str>"(?:\\.|[^"\\\n])*"|'(?:\\.|[^'\\\n])*'|`(?:\\.|[^`\\])*`)
  | (?P<id>[A-Za-z_$][\w$]*)
  | (?P<num>\d[\w.]*)
  | (?P<op>===|!==|==|!=|<=|>=|&&|\|\||=>|\+\+|--|[^\s\w])
  | (?P<ws>\s+)
    """,
    re.VERBOSE | re.DOTALL,
)

_OPEN = {"(": ")", "[": "]", "{": "}"}
# a binding value continues onto the next line after these
_CONTINUES = frozenset("+ - * / % = < > ! ? : . , && || == != === !== <= >= ( [ {".split())


class QmlSyntaxError(Exception):
    pass


class _Tok:
    __slots__ = ("kind", "text", "line")

    def __init__(self, kind: str, text: str, line: int):
        self.kind, self.text, self.line = kind, text, line

    def __repr__(self) -> str:
        return f"{self.text!r}@{self.line}"


def _tokenize(source: str) -> list[_Tok]:
    newlines = [m.start() for m in re.finditer("\n", source)]
    out = []
    for m in _TOKEN.finditer(source):
        if m.lastgroup in ("ws", "lc", "bc"):
            continue
        line = bisect.bisect_right(newlines, m.start() - 1) + 1
        out.append(_Tok(m.lastgroup, m.group(0), line))
    return out


def _import_relation(b: UnitBuilder, target: str, line_rest: str) -> None:
    quoted = target[:1] in "\"'"
    ref = target.strip("\"'")
    attrs: dict = {"quoted": quoted}
    m = re.search(r"\bas\s+(\w+)", line_rest)
    if m:
        attrs["alias"] = m.group(1)
    b.add_relation(RelationKind.IMPORTS, b.file_id, ref, attrs)


class _GrammarParser:
    def __init__(self, builder: UnitBuilder, source: str):
        self.b = builder
        self.toks = _tokenize(source)
        self.i = 0

    # token helpers
    def peek(self, k: int = 0) -> Optional[_Tok]:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise QmlSyntaxError("unexpected end of file")
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise QmlSyntaxError(f"expected {text!r}, got {tok!r}")
        return tok

    def _qualified(self) -> list[_Tok]:
        toks = [self.next()]
        if toks[0].kind != "id":
            raise QmlSyntaxError(f"expected identifier, got {toks[0]!r}")
        while self.peek() is not None and self.peek().text == "." and self.peek(1) is not None and self.peek(1).kind == "id":
            self.i += 1
            toks.append(self.next())
        return toks

    def _at_object(self) -> bool:
        """An object starts with an uppercase (possibly dotted) type name and '{' or 'on'."""
        j = self.i
        toks = self.toks
        if j >= len(toks) or toks[j].kind != "id":
            return False
        last = toks[j]
        j += 1
        while j + 1 < len(toks) and toks[j].text == "." and toks[j + 1].kind == "id":
            last = toks[j + 1]
            j += 2
        if not last.text[:1].isupper():
            return False
        if j < len(toks) and toks[j].text == "{":
            return True
        return j + 2 < len(toks) and toks[j].text == "on" and toks[j + 2].text == "{"

    def _skip_balanced(self) -> _Tok:
        open_tok = self.next()
        stack = [_OPEN[open_tok.text]]
        while stack:
            tok = self.next()
            if tok.text in _OPEN:
                stack.append(_OPEN[tok.text])
            elif tok.text in (")", "]", "}"):
                if tok.text != stack.pop():
                    raise QmlSyntaxError(f"mismatched {tok!r}")
        return tok

    def _rest_of_line(self, line: int) -> str:
        parts = []
        while self.peek() is not None and self.peek().line == line and self.peek().text not in (";",):
            parts.append(self.next().text)
        if self.peek() is not None and self.peek().text == ";":
            self.i += 1
        return " ".join(parts)

    # grammar
    def parse(self) -> None:
        while self.peek() is not None:
            tok = self.peek()
            if tok.text in ("import", "pragma") and tok.kind == "id":
                self.i += 1
                target = self.next()
                if tok.text == "import":
                    _import_relation(self.b, target.text, self._rest_of_line(target.line))
                else:
                    self._rest_of_line(target.line)
            elif tok.text == ";":
                self.i += 1
            elif self._at_object():
                self._object(None)
            else:
                raise QmlSyntaxError(f"unexpected {tok!r} at top level")

    def _object(self, parent: Optional[Entity], name_override: Optional[str] = None) -> Entity:
        type_toks = self._qualified()
        type_name = ".".join(t.text for t in type_toks)
        attrs: dict = {"type": type_name}
        if self.peek().text == "on":
            self.i += 1
            attrs["on"] = self.next().text
        self.expect("{")
        ent = self.b.add_entity(
            EntityKind.QML_COMPONENT,
            name_override or type_toks[-1].text,
            type_toks[0].line,
            type_toks[0].line,
            parent=parent.qualified_id if parent else None,
            attrs=attrs,
        )
        close = self._members(ent)
        self.b.set_end(ent, close.line)
        return ent

    def _members(self, owner: Entity) -> _Tok:
        while True:
            tok = self.peek()
            if tok is None:
                raise QmlSyntaxError("unterminated object")
            if tok.text == "}":
                return self.next()
            if tok.text == ";":
                self.i += 1
                continue
            if self._at_object():
                self._object(owner)
                continue
            if tok.kind != "id":
                raise QmlSyntaxError(f"unexpected {tok!r} in object body")
            word = tok.text
            nxt = self.peek(1)
            if word in ("default", "readonly", "required") and nxt is not None and nxt.kind == "id":
                self.i += 1
                continue
            if word == "property" and nxt is not None and nxt.text not in (":", "."):
                self._property(owner)
            elif word == "signal" and nxt is not None and nxt.kind == "id":
                self.i += 2
                if self.peek() is not None and self.peek().text == "(":
                    self._skip_balanced()
            elif word == "function" and nxt is not None and nxt.kind == "id":
                self._function(owner)
            elif word == "enum" and nxt is not None and nxt.kind == "id":
                self.i += 2
                self._skip_balanced()
            elif word == "component" and nxt is not None and nxt.kind == "id":
                self.i += 2
                self.expect(":")
                if not self._at_object():
                    raise QmlSyntaxError("inline component without object")
                self._object(owner, name_override=nxt.text)
            else:
                self._binding(owner)

    def _property(self, owner: Entity) -> None:
        self.i += 1
        self.next()  # type
        if self.peek() is not None and self.peek().text == "<":
            while self.next().text != ">":
                pass
        name = self.next()
        if name.kind != "id":
            raise QmlSyntaxError(f"bad property name {name!r}")
        owner.attrs.setdefault("properties", []).append(name.text)
        if self.peek() is not None and self.peek().text == ":":
            self.i += 1
            self._value(owner)

    def _function(self, owner: Entity) -> None:
        kw = self.next()
        name = self.next()
        if self.peek() is None or self.peek().text != "(":
            raise QmlSyntaxError("function without parameter list")
        self._skip_balanced()
        if self.peek() is not None and self.peek().text == ":":
            self.i += 1
            self._qualified()
        if self.peek() is None or self.peek().text != "{":
            raise QmlSyntaxError("function without body")
        close = self._skip_balanced()
        self.b.add_entity(EntityKind.FUNCTION, name.text, kw.line, close.line, parent=owner.qualified_id)

    def _binding(self, owner: Entity) -> None:
        name = ".".join(t.text for t in self._qualified())
        tok = self.peek()
        if tok is not None and tok.text == "{":
            # grouped property: anchors { fill: parent }
            self.i += 1
            owner.attrs.setdefault("bindings", []).append(name)
            self._members(owner)
            return
        self.expect(":")
        if name == "id":
            owner.attrs["id"] = self.next().text
            return
        owner.attrs.setdefault("bindings", []).append(name)
        self._value(owner)

    def _value(self, owner: Entity) -> None:
        tok = self.peek()
        if tok is None:
            raise QmlSyntaxError("binding without value")
        if self._at_object():
            self._object(owner)
            return
        if tok.text == "[":
            self._list(owner)
            return
        self._expression()

    def _list(self, owner: Entity) -> None:
        self.expect("[")
        while True:
            tok = self.peek()
            if tok is None:
                raise QmlSyntaxError("unterminated list")
            if tok.text == "]":
                self.i += 1
                return
            if tok.text == ",":
                self.i += 1
                continue
            if self._at_object():
                self._object(owner)
                continue
            while self.peek() is not None and self.peek().text not in (",", "]"):
                if self.peek().text in _OPEN:
                    self._skip_balanced()
                else:
                    self.i += 1

    def _expression(self) -> None:
        last: Optional[_Tok] = None
        while True:
            tok = self.peek()
            if tok is None:
                return
            if tok.text in (";",):
                self.i += 1
                return
            if tok.text in ("}", ")", "]"):
                if last is None:
                    raise QmlSyntaxError(f"empty expression before {tok!r}")
                return
            if last is not None and tok.line > last.line:
                if last.text not in _CONTINUES and tok.text not in _CONTINUES:
                    return
            if tok.text in _OPEN:
                last = self._skip_balanced()
            else:
                last = self.next()


# pattern-based fallback

_FB_IMPORT = re.compile(r"^\s*import\s+(\"[^\"]*\"|'[^']*'|[\w.]+)(.*)$")
_FB_OBJECT = re.compile(r"^\s*(?:[\w.]+\s*:\s*)?([A-Z][\w]*(?:\.[A-Z][\w]*)*|(?:[a-z]\w*\.)+[A-Z]\w*)\s*\{")
_FB_FUNCTION = re.compile(r"^\s*function\s+([A-Za-z_$][\w$]*)\s*\(")
_FB_STRIP = re.compile(r"//.*$|\"(?:\\.|[^\"\\])*\"|'(?:\\.|[^'\\])*'")


def _fallback(builder: UnitBuilder, source: str) -> None:
    # frames: (entity, depth before its '{', is_object); only object frames
    # may contain further entities, function and JS blocks are opaque
    frames: list[tuple[Optional[Entity], int, bool]] = []
    depth = 0
    for lineno, line in enumerate(source.splitlines(), 1):
        m = _FB_IMPORT.match(line)
        if m and not frames:
            _import_relation(builder, m.group(1), m.group(2))
            continue
        code = _FB_STRIP.sub("", line)
        innermost = frames[-1][0] if frames and frames[-1][2] else None
        opened: Optional[tuple[Entity, bool]] = None
        if not frames or innermost is not None:
            fm = _FB_FUNCTION.match(code)
            om = _FB_OBJECT.match(code)
            if fm and innermost is not None and "{" in code:
                ent = builder.add_entity(
                    EntityKind.FUNCTION, fm.group(1), lineno, lineno, parent=innermost.qualified_id
                )
                opened = (ent, False)
            elif om:
                type_name = om.group(1)
                ent = builder.add_entity(
                    EntityKind.QML_COMPONENT,
                    type_name.rsplit(".", 1)[-1],
                    lineno,
                    lineno,
                    parent=innermost.qualified_id if innermost else None,
                    attrs={"type": type_name},
                )
                opened = (ent, True)
        for ch in code:
            if ch == "{":
                if opened is not None:
                    frames.append((opened[0], depth, opened[1]))
                    opened = None
                else:
                    frames.append((None, depth, False))
                depth += 1
            elif ch == "}":
                depth -= 1
                if frames and frames[-1][1] == depth:
                    ent = frames.pop()[0]
                    if ent is not None:
                        builder.set_end(ent, lineno)
    last = builder.unit.line_count
    for ent, _, _ in frames:
        if ent is not None:
            builder.set_end(ent, last)


def parse_qml(file: RepoPath, source: str) -> ParsedUnit:
    builder = UnitBuilder(file, Language.QML, source)
    try:
        _GrammarParser(builder, source).parse()
        return builder.unit
    except QmlSyntaxError as exc:
        logger.debug("%s: grammar parse failed (%s); using pattern fallback", file, exc)
    builder = UnitBuilder(file, Language.QML, source)
    builder.unit.fallback_used = True
    builder.warn()
    _fallback(builder, source)
    return builder.unit
