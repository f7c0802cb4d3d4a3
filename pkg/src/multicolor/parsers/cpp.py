"""Best-effort C++ structure extraction with a handwritten tokenizer.

The scanner understands enough of the language to recover namespaces,
classes/structs with their base-specifier lists, function declarations and
definitions, ``#include`` directives and call expressions inside function
bodies. Preprocessor conditionals are ignored, so both branches of an
``#if``/``#else`` are scanned.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass
from typing import Optional

from ..model import EntityKind, Language, RelationKind, RepoPath
from .base import Entity, ParsedUnit, UnitBuilder

_TOKEN = re.compile(
    r"""
    (?P<pp>^[ \t]*\#(?:\\\r?\n|[^\n])*)
  | (?P<lc>//[^\n]*)
  | (?P<bc>/\*.*?\*/)
  | (?P<raw>R"(?P<delim>[^()\\\s]{0,16})\(.*?\)(?P=delim)")
  | (?P<str>(?:u8|[uUL])?"(?:\\.|[^"\\\n])*")
  | (?P<chr>'(?:\\.|[^'\\\n])*')
  | (?P<id>[A-Za-z_]\w*)
  | (?P<num>\.?\d(?:[\w.']|[eEpP][+-])*)
  | (?P<op>::|->|[^\s\w])
  | (?P<ws>\s+)
    """,
    re.VERBOSE | re.MULTILINE | re.DOTALL,
)

_INCLUDE = re.compile(r'^[ \t]*#[ \t]*include[ \t]*(?:"([^"]+)"|<([^>]+)>)')

_NOT_CALLS = frozenset(
    """
    if for while switch return sizeof catch alignof alignas decltype static_cast
    dynamic_cast reinterpret_cast const_cast typeid new delete throw noexcept
    static_assert defined do else case default operator using typedef template
    typename class struct union enum namespace public private protected virtual
    void int char bool float double long short unsigned signed auto const
    """.split()
)
_ACCESS_LABELS = frozenset(
    {"public", "protected", "private", "signals", "slots", "Q_SIGNALS", "Q_SLOTS"}
)
_DECL_SKIP = frozenset({"typedef", "using", "friend", "static_assert", "return"})
_MACRO = re.compile(r"^[A-Z][A-Z0-9_]+$")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int


@dataclass
class _Scope:
    kind: str  # file | namespace | class | extern | function | block
    qual: list[str]
    entity: Optional[Entity] = None
    default_access: str = "private"
    owner: Optional[str] = None  # id that call sites are attributed to


def _tokenize(source: str) -> list[_Tok]:
    newlines = [m.start() for m in re.finditer("\n", source)]
    out: list[_Tok] = []
    for m in _TOKEN.finditer(source):
        kind = m.lastgroup
        if kind in ("ws", "lc", "bc"):
            continue
        if kind == "delim":
            kind = "raw"
        line = bisect.bisect_right(newlines, m.start() - 1) + 1
        if kind in ("raw", "chr"):
            kind = "str"
        out.append(_Tok(kind, m.group(0), line))
    return out


def _split_top(tokens: list[_Tok], sep: str) -> list[list[_Tok]]:
    parts: list[list[_Tok]] = [[]]
    depth = 0
    for t in tokens:
        if t.text in "(<[":
            depth += 1
        elif t.text in ")>]":
            depth -= 1
        if t.text == sep and depth == 0:
            parts.append([])
        else:
            parts[-1].append(t)
    return [p for p in parts if p]


def _strip_prefix(header: list[_Tok]) -> list[_Tok]:
    """Drop leading template parameter lists, attributes and macro invocations."""
    i = 0
    while i < len(header):
        t = header[i]
        if t.text == "template" and i + 1 < len(header) and header[i + 1].text == "<":
            i = _skip_group(header, i + 1, "<", ">")
        elif t.text == "[" and i + 1 < len(header) and header[i + 1].text == "[":
            i = _skip_group(header, i, "[", "]")
        elif (
            t.kind == "id"
            and _MACRO.match(t.text)
            and i + 1 < len(header)
            and header[i + 1].text == "("
        ):
            j = _skip_group(header, i + 1, "(", ")")
            if j >= len(header):
                break
            i = j
        elif (
            t.kind == "id"
            and _MACRO.match(t.text)
            and i + 1 < len(header)
            and header[i + 1].kind == "id"
        ):
            i += 1
        else:
            break
    return header[i:]


def _skip_group(tokens: list[_Tok], i: int, open_: str, close: str) -> int:
    depth = 0
    while i < len(tokens):
        if tokens[i].text == open_:
            depth += 1
        elif tokens[i].text == close:
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return i


def _first_top(tokens: list[_Tok], text: str) -> int:
    depth = 0
    for i, t in enumerate(tokens):
        if t.text == text and depth == 0:
            return i
        if t.text in "([{":
            depth += 1
        elif t.text in ")]}":
            depth -= 1
    return -1


def _function_name(header: list[_Tok]) -> Optional[tuple[list[str], str]]:
    """Qualifier path and name of a function whose parameter list opens at the first top-level '('."""
    paren = _first_top(header, "(")
    if paren <= 0:
        return None
    eq = _first_top(header, "=")
    ops = [i for i, t in enumerate(header[:paren]) if t.text == "operator"]
    if eq != -1 and eq < paren and not ops:
        return None
    if ops:
        k = ops[-1]
        name = "operator" + "".join(t.text for t in header[k + 1 : paren])
        if paren == k + 1:
            name = "operator()"
        j = k - 1
    else:
        k = paren - 1
        if header[k].kind != "id" or header[k].text in _NOT_CALLS:
            return None
        name = header[k].text
        j = k - 1
        if j >= 0 and header[j].text == "~":
            name = "~" + name
            j -= 1
    qual: list[str] = []
    while j >= 1 and header[j].text == "::" and header[j - 1].kind == "id":
        qual.insert(0, header[j - 1].text)
        j -= 2
    return qual, name


class _CppParser:
    def __init__(self, file: RepoPath, source: str):
        self.b = UnitBuilder(file, Language.CPP, source)
        self.toks = _tokenize(source)
        file_scope = _Scope("file", [], owner=self.b.file_id)
        self.stack: list[_Scope] = [file_scope]
        self.header: list[_Tok] = []

    @property
    def top(self) -> _Scope:
        return self.stack[-1]

    def _enclosing_entity(self) -> Optional[Entity]:
        for sc in reversed(self.stack):
            if sc.entity is not None:
                return sc.entity
        return None

    def run(self) -> ParsedUnit:
        toks = self.toks
        for i, tok in enumerate(toks):
            if tok.kind == "pp":
                self._directive(tok)
                continue
            if self.top.kind in ("function", "block"):
                self._body_token(toks, i)
                continue
            text = tok.text
            if text == ";":
                self._declaration(tok)
                self.header = []
            elif text == "{":
                self._open(tok)
                self.header = []
            elif text == "}":
                self._close(tok)
                self.header = []
            elif (
                text == ":"
                and self.top.kind == "class"
                and self.header
                and self.header[-1].text in _ACCESS_LABELS
            ):
                self.header = []
            else:
                self.header.append(tok)
        if len(self.stack) > 1:
            self.b.warn(len(self.stack) - 1)
            last = toks[-1].line if toks else 1
            while len(self.stack) > 1:
                sc = self.stack.pop()
                if sc.entity is not None:
                    self.b.set_end(sc.entity, last)
        return self.b.unit

    def _directive(self, tok: _Tok) -> None:
        m = _INCLUDE.match(tok.text)
        if m:
            quoted, system = m.group(1), m.group(2)
            self.b.add_relation(
                RelationKind.IMPORTS,
                self.b.file_id,
                (quoted or system).strip(),
                {"system": system is not None},
            )

    def _body_token(self, toks: list[_Tok], i: int) -> None:
        tok = toks[i]
        if tok.text == "{":
            self.stack.append(_Scope("block", self.top.qual, owner=self.top.owner))
        elif tok.text == "}":
            self._close(tok)
        elif (
            tok.kind == "id"
            and tok.text not in _NOT_CALLS
            and i + 1 < len(toks)
            and toks[i + 1].text == "("
            and not (i > 0 and toks[i - 1].text in ("~",))
        ):
            self.b.add_relation(RelationKind.INVOKES, self.top.owner, tok.text)

    def _open(self, brace: _Tok) -> None:
        header = _strip_prefix(self.header)
        texts = [t.text for t in header]
        start = header[0].line if header else brace.line
        top = self.top
        if "namespace" in texts:
            k = texts.index("namespace")
            names = [t.text for t in header[k + 1 :] if t.kind == "id"]
            self.stack.append(_Scope("namespace", top.qual + names, owner=top.owner))
            return
        if texts[:1] == ["extern"] and any(t.kind == "str" for t in header):
            self.stack.append(_Scope("extern", top.qual, owner=top.owner))
            return
        cls = self._class_head(header)
        if cls is not None:
            keyword, name, bases = cls
            parent = self._enclosing_entity()
            base_id = self.b.child_id(None, "::".join(top.qual + [name]))
            ent = self.b.add_entity(
                EntityKind.CLASS, name, start, brace.line,
                parent=parent.qualified_id if parent else None,
                base_id=base_id,
                attrs={"keyword": keyword},
            )
            default = "public" if keyword == "struct" else "private"
            for base, access in bases:
                access = access or default
                self.b.add_relation(RelationKind.INHERITS, ent.qualified_id, base, {"access": access})
            self.stack.append(
                _Scope("class", top.qual + [name], entity=ent, default_access=default, owner=ent.qualified_id)
            )
            return
        if "enum" in texts or "union" in texts or "class" in texts or "struct" in texts:
            self.stack.append(_Scope("block", top.qual, owner=top.owner))
            return
        fn = _function_name(header)
        if fn is not None:
            ent = self._function(fn, start, brace.line, definition=True)
            self.stack.append(_Scope("function", top.qual, entity=ent, owner=ent.qualified_id))
            return
        self.stack.append(_Scope("block", top.qual, owner=top.owner))

    def _class_head(self, header: list[_Tok]):
        texts = [t.text for t in header]
        kw_at = next((i for i, t in enumerate(texts) if t in ("class", "struct")), -1)
        if kw_at == -1 or "enum" in texts[:kw_at] or "(" in texts[:kw_at] or "=" in texts[:kw_at]:
            return None
        rest = header[kw_at + 1 :]
        colon = next((i for i, t in enumerate(rest) if t.text == ":"), len(rest))
        names = [t.text for t in rest[:colon] if t.kind == "id" and t.text != "final"]
        # skip alignas(...) and export macros; the class name is the last identifier
        names = [n for n in names if n != "alignas"]
        if not names:
            return None
        bases: list[tuple[str, Optional[str]]] = []
        for spec in _split_top(rest[colon + 1 :], ","):
            access = next((t.text for t in spec if t.text in ("public", "protected", "private")), None)
            idents = []
            for t in spec:
                if t.text == "<":
                    break
                if t.kind == "id" and t.text not in ("public", "protected", "private", "virtual"):
                    idents.append(t.text)
            if idents:
                bases.append((idents[-1], access))
        return texts[kw_at], names[-1], bases

    def _function(self, fn: tuple[list[str], str], start: int, end: int, definition: bool) -> Entity:
        qual, name = fn
        top = self.top
        base_id = self.b.child_id(None, "::".join(top.qual + qual + [name]))
        owner = self.b.lookup(self.b.child_id(None, "::".join(top.qual + qual))) if qual else None
        existing = self.b.lookup(base_id)
        if definition and existing is not None and existing.attrs.get("declaration"):
            existing.attrs.pop("declaration")
            existing.span = (start, max(start, end))
            return existing
        parent = owner or self._enclosing_entity()
        attrs = {} if definition else {"declaration": True}
        return self.b.add_entity(
            EntityKind.FUNCTION, name, start, end,
            parent=parent.qualified_id if parent else None,
            base_id=base_id,
            attrs=attrs,
        )

    def _declaration(self, semi: _Tok) -> None:
        header = _strip_prefix(self.header)
        if not header:
            return
        texts = [t.text for t in header]
        if texts[0] in _DECL_SKIP or "class" in texts or "struct" in texts or "enum" in texts:
            return
        fn = _function_name(header)
        if fn is None:
            return
        self._function(fn, header[0].line, semi.line, definition=False)

    def _close(self, brace: _Tok) -> None:
        if len(self.stack) == 1:
            self.b.warn()
            return
        sc = self.stack.pop()
        if sc.entity is not None and sc.kind in ("class", "function"):
            self.b.set_end(sc.entity, brace.line)


def parse_cpp(file: RepoPath, source: str) -> ParsedUnit:
    unit = _CppParser(file, source).run()
    for ent in unit.entities:
        ent.attrs.pop("declaration", None)
    return unit
