"""Python structure extraction on top of the stdlib ``ast`` module."""

from __future__ import annotations

import ast
import logging
import re
import warnings
from typing import Optional

from ..model import EntityKind, Language, RelationKind, RepoPath
from .base import ParsedUnit, UnitBuilder

logger = logging.getLogger(__name__)

# Lines that continue the previous top-level statement rather than start one.
_CONTINUATION = re.compile(r"(else|elif|except|finally)\b|[)\]}#]")


def _terminal_name(node: ast.AST) -> Optional[str]:
    while isinstance(node, (ast.Subscript, ast.Call)):
        node = node.value if isinstance(node, ast.Subscript) else node.func
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        return node.attr
    return None


class _Visitor(ast.NodeVisitor):
    def __init__(self, builder: UnitBuilder):
        self.b = builder
        self.scope: list[str] = []

    @property
    def owner(self) -> str:
        return self.scope[-1] if self.scope else self.b.file_id

    def _define(self, node, kind: EntityKind) -> None:
        start = min([node.lineno] + [d.lineno for d in node.decorator_list])
        parent = self.scope[-1] if self.scope else None
        ent = self.b.add_entity(kind, node.name, start, node.end_lineno or node.lineno, parent)
        for dec in node.decorator_list:
            self.visit(dec)
        if kind is EntityKind.CLASS:
            for base in node.bases:
                name = _terminal_name(base)
                if name:
                    self.b.add_relation(RelationKind.INHERITS, ent.qualified_id, name)
                self.visit(base)
        self.scope.append(ent.qualified_id)
        for child in node.body:
            self.visit(child)
        self.scope.pop()
        if kind is EntityKind.FUNCTION:
            for default in node.args.defaults + [d for d in node.args.kw_defaults if d is not None]:
                self.visit(default)

    def visit_ClassDef(self, node: ast.ClassDef) -> None:
        self._define(node, EntityKind.CLASS)

    def visit_FunctionDef(self, node: ast.FunctionDef) -> None:
        self._define(node, EntityKind.FUNCTION)

    visit_AsyncFunctionDef = visit_FunctionDef

    def visit_Import(self, node: ast.Import) -> None:
        for alias in node.names:
            self.b.add_relation(RelationKind.IMPORTS, self.b.file_id, alias.name, {"level": 0})

    def visit_ImportFrom(self, node: ast.ImportFrom) -> None:
        ref = "." * node.level + (node.module or "")
        names = sorted(a.name for a in node.names if a.name != "*")
        self.b.add_relation(
            RelationKind.IMPORTS, self.b.file_id, ref, {"level": node.level, "names": names}
        )

    def visit_Call(self, node: ast.Call) -> None:
        name = _terminal_name(node.func)
        if name:
            self.b.add_relation(RelationKind.INVOKES, self.owner, name)
        self.generic_visit(node)


def _regions(lines: list[str]) -> list[tuple[int, int]]:
    """Split source into top-level statement regions as (start, end) line indices."""
    starts = []
    decorated = False
    for i, line in enumerate(lines):
        if not line.strip() or line[0] in " \t":
            continue
        if starts and (decorated or _CONTINUATION.match(line)):
            decorated = line.startswith("@")
            continue
        decorated = line.startswith("@")
        starts.append(i)
    if not starts:
        return []
    bounds = starts[1:] + [len(lines)]
    return list(zip(starts, bounds))


def _parse(source: str) -> ast.Module:
    # escape-sequence and similar warnings concern the analysed code, not us
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ast.parse(source)


def parse_python(file: RepoPath, source: str) -> ParsedUnit:
    """Extract classes, functions, imports, bases and call sites from Python source.

    If the file does not parse as a whole it is split into top-level regions;
    each region that still fails is skipped and counted as a parse warning.
    """
    builder = UnitBuilder(file, Language.PYTHON, source)
    visitor = _Visitor(builder)
    try:
        trees = [_parse(source)]
    except (SyntaxError, ValueError):
        lines = source.splitlines(keepends=True)
        trees = []
        regions = _regions(lines)
        if not regions:
            builder.warn()
        for start, end in regions:
            chunk = "\n" * start + "".join(lines[start:end])
            try:
                trees.append(_parse(chunk))
            except (SyntaxError, ValueError):
                builder.warn()
        logger.debug("%s: recovered %d regions, %d warnings", file, len(trees), builder.unit.parse_warnings)
    for tree in trees:
        visitor.visit(tree)
    return builder.unit
