"""Language-neutral output of the per-language parsers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..model import EntityKind, Language, RelationKind, RepoPath, LEGAL_RELATIONS


@dataclass
class Entity:
    kind: EntityKind
    name: str
    span: tuple[int, int]
    qualified_id: str
    parent: Optional[str] = None
    attrs: dict[str, Any] = field(default_factory=dict)


@dataclass
class Relation:
    kind: RelationKind
    src: str
    dst_ref: str
    attrs: dict[str, Any] = field(default_factory=dict)


@dataclass
class ParsedUnit:
    file: RepoPath
    language: Language
    line_count: int
    entities: list[Entity] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)
    parse_warnings: int = 0
    fallback_used: bool = False

    @property
    def file_id(self) -> str:
        return str(self.file)

    def entity(self, qualified_id: str) -> Entity:
        for ent in self.entities:
            if ent.qualified_id == qualified_id:
                return ent
        raise KeyError(qualified_id)


class UnitBuilder:
    """Accumulates entities and relations while guaranteeing unique ids.

    A repeated id (overloads, sibling QML objects of the same type) gets a
    ``#n`` suffix; the entity's ``name`` stays the bare terminal name.
    """

    def __init__(self, file: RepoPath, language: Language, source: str):
        self.unit = ParsedUnit(file, language, max(1, source.count("\n") + (0 if source.endswith("\n") else 1)))
        self._ids: dict[str, Entity] = {}
        self._seen_rel: set[tuple[RelationKind, str, str]] = set()

    @property
    def file_id(self) -> str:
        return self.unit.file_id

    def child_id(self, parent: Optional[str], name: str) -> str:
        return f"{parent or self.file_id}::{name}"

    def lookup(self, qualified_id: str) -> Optional[Entity]:
        return self._ids.get(qualified_id)

    def add_entity(
        self,
        kind: EntityKind,
        name: str,
        start: int,
        end: int,
        parent: Optional[str] = None,
        base_id: Optional[str] = None,
        attrs: Optional[dict[str, Any]] = None,
    ) -> Entity:
        base = base_id or self.child_id(parent, name)
        qid = base
        n = 2
        while qid in self._ids:
            qid = f"{base}#{n}"
            n += 1
        last = self.unit.line_count
        start = min(max(1, start), last)
        end = min(max(start, end), last)
        ent = Entity(kind, name, (start, end), qid, parent, dict(attrs or {}))
        self._ids[qid] = ent
        self.unit.entities.append(ent)
        if parent is not None:
            self.add_relation(RelationKind.CONTAINS, parent, qid)
        return ent

    def set_end(self, ent: Entity, end: int) -> None:
        end = min(max(ent.span[0], end), self.unit.line_count)
        ent.span = (ent.span[0], end)

    def add_relation(self, kind: RelationKind, src: str, dst_ref: str, attrs: Optional[dict[str, Any]] = None) -> None:
        if kind not in LEGAL_RELATIONS[self.unit.language]:
            raise ValueError(f"{kind.value} is not legal for {self.unit.language.value}")
        key = (kind, src, dst_ref)
        if key in self._seen_rel:
            return
        self._seen_rel.add(key)
        self.unit.relations.append(Relation(kind, src, dst_ref, dict(attrs or {})))

    def warn(self, n: int = 1) -> None:
        self.unit.parse_warnings += n
