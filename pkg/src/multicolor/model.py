"""Repository paths, code-entity vocabulary and issue records."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

from .errors import EmptyPath, IllegalSegment, InvalidIssue

_SEPARATORS = re.compile(r"[\\/]+")


class Language(str, Enum):
    PYTHON = "PYTHON"
    CPP = "CPP"
    QML = "QML"
    OTHER = "OTHER"


class EntityKind(str, Enum):
    DIRECTORY = "DIRECTORY"
    FILE = "FILE"
    CLASS = "CLASS"
    FUNCTION = "FUNCTION"
    QML_COMPONENT = "QML_COMPONENT"


class RelationKind(str, Enum):
    CONTAINS = "CONTAINS"
    IMPORTS = "IMPORTS"
    INHERITS = "INHERITS"
    INVOKES = "INVOKES"


# Which relation kinds each language may emit. QML expresses its object
# hierarchy through CONTAINS and has no inheritance or call edges.
LEGAL_RELATIONS: dict[Language, frozenset[RelationKind]] = {
    Language.PYTHON: frozenset(RelationKind),
    Language.CPP: frozenset(RelationKind),
    Language.QML: frozenset({RelationKind.CONTAINS, RelationKind.IMPORTS}),
    Language.OTHER: frozenset({RelationKind.CONTAINS}),
}

_EXTENSION_LANGUAGE = {
    "py": Language.PYTHON,
    "cpp": Language.CPP,
    "cc": Language.CPP,
    "cxx": Language.CPP,
    "h": Language.CPP,
    "hpp": Language.CPP,
    "qml": Language.QML,
}


@dataclass(frozen=True, order=True)
class RepoPath:
    """A component-qualified repository path.

    ``component`` is the repository name (first segment), ``segments`` the
    directories between it and the file, ``filename`` the base name.
    """

    component: str
    segments: tuple[str, ...]
    filename: str

    def __post_init__(self) -> None:
        if not self.component or not self.filename:
            raise EmptyPath("component and filename must be non-empty")
        for seg in (self.component, *self.segments, self.filename):
            if seg in (".", "..") or not seg:
                raise IllegalSegment(f"illegal path segment {seg!r}")

    def extension(self) -> str:
        if "." not in self.filename:
            return ""
        return self.filename.rsplit(".", 1)[1]

    @property
    def parts(self) -> tuple[str, ...]:
        return (self.component, *self.segments, self.filename)

    @property
    def parent(self) -> str:
        return "/".join((self.component, *self.segments))

    def directory_prefixes(self) -> list[str]:
        """Every ancestor directory, from the component down to the parent."""
        out = [self.component]
        for i in range(1, len(self.segments) + 1):
            out.append("/".join((self.component, *self.segments[:i])))
        return out

    def __str__(self) -> str:
        return "/".join(self.parts)


def split_segments(raw: str) -> list[str]:
    return [s for s in _SEPARATORS.split(raw.strip()) if s]


def parse_repo_path(raw: str) -> RepoPath:
    """Decompose ``raw`` into component, directory segments and filename.

    Both ``/`` and ``\\`` are accepted as separators; repeated separators
    collapse. A path needs at least a component and a filename.
    """
    parts = split_segments(raw or "")
    if not parts:
        raise EmptyPath(f"empty path: {raw!r}")
    bad = [p for p in parts if p in (".", "..")]
    if bad:
        raise IllegalSegment(f"{raw!r} contains relative segment {bad[0]!r}")
    if len(parts) < 2:
        raise EmptyPath(f"{raw!r} has no filename below its component")
    return RepoPath(parts[0], tuple(parts[1:-1]), parts[-1])


def path_has_prefix(path: str, prefix: str) -> bool:
    """True when ``prefix`` equals ``path`` or is one of its ancestor directories."""
    prefix = prefix.rstrip("/")
    return path == prefix or path.startswith(prefix + "/")


def detect_language(path: RepoPath | str) -> Language:
    name = path.filename if isinstance(path, RepoPath) else path.rsplit("/", 1)[-1]
    if "." not in name:
        return Language.OTHER
    return _EXTENSION_LANGUAGE.get(name.rsplit(".", 1)[1].lower(), Language.OTHER)


@dataclass(frozen=True)
class Issue:
    id: str
    title: str
    description: str
    program_name: str
    triage_category: str
    triage_assignment: str
    root_cause: Optional[str] = None
    feature_summary: Optional[str] = None
    priority: Optional[int] = None
    severity: Optional[int] = None
    root_cause_category: Optional[str] = None
    product_family: Optional[str] = None
    product_name: Optional[str] = None
    created_at: Optional[datetime] = None
    changed_files: tuple[RepoPath, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidIssue("issue id must be non-empty")
        for name in ("title", "description", "program_name", "triage_category", "triage_assignment"):
            if not (getattr(self, name) or "").strip():
                raise InvalidIssue(f"issue {self.id}: field {name!r} must be populated")

    @property
    def filters(self) -> tuple[str, str, str]:
        return (self.program_name, self.triage_category, self.triage_assignment)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Issue":
        data = dict(data)
        created = data.get("created_at")
        if isinstance(created, str) and created:
            data["created_at"] = datetime.fromisoformat(created.replace("Z", "+00:00"))
        data["changed_files"] = tuple(parse_repo_path(p) for p in data.get("changed_files") or ())
        known = cls.__dataclass_fields__.keys()
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidIssue(f"unknown issue fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidIssue(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if name == "changed_files":
                value = [str(p) for p in value]
            elif isinstance(value, datetime):
                value = value.isoformat()
            out[name] = value
        return out


# Optional fields that feed the richness score and the summary text.
OPTIONAL_ISSUE_FIELDS = (
    "root_cause",
    "feature_summary",
    "priority",
    "severity",
    "root_cause_category",
    "product_family",
    "product_name",
)


class Richness(str, Enum):
    RICH = "RICH"
    SPARSE = "SPARSE"


@dataclass(frozen=True)
class RichnessLabel:
    label: Richness
    completeness_score: float


def iter_issues(path: str | Path) -> Iterator[Issue]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield Issue.from_dict(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InvalidIssue(f"{path}:{lineno}: {exc}") from exc


def load_issues(path: str | Path) -> list[Issue]:
    return list(iter_issues(path))


def dump_issues(issues: Iterable[Issue], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for issue in issues:
            fh.write(json.dumps(issue.to_dict(), sort_keys=True) + "\n")
