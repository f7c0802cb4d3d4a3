"""Per-language parsers producing :class:`ParsedUnit` records."""

from __future__ import annotations

from typing import Callable, Optional

from ..model import Language, RepoPath
from .base import Entity, ParsedUnit, Relation, UnitBuilder
from .cpp import parse_cpp
from .python import parse_python
from .qml import parse_qml

PARSERS: dict[Language, Callable[[RepoPath, str], ParsedUnit]] = {
    Language.PYTHON: parse_python,
    Language.CPP: parse_cpp,
    Language.QML: parse_qml,
}


def parse_file(path: RepoPath, language: Language, source: str) -> Optional[ParsedUnit]:
    parser = PARSERS.get(language)
    return parser(path, source) if parser else None


__all__ = [
    "Entity",
    "ParsedUnit",
    "Relation",
    "UnitBuilder",
    "PARSERS",
    "parse_cpp",
    "parse_file",
    "parse_python",
    "parse_qml",
]
