"""Unified dependency graph over directories, files and code entities.

Per-language graphs share the same DIRECTORY/FILE skeleton; only the files of
the graph's language are parsed. A mixed-language graph is the merge of the
three single-language graphs built from the same root.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import posixpath
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional

from .errors import ConflictingKind, IoError, UnknownNode
from .model import (
    EntityKind,
    Language,
    RelationKind,
    RepoPath,
    detect_language,
    path_has_prefix,
)
from .parsers import ParsedUnit, parse_file

logger = logging.getLogger(__name__)

EdgeKey = tuple[str, str, RelationKind]


class GraphMode(str, Enum):
    PYTHON_ONLY = "PYTHON_ONLY"
    CPP_ONLY = "CPP_ONLY"
    QML_ONLY = "QML_ONLY"
    MIXED = "MIXED"

    @property
    def languages(self) -> tuple[Language, ...]:
        if self is GraphMode.MIXED:
            return (Language.PYTHON, Language.CPP, Language.QML)
        return (_MODE_LANGUAGE[self],)

    @classmethod
    def parse(cls, text: str) -> "GraphMode":
        """Accept ``mixed``, ``qml-only``, ``CPP_ONLY`` and similar spellings."""
        key = text.strip().upper().replace("-", "_")
        if key in ("PYTHON", "CPP", "QML"):
            key += "_ONLY"
        return cls(key)

    @property
    def cli_name(self) -> str:
        return self.value.lower().replace("_", "-")


_MODE_LANGUAGE = {
    GraphMode.PYTHON_ONLY: Language.PYTHON,
    GraphMode.CPP_ONLY: Language.CPP,
    GraphMode.QML_ONLY: Language.QML,
}
_LANGUAGE_MODE = {v: k for k, v in _MODE_LANGUAGE.items()}


class Direction(str, Enum):
    OUT = "OUT"
    IN = "IN"
    BOTH = "BOTH"


@dataclass
class Node:
    kind: EntityKind
    language: Language
    path: str
    attrs: dict[str, Any] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.attrs.get("name", "")


@dataclass
class DependencyGraph:
    mode: GraphMode
    nodes: dict[str, Node] = field(default_factory=dict)
    edges: dict[EdgeKey, dict[str, Any]] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)
    _adj: Optional[tuple[dict, dict]] = field(default=None, repr=False, compare=False)

    # construction

    def add_node(self, qid: str, kind: EntityKind, language: Language, path: str, **attrs: Any) -> None:
        self.nodes[qid] = Node(kind, language, path, attrs)
        self._adj = None

    def add_edge(self, src: str, dst: str, kind: RelationKind, **attrs: Any) -> None:
        key = (src, dst, kind)
        self.edges.setdefault(key, {}).update(attrs)
        self._adj = None

    # queries

    @property
    def snapshot_id(self) -> str:
        return self.meta.get("snapshot_id", "")

    @property
    def component(self) -> str:
        return self.meta.get("component", "")

    def edge_set(self) -> set[EdgeKey]:
        return set(self.edges)

    def files(self) -> list[str]:
        return sorted(q for q, n in self.nodes.items() if n.kind is EntityKind.FILE)

    def _adjacency(self) -> tuple[dict, dict]:
        if self._adj is None:
            out: dict[str, list[EdgeKey]] = defaultdict(list)
            inc: dict[str, list[EdgeKey]] = defaultdict(list)
            for key in sorted(self.edges):
                out[key[0]].append(key)
                inc[key[1]].append(key)
            self._adj = (out, inc)
        return self._adj

    def out_edges(self, qid: str) -> list[EdgeKey]:
        return self._adjacency()[0].get(qid, [])

    def in_edges(self, qid: str) -> list[EdgeKey]:
        return self._adjacency()[1].get(qid, [])

    def file_of(self, qid: str) -> Optional[str]:
        """The FILE node id an entity lives in (the node itself for files)."""
        node = self.nodes.get(qid)
        if node is None or node.kind is EntityKind.DIRECTORY:
            return None
        return node.path

    def induced(self, keep: Iterable[str]) -> "DependencyGraph":
        keep = set(keep)
        sub = DependencyGraph(self.mode, meta=dict(self.meta))
        for qid in sorted(keep):
            n = self.nodes[qid]
            sub.nodes[qid] = Node(n.kind, n.language, n.path, dict(n.attrs))
        for key, attrs in self.edges.items():
            if key[0] in keep and key[1] in keep:
                sub.edges[key] = dict(attrs)
        return sub

    # serialization

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "meta": self.meta,
            "nodes": [
                {"id": q, "kind": n.kind.value, "language": n.language.value, "path": n.path, "attrs": n.attrs}
                for q, n in sorted(self.nodes.items())
            ],
            "edges": [
                {"src": s, "dst": d, "kind": k.value, "attrs": a}
                for (s, d, k), a in sorted(self.edges.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value))
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DependencyGraph":
        g = cls(GraphMode(data["mode"]), meta=dict(data.get("meta", {})))
        for n in data["nodes"]:
            g.nodes[n["id"]] = Node(EntityKind(n["kind"]), Language(n["language"]), n["path"], dict(n["attrs"]))
        for e in data["edges"]:
            g.edges[(e["src"], e["dst"], RelationKind(e["kind"]))] = dict(e["attrs"])
        return g

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DependencyGraph":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise IoError(f"cannot read graph {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# repository walk


@dataclass
class RepoFile:
    path: RepoPath
    abspath: Path
    language: Language
    digest: str


@dataclass
class RepoTree:
    component: str
    root: Path
    directories: list[str]
    files: list[RepoFile]

    @property
    def content_digest(self) -> str:
        h = hashlib.sha256()
        for f in self.files:
            h.update(f"{f.path}\0{f.digest}\n".encode())
        for d in self.directories:
            h.update(f"{d}/\n".encode())
        return h.hexdigest()

    def read(self, f: RepoFile) -> str:
        return f.abspath.read_text(encoding="utf-8", errors="replace")


def _skip(name: str) -> bool:
    return name.startswith(".") or name == "__pycache__"


def scan_repository(root: str | Path, component: Optional[str] = None) -> RepoTree:
    """Walk ``root`` in sorted order; the root directory's name is the component."""
    root = Path(root)
    if not root.is_dir():
        raise IoError(f"repository root {root} is not a readable directory")
    component = component or root.resolve().name
    directories = [component]
    files: list[RepoFile] = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if not _skip(d))
        rel = Path(dirpath).relative_to(root).parts
        for d in dirnames:
            directories.append("/".join((component, *rel, d)))
        for name in sorted(filenames):
            if _skip(name):
                continue
            abspath = Path(dirpath) / name
            try:
                digest = hashlib.sha256(abspath.read_bytes()).hexdigest()
            except OSError as exc:
                logger.warning("skipping unreadable file %s: %s", abspath, exc)
                continue
            rp = RepoPath(component, tuple(rel), name)
            files.append(RepoFile(rp, abspath, detect_language(rp), digest))
    directories.sort()
    files.sort(key=lambda f: str(f.path))
    return RepoTree(component, root, directories, files)


# ---------------------------------------------------------------------------
# reference resolution


class _Resolver:
    def __init__(self, tree: RepoTree):
        self.component = tree.component
        self.files = {str(f.path) for f in tree.files}
        self.dirs = set(tree.directories)
        self.by_dir: dict[str, list[str]] = defaultdict(list)
        for f in tree.files:
            self.by_dir[f.path.parent].append(str(f.path))

    def _inside(self, rel: str) -> Optional[str]:
        norm = posixpath.normpath(rel)
        if norm.startswith("..") or norm.startswith("/"):
            return None
        return self.component if norm == "." else f"{self.component}/{norm}"

    def python(self, file: RepoPath, ref: str, attrs: dict[str, Any]) -> list[str]:
        level = attrs.get("level", 0)
        module = [p for p in ref.lstrip(".").split(".") if p]
        names = attrs.get("names", [])
        if level:
            if level - 1 > len(file.segments):
                return []
            bases = [list(file.segments[: len(file.segments) - (level - 1)])]
        else:
            bases = [list(file.segments[:i]) for i in range(len(file.segments), -1, -1)]
        for base in bases:
            hits: list[str] = []
            for name in names:
                hit = self._module(base + module + [name])
                if hit:
                    hits.append(hit)
            if not hits or len(hits) < len(names):
                hit = self._module(base + module) if module or level else None
                if hit:
                    hits.append(hit)
            if hits:
                return sorted(set(hits))
        return []

    def _module(self, parts: list[str]) -> Optional[str]:
        if not parts:
            return None
        stem = "/".join((self.component, *parts))
        for cand in (stem + ".py", stem + "/__init__.py"):
            if cand in self.files:
                return cand
        return None

    def cpp(self, file: RepoPath, ref: str, attrs: dict[str, Any]) -> list[str]:
        if attrs.get("system"):
            return []
        rel_dir = "/".join(file.segments)
        for cand in (self._inside(posixpath.join(rel_dir, ref)), self._inside(ref)):
            if cand in self.files:
                return [cand]
        suffix = "/" + posixpath.normpath(ref).lstrip("./")
        return sorted(f for f in self.files if f.endswith(suffix))

    def qml(self, file: RepoPath, ref: str, attrs: dict[str, Any]) -> list[str]:
        rel_dir = "/".join(file.segments)
        if attrs.get("quoted"):
            target = self._inside(posixpath.join(rel_dir, ref))
            if target in self.files:
                return [target]
            if target in self.dirs:
                return [f for f in self.by_dir.get(target, []) if f.endswith(".qml")]
            return []
        parts = ref.split(".")
        for i in range(len(file.segments), -1, -1):
            target = "/".join((self.component, *file.segments[:i], *parts))
            qml = [f for f in self.by_dir.get(target, []) if f.endswith(".qml")]
            if qml:
                return qml
        return []


# ---------------------------------------------------------------------------
# building


def _skeleton(tree: RepoTree, mode: GraphMode) -> DependencyGraph:
    g = DependencyGraph(mode)
    for d in tree.directories:
        g.add_node(d, EntityKind.DIRECTORY, Language.OTHER, d, name=d.rsplit("/", 1)[-1])
        if "/" in d:
            g.add_edge(d.rsplit("/", 1)[0], d, RelationKind.CONTAINS)
    for f in tree.files:
        fid = str(f.path)
        g.add_node(fid, EntityKind.FILE, f.language, fid, name=f.path.filename)
        g.add_edge(f.path.parent, fid, RelationKind.CONTAINS)
    return g


def _parse_all(tree: RepoTree, files: list[RepoFile], workers: Optional[int]) -> list[ParsedUnit]:
    def work(f: RepoFile) -> ParsedUnit:
        return parse_file(f.path, f.language, tree.read(f))

    if workers == 1 or len(files) < 2:
        return [work(f) for f in files]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, files))


def _build_single(tree: RepoTree, language: Language, workers: Optional[int]) -> DependencyGraph:
    mode = _LANGUAGE_MODE[language]
    g = _skeleton(tree, mode)
    files = [f for f in tree.files if f.language is language]
    units = _parse_all(tree, files, workers)
    resolver = _Resolver(tree)
    resolve = {Language.PYTHON: resolver.python, Language.CPP: resolver.cpp, Language.QML: resolver.qml}[language]

    symbols: dict[str, list[str]] = defaultdict(list)
    classes: dict[str, list[str]] = defaultdict(list)
    warnings = 0
    fallback = 0
    for unit in units:
        fid = unit.file_id
        g.nodes[fid].attrs.update(parse_warnings=unit.parse_warnings, fallback_used=unit.fallback_used)
        warnings += unit.parse_warnings
        fallback += unit.fallback_used
        for ent in unit.entities:
            g.add_node(ent.qualified_id, ent.kind, language, fid, name=ent.name, span=list(ent.span), **ent.attrs)
            if ent.parent is None:
                g.add_edge(fid, ent.qualified_id, RelationKind.CONTAINS)
            if ent.kind in (EntityKind.CLASS, EntityKind.FUNCTION):
                symbols[ent.name].append(ent.qualified_id)
            if ent.kind is EntityKind.CLASS:
                classes[ent.name].append(ent.qualified_id)

    for unit in units:
        for rel in unit.relations:
            if rel.kind is RelationKind.CONTAINS:
                g.add_edge(rel.src, rel.dst_ref, RelationKind.CONTAINS)
            elif rel.kind is RelationKind.IMPORTS:
                for target in resolve(unit.file, rel.dst_ref, rel.attrs):
                    if target != unit.file_id:
                        g.add_edge(unit.file_id, target, RelationKind.IMPORTS)
            elif rel.kind is RelationKind.INHERITS:
                for target in classes.get(rel.dst_ref, []):
                    if target != rel.src:
                        g.add_edge(rel.src, target, RelationKind.INHERITS, **rel.attrs)
            elif rel.kind is RelationKind.INVOKES:
                for target in symbols.get(rel.dst_ref, []):
                    g.add_edge(rel.src, target, RelationKind.INVOKES)

    g.meta = {
        "component": tree.component,
        "content_digest": tree.content_digest,
        "files_by_language": _files_by_language(tree),
        "parse_warnings": warnings,
        "fallback_files": fallback,
    }
    g.meta["snapshot_id"] = _snapshot(g.meta["content_digest"], mode)
    return g


def _files_by_language(tree: RepoTree) -> dict[str, int]:
    counts = {lang.value: 0 for lang in Language}
    for f in tree.files:
        counts[f.language.value] += 1
    return counts


def _snapshot(content_digest: str, mode: GraphMode) -> str:
    return hashlib.sha256(f"{content_digest}:{mode.value}".encode()).hexdigest()[:16]


def build_graph(
    root: str | Path,
    mode: GraphMode | str = GraphMode.MIXED,
    component: Optional[str] = None,
    workers: Optional[int] = None,
) -> DependencyGraph:
    """Walk ``root``, parse the files selected by ``mode`` and return the unified graph."""
    mode = GraphMode.parse(mode) if isinstance(mode, str) else mode
    tree = scan_repository(root, component)
    parts = [_build_single(tree, lang, workers) for lang in mode.languages]
    if mode is not GraphMode.MIXED:
        return parts[0]
    g = merge_graphs(parts)
    g.meta["parse_warnings"] = sum(p.meta["parse_warnings"] for p in parts)
    g.meta["fallback_files"] = sum(p.meta["fallback_files"] for p in parts)
    return g


def merge_graphs(parts: list[DependencyGraph]) -> DependencyGraph:
    """Union nodes by id and deduplicate edges; later parts win attribute conflicts."""
    out = DependencyGraph(GraphMode.MIXED)
    for part in parts:
        for qid, node in part.nodes.items():
            have = out.nodes.get(qid)
            if have is None:
                out.nodes[qid] = Node(node.kind, node.language, node.path, dict(node.attrs))
                continue
            if have.kind is not node.kind:
                raise ConflictingKind(f"{qid}: {have.kind.value} vs {node.kind.value}")
            have.attrs.update(node.attrs)
            if node.language is not Language.OTHER:
                have.language = node.language
        for key, attrs in part.edges.items():
            out.edges.setdefault(key, {}).update(attrs)
        out.meta.update(part.meta)
    digests = {p.meta.get("content_digest") for p in parts}
    if len(digests) == 1 and None not in digests:
        out.meta["snapshot_id"] = _snapshot(digests.pop(), GraphMode.MIXED)
    else:
        h = hashlib.sha256("|".join(sorted(p.snapshot_id for p in parts)).encode())
        out.meta["snapshot_id"] = h.hexdigest()[:16]
    return out


# ---------------------------------------------------------------------------
# graph tools


def find_entities(g: DependencyGraph, name_query: str, kind_filter: Optional[EntityKind] = None) -> list[str]:
    """Ids whose terminal name equals ``name_query`` case-insensitively."""
    if not name_query:
        return []
    q = name_query.lower()
    return sorted(
        qid
        for qid, n in g.nodes.items()
        if n.name.lower() == q and (kind_filter is None or n.kind is kind_filter)
    )


@dataclass
class Subgraph:
    graph: DependencyGraph
    depth: dict[str, int]


def traverse(
    g: DependencyGraph,
    start: str,
    kinds: Iterable[RelationKind],
    direction: Direction | str = Direction.OUT,
    hops: int = 1,
) -> Subgraph:
    """Breadth-first expansion from ``start`` over edges of ``kinds`` up to ``hops`` steps."""
    if start not in g.nodes:
        raise UnknownNode(start)
    if hops < 1:
        raise ValueError("hops must be >= 1")
    direction = Direction(direction)
    kinds = frozenset(kinds)
    depth = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if depth[cur] >= hops:
            continue
        nbrs: list[str] = []
        if direction in (Direction.OUT, Direction.BOTH):
            nbrs += [d for (_, d, k) in g.out_edges(cur) if k in kinds]
        if direction in (Direction.IN, Direction.BOTH):
            nbrs += [s for (s, _, k) in g.in_edges(cur) if k in kinds]
        for n in nbrs:
            if n not in depth:
                depth[n] = depth[cur] + 1
                queue.append(n)
    return Subgraph(g.induced(depth), dict(sorted(depth.items())))


def restrict_scope(g: DependencyGraph, prefixes: Iterable[str | RepoPath]) -> DependencyGraph:
    """Nodes under any of ``prefixes`` plus their CONTAINS ancestors."""
    prefixes = [str(p).rstrip("/") for p in prefixes]
    keep = {q for q, n in g.nodes.items() if any(path_has_prefix(n.path, p) for p in prefixes)}
    stack = list(keep)
    while stack:
        cur = stack.pop()
        for src, _, kind in g.in_edges(cur):
            if kind is RelationKind.CONTAINS and src not in keep:
                keep.add(src)
                stack.append(src)
    return g.induced(keep)


def check_invariants(g: DependencyGraph) -> list[str]:
    """Structural violations of a built graph; empty when the graph is well-formed."""
    problems = []
    for s, d, k in g.edges:
        if s not in g.nodes or d not in g.nodes:
            problems.append(f"dangling edge {s} -{k.value}-> {d}")
    skeleton = {EntityKind.DIRECTORY, EntityKind.FILE}
    parents: dict[str, list[str]] = defaultdict(list)
    for s, d, k in g.edges:
        if k is RelationKind.CONTAINS and s in g.nodes and d in g.nodes:
            if g.nodes[s].kind in skeleton and g.nodes[d].kind in skeleton:
                parents[d].append(s)
    for child, ps in parents.items():
        if len(ps) > 1:
            problems.append(f"{child} has {len(ps)} skeleton parents")
    for start in parents:
        seen = {start}
        cur = start
        while parents.get(cur):
            cur = parents[cur][0]
            if cur in seen:
                problems.append(f"CONTAINS cycle through {start}")
                break
            seen.add(cur)
    for s, d, k in g.edges:
        if k in (RelationKind.INHERITS, RelationKind.INVOKES):
            for end in (s, d):
                if end in g.nodes and g.nodes[end].language is Language.QML:
                    problems.append(f"{k.value} edge touches QML node {end}")
    if g.mode is not GraphMode.MIXED:
        lang = _MODE_LANGUAGE[g.mode]
        for q, n in g.nodes.items():
            if n.kind not in skeleton and n.language is not lang:
                problems.append(f"{q} has language {n.language.value} in {g.mode.value} graph")
    return problems
