"""Stack graph data model: files, interned symbols, nodes, and edges.

A stack graph is partitioned into per-file subgraphs. Edges never cross
file boundaries; the only cross-file mechanism is the query-time virtual
edge between root nodes (see paths.py). That restriction is what makes
per-file analysis results reusable, so it is enforced on every insertion
and again on deserialization.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class GraphError(Exception):
    """Base class for structural errors in graph construction."""


class DuplicateBlob(GraphError):
    """The same blob identifier was registered twice in one graph."""


class InconsistentFlags(GraphError):
    """Node flags or symbol do not match the node kind."""


class CrossFileEdge(GraphError):
    """An edge tried to connect nodes owned by different files."""


class UnknownNode(GraphError):
    """A node identifier does not name a node in this graph."""


class FileSealed(GraphError):
    """A file subgraph was mutated after being sealed."""


class Symbol:
    """An interned identifier or operator token such as ``x``, ``.``, ``()``.

    Equality and hashing are by text, so symbols from different graphs
    compare equal when they spell the same token; interning additionally
    makes handles canonical within one graph so identity checks are cheap.
    """

    __slots__ = ("text",)

    def __init__(self, text: str):
        self.text = text

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Symbol) and self.text == other.text

    def __hash__(self) -> int:
        return hash(self.text)

    def __repr__(self) -> str:
        return f"Symbol({self.text!r})"


class NodeKind(Enum):
    ROOT = "root"
    SCOPE = "scope"
    PUSH = "push"
    POP = "pop"


@dataclass(frozen=True)
class Span:
    """Source range: 0-based byte offsets, 1-based line/column.

    ``end_byte`` and ``end_column`` are exclusive.
    """

    start_byte: int
    end_byte: int
    line: int
    column: int
    end_line: int
    end_column: int

    def contains(self, line: int, column: int) -> bool:
        if line < self.line or line > self.end_line:
            return False
        if line == self.line and column < self.column:
            return False
        if line == self.end_line and column >= self.end_column:
            return False
        return True


@dataclass(frozen=True)
class FileId:
    handle: int
    blob: str
    display_name: str


@dataclass(frozen=True)
class NodeId:
    """(file handle, per-file local index); locals are dense from 0."""

    file: int
    local: int


@dataclass(frozen=True)
class Node:
    id: NodeId
    kind: NodeKind
    symbol: Optional[Symbol]
    is_reference: bool
    is_definition: bool
    is_endpoint_scope: bool
    span: Optional[Span]


@dataclass(frozen=True)
class Edge:
    source: NodeId
    sink: NodeId


FORMAT_VERSION = 1

_KIND_NAMES = {k.value: k for k in NodeKind}


class StackGraph:
    """A stack graph: per-file node arenas plus same-file adjacency.

    Construction of distinct file subgraphs may proceed concurrently; the
    symbol intern table is the only shared mutable state and is locked.
    A fully built (sealed) graph is immutable and safe to share.
    """

    def __init__(self) -> None:
        self._files: list[FileId] = []
        self._blobs: dict[str, int] = {}
        self._nodes: list[list[Node]] = []
        # Per file: source local -> sink locals, insertion ordered.
        self._adjacency: list[dict[int, list[int]]] = []
        self._edge_sets: list[set[tuple[int, int]]] = []
        self._sealed: list[bool] = []
        self._symbols: dict[str, Symbol] = {}
        self._symbols_lock = threading.Lock()

    # ----- symbols ------------------------------------------------------

    def symbol(self, text: str) -> Symbol:
        """Intern ``text``; safe to call from multiple threads."""
        sym = self._symbols.get(text)
        if sym is not None:
            return sym
        with self._symbols_lock:
            sym = self._symbols.get(text)
            if sym is None:
                sym = Symbol(text)
                self._symbols[text] = sym
            return sym

    # ----- files --------------------------------------------------------

    def add_file(self, display_name: str, blob: str) -> FileId:
        if blob in self._blobs:
            raise DuplicateBlob(f"blob {blob} already loaded")
        file_id = FileId(handle=len(self._files), blob=blob, display_name=display_name)
        self._files.append(file_id)
        self._blobs[blob] = file_id.handle
        self._nodes.append([])
        self._adjacency.append({})
        self._edge_sets.append(set())
        self._sealed.append(False)
        return file_id

    def files(self) -> list[FileId]:
        return list(self._files)

    def file(self, handle: int) -> FileId:
        return self._files[handle]

    @staticmethod
    def _handle_of(file: FileId | int) -> int:
        return file.handle if isinstance(file, FileId) else file

    def seal_file(self, file: FileId | int) -> None:
        self._sealed[self._handle_of(file)] = True

    def is_sealed(self, file: FileId | int) -> bool:
        return self._sealed[self._handle_of(file)]

    # ----- nodes --------------------------------------------------------

    def add_node(
        self,
        file: FileId,
        kind: NodeKind,
        *,
        symbol: Optional[Symbol] = None,
        is_reference: bool = False,
        is_definition: bool = False,
        is_endpoint_scope: bool = False,
        span: Optional[Span] = None,
    ) -> NodeId:
        if self._sealed[file.handle]:
            raise FileSealed(f"{file.display_name} is sealed")
        if kind in (NodeKind.PUSH, NodeKind.POP):
            if symbol is None:
                raise InconsistentFlags(f"{kind.value} node requires a symbol")
        elif symbol is not None:
            raise InconsistentFlags(f"{kind.value} node cannot carry a symbol")
        if is_reference and kind is not NodeKind.PUSH:
            raise InconsistentFlags("is_reference is only valid on push nodes")
        if is_definition and kind is not NodeKind.POP:
            raise InconsistentFlags("is_definition is only valid on pop nodes")
        if is_endpoint_scope and kind is not NodeKind.SCOPE:
            raise InconsistentFlags("is_endpoint_scope is only valid on scope nodes")
        if (is_reference or is_definition) and span is None:
            raise InconsistentFlags("reference and definition nodes require a span")
        node_id = NodeId(file=file.handle, local=len(self._nodes[file.handle]))
        node = Node(
            id=node_id,
            kind=kind,
            symbol=symbol,
            is_reference=is_reference,
            is_definition=is_definition,
            is_endpoint_scope=is_endpoint_scope,
            span=span,
        )
        self._nodes[file.handle].append(node)
        return node_id

    def node(self, node_id: NodeId) -> Node:
        try:
            return self._nodes[node_id.file][node_id.local]
        except IndexError:
            raise UnknownNode(f"no node {node_id}") from None

    def has_node(self, node_id: NodeId) -> bool:
        return (
            0 <= node_id.file < len(self._nodes)
            and 0 <= node_id.local < len(self._nodes[node_id.file])
        )

    def nodes_in_file(self, file: FileId | int) -> list[Node]:
        return list(self._nodes[self._handle_of(file)])

    def roots(self) -> list[NodeId]:
        """All root nodes in the graph, ordered by (file, local)."""
        out = []
        for nodes in self._nodes:
            for node in nodes:
                if node.kind is NodeKind.ROOT:
                    out.append(node.id)
        return out

    # ----- edges --------------------------------------------------------

    def add_edge(self, source: NodeId, sink: NodeId) -> None:
        if not self.has_node(source):
            raise UnknownNode(f"no node {source}")
        if not self.has_node(sink):
            raise UnknownNode(f"no node {sink}")
        if source.file != sink.file:
            raise CrossFileEdge(f"{source} -> {sink} crosses a file boundary")
        if self._sealed[source.file]:
            raise FileSealed(f"{self._files[source.file].display_name} is sealed")
        key = (source.local, sink.local)
        if key in self._edge_sets[source.file]:
            return  # duplicate insert is a no-op
        self._edge_sets[source.file].add(key)
        self._adjacency[source.file].setdefault(source.local, []).append(sink.local)

    def outgoing(self, source: NodeId) -> list[NodeId]:
        if not self.has_node(source):
            raise UnknownNode(f"no node {source}")
        sinks = self._adjacency[source.file].get(source.local, [])
        return [NodeId(file=source.file, local=local) for local in sinks]

    def edges_in_file(self, file: FileId | int) -> list[Edge]:
        """Edges of one file sorted by (source.local, sink.local)."""
        handle = self._handle_of(file)
        pairs = sorted(self._edge_sets[handle])
        return [Edge(NodeId(handle, src), NodeId(handle, dst)) for src, dst in pairs]

    # ----- serialization -------------------------------------------------

    def serialize_file(self, file: FileId) -> dict:
        """Canonical per-file record; byte-deterministic via canonical_json."""
        symbols = sorted({n.symbol.text for n in self._nodes[file.handle] if n.symbol})
        index = {text: i for i, text in enumerate(symbols)}
        nodes = []
        for n in self._nodes[file.handle]:
            span = None
            if n.span is not None:
                s = n.span
                span = [s.start_byte, s.end_byte, s.line, s.column, s.end_line, s.end_column]
            nodes.append(
                {
                    "kind": n.kind.value,
                    "symbol": index[n.symbol.text] if n.symbol else None,
                    "is_reference": n.is_reference,
                    "is_definition": n.is_definition,
                    "is_endpoint_scope": n.is_endpoint_scope,
                    "span": span,
                }
            )
        edges = [[src, dst] for src, dst in sorted(self._edge_sets[file.handle])]
        return {
            "format_version": FORMAT_VERSION,
            "blob": file.blob,
            "display_name": file.display_name,
            "nodes": nodes,
            "edges": edges,
            "symbols": symbols,
        }

    def load_file(self, record: dict) -> FileId:
        """Recreate a file subgraph from its serialized record."""
        if record.get("format_version") != FORMAT_VERSION:
            raise GraphError(f"unsupported format_version {record.get('format_version')}")
        file = self.add_file(record["display_name"], record["blob"])
        symbols = [self.symbol(text) for text in record["symbols"]]
        for row in record["nodes"]:
            span = None
            if row["span"] is not None:
                span = Span(*row["span"])
            self.add_node(
                file,
                _KIND_NAMES[row["kind"]],
                symbol=symbols[row["symbol"]] if row["symbol"] is not None else None,
                is_reference=row["is_reference"],
                is_definition=row["is_definition"],
                is_endpoint_scope=row["is_endpoint_scope"],
                span=span,
            )
        for src, dst in record["edges"]:
            self.add_edge(NodeId(file.handle, src), NodeId(file.handle, dst))
        self.seal_file(file)
        return file


def canonical_json(value: object) -> bytes:
    """Stable byte encoding used for records, checksums, and manifests."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
