"""Incremental cross-file name resolution over stack graphs."""

from .graph import (
    CrossFileEdge,
    DuplicateBlob,
    Edge,
    FileId,
    FileSealed,
    GraphError,
    InconsistentFlags,
    Node,
    NodeId,
    NodeKind,
    Span,
    StackGraph,
    Symbol,
    UnknownNode,
)
from .minilang import MiniModule, ParseError, build_file, build_graph, parse
from .partial import (
    NoMatch,
    PartialIndex,
    PartialPath,
    PartialStack,
    StackExhausted,
    compute_file_partials,
    concat,
    lift_partial,
    resolve_partial,
    unify,
)
from .paths import (
    CannotLiftPop,
    CycleDetected,
    NotAdjacent,
    Path,
    SearchLimits,
    StackMismatch,
    Step,
    append,
    append_virtual,
    is_complete,
    lift,
    resolve,
    trace,
)
from .store import (
    ConflictingRecord,
    Store,
    StoreCorrupt,
    StoreError,
    blob_id,
    index_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "CannotLiftPop",
    "ConflictingRecord",
    "CrossFileEdge",
    "CycleDetected",
    "DuplicateBlob",
    "Edge",
    "FileId",
    "FileSealed",
    "GraphError",
    "InconsistentFlags",
    "MiniModule",
    "NoMatch",
    "NotAdjacent",
    "Node",
    "NodeId",
    "NodeKind",
    "ParseError",
    "PartialIndex",
    "PartialPath",
    "PartialStack",
    "Path",
    "SearchLimits",
    "Span",
    "StackExhausted",
    "StackGraph",
    "StackMismatch",
    "Step",
    "Store",
    "StoreCorrupt",
    "StoreError",
    "Symbol",
    "UnknownNode",
    "append",
    "append_virtual",
    "blob_id",
    "build_file",
    "build_graph",
    "compute_file_partials",
    "concat",
    "index_snapshot",
    "is_complete",
    "lift",
    "lift_partial",
    "parse",
    "resolve",
    "resolve_partial",
    "trace",
    "unify",
]
