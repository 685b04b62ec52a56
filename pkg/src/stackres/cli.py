"""Command line interface.

Subcommands: ``index`` a directory of .py files into a snapshot, ``query``
a reference position for its definitions, ``trace`` the full resolution
paths of a reference, and ``stats`` for store totals. The store location
comes from ``--store`` or the STACKRES_STORE environment variable.

Exit codes: 0 success (including empty query results), 1 when indexing hit
frontend errors, 2 for store problems (missing snapshot or record,
corruption, I/O), 3 for a bad query target (malformed, unknown path, or no
reference at the position).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .graph import NodeId, NodeKind, StackGraph
from .minilang import module_name_of
from .partial import PartialIndex, load_partials, resolve_partial
from .paths import DEFAULT_LIMITS, SearchLimits, format_stack, path_states, resolve
from .store import Store, StoreError, TOOLCHAIN_VERSION, index_snapshot


def _store_from(ns: argparse.Namespace) -> Optional[Store]:
    path = ns.store or os.environ.get("STACKRES_STORE")
    if not path:
        print("error: no store given (use --store or STACKRES_STORE)", file=sys.stderr)
        return None
    return Store(path)


def _limits_from(ns: argparse.Namespace) -> SearchLimits:
    return SearchLimits(
        max_stack_depth=ns.max_stack_depth,
        max_fuel=ns.max_fuel,
        max_precondition=ns.max_precondition,
    )


def _add_limit_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--max-stack-depth", type=int, default=DEFAULT_LIMITS.max_stack_depth
    )
    sub.add_argument("--max-fuel", type=int, default=DEFAULT_LIMITS.max_fuel)
    sub.add_argument(
        "--max-precondition", type=int, default=DEFAULT_LIMITS.max_precondition
    )


def cmd_index(ns: argparse.Namespace) -> int:
    store = _store_from(ns)
    if store is None:
        return 2
    root = Path(ns.directory)
    if not root.is_dir():
        print(f"error: {ns.directory} is not a directory", file=sys.stderr)
        return 2
    paths = sorted(
        p.relative_to(root).as_posix() for p in root.rglob("*.py") if p.is_file()
    )
    try:
        files = [(rel, (root / rel).read_bytes()) for rel in paths]
        report = index_snapshot(
            store,
            ns.snapshot,
            files,
            limits=_limits_from(ns),
            jobs=ns.jobs,
        )
    except (StoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(report, ensure_ascii=False))
    if any(e["kind"] == "frontend" for e in report["errors"]):
        return 1
    return 0


def _load_snapshot(
    store: Store, snapshot_id: str, *, with_partials: bool
) -> tuple[StackGraph, dict[str, int], Optional[PartialIndex]]:
    """Assemble the query graph for a snapshot.

    Files whose module name repeats an earlier manifest entry are skipped,
    matching how the indexer reports collisions. Returns the graph, a map
    from manifest path to file handle, and the partial index when asked.
    """
    entries = store.get_manifest(snapshot_id)
    if entries is None:
        raise StoreError(f"no snapshot {snapshot_id!r} in store")
    g = StackGraph()
    handles: dict[str, int] = {}
    index = PartialIndex() if with_partials else None
    seen_modules: set[str] = set()
    for position, (path, blob) in enumerate(entries):
        module = module_name_of(path)
        if module in seen_modules:
            continue
        seen_modules.add(module)
        record = store.lookup(blob, TOOLCHAIN_VERSION)
        if record is None:
            raise StoreError(f"missing record for {path} (blob {blob})")
        subgraph = dict(record["subgraph"])
        subgraph["display_name"] = path
        # Qualify the blob so identical content under two paths still loads.
        subgraph["blob"] = f"{position}:{blob}"
        file = g.load_file(subgraph)
        handles[path] = file.handle
        if index is not None:
            rows = load_partials(g, file.handle, record["partials"])
            index.add_graph_file(g, file.handle, rows)
    return g, handles, index


def _parse_target(target: str) -> Optional[tuple[str, int, int]]:
    parts = target.rsplit(":", 2)
    if len(parts) != 3:
        return None
    path, line_text, col_text = parts
    try:
        line, column = int(line_text), int(col_text)
    except ValueError:
        return None
    if not path or line < 1 or column < 1:
        return None
    return path, line, column


def _find_reference(
    g: StackGraph, handles: dict[str, int], path: str, line: int, column: int
) -> Optional[NodeId]:
    handle = handles.get(path)
    if handle is None:
        return None
    for node in g.nodes_in_file(handle):
        if node.is_reference and node.span is not None and node.span.contains(line, column):
            return node.id
    return None


def _definition_row(g: StackGraph, definition: NodeId) -> tuple[str, int, int, str]:
    node = g.node(definition)
    file = g.file(definition.file)
    return (file.display_name, node.span.line, node.span.column, node.symbol.text)


def cmd_query(ns: argparse.Namespace) -> int:
    store = _store_from(ns)
    if store is None:
        return 2
    parsed = _parse_target(ns.target)
    if parsed is None:
        print(f"error: bad target {ns.target!r} (want path:line:col)", file=sys.stderr)
        return 3
    path, line, column = parsed
    try:
        g, handles, index = _load_snapshot(
            store, ns.snapshot, with_partials=ns.mode == "partial"
        )
    except (StoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    reference = _find_reference(g, handles, path, line, column)
    if reference is None:
        print(f"error: no reference at {ns.target}", file=sys.stderr)
        return 3
    limits = _limits_from(ns)
    if ns.mode == "partial":
        outcome = resolve_partial(index, reference, limits)
        ends = [binding.end for binding in outcome.bindings]
    else:
        outcome = resolve(g, reference, limits)
        ends = [p.end for p in outcome.paths]
    rows = sorted({_definition_row(g, end) for end in ends})
    print(
        json.dumps(
            {
                "results": [
                    {"path": p, "line": ln, "column": col, "symbol": sym}
                    for p, ln, col, sym in rows
                ],
                "limit_exceeded": outcome.fuel_exhausted or outcome.depth_pruned,
            },
            ensure_ascii=False,
        )
    )
    return 0


def _node_label(g: StackGraph, node_id: NodeId) -> str:
    node = g.node(node_id)
    if node.kind is NodeKind.ROOT:
        return "root"
    if node.kind is NodeKind.SCOPE:
        return "scope"
    word = "push" if node.kind is NodeKind.PUSH else "pop"
    label = f"{word} {node.symbol.text}"
    if node.is_reference or node.is_definition:
        role = "ref" if node.is_reference else "def"
        where = g.file(node_id.file).display_name
        label += f" [{role} {where}:{node.span.line}:{node.span.column}]"
    return label


def cmd_trace(ns: argparse.Namespace) -> int:
    store = _store_from(ns)
    if store is None:
        return 2
    parsed = _parse_target(ns.target)
    if parsed is None:
        print(f"error: bad target {ns.target!r} (want path:line:col)", file=sys.stderr)
        return 3
    path, line, column = parsed
    try:
        g, handles, _ = _load_snapshot(store, ns.snapshot, with_partials=False)
    except (StoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    reference = _find_reference(g, handles, path, line, column)
    if reference is None:
        print(f"error: no reference at {ns.target}", file=sys.stderr)
        return 3
    outcome = resolve(g, reference, _limits_from(ns))
    if not outcome.paths:
        print("no complete paths")
    for number, path_found in enumerate(outcome.paths, start=1):
        print(f"path {number}:")
        virtual_rows = {
            row for row, step in enumerate(path_found.steps, start=1) if step.virtual
        }
        states = path_states(g, path_found)
        for row, (node_id, stack) in enumerate(states):
            suffix = "  (via virtual root edge)" if row in virtual_rows else ""
            label = _node_label(g, node_id)
            print(f"  {row + 1:3d}. {label}  {format_stack(stack)}{suffix}")
    if outcome.fuel_exhausted or outcome.depth_pruned:
        print("limits exceeded: results may be incomplete")
    return 0


def cmd_stats(ns: argparse.Namespace) -> int:
    store = _store_from(ns)
    if store is None:
        return 2
    try:
        totals = store.stats()
    except (StoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(totals, ensure_ascii=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stackres",
        description="Incremental cross-file name resolution over stack graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="index a directory into a snapshot")
    p_index.add_argument("directory")
    p_index.add_argument("--store", default=None)
    p_index.add_argument("--snapshot", required=True)
    p_index.add_argument("--jobs", type=int, default=1)
    _add_limit_args(p_index)
    p_index.set_defaults(func=cmd_index)

    p_query = sub.add_parser("query", help="resolve a reference to definitions")
    p_query.add_argument("target", help="path:line:col within the snapshot")
    p_query.add_argument("--store", default=None)
    p_query.add_argument("--snapshot", required=True)
    p_query.add_argument("--mode", choices=("partial", "direct"), default="partial")
    _add_limit_args(p_query)
    p_query.set_defaults(func=cmd_query)

    p_trace = sub.add_parser("trace", help="print full resolution paths")
    p_trace.add_argument("target", help="path:line:col within the snapshot")
    p_trace.add_argument("--store", default=None)
    p_trace.add_argument("--snapshot", required=True)
    _add_limit_args(p_trace)
    p_trace.set_defaults(func=cmd_trace)

    p_stats = sub.add_parser("stats", help="print store totals")
    p_stats.add_argument("--store", default=None)
    p_stats.set_defaults(func=cmd_stats)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
