"""Path finding over stack graphs.

A path carries a symbol stack of pending lookups. Traversing a push node
prepends its symbol; traversing a pop node requires the head to match and
removes it. A path is complete when it runs from a reference to a
definition with an empty stack: one name binding.

Root nodes are the only cross-file junction. They own no cross-file edges;
instead a path standing at a root may take a query-time virtual step to any
other root in the graph.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .graph import Edge, Node, NodeId, NodeKind, StackGraph, Symbol

# Symbol stacks are immutable head-first tuples; pushes and pops allocate
# new tuples so states can be shared and hashed freely.
SymbolStack = tuple[Symbol, ...]

EMPTY_STACK: SymbolStack = ()


def format_stack(stack: SymbolStack) -> str:
    """Render a stack in the angle-bracket notation, e.g. ``⟨B () . x⟩``."""
    return "⟨" + " ".join(sym.text for sym in stack) + "⟩"


class PathError(Exception):
    """Base class for path construction errors."""


class CannotLiftPop(PathError):
    """Pop nodes cannot start a path; their guard has nothing to inspect."""


class NotAdjacent(PathError):
    """The appended edge does not start at the path's end node."""


class StackMismatch(PathError):
    """A pop node's symbol did not match the stack head (or stack empty)."""


class CycleDetected(PathError):
    """The extension would revisit a (node, stack) state of this path."""


class NotRoot(PathError):
    """A virtual step requires two distinct root nodes."""


@dataclass(frozen=True)
class Step:
    source: NodeId
    sink: NodeId
    virtual: bool


@dataclass(frozen=True)
class Path:
    """In-progress resolution state plus the steps that produced it.

    ``visited`` holds every (node, stack) state seen along this path and
    drives per-path cycle detection.
    """

    start: NodeId
    end: NodeId
    stack: SymbolStack
    steps: tuple[Step, ...]
    visited: frozenset[tuple[NodeId, SymbolStack]]


@dataclass(frozen=True)
class SearchLimits:
    """Caps that keep searches finite on adversarial graphs.

    ``max_stack_depth`` bounds the symbol stack (push cycles can grow it
    without ever repeating a state). ``max_fuel`` bounds total path
    extensions per query. ``max_precondition`` is used at index time by
    partial-path computation.
    """

    max_stack_depth: int = 128
    max_fuel: int = 1_000_000
    max_precondition: int = 16


DEFAULT_LIMITS = SearchLimits()


def lift(g: StackGraph, node_id: NodeId) -> Path:
    """Empty path at ``node_id``; a push node seeds the stack with its symbol."""
    node = g.node(node_id)
    if node.kind is NodeKind.POP:
        raise CannotLiftPop(f"{node_id} is a pop node")
    stack: SymbolStack = (node.symbol,) if node.kind is NodeKind.PUSH else EMPTY_STACK
    return Path(
        start=node_id,
        end=node_id,
        stack=stack,
        steps=(),
        visited=frozenset({(node_id, stack)}),
    )


def _apply_node(node: Node, stack: SymbolStack) -> SymbolStack:
    """Stack transform of entering ``node``; raises StackMismatch on pops."""
    if node.kind is NodeKind.PUSH:
        return (node.symbol,) + stack
    if node.kind is NodeKind.POP:
        if not stack or stack[0] != node.symbol:
            raise StackMismatch(
                f"pop {node.symbol.text} against {format_stack(stack)}"
            )
        return stack[1:]
    return stack


def append(g: StackGraph, path: Path, edge: Edge) -> Path:
    """Extend ``path`` along a stored edge under the stack discipline."""
    if edge.source != path.end:
        raise NotAdjacent(f"edge starts at {edge.source}, path ends at {path.end}")
    sink = g.node(edge.sink)
    stack = _apply_node(sink, path.stack)
    state = (edge.sink, stack)
    if state in path.visited:
        raise CycleDetected(f"state {edge.sink} {format_stack(stack)} repeats")
    return Path(
        start=path.start,
        end=edge.sink,
        stack=stack,
        steps=path.steps + (Step(edge.source, edge.sink, virtual=False),),
        visited=path.visited | {state},
    )


def append_virtual(g: StackGraph, path: Path, sink: NodeId) -> Path:
    """Extend ``path`` from one root node to a different root node."""
    end_node = g.node(path.end)
    sink_node = g.node(sink)
    if end_node.kind is not NodeKind.ROOT or sink_node.kind is not NodeKind.ROOT:
        raise NotRoot("virtual steps connect root nodes only")
    if path.end == sink:
        raise NotRoot("virtual steps require two distinct roots")
    state = (sink, path.stack)
    if state in path.visited:
        raise CycleDetected(f"state {sink} {format_stack(path.stack)} repeats")
    return Path(
        start=path.start,
        end=sink,
        stack=path.stack,
        steps=path.steps + (Step(path.end, sink, virtual=True),),
        visited=path.visited | {state},
    )


def is_complete(g: StackGraph, path: Path) -> bool:
    return (
        g.node(path.start).is_reference
        and g.node(path.end).is_definition
        and not path.stack
    )


@dataclass
class ResolveOutcome:
    """Complete paths plus flags recording which caps fired.

    ``fuel_exhausted`` means the search stopped early and ``paths`` may be
    incomplete; ``depth_pruned`` means at least one extension was dropped
    for exceeding the stack depth cap.
    """

    paths: list[Path] = field(default_factory=list)
    fuel_exhausted: bool = False
    depth_pruned: bool = False


def resolve(
    g: StackGraph, reference: NodeId, limits: SearchLimits = DEFAULT_LIMITS
) -> ResolveOutcome:
    """Breadth-first jump-to-definition from ``reference``.

    Returns every complete path reachable under the append rules plus
    virtual root edges, ordered by (edge count, discovery index). Ambiguous
    and missing bindings are both legal: the list may hold several paths or
    none.
    """
    ref_node = g.node(reference)
    if not ref_node.is_reference:
        raise ValueError(f"{reference} is not a reference node")
    outcome = ResolveOutcome()
    fuel = limits.max_fuel
    start = lift(g, reference)
    if len(start.stack) > limits.max_stack_depth:
        outcome.depth_pruned = True
        return outcome
    queue: deque[Path] = deque([start])
    while queue:
        path = queue.popleft()
        if is_complete(g, path):
            outcome.paths.append(path)
            # A complete state may still extend (the stack can refill and
            # re-empty at another definition), so fall through.
        if outcome.fuel_exhausted:
            continue  # drain already-discovered paths for completeness only
        end_node = g.node(path.end)
        candidates: list[tuple[NodeId, bool]] = [
            (sink, False) for sink in g.outgoing(path.end)
        ]
        if end_node.kind is NodeKind.ROOT:
            candidates.extend(
                (root, True) for root in g.roots() if root != path.end
            )
        for sink, virtual in candidates:
            if fuel == 0:
                outcome.fuel_exhausted = True
                break
            fuel -= 1
            try:
                if virtual:
                    extended = append_virtual(g, path, sink)
                else:
                    extended = append(g, path, Edge(path.end, sink))
            except (StackMismatch, CycleDetected):
                continue
            if len(extended.stack) > limits.max_stack_depth:
                outcome.depth_pruned = True
                continue
            queue.append(extended)
    return outcome


def path_states(g: StackGraph, path: Path) -> list[tuple[NodeId, SymbolStack]]:
    """Replay ``path`` from its start, returning every (node, stack) state.

    Used by trace output and by replay-soundness checks: the final state
    must reproduce (path.end, path.stack) exactly.
    """
    node = g.node(path.start)
    stack: SymbolStack = (node.symbol,) if node.kind is NodeKind.PUSH else EMPTY_STACK
    states = [(path.start, stack)]
    for step in path.steps:
        if step.virtual:
            pass  # stack unchanged across a virtual step
        else:
            stack = _apply_node(g.node(step.sink), stack)
        states.append((step.sink, stack))
    return states


@dataclass
class TraceOutcome:
    """Per complete path, the full (node, stack) state sequence."""

    traces: list[list[tuple[NodeId, SymbolStack]]] = field(default_factory=list)
    fuel_exhausted: bool = False
    depth_pruned: bool = False


def trace(
    g: StackGraph, reference: NodeId, limits: SearchLimits = DEFAULT_LIMITS
) -> TraceOutcome:
    """resolve, but returning each complete path's state sequence."""
    resolved = resolve(g, reference, limits)
    return TraceOutcome(
        traces=[path_states(g, p) for p in resolved.paths],
        fuel_exhausted=resolved.fuel_exhausted,
        depth_pruned=resolved.depth_pruned,
    )
