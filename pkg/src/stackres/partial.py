"""Partial paths: per-file path fragments summarized by pre/postconditions.

A partial path records, for one root-free stretch of a file's subgraph,
which symbol stack it demands (precondition) and which it produces
(postcondition). Each condition is a partial symbol stack: a concrete
prefix optionally ending in a single variable that stands for an arbitrary
remainder. Fragments are computed per file at index time and concatenated
at query time by unifying the left postcondition with the right
precondition, so cross-file resolution never re-walks file interiors.

Depth-cap bookkeeping: every partial path carries ``relmax``, the maximum
over its interior states of (symbol stack depth minus precondition-prefix
depth at that state). When a fragment is applied on top of a concrete
junction stack of depth d, its interior stack depths are exactly d plus
the recorded relative depths, so a stitched search can enforce the same
stack-depth cap as the direct search without replaying interiors.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .graph import Edge, NodeId, NodeKind, StackGraph, Symbol
from .paths import (
    CycleDetected,
    NotAdjacent,
    SearchLimits,
    DEFAULT_LIMITS,
    StackMismatch,
    Step,
    format_stack,
)


class PartialPathError(Exception):
    """Base class for partial-path errors."""


class StackExhausted(PartialPathError):
    """A pop hit a concrete, empty postcondition with no variable to grow."""


class NoMatch(PartialPathError):
    """Concatenation failed: postcondition and precondition do not unify."""


@dataclass(frozen=True)
class PartialStack:
    """Symbol sequence (head first) optionally ending in one variable.

    ``tail`` is a small variable index scoped to one partial path; a
    concrete stack has ``tail is None``. At most one distinct variable ever
    appears in a partial path, shared between its pre and post.
    """

    prefix: tuple[Symbol, ...] = ()
    tail: Optional[int] = None

    def is_concrete_empty(self) -> bool:
        return not self.prefix and self.tail is None

    def render(self) -> str:
        if self.tail is None:
            return format_stack(self.prefix)
        return format_stack(self.prefix) + f"·v{self.tail}"


@dataclass(frozen=True)
class PartialPath:
    start: NodeId
    end: NodeId
    pre: PartialStack
    post: PartialStack
    steps: tuple[Step, ...]
    relmax: int
    visited: frozenset[tuple[NodeId, PartialStack, PartialStack]] = frozenset()

    def dedup_key(self) -> tuple:
        """Identity for stored fragments, after canonical variable renaming.

        Fragments equal under this key are interchangeable at query time:
        same endpoints, same conditions, same interior depth requirement.
        """
        pre, post = _canonicalize(self.pre, self.post)
        return (self.start, self.end, pre, post, self.relmax)

    def rel(self) -> int:
        """Relative depth of the end state: |post prefix| - |pre prefix|."""
        return len(self.post.prefix) - len(self.pre.prefix)


def _canonicalize(pre: PartialStack, post: PartialStack) -> tuple[PartialStack, PartialStack]:
    """Rename the (single) variable, if any, to index 0."""
    if pre.tail is None and post.tail is None:
        return pre, post
    out = []
    for stack in (pre, post):
        if stack.tail is None:
            out.append(stack)
        else:
            out.append(PartialStack(stack.prefix, 0))
    return out[0], out[1]


def _rename(stack: PartialStack, offset: int) -> PartialStack:
    if stack.tail is None:
        return stack
    return PartialStack(stack.prefix, stack.tail + offset)


def lift_partial(g: StackGraph, node_id: NodeId) -> PartialPath:
    """Empty partial path at ``node_id`` with a fresh variable.

    Unlike full paths, pop nodes are liftable: the precondition absorbs the
    guard, demanding the popped symbol from whatever stack arrives.
    """
    node = g.node(node_id)
    var = 0
    if node.kind is NodeKind.PUSH:
        pre = PartialStack((), var)
        post = PartialStack((node.symbol,), var)
        relmax = 1
    elif node.kind is NodeKind.POP:
        pre = PartialStack((node.symbol,), var)
        post = PartialStack((), var)
        relmax = -1
    else:
        pre = PartialStack((), var)
        post = PartialStack((), var)
        relmax = 0
    return PartialPath(
        start=node_id,
        end=node_id,
        pre=pre,
        post=post,
        steps=(),
        relmax=relmax,
        visited=frozenset({(node_id, pre, post)}),
    )


def bind_tail(pp: PartialPath, replacement: PartialStack) -> PartialPath:
    """Substitute ``replacement`` for the partial path's variable.

    Used to specialize a reference-start fragment to the concrete empty
    precondition before storage: downstream postconditions then stay
    concrete and completeness is decidable by ``post == ⟨⟩``.
    """

    def subst(stack: PartialStack) -> PartialStack:
        if stack.tail is None:
            return stack
        return PartialStack(stack.prefix + replacement.prefix, replacement.tail)

    pre, post = subst(pp.pre), subst(pp.post)
    return PartialPath(
        start=pp.start,
        end=pp.end,
        pre=pre,
        post=post,
        steps=pp.steps,
        relmax=pp.relmax,
        visited=frozenset((n, subst(a), subst(b)) for n, a, b in pp.visited),
    )


def append_partial(g: StackGraph, pp: PartialPath, edge: Edge) -> PartialPath:
    """Extend a partial path along a stored edge.

    Pops consume the postcondition prefix when possible; a pop against an
    exhausted prefix with a variable grows the precondition instead,
    turning "symbol must be on the stack" into a demand on callers.
    """
    if edge.source != pp.end:
        raise NotAdjacent(f"edge starts at {edge.source}, path ends at {pp.end}")
    sink = g.node(edge.sink)
    pre, post = pp.pre, pp.post
    relmax = pp.relmax
    if sink.kind is NodeKind.PUSH:
        post = PartialStack((sink.symbol,) + post.prefix, post.tail)
        relmax = max(relmax, len(post.prefix) - len(pre.prefix))
    elif sink.kind is NodeKind.POP:
        if post.prefix:
            if post.prefix[0] != sink.symbol:
                raise StackMismatch(
                    f"pop {sink.symbol.text} against {post.render()}"
                )
            post = PartialStack(post.prefix[1:], post.tail)
        elif post.tail is not None:
            # v := sink.symbol · v'; the demand propagates to the caller.
            pre = PartialStack(pre.prefix + (sink.symbol,), pre.tail)
            post = PartialStack((), post.tail)
        else:
            raise StackExhausted(
                f"pop {sink.symbol.text} against concrete empty stack"
            )
    state = (edge.sink, pre, post)
    if state in pp.visited:
        raise CycleDetected(
            f"state {edge.sink} {pre.render()} {post.render()} repeats"
        )
    return PartialPath(
        start=pp.start,
        end=edge.sink,
        pre=pre,
        post=post,
        steps=pp.steps + (Step(edge.source, edge.sink, virtual=False),),
        relmax=relmax,
        visited=pp.visited | {state},
    )


Bindings = dict[int, PartialStack]


def unify(post: PartialStack, pre: PartialStack) -> Optional[Bindings]:
    """Most general unifier of two partial stacks, or None.

    Prefixes match element-wise from the head. When one side exhausts, its
    variable (if any) binds to the other side's remainder; a concrete side
    that exhausts first forces the remainder to be empty. When both exhaust
    with variables on both sides, the variables bind to one shared fresh
    variable. Callers must present disjoint variable namespaces.
    """
    a, b = post.prefix, pre.prefix
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return None
    bindings: Bindings = {}
    if len(a) == len(b):
        if post.tail is None and pre.tail is None:
            return bindings
        if post.tail is None:
            bindings[pre.tail] = PartialStack((), None)
        elif pre.tail is None:
            bindings[post.tail] = PartialStack((), None)
        else:
            fresh = max(post.tail, pre.tail) + 1
            bindings[post.tail] = PartialStack((), fresh)
            bindings[pre.tail] = PartialStack((), fresh)
        return bindings
    if len(a) < len(b):
        short_tail, long_prefix, long_tail = post.tail, b[n:], pre.tail
    else:
        short_tail, long_prefix, long_tail = pre.tail, a[n:], post.tail
    if short_tail is None:
        return None  # concrete side ran out with symbols still demanded
    if long_tail is None:
        bindings[short_tail] = PartialStack(long_prefix, None)
    else:
        fresh = max(short_tail, long_tail) + 1
        bindings[short_tail] = PartialStack(long_prefix, fresh)
        bindings[long_tail] = PartialStack((), fresh)
    return bindings


def apply_bindings(stack: PartialStack, bindings: Bindings) -> PartialStack:
    if stack.tail is None or stack.tail not in bindings:
        return stack
    bound = bindings[stack.tail]
    return PartialStack(stack.prefix + bound.prefix, bound.tail)


_RENAME_OFFSET = 8


def concat(g: StackGraph, lhs: PartialPath, rhs: PartialPath) -> PartialPath:
    """Concatenate two partial paths at a shared node or a root junction.

    The junction must satisfy lhs.end == rhs.start, or both must be root
    nodes, in which case the implicit virtual step is recorded. Raises
    NoMatch when the conditions do not unify.
    """
    steps = lhs.steps
    if lhs.end == rhs.start:
        pass
    elif (
        g.node(lhs.end).kind is NodeKind.ROOT
        and g.node(rhs.start).kind is NodeKind.ROOT
    ):
        steps = steps + (Step(lhs.end, rhs.start, virtual=True),)
    else:
        raise NotAdjacent(f"cannot join {lhs.end} to {rhs.start}")
    # Rename the right side's variable apart before unifying.
    rhs_pre = _rename(rhs.pre, _RENAME_OFFSET)
    rhs_post = _rename(rhs.post, _RENAME_OFFSET)
    bindings = unify(lhs.post, rhs_pre)
    if bindings is None:
        raise NoMatch(f"{lhs.post.render()} does not unify with {rhs.pre.render()}")
    pre = apply_bindings(lhs.pre, bindings)
    post = apply_bindings(rhs_post, bindings)
    pre, post = _canonicalize(pre, post)
    # Interior depths of the right side sit on top of the left side's end
    # state, so its relative depths shift by the left side's final rel.
    relmax = max(lhs.relmax, lhs.rel() + rhs.relmax)
    return PartialPath(
        start=lhs.start,
        end=rhs.end,
        pre=pre,
        post=post,
        steps=steps + rhs.steps,
        relmax=relmax,
    )


@dataclass
class PartialsOutcome:
    """Stored fragments for one file plus a truncation flag.

    ``truncated`` records that some candidate fragments were dropped at a
    cap (precondition size, stack depth, or fuel); resolutions needing them
    fall back to failure.
    """

    partials: list[PartialPath] = field(default_factory=list)
    truncated: bool = False


def compute_file_partials(
    g: StackGraph, file_handle: int, limits: SearchLimits = DEFAULT_LIMITS
) -> PartialsOutcome:
    """All root-free partial paths of one file between endpoint nodes.

    Starts are the file's references and roots; ends are definitions,
    roots, and dead-end nodes. Fragments are recorded at every endpoint
    visit and extension continues through definitions (a later endpoint may
    lie further along), but stops at roots. Reference starts are
    specialized to the concrete empty precondition. Zero-step fragments are
    excluded; duplicates under the dedup key keep the first (shortest)
    representative.
    """
    file = g.file(file_handle)
    outcome = PartialsOutcome()
    seen: set[tuple] = set()
    fuel = limits.max_fuel
    starts = [
        node.id
        for node in g.nodes_in_file(file)
        if node.is_reference or node.kind is NodeKind.ROOT
    ]
    for start in starts:
        seed = lift_partial(g, start)
        if g.node(start).is_reference:
            seed = bind_tail(seed, PartialStack((), None))
        queue: deque[PartialPath] = deque([seed])
        while queue:
            pp = queue.popleft()
            end_kind = g.node(pp.end).kind
            if pp.steps:
                is_end = (
                    g.node(pp.end).is_definition
                    or end_kind is NodeKind.ROOT
                    or not g.outgoing(pp.end)
                )
                if is_end:
                    key = pp.dedup_key()
                    if key not in seen:
                        seen.add(key)
                        outcome.partials.append(pp)
                if end_kind is NodeKind.ROOT:
                    continue  # interiors must stay root-free
            for sink in g.outgoing(pp.end):
                if fuel == 0:
                    outcome.truncated = True
                    queue.clear()
                    break
                fuel -= 1
                try:
                    extended = append_partial(g, pp, Edge(pp.end, sink))
                except (StackMismatch, StackExhausted, CycleDetected):
                    continue
                if len(extended.pre.prefix) > limits.max_precondition:
                    outcome.truncated = True
                    continue
                # Any use of this fragment sits on a junction stack at
                # least as deep as its final precondition, so interior
                # depths of at least relmax + |pre| are unavoidable.
                if extended.relmax + len(extended.pre.prefix) > limits.max_stack_depth:
                    outcome.truncated = True
                    continue
                queue.append(extended)
    return outcome


class PartialIndex:
    """Query-side view over stored fragment sets.

    Holds, per loaded file, the fragments keyed by start node, plus the
    node categories the stitcher needs: root nodes (junctions) and
    definition nodes (emission points).
    """

    def __init__(self) -> None:
        self._by_start: dict[NodeId, list[PartialPath]] = {}
        self._roots: list[NodeId] = []
        self._definitions: set[NodeId] = set()

    def add_file(
        self,
        roots: Iterable[NodeId],
        definitions: Iterable[NodeId],
        partials: Iterable[PartialPath],
    ) -> None:
        self._roots.extend(roots)
        self._roots.sort(key=lambda n: (n.file, n.local))
        self._definitions.update(definitions)
        for pp in partials:
            self._by_start.setdefault(pp.start, []).append(pp)

    def add_graph_file(
        self, g: StackGraph, file_handle: int, partials: Iterable[PartialPath]
    ) -> None:
        nodes = g.nodes_in_file(g.file(file_handle))
        self.add_file(
            roots=[n.id for n in nodes if n.kind is NodeKind.ROOT],
            definitions=[n.id for n in nodes if n.is_definition],
            partials=partials,
        )

    def partials_from(self, node: NodeId) -> list[PartialPath]:
        return self._by_start.get(node, [])

    def roots(self) -> list[NodeId]:
        return list(self._roots)

    def is_definition(self, node: NodeId) -> bool:
        return node in self._definitions

    def is_root(self, node: NodeId) -> bool:
        return node in self._roots


@dataclass
class PartialResolveOutcome:
    """Complete bindings found by stitching, plus cap flags.

    Each binding is a fully stitched partial path: reference start,
    definition end, concrete empty pre and post, and the full step list
    (virtual junctions included), replayable against the assembled graph.
    """

    bindings: list[PartialPath] = field(default_factory=list)
    fuel_exhausted: bool = False
    depth_pruned: bool = False


def resolve_partial(
    index: PartialIndex,
    reference: NodeId,
    limits: SearchLimits = DEFAULT_LIMITS,
) -> PartialResolveOutcome:
    """Stitch stored fragments into complete bindings for ``reference``.

    Pending paths start as the stored fragments that begin at the
    reference (concrete empty precondition). A pending path ending at a
    root extends by concatenation with fragments starting at any root:
    the same root joins directly, a different root joins via the implicit
    virtual step. A binding is emitted when the end is a definition and
    the postcondition is the concrete empty stack. Pending states are
    deduplicated on (end, post): two pending paths agreeing there have
    identical futures.
    """
    outcome = PartialResolveOutcome()
    fuel = limits.max_fuel
    seen: set[tuple[NodeId, PartialStack]] = set()
    queue: deque[PartialPath] = deque()
    for pp in index.partials_from(reference):
        if pp.relmax > limits.max_stack_depth:
            outcome.depth_pruned = True
            continue
        state = (pp.end, pp.post)
        if state in seen:
            continue
        seen.add(state)
        queue.append(pp)
    root_list = None
    while queue:
        pending = queue.popleft()
        if index.is_definition(pending.end) and pending.post.is_concrete_empty():
            outcome.bindings.append(pending)
        if outcome.fuel_exhausted:
            continue
        if not index.is_root(pending.end):
            continue
        if root_list is None:
            root_list = index.roots()
        for root in root_list:
            for fragment in index.partials_from(root):
                if fuel == 0:
                    outcome.fuel_exhausted = True
                    break
                fuel -= 1
                try:
                    stitched = _stitch(pending, fragment, root)
                except NoMatch:
                    continue
                if stitched.relmax > limits.max_stack_depth:
                    outcome.depth_pruned = True
                    continue
                state = (stitched.end, stitched.post)
                if state in seen:
                    continue
                seen.add(state)
                queue.append(stitched)
            if outcome.fuel_exhausted:
                break
    return outcome


def _stitch(pending: PartialPath, fragment: PartialPath, root: NodeId) -> PartialPath:
    """concat specialized to a root junction, without graph access."""
    steps = pending.steps
    if pending.end != root:
        steps = steps + (Step(pending.end, root, virtual=True),)
    rhs_pre = _rename(fragment.pre, _RENAME_OFFSET)
    rhs_post = _rename(fragment.post, _RENAME_OFFSET)
    bindings = unify(pending.post, rhs_pre)
    if bindings is None:
        raise NoMatch(
            f"{pending.post.render()} does not unify with {fragment.pre.render()}"
        )
    pre = apply_bindings(pending.pre, bindings)
    post = apply_bindings(rhs_post, bindings)
    pre, post = _canonicalize(pre, post)
    relmax = max(pending.relmax, pending.rel() + fragment.relmax)
    return PartialPath(
        start=pending.start,
        end=fragment.end,
        pre=pre,
        post=post,
        steps=steps + fragment.steps,
        relmax=relmax,
    )


# ----- serialization -----------------------------------------------------


def serialize_partials(
    g: StackGraph, file_handle: int, outcome: PartialsOutcome
) -> dict:
    """Canonical fragment record for one file, sorted by dedup key."""
    symbols = sorted(
        {
            sym.text
            for pp in outcome.partials
            for stack in (pp.pre, pp.post)
            for sym in stack.prefix
        }
    )
    index = {text: i for i, text in enumerate(symbols)}

    def encode_stack(stack: PartialStack) -> list:
        return [[index[sym.text] for sym in stack.prefix], stack.tail is not None]

    def sort_key(pp: PartialPath):
        return (
            pp.start.local,
            pp.end.local,
            tuple(sym.text for sym in pp.pre.prefix),
            pp.pre.tail is not None,
            tuple(sym.text for sym in pp.post.prefix),
            pp.post.tail is not None,
            pp.relmax,
        )

    rows = []
    for pp in sorted(outcome.partials, key=sort_key):
        rows.append(
            {
                "start": pp.start.local,
                "end": pp.end.local,
                "pre": encode_stack(pp.pre),
                "post": encode_stack(pp.post),
                "relmax": pp.relmax,
                "steps": [[s.source.local, s.sink.local] for s in pp.steps],
            }
        )
    return {
        "format_version": 1,
        "rows": rows,
        "symbols": symbols,
        "truncated": outcome.truncated,
    }


def load_partials(g: StackGraph, file_handle: int, record: dict) -> list[PartialPath]:
    """Rebuild one file's fragments from a record, for a loaded graph."""
    symbols = [g.symbol(text) for text in record["symbols"]]

    def decode_stack(encoded: list) -> PartialStack:
        prefix = tuple(symbols[i] for i in encoded[0])
        return PartialStack(prefix, 0 if encoded[1] else None)

    out = []
    for row in record["rows"]:
        out.append(
            PartialPath(
                start=NodeId(file_handle, row["start"]),
                end=NodeId(file_handle, row["end"]),
                pre=decode_stack(row["pre"]),
                post=decode_stack(row["post"]),
                steps=tuple(
                    Step(NodeId(file_handle, a), NodeId(file_handle, b), virtual=False)
                    for a, b in row["steps"]
                ),
                relmax=row["relmax"],
            )
        )
    return out
