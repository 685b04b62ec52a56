from __future__ import annotations

import json

import pytest

from stackres.graph import (
    CrossFileEdge,
    DuplicateBlob,
    FileSealed,
    GraphError,
    InconsistentFlags,
    NodeId,
    NodeKind,
    Span,
    StackGraph,
    UnknownNode,
    canonical_json,
)

SPAN = Span(0, 1, 1, 1, 1, 2)


def _graph_with_file():
    g = StackGraph()
    f = g.add_file("m.py", "deadbeef")
    return g, f


def test_symbols_are_interned():
    g = StackGraph()
    assert g.symbol("x") is g.symbol("x")
    assert g.symbol("x") == g.symbol("x")
    assert g.symbol("x") != g.symbol("y")


def test_add_file_rejects_duplicate_blob():
    g, _ = _graph_with_file()
    with pytest.raises(DuplicateBlob):
        g.add_file("other.py", "deadbeef")


def test_node_flag_validation():
    g, f = _graph_with_file()
    with pytest.raises(InconsistentFlags):
        g.add_node(f, NodeKind.PUSH)  # push requires a symbol
    with pytest.raises(InconsistentFlags):
        g.add_node(f, NodeKind.SCOPE, symbol=g.symbol("x"))
    with pytest.raises(InconsistentFlags):
        g.add_node(f, NodeKind.POP, symbol=g.symbol("x"), is_reference=True, span=SPAN)
    with pytest.raises(InconsistentFlags):
        g.add_node(f, NodeKind.PUSH, symbol=g.symbol("x"), is_definition=True, span=SPAN)
    with pytest.raises(InconsistentFlags):
        g.add_node(f, NodeKind.ROOT, is_endpoint_scope=True)
    with pytest.raises(InconsistentFlags):
        g.add_node(f, NodeKind.PUSH, symbol=g.symbol("x"), is_reference=True)


def test_endpoint_scope_flag_is_accepted_on_scopes():
    g, f = _graph_with_file()
    node = g.add_node(f, NodeKind.SCOPE, is_endpoint_scope=True)
    assert g.node(node).is_endpoint_scope


def test_local_ids_are_dense_per_file():
    g = StackGraph()
    f0 = g.add_file("a.py", "b0")
    f1 = g.add_file("b.py", "b1")
    n0 = g.add_node(f0, NodeKind.ROOT)
    n1 = g.add_node(f1, NodeKind.ROOT)
    n2 = g.add_node(f0, NodeKind.SCOPE)
    assert (n0.file, n0.local) == (0, 0)
    assert (n1.file, n1.local) == (1, 0)
    assert (n2.file, n2.local) == (0, 1)


def test_edges_are_same_file_only():
    g = StackGraph()
    f0 = g.add_file("a.py", "b0")
    f1 = g.add_file("b.py", "b1")
    n0 = g.add_node(f0, NodeKind.SCOPE)
    n1 = g.add_node(f1, NodeKind.SCOPE)
    with pytest.raises(CrossFileEdge):
        g.add_edge(n0, n1)


def test_edge_endpoints_must_exist():
    g, f = _graph_with_file()
    n = g.add_node(f, NodeKind.SCOPE)
    with pytest.raises(UnknownNode):
        g.add_edge(n, NodeId(0, 99))
    with pytest.raises(UnknownNode):
        g.add_edge(NodeId(7, 0), n)


def test_duplicate_edge_insert_is_a_noop():
    g, f = _graph_with_file()
    a = g.add_node(f, NodeKind.SCOPE)
    b = g.add_node(f, NodeKind.SCOPE)
    g.add_edge(a, b)
    g.add_edge(a, b)
    assert g.outgoing(a) == [b]
    assert len(g.edges_in_file(f)) == 1


def test_outgoing_preserves_insertion_order():
    g, f = _graph_with_file()
    src = g.add_node(f, NodeKind.SCOPE)
    sinks = [g.add_node(f, NodeKind.SCOPE) for _ in range(3)]
    g.add_edge(src, sinks[2])
    g.add_edge(src, sinks[0])
    g.add_edge(src, sinks[1])
    assert g.outgoing(src) == [sinks[2], sinks[0], sinks[1]]


def test_sealing_freezes_a_file():
    g, f = _graph_with_file()
    a = g.add_node(f, NodeKind.SCOPE)
    b = g.add_node(f, NodeKind.SCOPE)
    g.add_edge(a, b)
    g.seal_file(f)
    assert g.is_sealed(f)
    with pytest.raises(FileSealed):
        g.add_node(f, NodeKind.SCOPE)
    with pytest.raises(FileSealed):
        g.add_edge(b, a)


def test_sealing_one_file_leaves_others_open():
    g = StackGraph()
    f0 = g.add_file("a.py", "b0")
    f1 = g.add_file("b.py", "b1")
    g.seal_file(f0)
    g.add_node(f1, NodeKind.SCOPE)  # must not raise


def test_roots_ordered_by_file_then_local():
    g = StackGraph()
    f0 = g.add_file("a.py", "b0")
    f1 = g.add_file("b.py", "b1")
    g.add_node(f1, NodeKind.ROOT)
    g.add_node(f0, NodeKind.SCOPE)
    g.add_node(f0, NodeKind.ROOT)
    g.add_node(f1, NodeKind.SCOPE)
    g.add_node(f1, NodeKind.ROOT)
    assert [(r.file, r.local) for r in g.roots()] == [(0, 1), (1, 0), (1, 2)]


def test_multiple_roots_in_one_file_are_allowed():
    g, f = _graph_with_file()
    r1 = g.add_node(f, NodeKind.ROOT)
    r2 = g.add_node(f, NodeKind.ROOT)
    assert [r1, r2] == g.roots()


def test_span_contains_is_end_exclusive():
    span = Span(10, 13, 2, 5, 2, 8)
    assert not span.contains(2, 4)
    assert span.contains(2, 5)
    assert span.contains(2, 7)
    assert not span.contains(2, 8)
    assert not span.contains(1, 6)
    assert not span.contains(3, 6)


def test_span_contains_multiline():
    span = Span(0, 20, 1, 1, 3, 2)
    assert span.contains(1, 9)
    assert span.contains(2, 1)
    assert span.contains(3, 1)
    assert not span.contains(3, 2)


def _tiny_record():
    g, f = _graph_with_file()
    scope = g.add_node(f, NodeKind.SCOPE)
    ref = g.add_node(
        f, NodeKind.PUSH, symbol=g.symbol("x"), is_reference=True, span=SPAN
    )
    dfn = g.add_node(
        f, NodeKind.POP, symbol=g.symbol("x"), is_definition=True, span=SPAN
    )
    g.add_edge(ref, scope)
    g.add_edge(scope, dfn)
    return g.serialize_file(f)


def test_serialize_file_shape():
    record = _tiny_record()
    assert record["format_version"] == 1
    assert record["blob"] == "deadbeef"
    assert record["display_name"] == "m.py"
    assert [n["kind"] for n in record["nodes"]] == ["scope", "push", "pop"]
    assert record["edges"] == [[0, 2], [1, 0]]  # (scope, def), (ref, scope)
    assert record["symbols"] == ["x"]


def test_serialized_edges_are_sorted():
    g, f = _graph_with_file()
    nodes = [g.add_node(f, NodeKind.SCOPE) for _ in range(4)]
    g.add_edge(nodes[3], nodes[0])
    g.add_edge(nodes[1], nodes[2])
    g.add_edge(nodes[0], nodes[1])
    assert g.serialize_file(f)["edges"] == [[0, 1], [1, 2], [3, 0]]


def test_load_file_round_trip_is_byte_identical():
    record = _tiny_record()
    g2 = StackGraph()
    f2 = g2.load_file(record)
    assert g2.is_sealed(f2)
    assert canonical_json(g2.serialize_file(f2)) == canonical_json(record)


def test_load_file_rejects_unknown_format_version():
    record = _tiny_record()
    record["format_version"] = 99
    with pytest.raises(GraphError):
        StackGraph().load_file(record)


def test_record_is_independent_of_file_handle():
    """The same content serializes identically as file 0 or file 3."""
    a = b"x = 0\n"
    from stackres.minilang import build_file
    from stackres.store import blob_id

    g1 = StackGraph()
    f1 = build_file(g1, "m.py", blob_id(a), a)

    g2 = StackGraph()
    for i in range(3):
        g2.add_file(f"pad{i}.py", f"pad{i}")
    f2 = build_file(g2, "m.py", blob_id(a), a)
    assert f2.handle == 3
    assert canonical_json(g1.serialize_file(f1)) == canonical_json(g2.serialize_file(f2))


def test_canonical_json_is_stable():
    assert canonical_json({"b": 1, "a": [1, 2]}) == b'{"a":[1,2],"b":1}'
    assert canonical_json({"s": "é"}) == '{"s":"é"}'.encode("utf-8")
    first = canonical_json(json.loads('{"z": 0, "a": {"y": 1, "b": 2}}'))
    second = canonical_json({"a": {"b": 2, "y": 1}, "z": 0})
    assert first == second
