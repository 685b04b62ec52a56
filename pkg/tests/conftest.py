from __future__ import annotations

from pathlib import Path

import pytest

from stackres.graph import NodeId, StackGraph
from stackres.minilang import build_file
from stackres.store import blob_id

CORPUS = Path(__file__).parent / "corpus"

# Node names follow construction order: the module root first, then one
# scope per statement with its gadget nodes, then the module definition.
A_LOCALS = {
    "root1": 0, "s10": 1, "A2": 2, "d2": 3, "s20": 4, "c2": 5, "dc2": 6,
    "s21": 7, "x3": 8, "a1": 9, "d1": 10,
}
B_LOCALS = {
    "root2": 0, "s30": 1, "d5": 2, "a5": 3, "root5": 4, "s31": 5, "B6": 6,
    "d6": 7, "s40": 8, "c6": 9, "dc6": 10, "s41": 11, "d7": 12, "A7": 13,
    "dc7": 14, "c7": 15, "s32": 16, "x9": 17, "d9": 18, "B8": 19, "s33": 20,
    "x11": 21, "d10": 22, "c10": 23, "B10": 24, "b4": 25, "d4": 26,
}


def fig1_sources() -> tuple[bytes, bytes]:
    a = (CORPUS / "fig1" / "a.py").read_bytes()
    b = (CORPUS / "fig1" / "b.py").read_bytes()
    return a, b


def build_fig1() -> StackGraph:
    """Both example files in one graph: a.py as file 0, b.py as file 1."""
    a, b = fig1_sources()
    g = StackGraph()
    build_file(g, "a.py", blob_id(a), a)
    build_file(g, "b.py", blob_id(b), b)
    return g


def na(name: str) -> NodeId:
    return NodeId(0, A_LOCALS[name])


def nb(name: str) -> NodeId:
    return NodeId(1, B_LOCALS[name])


@pytest.fixture
def fig1() -> StackGraph:
    return build_fig1()
