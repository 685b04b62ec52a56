from __future__ import annotations

import json

import pytest

from stackres.graph import StackGraph, canonical_json
from stackres.minilang import build_file
from stackres.partial import compute_file_partials, serialize_partials
from stackres.store import (
    ConflictingRecord,
    Store,
    StoreCorrupt,
    StoreError,
    TOOLCHAIN_VERSION,
    blob_id,
    index_snapshot,
    make_record,
)

from conftest import fig1_sources

EMPTY_SHA = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def _record_for(content: bytes, name: str = "m.py") -> dict:
    g = StackGraph()
    blob = blob_id(content)
    f = build_file(g, name, blob, content)
    outcome = compute_file_partials(g, f.handle)
    return make_record(
        name,
        blob,
        TOOLCHAIN_VERSION,
        g.serialize_file(f),
        serialize_partials(g, f.handle, outcome),
    )


def test_blob_id_is_sha256():
    assert blob_id(b"") == EMPTY_SHA
    assert blob_id(b"x = 0\n") != EMPTY_SHA
    assert len(blob_id(b"anything")) == 64


def test_put_then_lookup(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    store.put(record)
    found = store.lookup(record["blob"], TOOLCHAIN_VERSION)
    assert found == record
    assert store.lookup("0" * 64, TOOLCHAIN_VERSION) is None


def test_lookup_misses_other_toolchain_versions(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    store.put(record)
    assert store.lookup(record["blob"], "some-other-version") is None


def test_record_files_are_sharded_by_blob_prefix(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    store.put(record)
    (path,) = store.record_files()
    blob = record["blob"]
    assert path.parent.name == blob[2:4]
    assert path.parent.parent.name == blob[:2]
    assert path.name == f"{blob}-{TOOLCHAIN_VERSION}.json"


def test_put_is_idempotent(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    store.put(record)
    store.put(record)
    assert len(store.record_files()) == 1


def test_put_conflicting_record_raises(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    store.put(record)
    other = _record_for(b"x = 0\n", name="renamed.py")
    assert other["blob"] == record["blob"]
    with pytest.raises(ConflictingRecord):
        store.put(other)


def test_put_validates_record_shape(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    broken = json.loads(canonical_json(record))
    del broken["subgraph"]["nodes"]
    with pytest.raises(StoreCorrupt):
        store.put(broken)


def test_lookup_detects_corruption(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    store.put(record)
    (path,) = store.record_files()
    data = path.read_bytes().replace(b'"x = 0"', b'"y = 0"', 1)
    data = data.replace(b'"display_name":"m.py"', b'"display_name":"n.py"')
    path.write_bytes(data)
    with pytest.raises(StoreCorrupt):
        store.lookup(record["blob"], TOOLCHAIN_VERSION)


def test_lookup_rejects_unparseable_record(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    store.put(record)
    (path,) = store.record_files()
    path.write_bytes(b"{not json")
    with pytest.raises(StoreCorrupt):
        store.lookup(record["blob"], TOOLCHAIN_VERSION)


def test_record_envelope_shape(tmp_path):
    store = Store(tmp_path)
    record = _record_for(b"x = 0\n")
    store.put(record)
    (path,) = store.record_files()
    envelope = json.loads(path.read_bytes())
    assert set(envelope) == {"checksum", "record"}
    assert len(envelope["checksum"]) == 64


def test_manifest_round_trip_and_overwrite(tmp_path):
    store = Store(tmp_path)
    store.put_manifest("snap", [("a.py", "b" * 64)])
    assert store.get_manifest("snap") == [("a.py", "b" * 64)]
    store.put_manifest("snap", [("a.py", "c" * 64), ("d.py", "e" * 64)])
    assert store.get_manifest("snap") == [("a.py", "c" * 64), ("d.py", "e" * 64)]
    assert store.get_manifest("missing") is None


def test_manifest_rejects_unsafe_ids(tmp_path):
    store = Store(tmp_path)
    with pytest.raises(StoreError):
        store.put_manifest("../escape", [])
    with pytest.raises(StoreError):
        store.put_manifest("", [])


def test_stats_totals(tmp_path):
    store = Store(tmp_path)
    a, b = fig1_sources()
    index_snapshot(store, "s1", [("a.py", a), ("b.py", b)])
    totals = store.stats()
    assert totals["records"] == 2
    assert totals["nodes"] == 38
    assert totals["partials"] == 23
    assert totals["bytes"] > 0


def test_stats_on_empty_store(tmp_path):
    assert Store(tmp_path / "fresh").stats() == {
        "records": 0, "nodes": 0, "partials": 0, "bytes": 0,
    }


# ----- snapshot indexing ----------------------------------------------------


def test_index_snapshot_misses_then_hits(tmp_path):
    store = Store(tmp_path)
    a, b = fig1_sources()
    first = index_snapshot(store, "s1", [("a.py", a), ("b.py", b)])
    assert (first["hits"], first["misses"]) == (0, 2)
    assert first["errors"] == []
    assert first["nodes"] == 38
    assert first["partials"] == 23
    second = index_snapshot(store, "s2", [("a.py", a), ("b.py", b)])
    assert (second["hits"], second["misses"]) == (2, 0)
    assert (second["nodes"], second["partials"]) == (0, 0)


def test_index_snapshot_report_key_order(tmp_path):
    store = Store(tmp_path)
    report = index_snapshot(store, "s1", [("a.py", b"x = 0\n")])
    assert list(report) == [
        "snapshot_id", "hits", "misses", "errors", "nodes", "partials", "millis",
    ]


def test_index_snapshot_changed_file_is_a_miss(tmp_path):
    store = Store(tmp_path)
    a, b = fig1_sources()
    index_snapshot(store, "s1", [("a.py", a), ("b.py", b)])
    changed = b + b"\nq = B\n"
    report = index_snapshot(store, "s2", [("a.py", a), ("b.py", changed)])
    assert (report["hits"], report["misses"]) == (1, 1)
    assert store.get_manifest("s2") == [
        ("a.py", blob_id(a)), ("b.py", blob_id(changed)),
    ]
    # The old snapshot still resolves to the old record.
    assert store.get_manifest("s1")[1] == ("b.py", blob_id(b))


def test_index_snapshot_frontend_error_is_reported_not_fatal(tmp_path):
    store = Store(tmp_path)
    report = index_snapshot(
        store, "s1", [("bad.py", b"class (:\n"), ("good.py", b"x = 0\n")]
    )
    assert (report["hits"], report["misses"]) == (0, 1)
    (error,) = report["errors"]
    assert error["path"] == "bad.py"
    assert error["kind"] == "frontend"
    assert error["message"]
    # The broken file is excluded from the manifest.
    assert store.get_manifest("s1") == [("good.py", blob_id(b"x = 0\n"))]


def test_index_snapshot_module_collision_is_reported(tmp_path):
    store = Store(tmp_path)
    report = index_snapshot(
        store,
        "s1",
        [("lib/m.py", b"x = 0\n"), ("app/m.py", b"y = 1\n")],
    )
    (error,) = report["errors"]
    assert error["kind"] == "module-collision"
    assert error["path"] == "app/m.py"
    assert "lib/m.py" in error["message"]
    # Both files are still indexed and in the manifest.
    assert (report["hits"], report["misses"]) == (0, 2)
    assert len(store.get_manifest("s1")) == 2


def test_index_snapshot_duplicate_content_is_one_record(tmp_path):
    store = Store(tmp_path)
    content = b"x = 0\n"
    report = index_snapshot(
        store, "s1", [("one.py", content), ("two.py", content)]
    )
    assert (report["hits"], report["misses"]) == (1, 1)
    assert len(store.record_files()) == 1
    assert store.get_manifest("s1") == [
        ("one.py", blob_id(content)), ("two.py", blob_id(content)),
    ]


def test_index_snapshot_jobs_agree_with_serial(tmp_path):
    a, b = fig1_sources()
    files = [("a.py", a), ("b.py", b), ("c.py", b"x = 0\n"), ("d.py", b"x = 0\n")]
    serial = Store(tmp_path / "serial")
    threaded = Store(tmp_path / "threaded")
    r1 = index_snapshot(serial, "s", files)
    r2 = index_snapshot(threaded, "s", files, jobs=4)
    r1["millis"] = r2["millis"] = 0
    assert r1 == r2
    names = [p.name for p in serial.record_files()]
    assert names == [p.name for p in threaded.record_files()]
    for path in serial.record_files():
        twin = threaded.root / path.relative_to(serial.root)
        assert path.read_bytes() == twin.read_bytes()


def test_records_are_byte_identical_across_runs(tmp_path):
    a, b = fig1_sources()
    one = Store(tmp_path / "one")
    two = Store(tmp_path / "two")
    index_snapshot(one, "s", [("a.py", a), ("b.py", b)])
    index_snapshot(two, "s", [("b.py", b), ("a.py", a)])  # order flipped
    for path in one.record_files():
        twin = two.root / path.relative_to(one.root)
        assert path.read_bytes() == twin.read_bytes()
