"""Content-addressed record store and incremental snapshot indexing.

Each indexed file version is stored once, keyed by the SHA-256 of its raw
bytes plus the analyzer version, so re-indexing a snapshot only rebuilds
files whose content changed. A record bundles the serialized file subgraph
with the file's partial paths and is wrapped in a checksum envelope so
corruption is detected at read time. Snapshots are named manifests mapping
paths to blob ids.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from .graph import FORMAT_VERSION, StackGraph, canonical_json
from .minilang import ParseError, build_file, module_name_of
from .partial import compute_file_partials, load_partials, serialize_partials
from .paths import DEFAULT_LIMITS, SearchLimits

TOOLCHAIN_VERSION = "0.1.0"

_ID_SAFE = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-")


class StoreError(Exception):
    """Base class for persistence failures."""


class StoreCorrupt(StoreError):
    """A stored record failed checksum or shape validation."""


class ConflictingRecord(StoreError):
    """A different record already exists under the same key."""


def blob_id(content: bytes) -> str:
    """Content address: SHA-256 hex digest of the raw bytes."""
    return hashlib.sha256(content).hexdigest()


def make_record(
    display_name: str,
    blob: str,
    toolchain_version: str,
    subgraph: dict,
    partials: dict,
) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "blob": blob,
        "display_name": display_name,
        "toolchain_version": toolchain_version,
        "subgraph": subgraph,
        "partials": partials,
    }


def _checksum(record: dict) -> str:
    return hashlib.sha256(canonical_json(record)).hexdigest()


def _validate_record(record: dict) -> None:
    for key in ("format_version", "blob", "display_name", "toolchain_version"):
        if key not in record:
            raise StoreCorrupt(f"record is missing {key!r}")
    if record["format_version"] != FORMAT_VERSION:
        raise StoreCorrupt(f"unsupported record format {record['format_version']!r}")
    # Round-trip through the graph loader; it enforces structural invariants.
    scratch = StackGraph()
    try:
        file = scratch.load_file(record["subgraph"])
        load_partials(scratch, file.handle, record["partials"])
    except StoreCorrupt:
        raise
    except Exception as exc:
        raise StoreCorrupt(f"record for blob {record['blob']} is malformed: {exc}") from exc


def _atomic_write(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".{path.name}.{uuid.uuid4().hex}.tmp"
    try:
        tmp.write_bytes(payload)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


class Store:
    """Filesystem-backed record and manifest store."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.records_dir = self.root / "records"
        self.manifests_dir = self.root / "manifests"

    def _record_path(self, blob: str, toolchain_version: str) -> Path:
        return self.records_dir / blob[:2] / blob[2:4] / f"{blob}-{toolchain_version}.json"

    def put(self, record: dict) -> None:
        """Store a record; idempotent for identical content."""
        _validate_record(record)
        payload = canonical_json({"checksum": _checksum(record), "record": record})
        path = self._record_path(record["blob"], record["toolchain_version"])
        if path.exists():
            if path.read_bytes() != payload:
                raise ConflictingRecord(
                    f"blob {record['blob']} already has a different record"
                )
            return
        _atomic_write(path, payload)

    def lookup(self, blob: str, toolchain_version: str) -> Optional[dict]:
        """Fetch a record by content address, or None if absent."""
        path = self._record_path(blob, toolchain_version)
        if not path.exists():
            return None
        return self._read_record(path)

    def _read_record(self, path: Path) -> dict:
        try:
            envelope = json.loads(path.read_bytes())
        except (OSError, ValueError) as exc:
            raise StoreCorrupt(f"{path}: unreadable record: {exc}") from exc
        if not isinstance(envelope, dict) or set(envelope) != {"checksum", "record"}:
            raise StoreCorrupt(f"{path}: bad envelope shape")
        record = envelope["record"]
        if _checksum(record) != envelope["checksum"]:
            raise StoreCorrupt(f"{path}: checksum mismatch")
        return record

    def put_manifest(self, snapshot_id: str, entries: list[tuple[str, str]]) -> None:
        """Store a snapshot manifest; re-put with new entries overwrites."""
        if not snapshot_id or not set(snapshot_id) <= _ID_SAFE:
            raise StoreError(f"bad snapshot id {snapshot_id!r}")
        payload = canonical_json(
            {"snapshot_id": snapshot_id, "entries": [list(e) for e in entries]}
        )
        _atomic_write(self.manifests_dir / f"{snapshot_id}.json", payload)

    def get_manifest(self, snapshot_id: str) -> Optional[list[tuple[str, str]]]:
        path = self.manifests_dir / f"{snapshot_id}.json"
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_bytes())
            entries = [(str(p), str(b)) for p, b in data["entries"]]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise StoreCorrupt(f"{path}: unreadable manifest: {exc}") from exc
        return entries

    def record_files(self) -> list[Path]:
        if not self.records_dir.is_dir():
            return []
        return sorted(self.records_dir.glob("*/*/*.json"))

    def stats(self) -> dict:
        """Verify every record and total up store contents."""
        records = 0
        nodes = 0
        partials = 0
        size = 0
        for path in self.record_files():
            record = self._read_record(path)
            records += 1
            nodes += len(record["subgraph"]["nodes"])
            partials += len(record["partials"]["rows"])
            size += path.stat().st_size
        if self.manifests_dir.is_dir():
            for path in sorted(self.manifests_dir.glob("*.json")):
                size += path.stat().st_size
        return {"records": records, "nodes": nodes, "partials": partials, "bytes": size}


def _build_record(
    display_name: str,
    blob: str,
    content: bytes,
    toolchain_version: str,
    limits: SearchLimits,
) -> tuple[dict, int, int]:
    g = StackGraph()
    file = build_file(g, display_name, blob, content)
    outcome = compute_file_partials(g, file.handle, limits)
    record = make_record(
        display_name,
        blob,
        toolchain_version,
        g.serialize_file(file),
        serialize_partials(g, file.handle, outcome),
    )
    return record, len(g.nodes_in_file(file)), len(outcome.partials)


def index_snapshot(
    store: Store,
    snapshot_id: str,
    files: list[tuple[str, bytes]],
    *,
    toolchain_version: str = TOOLCHAIN_VERSION,
    limits: SearchLimits = DEFAULT_LIMITS,
    jobs: int = 1,
) -> dict:
    """Index a snapshot, reusing stored records for unchanged content.

    Returns a report with hit/miss counts, per-file frontend errors, and
    node/partial totals for the files actually rebuilt. Module-name
    collisions between paths are reported as errors but do not prevent
    indexing; queries resolve the collision by taking the first path.
    """
    t0 = time.monotonic()
    blobs = [blob_id(content) for _, content in files]

    # Work on unique blobs so hit/miss counts do not depend on job order.
    order: list[str] = []
    first_content: dict[str, tuple[str, bytes]] = {}
    for (name, content), blob in zip(files, blobs):
        if blob not in first_content:
            order.append(blob)
            first_content[blob] = (name, content)

    def work(blob: str) -> tuple[str, Optional[dict], Optional[str], int, int]:
        name, content = first_content[blob]
        cached = store.lookup(blob, toolchain_version)
        if cached is not None:
            return "hit", None, None, 0, 0
        try:
            record, node_count, partial_count = _build_record(
                name, blob, content, toolchain_version, limits
            )
        except ParseError as exc:
            return "error", None, str(exc), 0, 0
        store.put(record)
        return "miss", record, None, node_count, partial_count

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = dict(zip(order, pool.map(work, order)))
    else:
        results = {blob: work(blob) for blob in order}

    hits = 0
    misses = 0
    errors: list[dict] = []
    nodes = 0
    partials = 0
    entries: list[tuple[str, str]] = []
    first_path_of_module: dict[str, str] = {}
    for (name, _content), blob in zip(files, blobs):
        status, _record, message, node_count, partial_count = results[blob]
        if first_content[blob][0] != name and status != "error":
            # Later occurrence of content someone else just built.
            status, node_count, partial_count = "hit", 0, 0
        if status == "error":
            errors.append({"path": name, "kind": "frontend", "message": message})
            continue
        if status == "hit":
            hits += 1
        else:
            misses += 1
            nodes += node_count
            partials += partial_count
        module = module_name_of(name)
        if module in first_path_of_module:
            errors.append(
                {
                    "path": name,
                    "kind": "module-collision",
                    "message": (
                        f"module {module!r} already provided by"
                        f" {first_path_of_module[module]}"
                    ),
                }
            )
        else:
            first_path_of_module[module] = name
        entries.append((name, blob))

    store.put_manifest(snapshot_id, entries)
    millis = int((time.monotonic() - t0) * 1000)
    return {
        "snapshot_id": snapshot_id,
        "hits": hits,
        "misses": misses,
        "errors": errors,
        "nodes": nodes,
        "partials": partials,
        "millis": millis,
    }
