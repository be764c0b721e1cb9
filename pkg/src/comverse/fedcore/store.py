"""Object and table storage for one fedcore.

Objects are key-value sets with a strictly increasing version; tables are
schema-typed rows. Both persist to plain text files (one per object/table)
so a fedlet survives restart with versions intact.
"""

from __future__ import annotations

import json
import urllib.parse
from dataclasses import dataclass, field
from pathlib import Path

from comverse.errors import InvalidArgument, NotFound
from comverse.identity import FedId

Value = bytes | int | float | str | list

OBJECT_KINDS = ("raw", "state", "aggregate")


@dataclass
class DataObject:
    object_id: str
    owner: FedId
    kind: str = "raw"
    version: int = 0
    entries: dict[str, Value] = field(default_factory=dict)

    def snapshot(self) -> "DataObject":
        return DataObject(
            object_id=self.object_id,
            owner=self.owner,
            kind=self.kind,
            version=self.version,
            entries={k: (list(v) if isinstance(v, list) else v) for k, v in self.entries.items()},
        )


def encode_value(value: Value) -> tuple[str, str]:
    if isinstance(value, bytes):
        return "bytes", value.hex()
    if isinstance(value, bool):
        raise InvalidArgument("bool entry values are not supported")
    if isinstance(value, int):
        return "int", str(value)
    if isinstance(value, float):
        return "float", repr(value)
    if isinstance(value, str):
        return "str", json.dumps(value)
    if isinstance(value, list):
        return "vec", json.dumps(value)
    raise InvalidArgument(f"unsupported entry value type {type(value).__name__}")


def decode_value(kind: str, raw: str) -> Value:
    if kind == "bytes":
        return bytes.fromhex(raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "str":
        return json.loads(raw)
    if kind == "vec":
        return json.loads(raw)
    raise InvalidArgument(f"unknown value kind {kind!r}")


def entries_to_wire(entries: dict[str, Value]) -> dict:
    return {k: list(encode_value(v)) for k, v in entries.items()}


def entries_from_wire(doc: dict) -> dict[str, Value]:
    return {k: decode_value(t, raw) for k, (t, raw) in doc.items()}


class ObjectStore:
    def __init__(self, data_dir: Path | None = None):
        self._objects: dict[str, DataObject] = {}
        self._dir = data_dir
        if data_dir is not None:
            data_dir.mkdir(parents=True, exist_ok=True)
            for path in sorted(data_dir.glob("*.obj")):
                obj = self._read_file(path)
                self._objects[obj.object_id] = obj

    def exists(self, object_id: str) -> bool:
        return object_id in self._objects

    def create(self, object_id: str, owner: FedId, kind: str = "raw") -> DataObject:
        if kind not in OBJECT_KINDS:
            raise InvalidArgument(f"unknown object kind {kind!r}")
        if object_id in self._objects:
            return self._objects[object_id]
        obj = DataObject(object_id=object_id, owner=owner, kind=kind)
        self._objects[object_id] = obj
        self._write(obj)
        return obj

    def put(self, object_id: str, entries: dict[str, Value], owner: FedId, kind: str = "raw") -> int:
        obj = self._objects.get(object_id)
        if obj is None:
            obj = self.create(object_id, owner, kind)
        for key, value in entries.items():
            encode_value(value)  # reject unsupported types before mutating
            obj.entries[key] = value
        obj.version += 1
        self._write(obj)
        return obj.version

    def replace(self, object_id: str, entries: dict[str, Value], owner: FedId, kind: str = "raw") -> int:
        obj = self._objects.get(object_id)
        if obj is None:
            obj = self.create(object_id, owner, kind)
        obj.entries = dict(entries)
        obj.version += 1
        self._write(obj)
        return obj.version

    def get(self, object_id: str) -> DataObject:
        obj = self._objects.get(object_id)
        if obj is None:
            raise NotFound(f"object {object_id!r} not found")
        return obj.snapshot()

    def drop(self, object_id: str) -> None:
        self._objects.pop(object_id, None)
        if self._dir is not None:
            path = self._path(object_id)
            if path.exists():
                path.unlink()

    def object_ids(self) -> list[str]:
        return sorted(self._objects)

    # -- persistence: header line (object_id, version, owner, kind), then
    # -- one tab-separated key/type/value record per entry.

    def _path(self, object_id: str) -> Path:
        assert self._dir is not None
        return self._dir / (urllib.parse.quote(object_id, safe="") + ".obj")

    def _write(self, obj: DataObject) -> None:
        if self._dir is None:
            return
        lines = [f"{obj.object_id}\t{obj.version}\t{obj.owner.value}\t{obj.kind}"]
        for key in sorted(obj.entries):
            t, raw = encode_value(obj.entries[key])
            lines.append(f"{key}\t{t}\t{raw}")
        self._path(obj.object_id).write_text("\n".join(lines) + "\n")

    def _read_file(self, path: Path) -> DataObject:
        lines = path.read_text().splitlines()
        object_id, version, owner, kind = lines[0].split("\t")
        entries: dict[str, Value] = {}
        for line in lines[1:]:
            key, t, raw = line.split("\t", 2)
            entries[key] = decode_value(t, raw)
        return DataObject(
            object_id=object_id,
            owner=FedId(owner),
            kind=kind,
            version=int(version),
            entries=entries,
        )


COLUMN_TYPES = ("int", "float", "string", "timestamp")


@dataclass
class DataTable:
    table_id: str
    schema: list[tuple[str, str]]
    rows: list[tuple] = field(default_factory=list)

    def __post_init__(self):
        for name, ctype in self.schema:
            if ctype not in COLUMN_TYPES:
                raise InvalidArgument(f"table {self.table_id}: unknown column type {ctype!r}")
            if not name:
                raise InvalidArgument(f"table {self.table_id}: empty column name")

    def validate_row(self, row: tuple) -> tuple:
        if len(row) != len(self.schema):
            raise InvalidArgument(
                f"table {self.table_id}: row arity {len(row)} != schema arity {len(self.schema)}"
            )
        out = []
        for value, (name, ctype) in zip(row, self.schema):
            if ctype in ("int", "timestamp"):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise InvalidArgument(f"column {name}: expected {ctype}, got {value!r}")
            elif ctype == "float":
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise InvalidArgument(f"column {name}: expected float, got {value!r}")
                value = float(value)
            elif ctype == "string" and not isinstance(value, str):
                raise InvalidArgument(f"column {name}: expected string, got {value!r}")
            out.append(value)
        return tuple(out)

    def append(self, row: tuple) -> None:
        self.rows.append(self.validate_row(row))

    def replace_rows(self, rows: list[tuple]) -> None:
        self.rows = [self.validate_row(r) for r in rows]

    # Tables persist as delimited text: a schema line, then one row per line.
    def to_text(self) -> str:
        lines = ["\t".join(name for name, _ in self.schema)]
        lines.append("\t".join(ctype for _, ctype in self.schema))
        for row in self.rows:
            lines.append("\t".join(json.dumps(v) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, table_id: str, text: str) -> "DataTable":
        lines = text.splitlines()
        names = lines[0].split("\t")
        types = lines[1].split("\t")
        table = cls(table_id=table_id, schema=list(zip(names, types)))
        for line in lines[2:]:
            table.append(tuple(json.loads(cell) for cell in line.split("\t")))
        return table
