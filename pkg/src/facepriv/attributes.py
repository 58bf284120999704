"""Person-specific attribute tables.

Covers CelebA-format ingestion (``list_attr_celeba.txt`` and
``identity_CelebA.txt``), the canonical JSON serialization, equivalence-class
partitioning over quasi-identifiers and per-attribute marginals.

Canonical table JSON (keys written sorted)::

    {
      "format": "facepriv.table",
      "version": 1,
      "schema": {"names": [...], "arity": [...]},
      "person_specific": true,
      "records": [{"image_id": "...", "identity_id": "...", "values": [0, 1, ...]}, ...]
    }
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np

from .emd import DiscreteDistribution
from .errors import (
    ArityError,
    FormatError,
    IdentityConflictError,
    MissingIdentityError,
    PersonSpecificError,
    SchemaError,
    TokenValueError,
    UndefinedDistributionError,
    UnsupportedArityError,
)

TABLE_FORMAT = "facepriv.table"
TABLE_VERSION = 1

ClassKey = Tuple[int, ...]


@dataclass(frozen=True)
class AttributeSchema:
    names: Tuple[str, ...]
    arity: Tuple[int, ...] = ()

    def __post_init__(self):
        names = tuple(self.names)
        arity = tuple(int(a) for a in self.arity) if self.arity else (2,) * len(names)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "arity", arity)
        if any(not isinstance(n, str) or not n for n in names):
            raise SchemaError("attribute names must be non-empty strings")
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        if len(arity) != len(names):
            raise SchemaError("arity must list one entry per attribute")
        if any(a < 2 for a in arity):
            raise SchemaError("every attribute needs at least two values")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown attribute {name!r}") from None

    def indices(self, names: Iterable[str]) -> Tuple[int, ...]:
        """Column indices for ``names``, sorted into schema order, duplicates dropped."""
        return tuple(sorted({self.index(n) for n in names}))

    def require_binary(self) -> None:
        wide = [n for n, a in zip(self.names, self.arity) if a != 2]
        if wide:
            raise UnsupportedArityError(f"only binary attributes are supported, got {wide}")


@dataclass(frozen=True)
class Record:
    image_id: str
    identity_id: str
    values: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))


@dataclass(frozen=True)
class EquivalenceClass:
    key: ClassKey
    member_indices: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.member_indices)


@dataclass(frozen=True)
class AttributeTable:
    """Immutable attribute table; transforms return new tables.

    With ``person_specific`` set (the default) no two records may share both
    identity and attribute values. Obfuscated tables can legitimately break
    that when one identity has several images, so they are built with the
    check off and say so in their serialization.
    """

    schema: AttributeSchema
    records: Tuple[Record, ...]
    person_specific: bool = True

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        width = len(self.schema)
        seen = set()
        for i, rec in enumerate(records):
            if len(rec.values) != width:
                raise ArityError(f"record {i} ({rec.image_id}) has {len(rec.values)} values, "
                                 f"schema has {width}")
            for v, a in zip(rec.values, self.schema.arity):
                if not 0 <= v < a:
                    raise TokenValueError(f"record {i} ({rec.image_id}) has value {v} outside [0, {a})")
            key = (rec.identity_id, rec.values)
            if self.person_specific and key in seen:
                raise PersonSpecificError(
                    f"record {i} ({rec.image_id}) duplicates identity {rec.identity_id!r} "
                    "with identical attribute values")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.records)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Values as an ``(M, n)`` integer array (read-only)."""
        m = np.array([r.values for r in self.records], dtype=np.int64).reshape(len(self.records), len(self.schema))
        m.setflags(write=False)
        return m

    def with_values(self, values: np.ndarray, person_specific: Optional[bool] = None) -> "AttributeTable":
        values = np.asarray(values)
        if values.shape != (len(self.records), len(self.schema)):
            raise ArityError(f"value matrix shape {values.shape} does not match table")
        records = tuple(Record(r.image_id, r.identity_id, tuple(int(v) for v in row))
                        for r, row in zip(self.records, values))
        if person_specific is None:
            person_specific = self.person_specific
        return AttributeTable(self.schema, records, person_specific)

    def to_json(self) -> dict:
        return {
            "format": TABLE_FORMAT,
            "version": TABLE_VERSION,
            "schema": {"names": list(self.schema.names), "arity": list(self.schema.arity)},
            "person_specific": self.person_specific,
            "records": [
                {"image_id": r.image_id, "identity_id": r.identity_id, "values": list(r.values)}
                for r in self.records
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "AttributeTable":
        if obj.get("format") != TABLE_FORMAT:
            raise FormatError(f"not a {TABLE_FORMAT} document")
        if obj.get("version") != TABLE_VERSION:
            raise FormatError(f"unsupported table version {obj.get('version')!r}")
        try:
            schema = AttributeSchema(tuple(obj["schema"]["names"]), tuple(obj["schema"]["arity"]))
            records = tuple(Record(str(r["image_id"]), str(r["identity_id"]), tuple(r["values"]))
                            for r in obj["records"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed table document: {exc}") from None
        return cls(schema, records, bool(obj.get("person_specific", True)))


def dump_table(table: AttributeTable, fp: TextIO) -> None:
    json.dump(table.to_json(), fp, sort_keys=True, indent=1)
    fp.write("\n")


def dumps_table(table: AttributeTable) -> str:
    return json.dumps(table.to_json(), sort_keys=True, indent=1) + "\n"


def load_table(fp: TextIO) -> AttributeTable:
    try:
        obj = json.load(fp)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, line=exc.lineno) from None
    return AttributeTable.from_json(obj)


def parse_celeba_attrs(stream: Iterable[str], source: Optional[str] = None
                       ) -> Tuple[AttributeSchema, List[Tuple[str, Tuple[int, ...]]]]:
    """Parse the CelebA attribute list format.

    Line 1 holds the record count, line 2 the attribute names, then one row
    per image: ``image_id`` followed by ``1``/``-1`` tokens, mapped to 1/0.
    Blank lines are skipped.
    """
    lines = ((no, line.split()) for no, line in enumerate(stream, start=1))
    lines = ((no, toks) for no, toks in lines if toks)
    try:
        no, toks = next(lines)
    except StopIteration:
        raise FormatError("empty attribute file: missing record count", line=1, source=source) from None
    if len(toks) != 1:
        raise FormatError("first line must hold the record count", line=no, source=source)
    try:
        expected = int(toks[0])
    except ValueError:
        raise FormatError(f"record count {toks[0]!r} is not an integer", line=no, source=source) from None
    if expected < 0:
        raise FormatError("record count is negative", line=no, source=source)
    try:
        no, names = next(lines)
    except StopIteration:
        raise FormatError("missing attribute name line", line=2, source=source) from None
    schema = AttributeSchema(tuple(names))
    width = len(names)

    rows: List[Tuple[str, Tuple[int, ...]]] = []
    for no, toks in lines:
        if len(rows) == expected:
            raise FormatError(f"more rows than the declared count {expected}", line=no, source=source)
        if len(toks) != width + 1:
            raise ArityError(f"expected {width} attribute values, got {len(toks) - 1}",
                             line=no, source=source)
        values = []
        for tok in toks[1:]:
            if tok == "1":
                values.append(1)
            elif tok == "-1":
                values.append(0)
            else:
                raise TokenValueError(f"attribute token {tok!r} is not 1 or -1", line=no, source=source)
        rows.append((toks[0], tuple(values)))
    if len(rows) != expected:
        raise FormatError(f"declared {expected} rows but found {len(rows)}", source=source)
    return schema, rows


def parse_identity_map(stream: Iterable[str], source: Optional[str] = None) -> Dict[str, str]:
    """Parse ``image_id identity_id`` lines into a mapping."""
    mapping: Dict[str, str] = {}
    for no, line in enumerate(stream, start=1):
        toks = line.split()
        if not toks:
            continue
        if len(toks) != 2:
            raise FormatError("expected 'image_id identity_id'", line=no, source=source)
        image, ident = toks
        prev = mapping.setdefault(image, ident)
        if prev != ident:
            raise IdentityConflictError(
                f"image {image!r} mapped to both {prev!r} and {ident!r}", line=no, source=source)
    return mapping


def build_table(schema: AttributeSchema, rows: Sequence[Tuple[str, Sequence[int]]],
                identity_map: Mapping[str, str]) -> AttributeTable:
    records = []
    for image_id, values in rows:
        try:
            ident = identity_map[image_id]
        except KeyError:
            raise MissingIdentityError(image_id) from None
        records.append(Record(image_id, str(ident), tuple(values)))
    return AttributeTable(schema, tuple(records))


def partition_equivalence_classes(table: AttributeTable, quasi_ids: Iterable[str]) -> List[EquivalenceClass]:
    """Group record indices by their values on ``quasi_ids``.

    Keys follow schema order; classes are returned sorted by key and members
    keep table order.
    """
    quasi_ids = list(quasi_ids)
    if not quasi_ids:
        raise SchemaError("quasi-identifier set must be non-empty")
    cols = table.schema.indices(quasi_ids)
    groups: Dict[ClassKey, List[int]] = defaultdict(list)
    for i, rec in enumerate(table.records):
        groups[tuple(rec.values[c] for c in cols)].append(i)
    return [EquivalenceClass(key, tuple(members)) for key, members in sorted(groups.items())]


def value_counts(table: AttributeTable, attribute: str,
                 members: Optional[Sequence[int]] = None) -> List[int]:
    col = table.schema.index(attribute)
    arity = table.schema.arity[col]
    column = table.matrix[:, col] if members is None else table.matrix[list(members), col]
    return np.bincount(column, minlength=arity).tolist()


def marginal_distribution(table: AttributeTable, attribute: str) -> DiscreteDistribution:
    """Empirical distribution of ``attribute`` over the whole table, support ``0..arity-1``."""
    col = table.schema.index(attribute)
    if not table.records:
        raise UndefinedDistributionError("marginal of an empty table is undefined")
    return DiscreteDistribution.from_counts(range(table.schema.arity[col]), value_counts(table, attribute))


def key_as_dict(table: AttributeTable, quasi_ids: Iterable[str], key: ClassKey) -> Dict[str, int]:
    cols = table.schema.indices(quasi_ids)
    return {table.schema.names[c]: int(v) for c, v in zip(cols, key)}
