"""CSV / JSON reading and writing of datasets.

CSV files carry a header row. Grouped data put the group id in a first column
named ``group`` (groups are ordered by first appearance); sequences have only
value columns, in time order. JSON files look like::

    {"schemaVersion": 1, "kind": "grouped", "groups": [[[y...], ...], ...]}
    {"schemaVersion": 1, "kind": "sequence", "observations": [[y...], ...]}
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .objectives import GroupedDataset, SequenceDataset

SCHEMA_VERSION = 1


class ParseError(ValueError):
    """Malformed dataset file; the message names the offending row/column."""


def _fmt(path):
    suffix = Path(path).suffix.lower()
    if suffix not in (".csv", ".json"):
        raise ParseError(f"{path}: unknown format {suffix!r}; expected .csv or .json")
    return suffix[1:]


def _number(cell, where):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"{where}: non-numeric cell {cell!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"{where}: non-finite value {cell!r}")
    return v


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    grouped = bool(header) and header[0].lower() == "group"
    width = len(header)
    n_values = width - 1 if grouped else width
    if n_values < 1:
        raise ParseError(f"{path}: header declares no value columns")
    groups: dict[str, list] = {}
    seq = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        cells = row[1:] if grouped else row
        offset = 2 if grouped else 1
        vec = [_number(c, f"{path}: row {lineno}, column {j + offset}") for j, c in enumerate(cells)]
        if grouped:
            gid = row[0].strip()
            if not gid:
                raise ParseError(f"{path}: row {lineno}, column 1: empty group id")
            groups.setdefault(gid, []).append(vec)
        else:
            seq.append(vec)
    if grouped:
        if not groups:
            raise ParseError(f"{path}: no observations")
        return GroupedDataset(list(groups.values()))
    if not seq:
        raise ParseError(f"{path}: no observations")
    return SequenceDataset(seq)


def _check_vectors(vectors, where, dim=None):
    if not isinstance(vectors, list) or not vectors:
        raise ParseError(f"{where}: expected a non-empty list of vectors")
    out = []
    for r, v in enumerate(vectors):
        if not isinstance(v, list):
            v = [v]
        if dim is None:
            dim = len(v)
        if len(v) != dim or dim == 0:
            raise ParseError(f"{where}, row {r}: has {len(v)} values, expected {dim}")
        row = []
        for c, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ParseError(f"{where}, row {r}, column {c}: non-numeric value {x!r}")
            row.append(_number(x, f"{where}, row {r}, column {c}"))
        out.append(row)
    return out, dim


def _read_json(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    version = doc.get("schemaVersion")
    if version != SCHEMA_VERSION:
        raise ParseError(f"{path}: unsupported schemaVersion {version!r}")
    kind = doc.get("kind")
    if kind == "grouped":
        groups = doc.get("groups")
        if not isinstance(groups, list) or not groups:
            raise ParseError(f"{path}: 'groups' must be a non-empty list")
        dim, parsed = None, []
        for i, g in enumerate(groups):
            vecs, dim = _check_vectors(g, f"{path}: group {i}", dim)
            parsed.append(vecs)
        return GroupedDataset(parsed)
    if kind == "sequence":
        vecs, _ = _check_vectors(doc.get("observations"), f"{path}: observations")
        return SequenceDataset(vecs)
    raise ParseError(f"{path}: 'kind' must be 'grouped' or 'sequence', got {kind!r}")


def ingest(path, fmt: str | None = None) -> GroupedDataset | SequenceDataset:
    """Read a dataset from ``path``; the format defaults to the file extension."""
    fmt = fmt or _fmt(path)
    if fmt == "csv":
        return _read_csv(path)
    if fmt == "json":
        return _read_json(path)
    raise ParseError(f"unknown format {fmt!r}")


def emit(dataset: GroupedDataset | SequenceDataset, path, fmt: str | None = None) -> None:
    """Write ``dataset`` so that :func:`ingest` reproduces it exactly."""
    fmt = fmt or _fmt(path)
    grouped = isinstance(dataset, GroupedDataset)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            cols = [f"x{d}" for d in range(dataset.dim)]
            if grouped:
                w.writerow(["group"] + cols)
                for i, g in enumerate(dataset.groups):
                    for y in g:
                        w.writerow([str(i)] + [repr(float(v)) for v in y])
            else:
                w.writerow(cols)
                for y in dataset.observations:
                    w.writerow([repr(float(v)) for v in y])
    elif fmt == "json":
        if grouped:
            doc = {"schemaVersion": SCHEMA_VERSION, "kind": "grouped", "groups": [g.tolist() for g in dataset.groups]}
        else:
            doc = {"schemaVersion": SCHEMA_VERSION, "kind": "sequence", "observations": dataset.observations.tolist()}
        Path(path).write_text(json.dumps(doc))
    else:
        raise ParseError(f"unknown format {fmt!r}")
