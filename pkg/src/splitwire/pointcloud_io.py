"""Point cloud container and text readers/writers (XYZ/CSV, ASCII PLY, labels CSV)."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np

from .errors import (
    ContractError,
    ParseError,
    SchemaError,
    TruncationError,
    UnsupportedFormatError,
    ValidationError,
)

NOISE_LABEL = -1

_SPLIT = re.compile(r"[,\s]+")
_HEADER_NAMES = {"x", "y", "z", "label"}


def fmt(value: float) -> str:
    """Format a float with 9 significant digits, trailing zeros kept."""
    return f"{float(value):#.9g}"


@dataclass(frozen=True)
class PointCloud:
    """Ordered 3D points with optional integer labels.

    ``xyz`` is an ``(n, 3)`` float64 array; z is height. Arrays are made
    read-only on construction so a cloud can be shared freely.
    """

    xyz: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        xyz = np.array(self.xyz, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(xyz)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(xyz), axis=1))[0])
            raise ValidationError(f"non-finite coordinate at point {bad}")
        xyz.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64).reshape(-1)
            if len(labels) != len(xyz):
                raise ValidationError(
                    f"{len(labels)} labels for {len(xyz)} points"
                )
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.xyz)

    @property
    def x(self) -> np.ndarray:
        return self.xyz[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.xyz[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.xyz[:, 2]

    def with_labels(self, labels) -> "PointCloud":
        return PointCloud(self.xyz, labels)

    def subset(self, mask) -> "PointCloud":
        labels = None if self.labels is None else self.labels[mask]
        return PointCloud(self.xyz[mask], labels)


def _is_header(fields: list[str]) -> bool:
    return len(fields) in (3, 4) and all(f.lower() in _HEADER_NAMES for f in fields)


def _parse_float(text: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"malformed numeric field {text!r}", lineno) from None
    if not math.isfinite(value):
        raise ValidationError(f"line {lineno}: non-finite value {text!r}")
    return value


def _parse_label(text: str, lineno: int) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    value = _parse_float(text, lineno)
    if value != int(value):
        raise ParseError(f"label {text!r} is not an integer", lineno)
    return int(value)


def read_xyz(source: IO[str] | Iterable[str], has_label_column: Optional[bool] = False) -> PointCloud:
    """Read a whitespace/comma separated point file.

    Lines starting with ``#`` and blank lines are skipped, as is a leading
    ``x,y,z[,label]`` header so labels CSV output reads back directly.
    ``has_label_column=None`` infers the column count from the first data line.
    """
    rows = []
    labels = []
    expected = None if has_label_column is None else (4 if has_label_column else 3)
    seen_data = False
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f for f in _SPLIT.split(line) if f]
        if not seen_data and _is_header(fields):
            seen_data = True
            continue
        seen_data = True
        if expected is None:
            if len(fields) not in (3, 4):
                raise ParseError(f"expected 3 or 4 fields, got {len(fields)}", lineno)
            expected = len(fields)
        if len(fields) != expected:
            raise ParseError(f"expected {expected} fields, got {len(fields)}", lineno)
        rows.append([_parse_float(f, lineno) for f in fields[:3]])
        if expected == 4:
            labels.append(_parse_label(fields[3], lineno))
    xyz = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return PointCloud(xyz, np.array(labels, dtype=np.int64) if expected == 4 else None)


def read_ply_ascii(source: IO[str] | Iterable[str]) -> PointCloud:
    """Read the ``vertex`` x, y, z properties of an ASCII PLY file."""
    lines = iter(enumerate(source, start=1))

    def next_line():
        for lineno, raw in lines:
            return lineno, raw.strip()
        return None, None

    lineno, line = next_line()
    if line != "ply":
        raise SchemaError("missing 'ply' magic", lineno or 1)

    elements: list[tuple[str, int, list[tuple[str, bool]]]] = []
    fmt_seen = False
    while True:
        lineno, line = next_line()
        if line is None:
            raise SchemaError("header not terminated by 'end_header'", lineno)
        parts = line.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        key = parts[0]
        if key == "format":
            if len(parts) < 2:
                raise SchemaError("bad format line", lineno)
            if parts[1] != "ascii":
                raise UnsupportedFormatError(f"unsupported PLY format {parts[1]!r}", lineno)
            fmt_seen = True
        elif key == "element":
            if len(parts) != 3:
                raise SchemaError("bad element line", lineno)
            try:
                count = int(parts[2])
            except ValueError:
                raise SchemaError(f"bad element count {parts[2]!r}", lineno) from None
            elements.append((parts[1], count, []))
        elif key == "property":
            if not elements:
                raise SchemaError("property before any element", lineno)
            is_list = len(parts) >= 2 and parts[1] == "list"
            if (is_list and len(parts) != 5) or (not is_list and len(parts) != 3):
                raise SchemaError("bad property line", lineno)
            elements[-1][2].append((parts[-1], is_list))
        elif key == "end_header":
            break
        else:
            raise SchemaError(f"unknown header keyword {key!r}", lineno)
    if not fmt_seen:
        raise SchemaError("missing format line", lineno)

    vertex = next((e for e in elements if e[0] == "vertex"), None)
    if vertex is None:
        raise SchemaError("no 'vertex' element", lineno)
    names = [name for name, _ in vertex[2]]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise SchemaError(f"vertex element lacks property {axis!r}", lineno)

    def data_line():
        while True:
            ln, text = next_line()
            if text is None:
                return ln, None
            if text:
                return ln, text

    last = lineno
    rows = []
    for name, count, props in elements:
        for _ in range(count):
            ln, text = data_line()
            if text is None:
                raise TruncationError(
                    f"element {name!r} declares {count} items but data ended", last + 1
                )
            last = ln
            if name != "vertex":
                continue
            tokens = text.split()
            values = {}
            pos = 0
            for prop, is_list in props:
                if pos >= len(tokens):
                    raise ParseError("too few values for vertex properties", ln)
                if is_list:
                    n_items = int(_parse_float(tokens[pos], ln))
                    pos += 1 + n_items
                else:
                    values[prop] = tokens[pos]
                    pos += 1
            rows.append([_parse_float(values[a], ln) for a in ("x", "y", "z")])
        if name == "vertex":
            break
    return PointCloud(np.array(rows, dtype=np.float64).reshape(-1, 3))


def write_labels_csv(cloud: PointCloud, sink: IO[str]) -> None:
    """Write ``x,y,z,label`` rows in point order; noise points carry -1."""
    if cloud.labels is None:
        raise ContractError("cloud has no labels")
    sink.write("x,y,z,label\n")
    for (x, y, z), label in zip(cloud.xyz.tolist(), cloud.labels.tolist()):
        sink.write(f"{fmt(x)},{fmt(y)},{fmt(z)},{label}\n")


def write_xyz(cloud: PointCloud, sink: IO[str], comments: Iterable[str] = ()) -> None:
    """Write a space-separated XYZ file, with a label column if the cloud has one."""
    for comment in comments:
        sink.write(f"# {comment}\n")
    if cloud.labels is None:
        for x, y, z in cloud.xyz.tolist():
            sink.write(f"{fmt(x)} {fmt(y)} {fmt(z)}\n")
    else:
        for (x, y, z), label in zip(cloud.xyz.tolist(), cloud.labels.tolist()):
            sink.write(f"{fmt(x)} {fmt(y)} {fmt(z)} {label}\n")


def load(path, fmt_name: Optional[str] = None, has_label_column: Optional[bool] = None) -> PointCloud:
    """Read a cloud from ``path``; format inferred from the extension when not given."""
    path = str(path)
    if fmt_name is None:
        fmt_name = "ply" if path.lower().endswith(".ply") else "xyz"
    with open(path, "r", encoding="utf-8") as fh:
        if fmt_name == "ply":
            return read_ply_ascii(fh)
        if fmt_name == "xyz":
            return read_xyz(fh, has_label_column)
    raise ValueError(f"unknown format {fmt_name!r}")
