"""Data model for logit matrices, labels and robustness flags, with bit-exact
text and binary persistence.

Binary layout: magic b"LGT1", two little-endian uint32 counts (rows, cols),
then rows*cols little-endian float64 values in row-major order.

Text layout: first line "rows,cols", then one comma-separated line per row,
values printed with 17 significant digits (shortest exact round-trip for
IEEE doubles).

Labels and flags are one integer per line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MAGIC = b"LGT1"


class StoreError(Exception):
    """Base error for persistence and validation failures."""


class ParseError(StoreError):
    """Malformed file content; message names the offending row/column."""


class ValidationError(StoreError):
    """Component invariant violation; message names the offending index."""


@dataclass(frozen=True)
class LogitMatrix:
    """N_data x N_classes matrix of finite float64 logits."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"logit matrix must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 1:
            raise ValidationError("logit matrix needs at least one row")
        if arr.shape[1] < 2:
            raise ValidationError("logit matrix needs at least two columns")
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            r, c = bad[0]
            raise ValidationError(f"non-finite logit at row {r}, column {c}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LogitMatrix):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.all(self.values == other.values)
        )


@dataclass(frozen=True)
class LabelVector:
    """Ground-truth class indices, one per sample."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels, dtype=np.int64)
        if arr.ndim != 1:
            raise ValidationError("labels must be a 1-D sequence")
        if arr.size and arr.min() < 0:
            i = int(np.argmin(arr))
            raise ValidationError(f"negative label at index {i}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    def __len__(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class RobustFlags:
    """Per-sample booleans; true means the sample survived the attack."""

    flags: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.flags, dtype=bool).copy()
        if arr.ndim != 1:
            raise ValidationError("flags must be a 1-D sequence")
        arr.setflags(write=False)
        object.__setattr__(self, "flags", arr)

    def __len__(self) -> int:
        return self.flags.size


@dataclass(frozen=True)
class DatasetBundle:
    """Logits plus labels, with optional robustness flags and class names."""

    logits: LogitMatrix
    labels: LabelVector
    flags: Optional[RobustFlags] = None
    class_names: Optional[Sequence[str]] = field(default=None)


def validate_bundle(
    logits: LogitMatrix,
    labels: LabelVector,
    flags: Optional[RobustFlags] = None,
    class_names: Optional[Sequence[str]] = None,
) -> DatasetBundle:
    """Assemble a bundle, checking that all cross-component invariants hold."""
    if len(labels) != logits.rows:
        raise ValidationError(
            f"labels length mismatch: {len(labels)} labels for {logits.rows} rows"
        )
    out = labels.labels >= logits.cols
    if out.any():
        i = int(np.argmax(out))
        raise ValidationError(f"label out of range at index {i}: {labels.labels[i]}")
    if flags is not None and len(flags) != logits.rows:
        raise ValidationError(
            f"flags length mismatch: {len(flags)} flags for {logits.rows} rows"
        )
    if class_names is not None and len(class_names) != logits.cols:
        raise ValidationError(
            f"class_names length mismatch: {len(class_names)} names for "
            f"{logits.cols} columns"
        )
    return DatasetBundle(logits, labels, flags, class_names)


def store_matrix(m: LogitMatrix, path: str | Path, format: str = "binary") -> None:
    """Write a matrix to disk. Binary is bit-exact; text is value-exact."""
    path = Path(path)
    try:
        if format == "binary":
            with open(path, "wb") as f:
                f.write(MAGIC)
                f.write(struct.pack("<II", m.rows, m.cols))
                f.write(np.ascontiguousarray(m.values, dtype="<f8").tobytes())
        elif format == "text":
            with open(path, "w") as f:
                f.write(f"{m.rows},{m.cols}\n")
                for row in m.values:
                    f.write(",".join(f"{v:.17g}" for v in row) + "\n")
        else:
            raise ValueError(f"unknown format {format!r}")
    except OSError as e:
        raise StoreError(f"cannot write {path}: {e}") from e


def load_matrix(path: str | Path, format: str = "binary") -> LogitMatrix:
    """Read a matrix written by :func:`store_matrix`."""
    path = Path(path)
    if format == "binary":
        return _load_binary(path)
    if format == "text":
        return _load_text(path)
    raise ValueError(f"unknown format {format!r}")


def _load_binary(path: Path) -> LogitMatrix:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise StoreError(f"cannot read {path}: {e}") from e
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise ParseError(f"{path}: missing LGT1 header")
    rows, cols = struct.unpack("<II", raw[4:12])
    expect = 12 + 8 * rows * cols
    if len(raw) != expect:
        raise ParseError(
            f"{path}: payload is {len(raw) - 12} bytes, header promises "
            f"{8 * rows * cols} ({rows}x{cols})"
        )
    vals = np.frombuffer(raw, dtype="<f8", offset=12).reshape(rows, cols)
    bad = np.argwhere(~np.isfinite(vals))
    if bad.size:
        r, c = bad[0]
        raise ParseError(f"{path}: non-finite value at row {r}, column {c}")
    return LogitMatrix(vals.astype(np.float64))


def _load_text(path: Path) -> LogitMatrix:
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise StoreError(f"cannot read {path}: {e}") from e
    if not lines:
        raise ParseError(f"{path}: empty file")
    head = lines[0].split(",")
    if len(head) != 2:
        raise ParseError(f"{path}: header must be 'rows,cols', got {lines[0]!r}")
    try:
        rows, cols = int(head[0]), int(head[1])
    except ValueError as e:
        raise ParseError(f"{path}: non-integer header {lines[0]!r}") from e
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != rows:
        raise ParseError(f"{path}: header promises {rows} rows, found {len(body)}")
    vals = np.empty((rows, cols), dtype=np.float64)
    for r, ln in enumerate(body):
        parts = ln.split(",")
        if len(parts) != cols:
            raise ParseError(f"{path}: row {r} has {len(parts)} values, expected {cols}")
        for c, tok in enumerate(parts):
            try:
                v = float(tok)
            except ValueError as e:
                raise ParseError(f"{path}: unparseable value at row {r}, column {c}") from e
            if not np.isfinite(v):
                raise ParseError(f"{path}: non-finite value at row {r}, column {c}")
            vals[r, c] = v
    return LogitMatrix(vals)


def store_labels(labels: LabelVector, path: str | Path) -> None:
    Path(path).write_text("".join(f"{v}\n" for v in labels.labels))


def load_labels(path: str | Path) -> LabelVector:
    path = Path(path)
    vals = []
    for i, ln in enumerate(path.read_text().splitlines()):
        if not ln.strip():
            continue
        try:
            vals.append(int(ln))
        except ValueError as e:
            raise ParseError(f"{path}: unparseable label at line {i}") from e
    return LabelVector(np.array(vals, dtype=np.int64))


def store_flags(flags: RobustFlags, path: str | Path) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in flags.flags))


def load_flags(path: str | Path) -> RobustFlags:
    path = Path(path)
    vals = []
    for i, ln in enumerate(path.read_text().splitlines()):
        if not ln.strip():
            continue
        tok = ln.strip()
        if tok not in ("0", "1"):
            raise ParseError(f"{path}: flag at line {i} must be 0 or 1, got {tok!r}")
        vals.append(tok == "1")
    return RobustFlags(np.array(vals, dtype=bool))
