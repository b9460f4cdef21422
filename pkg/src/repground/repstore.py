"""Representation sets, pairings, pooling, and the on-disk formats.

Two representation file formats are supported:

* binary (``.reps``): magic ``REPS``, then little-endian u32 version (=1),
  n and d, followed by n*d float32 values in row-major order.  Row ids live
  in a sidecar JSON array next to it (``<path>.ids.json``).
* TSV (``.tsv``): one row per vector, id in the first column, then the
  coordinates as decimal floats.

STS gold files are TSV with columns ``id_a, id_b, score``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AlignmentError, DegenerateInputError, FormatError, ValidationError

MAGIC = b"REPS"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
FORMATS = ("binary", "tsv")


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class RepresentationSet:
    """Named n x d matrix of vectors with one unique string id per row."""

    name: str
    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.vectors, copy=True)
        if vectors.dtype not in (np.float32, np.float64):
            vectors = vectors.astype(np.float64)
        if vectors.ndim != 2:
            raise ValidationError(f"{self.name}: vectors must be 2-D, got shape {vectors.shape}")
        ids = tuple(str(i) for i in self.ids)
        n, d = vectors.shape
        if n < 1 or d < 1:
            raise ValidationError(f"{self.name}: need n >= 1 and d >= 1, got {vectors.shape}")
        if len(ids) != n:
            raise ValidationError(f"{self.name}: {len(ids)} ids for {n} rows")
        if len(set(ids)) != n:
            seen, dup = set(), None
            for i in ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise ValidationError(f"{self.name}: duplicate id {dup!r}")
        if not np.all(np.isfinite(vectors)):
            row = int(np.argwhere(~np.isfinite(vectors))[0, 0])
            raise ValidationError(f"{self.name}: non-finite value in row {row} (id {ids[row]!r})")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "vectors", _freeze(vectors))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index(self) -> dict[str, int]:
        return {i: k for k, i in enumerate(self.ids)}

    def select(self, ids: Sequence[str], name: str | None = None) -> "RepresentationSet":
        """Subset (and reorder) rows by id."""
        lookup = self.index()
        missing = [i for i in ids if i not in lookup]
        if missing:
            raise AlignmentError(f"{self.name}: unknown id {missing[0]!r}")
        rows = [lookup[i] for i in ids]
        return RepresentationSet(name or self.name, tuple(ids), self.vectors[rows])


@dataclass(frozen=True)
class TokenSequence:
    """Per-token encoder states of one sentence plus a padding mask."""

    tokens: np.ndarray
    mask: tuple[bool, ...] | None = None

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.float64)
        if tokens.ndim != 2 or tokens.shape[0] < 1:
            raise ValidationError(f"tokens must be an L x d matrix with L >= 1, got {tokens.shape}")
        mask = (True,) * tokens.shape[0] if self.mask is None else tuple(bool(m) for m in self.mask)
        if len(mask) != tokens.shape[0]:
            raise ValidationError(f"mask length {len(mask)} != {tokens.shape[0]} tokens")
        object.__setattr__(self, "tokens", _freeze(tokens))
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class PairedDataset:
    """Two representation sets aligned row by row."""

    left: RepresentationSet
    right: RepresentationSet

    def __post_init__(self):
        if self.left.n != self.right.n:
            raise ValidationError(f"paired sets differ in size: {self.left.n} vs {self.right.n}")
        if self.left.n < 2:
            raise ValidationError("a paired dataset needs at least 2 pairs")

    @property
    def n(self) -> int:
        return self.left.n

    @property
    def ids(self) -> tuple[str, ...]:
        return self.left.ids

    def rows(self, index: Sequence[int]) -> "PairedDataset":
        index = list(index)
        left = RepresentationSet(self.left.name, [self.left.ids[i] for i in index], self.left.vectors[index])
        right = RepresentationSet(self.right.name, [self.right.ids[i] for i in index], self.right.vectors[index])
        return PairedDataset(left, right)


@dataclass(frozen=True)
class StsRecord:
    id_a: str
    id_b: str
    score: float


@dataclass(frozen=True)
class StsGold:
    records: tuple[StsRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        records = tuple(self.records)
        if len(records) < 2:
            raise ValidationError("STS gold needs at least 2 records")
        for r in records:
            if not np.isfinite(r.score):
                raise ValidationError(f"non-finite gold score for pair ({r.id_a}, {r.id_b})")
        object.__setattr__(self, "records", records)

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.records], dtype=np.float64)


# --------------------------------------------------------------------- I/O


def ids_path(path) -> Path:
    """Sidecar manifest location for a binary representation file."""
    path = Path(path)
    return path.with_name(path.name + ".ids.json")


def infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    return "tsv" if suffix in (".tsv", ".txt") else "binary"


def _check_format(fmt: str | None, path) -> str:
    fmt = fmt or infer_format(path)
    if fmt not in FORMATS:
        raise ValidationError(f"unknown representation format {fmt!r}; expected one of {FORMATS}")
    return fmt


def encode_matrix(matrix: np.ndarray) -> bytes:
    """Serialize a matrix in the binary representation layout (no ids)."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {matrix.shape}")
    n, d = matrix.shape
    body = np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, VERSION, n, d) + body


def decode_matrix(data: bytes, offset: int = 0, source: str = "<bytes>") -> tuple[np.ndarray, int]:
    """Inverse of :func:`encode_matrix`; returns the matrix and the end offset."""
    if len(data) - offset < _HEADER.size:
        raise FormatError(f"{source}: truncated header")
    magic, version, n, d = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    start = offset + _HEADER.size
    end = start + 4 * n * d
    if len(data) < end:
        raise FormatError(f"{source}: header declares {n}x{d} but payload is short")
    matrix = np.frombuffer(data, dtype="<f4", count=n * d, offset=start).reshape(n, d)
    return matrix.astype(np.float32), end


def load_representation_set(path, format: str | None = None, name: str | None = None) -> RepresentationSet:
    path = Path(path)
    fmt = _check_format(format, path)
    name = name or path.stem
    if fmt == "binary":
        data = path.read_bytes()
        matrix, end = decode_matrix(data, source=str(path))
        if end != len(data):
            raise FormatError(f"{path}: {len(data) - end} trailing bytes after declared payload")
        manifest = ids_path(path)
        try:
            ids = json.loads(manifest.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{manifest}: invalid JSON ({exc})") from exc
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise FormatError(f"{manifest}: expected a JSON array of strings")
        if len(ids) != matrix.shape[0]:
            raise FormatError(f"{manifest}: {len(ids)} ids but header declares n={matrix.shape[0]}")
        return RepresentationSet(name, ids, matrix)

    ids, rows = [], []
    width = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise FormatError(f"{path}:{lineno}: expected id followed by at least one value")
            if width is None:
                width = len(cols) - 1
            elif len(cols) - 1 != width:
                raise FormatError(f"{path}:{lineno}: {len(cols) - 1} values, expected {width}")
            try:
                rows.append([float(c) for c in cols[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            ids.append(cols[0])
    if not rows:
        raise FormatError(f"{path}: no rows")
    return RepresentationSet(name, ids, np.array(rows, dtype=np.float64))


def save_representation_set(reps: RepresentationSet, path, format: str | None = None) -> None:
    """Write ``reps``; binary stores float32, TSV stores 17 significant digits."""
    path = Path(path)
    fmt = _check_format(format, path)
    try:
        if fmt == "binary":
            path.write_bytes(encode_matrix(reps.vectors))
            ids_path(path).write_text(json.dumps(list(reps.ids)), encoding="utf-8")
        else:
            with path.open("w", encoding="utf-8", newline="\n") as fh:
                for i, row in zip(reps.ids, reps.vectors.astype(np.float64)):
                    fh.write(i + "\t" + "\t".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write representation set to {path}: {exc.strerror}") from exc


def load_sts_gold(path) -> StsGold:
    """Read ``id_a<TAB>id_b<TAB>score`` lines; a literal header row is skipped."""
    path = Path(path)
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 columns, got {len(cols)}")
            if lineno == 1 and cols == ["id_a", "id_b", "score"]:
                continue
            try:
                score = float(cols[2])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad score {cols[2]!r}") from exc
            records.append(StsRecord(cols[0], cols[1], score))
    return StsGold(tuple(records))


def load_id_map(path) -> dict[str, str]:
    """Two-column TSV (left id, right id) used by :func:`align_pairs`."""
    path = Path(path)
    mapping: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns, got {len(cols)}")
            if cols[0] in mapping:
                raise ValidationError(f"{path}:{lineno}: left id {cols[0]!r} mapped twice")
            mapping[cols[0]] = cols[1]
    return mapping


def load_id_list(path) -> list[str]:
    with Path(path).open(encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def load_token_sequences(path) -> list[tuple[str, TokenSequence]]:
    """JSON-lines file of ``{"id": ..., "tokens": [[...], ...], "mask": [...]}``.

    ``mask`` is optional and defaults to all tokens being real.
    """
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append((str(obj["id"]), TokenSequence(np.array(obj["tokens"], dtype=np.float64), obj.get("mask"))))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            except ValidationError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out


# -------------------------------------------------------------- operations


def mean_pool(seq: TokenSequence) -> np.ndarray:
    """Average of the unmasked token states."""
    keep = np.fromiter(seq.mask, dtype=bool, count=len(seq.mask))
    if not keep.any():
        raise DegenerateInputError("cannot pool a sequence whose tokens are all masked")
    return seq.tokens[keep].mean(axis=0)


def pool_sequences(items: Iterable[tuple[str, TokenSequence]], name: str = "pooled") -> RepresentationSet:
    items = list(items)
    if not items:
        raise ValidationError("no token sequences to pool")
    dims = {seq.tokens.shape[1] for _, seq in items}
    if len(dims) != 1:
        raise ValidationError(f"token sequences disagree on dimension: {sorted(dims)}")
    return RepresentationSet(name, [i for i, _ in items], np.vstack([mean_pool(s) for _, s in items]))


def align_pairs(a: RepresentationSet, b: RepresentationSet, id_map: Mapping[str, str] | None = None) -> PairedDataset:
    """Pair rows of ``a`` with rows of ``b`` through ``id_map``.

    Without a map, ids are matched by equality.  Output follows the row order of ``a``.
    """
    if id_map is None:
        b_ids = set(b.ids)
        id_map = {i: i for i in a.ids if i in b_ids}
    targets = list(id_map.values())
    if len(set(targets)) != len(targets):
        raise ValidationError("id map is not injective: two left ids map to the same right id")
    a_index, b_index = a.index(), b.index()
    for left_id, right_id in id_map.items():
        if left_id not in a_index:
            raise AlignmentError(f"id {left_id!r} not found in {a.name}")
        if right_id not in b_index:
            raise AlignmentError(f"id {right_id!r} not found in {b.name}")
    left_ids = [i for i in a.ids if i in id_map]
    if len(left_ids) < 2:
        raise ValidationError(f"only {len(left_ids)} mapped pairs; need at least 2")
    return PairedDataset(a.select(left_ids), b.select([id_map[i] for i in left_ids]))


def split(pairs: PairedDataset, test_ids: Iterable[str]) -> tuple[PairedDataset, PairedDataset]:
    """Partition pairs into (train, test) by the left-side ids."""
    test_ids = set(test_ids)
    index = pairs.left.index()
    unknown = sorted(test_ids - index.keys())
    if unknown:
        raise AlignmentError(f"test id {unknown[0]!r} not among the pairs")
    test_rows = [k for k, i in enumerate(pairs.ids) if i in test_ids]
    train_rows = [k for k, i in enumerate(pairs.ids) if i not in test_ids]
    if len(test_rows) < 2 or len(train_rows) < 2:
        raise ValidationError(
            f"split too small: train n={len(train_rows)}, test n={len(test_rows)}; both need >= 2"
        )
    return pairs.rows(train_rows), pairs.rows(test_rows)
