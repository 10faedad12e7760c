"""Matrix files (WECS1, binary PGM, CSV) and stack manifests.

WECS1 layout, all little-endian::

    b"WECS1" | rows: uint32 | cols: uint32 | b"f32" or b"f64" | row-major payload

Everything is widened to float64 on load.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

MAGIC = b"WECS1"
MANIFEST_FORMAT = "wecs-manifest/1"
PGM_MAXVAL = 65535
_HEADER = struct.Struct("<II")
_DTYPES = {b"f32": np.dtype("<f4"), b"f64": np.dtype("<f8")}


class FormatError(ValueError):
    pass


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(v: float) -> str:
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


# -- encoders ---------------------------------------------------------------


def encode_wecs1(matrix: np.ndarray, dtype: str = "f64") -> bytes:
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise FormatError(f"expected a 2D matrix, got shape {m.shape}")
    tag = dtype.encode()
    if tag not in _DTYPES:
        raise FormatError(f"unknown dtype tag {dtype!r}; use f32 or f64")
    payload = np.ascontiguousarray(m, dtype=_DTYPES[tag]).tobytes()
    return MAGIC + _HEADER.pack(m.shape[0], m.shape[1]) + tag + payload


def pgm_scale(matrix: np.ndarray) -> tuple[float, float]:
    m = np.asarray(matrix, dtype=np.float64)
    return float(m.min()), float(m.max())


def encode_pgm(matrix: np.ndarray) -> tuple[bytes, bytes]:
    """16-bit P5 image of the affinely rescaled matrix, plus its sidecar text."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise FormatError(f"expected a 2D matrix, got shape {m.shape}")
    lo, hi = pgm_scale(m)
    if hi > lo:
        samples = np.rint((m - lo) / (hi - lo) * PGM_MAXVAL)
    else:
        samples = np.zeros(m.shape)
    header = f"P5\n{m.shape[1]} {m.shape[0]}\n{PGM_MAXVAL}\n".encode()
    sidecar = f"min {_num(lo)}\nmax {_num(hi)}\nmaxval {PGM_MAXVAL}\n".encode()
    return header + samples.astype(">u2").tobytes(), sidecar


def encode_csv(matrix: np.ndarray) -> bytes:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise FormatError(f"expected a 2D matrix, got shape {m.shape}")
    return "\n".join(",".join(_num(v) for v in row) for row in m.tolist()).encode()


def encode_matrix(matrix: np.ndarray, fmt: str, dtype: str = "f64") -> dict[str, bytes]:
    """Bytes for ``fmt``; PGM also yields a ``.scale`` sidecar keyed by suffix."""
    if fmt == "wecs1":
        return {"": encode_wecs1(matrix, dtype)}
    if fmt == "pgm":
        img, side = encode_pgm(matrix)
        return {"": img, ".scale": side}
    if fmt == "csv":
        return {"": encode_csv(matrix)}
    raise FormatError(f"unknown matrix format {fmt!r}; use wecs1, pgm or csv")


def write_matrix(matrix: np.ndarray, path: str | os.PathLike, fmt: str = "wecs1", dtype: str = "f64") -> None:
    for suffix, data in encode_matrix(matrix, fmt, dtype).items():
        atomic_write(f"{os.fspath(path)}{suffix}", data)


# -- decoders ---------------------------------------------------------------


def _decode_wecs1(data: bytes, path: str) -> np.ndarray:
    if len(data) < 16:
        raise FormatError(f"{path}: truncated WECS1 header ({len(data)} bytes, need 16)")
    rows, cols = _HEADER.unpack_from(data, 5)
    tag = data[13:16]
    if tag not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype tag {tag!r} at byte offset 13")
    dt = _DTYPES[tag]
    need = rows * cols * dt.itemsize
    have = len(data) - 16
    if have != need:
        raise FormatError(
            f"{path}: payload is {have} bytes from byte offset 16, expected {need} for {rows}x{cols} {tag.decode()}"
        )
    m = np.frombuffer(data, dtype=dt, offset=16).reshape(rows, cols).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(m))
    if bad.size:
        raise FormatError(f"{path}: non-finite value at byte offset {16 + int(bad[0]) * dt.itemsize}")
    return m


def _pgm_header(data: bytes, path: str) -> tuple[int, int, int, int]:
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: malformed PGM header at byte offset {pos}")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError(f"{path}: malformed PGM header at byte offset {pos}")
    width, height, maxval = fields
    if not 0 < maxval <= 65535:
        raise FormatError(f"{path}: PGM maxval {maxval} outside 1..65535")
    return width, height, maxval, pos + 1


def _decode_pgm(data: bytes, path: str) -> np.ndarray:
    width, height, maxval, offset = _pgm_header(data, path)
    dt = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    need = width * height * dt.itemsize
    have = len(data) - offset
    if have < need:
        raise FormatError(f"{path}: PGM payload truncated at byte offset {len(data)}, expected {need} bytes from {offset}")
    return np.frombuffer(data, dtype=dt, count=width * height, offset=offset).reshape(height, width).astype(np.float64)


def _decode_csv(data: bytes, path: str) -> np.ndarray:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a WECS1, PGM or UTF-8 CSV file (byte offset {exc.start})") from exc
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            if not rows and lineno == 1:
                continue  # header row
            raise FormatError(f"{path}: line {lineno}: non-numeric value") from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise FormatError(f"{path}: line {lineno}: ragged row ({len(vals)} fields, expected {width})")
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}: line {lineno}: non-finite value")
        rows.append(vals)
    if not rows:
        raise FormatError(f"{path}: no numeric rows")
    return np.array(rows, dtype=np.float64)


def read_pgm_scale(path: str | os.PathLike) -> tuple[float, float] | None:
    side = Path(f"{os.fspath(path)}.scale")
    if not side.exists():
        return None
    vals = dict(line.split() for line in side.read_text().splitlines() if line.strip())
    return float(vals["min"]), float(vals["max"])


def read_image(path: str | os.PathLike, apply_scale: bool = True) -> np.ndarray:
    """Load a WECS1, binary PGM (P5) or CSV matrix as float64.

    PGM samples are mapped back to original units when a ``.scale`` sidecar
    written by :func:`write_matrix` sits next to the file and ``apply_scale``.
    """
    path = os.fspath(path)
    data = Path(path).read_bytes()
    if data[:5] == MAGIC:
        return _decode_wecs1(data, path)
    if data[:2] == b"P5":
        m = _decode_pgm(data, path)
        scale = read_pgm_scale(path) if apply_scale else None
        if scale is not None:
            lo, hi = scale
            m = lo + m / PGM_MAXVAL * (hi - lo)
        return m
    if data[:1] in (b"P", b"W"):
        raise FormatError(f"{path}: unrecognised magic {data[:5]!r} at byte offset 0")
    return _decode_csv(data, path)


# -- manifests --------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    timestamp: str | None = None
    channel: str | None = None


@dataclass(frozen=True)
class StackManifest:
    entries: tuple[ManifestEntry, ...]
    base_dir: Path
    version: str = MANIFEST_FORMAT

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.base_dir / p

    def paths(self) -> list[Path]:
        return [self.resolve(e) for e in self.entries]

    def timestamps(self) -> tuple[str, ...] | None:
        ts = [e.timestamp for e in self.entries]
        return tuple(ts) if all(t is not None for t in ts) else None

    def iter_images(self):
        for p in self.paths():
            yield read_image(p)

    def to_json(self) -> bytes:
        doc = {
            "format": self.version,
            "entries": [
                {k: v for k, v in (("path", e.path), ("timestamp", e.timestamp), ("channel", e.channel)) if v is not None}
                for e in self.entries
            ],
        }
        return (json.dumps(doc, indent=2) + "\n").encode()


def load_manifest(path: str | os.PathLike) -> StackManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if doc.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{path}: unsupported manifest format {doc.get('format')!r}")
    raw = doc.get("entries") or []
    if not raw:
        raise FormatError(f"{path}: manifest has no entries")
    entries = tuple(ManifestEntry(e["path"], e.get("timestamp"), e.get("channel")) for e in raw)
    man = StackManifest(entries, path.parent)
    for i, p in enumerate(man.paths()):
        if not p.exists():
            raise FormatError(f"{path}: entry {i + 1}: {p} does not exist")
    stamps = [e.timestamp for e in entries if e.timestamp is not None]
    if stamps:
        if len(stamps) != len(entries):
            raise FormatError(f"{path}: timestamps must be given for all entries or none")
        try:
            parsed = [datetime.fromisoformat(t) for t in stamps]
        except ValueError as exc:
            raise FormatError(f"{path}: bad ISO-8601 timestamp: {exc}") from exc
        for i in range(1, len(parsed)):
            if parsed[i] <= parsed[i - 1]:
                raise FormatError(f"{path}: entry {i + 1}: timestamps are not strictly increasing")
    return man
