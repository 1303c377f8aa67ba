"""Feature sets: storage, synthetic generation and file I/O.

Two on-disk formats are supported.  ``fsfv`` is a little-endian binary
layout::

    b"FSFV" | u32 version=1 | u32 N | u32 d | u32 C
    | N*d float64 (row-major) | N u32 labels
    | C x (u16 byte length + UTF-8 class name)

with no padding and no trailing bytes.  ``csv`` has a header
``label,f0,f1,...`` and one sample per row.
"""

import csv
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FeatureFormatError
from .sampling import RngStream

SPLITS = ("base", "validation", "test")
MAGIC = b"FSFV"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True, eq=False)
class FeatureSet:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple = field(default=())
    split_tag: str = "test"

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, order="C")
        labels = np.array(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise DomainError("features must be an N x d matrix with N, d >= 1")
        if labels.shape != (feats.shape[0],):
            raise DomainError("need exactly one label per feature row")
        if not np.all(np.isfinite(feats)):
            raise DomainError("features contain NaN or Inf")
        names = tuple(self.class_names)
        if not names:
            names = tuple(f"class_{c}" for c in range(int(labels.max()) + 1 if labels.size else 0))
        if labels.min() < 0 or labels.max() >= len(names):
            raise DomainError(f"labels must lie in [0, {len(names)})")
        present = np.bincount(labels, minlength=len(names))
        if np.any(present == 0):
            missing = np.flatnonzero(present == 0).tolist()
            raise DomainError(f"classes without samples: {missing}")
        if self.split_tag not in SPLITS:
            raise DomainError(f"split_tag must be one of {SPLITS}")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)

    def class_indices(self):
        """Row indices of every class, in ascending order."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.cumsum(np.bincount(self.labels, minlength=self.n_classes))[:-1]
        return np.split(order, bounds)

    def equals(self, other):
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.class_names == other.class_names
        )


@dataclass(frozen=True)
class SynthConfig:
    classes: int
    dim: int
    per_class: int
    separation: float
    seed: int = 0

    def __post_init__(self):
        if self.classes < 1 or self.dim < 1 or self.per_class < 1:
            raise DomainError("classes, dim and per_class must be positive")
        if not self.separation > 0:
            raise DomainError("separation must be positive")


def generate_synthetic(cfg, split_tag="test"):
    """Isotropic Gaussian clusters around centers drawn uniformly on the unit sphere.

    Within-class standard deviation is ``1 / separation``.  Features are
    stored raw; normalization happens when tasks are built.
    """
    rng = RngStream(cfg.seed, 0)
    centers = rng.normal((cfg.classes, cfg.dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    noise = rng.normal((cfg.classes, cfg.per_class, cfg.dim)) / cfg.separation
    feats = (centers[:, None, :] + noise).reshape(-1, cfg.dim)
    labels = np.repeat(np.arange(cfg.classes), cfg.per_class)
    names = tuple(f"c{c:03d}" for c in range(cfg.classes))
    return FeatureSet(feats, labels, names, split_tag)


def synthetic_centers(cfg):
    """The class centers ``generate_synthetic`` uses for ``cfg``."""
    centers = RngStream(cfg.seed, 0).normal((cfg.classes, cfg.dim))
    return centers / np.linalg.norm(centers, axis=1, keepdims=True)


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in ("fsfv", "csv"):
            raise DomainError(f"unknown feature format {fmt!r}")
        return fmt
    return "csv" if str(path).lower().endswith(".csv") else "fsfv"


def encode_fsfv(fs):
    n, d = fs.features.shape
    parts = [
        _HEADER.pack(MAGIC, VERSION, n, d, fs.n_classes),
        fs.features.astype("<f8").tobytes(),
        fs.labels.astype("<u4").tobytes(),
    ]
    for name in fs.class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DomainError("class name longer than 65535 bytes")
        parts.append(struct.pack("<H", len(raw)) + raw)
    return b"".join(parts)


def decode_fsfv(buf, split_tag="test"):
    if len(buf) < _HEADER.size:
        raise FeatureFormatError("truncated header", location=len(buf))
    magic, version, n, d, c = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FeatureFormatError("bad magic bytes", location=0)
    if version != VERSION:
        raise FeatureFormatError(f"unsupported version {version}", location=4)
    pos = _HEADER.size
    need = n * d * 8
    if len(buf) < pos + need:
        rows = (len(buf) - pos) // (8 * d) if d else 0
        raise FeatureFormatError(
            f"truncated feature payload: header declares N={n} rows, found {rows}", location=len(buf)
        )
    feats = np.frombuffer(buf, dtype="<f8", count=n * d, offset=pos).reshape(n, d)
    pos += need
    if len(buf) < pos + 4 * n:
        raise FeatureFormatError("truncated label payload", location=len(buf))
    labels = np.frombuffer(buf, dtype="<u4", count=n, offset=pos).astype(np.int64)
    pos += 4 * n
    names = []
    for _ in range(c):
        if len(buf) < pos + 2:
            raise FeatureFormatError("truncated class-name table", location=pos)
        (length,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if len(buf) < pos + length:
            raise FeatureFormatError("truncated class name", location=pos)
        try:
            names.append(buf[pos : pos + length].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FeatureFormatError("class name is not valid UTF-8", location=pos) from exc
        pos += length
    if pos != len(buf):
        raise FeatureFormatError(f"{len(buf) - pos} trailing bytes", location=pos)
    return FeatureSet(feats, labels, tuple(names), split_tag)


def _write_csv(fs, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["label"] + [f"f{j}" for j in range(fs.dim)])
    for label, row in zip(fs.labels.tolist(), fs.features.tolist()):
        writer.writerow([label] + [repr(v) for v in row])


def _read_csv(fh, split_tag):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FeatureFormatError("empty CSV file", location=0) from None
    if not header or header[0].strip() != "label" or len(header) < 2:
        raise FeatureFormatError("CSV header must be label,f0,f1,...", location=0)
    d = len(header) - 1
    labels, rows = [], []
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != d + 1:
            raise FeatureFormatError(f"row {row_no}: expected {d + 1} fields, got {len(row)}", location=row_no)
        try:
            labels.append(int(row[0]))
            rows.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise FeatureFormatError(f"row {row_no}: {exc}", location=row_no) from None
    if not rows:
        raise FeatureFormatError("CSV file has no samples", location=1)
    feats = np.array(rows, dtype=np.float64)
    bad = np.flatnonzero(~np.all(np.isfinite(feats), axis=1))
    if bad.size:
        raise FeatureFormatError(f"row {bad[0] + 1}: non-finite feature value", location=int(bad[0]) + 1)
    return FeatureSet(feats, np.array(labels), (), split_tag)


def save_features(fs, path, fmt=None):
    fmt = _infer_format(path, fmt)
    if fmt == "fsfv":
        with open(path, "wb") as fh:
            fh.write(encode_fsfv(fs))
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            _write_csv(fs, fh)


def load_features(path, fmt=None, split_tag="test"):
    fmt = _infer_format(path, fmt)
    if fmt == "fsfv":
        with open(path, "rb") as fh:
            return decode_fsfv(fh.read(), split_tag)
    with open(path, encoding="utf-8", newline="") as fh:
        return _read_csv(io.StringIO(fh.read()), split_tag)
