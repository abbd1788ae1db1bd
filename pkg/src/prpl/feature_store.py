"""Feature-set data model, on-disk formats, and synthetic domain generators.

A FeatureSet is an immutable n x d block of extracted f32 features tagged
with the extractor that produced it and the domain it came from, plus
optional integer class labels. Two on-disk representations exist:

* binary (normative, written and read here): magic ``PRPLFS01``, then
  little-endian u32 ``n``, ``d``, ``label_flag``, ``num_classes``, then two
  u32-length-prefixed UTF-8 strings (extractor id, domain id), then n*d
  little-endian f32 row-major, then, iff ``label_flag == 1``, n little-endian
  u32 labels. ``num_classes`` is 0 when the set is unlabeled and no class
  count was declared.
* CSV (ingestion only): header line
  ``# extractor=<id> domain=<id> n=<n> d=<d> labels=<0|1> classes=<C>``
  followed by one comma-separated row per sample, label last when present.
"""

from __future__ import annotations

import io
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    LabelOutOfRangeError,
    MalformedHeaderError,
    NonFiniteValueError,
    ValidationError,
)

MAGIC = b"PRPLFS01"
_CSV_HEADER_RE = re.compile(
    r"^#\s*extractor=(\S+)\s+domain=(\S+)\s+n=(\d+)\s+d=(\d+)\s+labels=([01])\s+classes=(\d+)\s*$"
)


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """One domain's extracted features: n rows of d f32 values, optional labels."""

    extractor_id: str
    domain_id: str
    data: np.ndarray  # (n, d) float32
    labels: Optional[np.ndarray] = None  # (n,) int64, values in [0, num_classes)
    num_classes: int = 0  # 0 = unlabeled and undeclared

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        if data.ndim != 2:
            raise DimensionMismatchError(
                f"feature data must be 2-D, got shape {data.shape}"
            )
        n, d = data.shape
        if n < 1 or d < 1:
            raise DimensionMismatchError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        bad = ~np.isfinite(data)
        if bad.any():
            row = int(np.nonzero(bad.any(axis=1))[0][0])
            raise NonFiniteValueError(f"non-finite feature value in row {row}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

        if self.labels is not None:
            labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
            if labels.shape != (n,):
                raise DimensionMismatchError(
                    f"labels shape {labels.shape} does not match n={n}"
                )
            if self.num_classes < 2:
                raise LabelOutOfRangeError(
                    f"labeled set needs num_classes >= 2, got {self.num_classes}"
                )
            if labels.min() < 0 or labels.max() >= self.num_classes:
                bad_row = int(
                    np.nonzero((labels < 0) | (labels >= self.num_classes))[0][0]
                )
                raise LabelOutOfRangeError(
                    f"label {int(labels[bad_row])} at row {bad_row} outside "
                    f"[0, {self.num_classes})"
                )
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        elif self.num_classes < 0:
            raise ValidationError(f"num_classes must be >= 0, got {self.num_classes}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def features64(self) -> np.ndarray:
        """Feature matrix widened to f64 (all downstream arithmetic is f64)."""
        return self.data.astype(np.float64)

    def without_labels(self) -> "FeatureSet":
        """Unlabeled view (same data, class count kept as declared)."""
        if self.labels is None:
            return self
        return FeatureSet(
            extractor_id=self.extractor_id,
            domain_id=self.domain_id,
            data=self.data,
            labels=None,
            num_classes=self.num_classes,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureSet):
            return NotImplemented
        if (self.extractor_id, self.domain_id, self.num_classes) != (
            other.extractor_id,
            other.domain_id,
            other.num_classes,
        ):
            return False
        if not np.array_equal(self.data, other.data):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return self.labels is None or np.array_equal(self.labels, other.labels)


# -- binary format ---------------------------------------------------------


def save_feature_set(fs: FeatureSet, path) -> None:
    """Write ``fs`` to ``path`` in the binary format. Bytes are deterministic."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    label_flag = 1 if fs.labeled else 0
    buf.write(struct.pack("<IIII", fs.n, fs.d, label_flag, fs.num_classes))
    for s in (fs.extractor_id, fs.domain_id):
        raw = s.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    buf.write(fs.data.astype("<f4").tobytes(order="C"))
    if fs.labeled:
        buf.write(fs.labels.astype("<u4").tobytes())
    Path(path).write_bytes(buf.getvalue())


def _read_exact(buf: io.BufferedIOBase, count: int, what: str) -> bytes:
    raw = buf.read(count)
    if len(raw) != count:
        raise MalformedHeaderError(f"truncated file while reading {what}")
    return raw


def _load_binary(raw: bytes) -> FeatureSet:
    buf = io.BytesIO(raw)
    _read_exact(buf, len(MAGIC), "magic")
    n, d, label_flag, num_classes = struct.unpack(
        "<IIII", _read_exact(buf, 16, "header")
    )
    if label_flag not in (0, 1):
        raise MalformedHeaderError(f"label_flag must be 0 or 1, got {label_flag}")
    ids = []
    for what in ("extractor_id", "domain_id"):
        (length,) = struct.unpack("<I", _read_exact(buf, 4, f"{what} length"))
        try:
            ids.append(_read_exact(buf, length, what).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise MalformedHeaderError(f"{what} is not valid UTF-8") from exc
    payload = buf.read()
    expected = n * d * 4 + (n * 4 if label_flag else 0)
    if len(payload) != expected:
        raise DimensionMismatchError(
            f"payload is {len(payload)} bytes, expected {expected} for "
            f"n={n}, d={d}, labels={label_flag}"
        )
    if n < 1 or d < 1:
        raise DimensionMismatchError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    data = np.frombuffer(payload, dtype="<f4", count=n * d).reshape(n, d).copy()
    labels = None
    if label_flag:
        labels = np.frombuffer(payload, dtype="<u4", offset=n * d * 4, count=n)
        labels = labels.astype(np.int64)
    return FeatureSet(
        extractor_id=ids[0],
        domain_id=ids[1],
        data=data,
        labels=labels,
        num_classes=num_classes,
    )


# -- CSV ingestion ----------------------------------------------------------


def _load_csv(text: str) -> FeatureSet:
    lines = text.splitlines()
    if not lines:
        raise MalformedHeaderError("empty CSV file")
    m = _CSV_HEADER_RE.match(lines[0])
    if m is None:
        raise MalformedHeaderError(f"unrecognized CSV header: {lines[0]!r}")
    extractor_id, domain_id = m.group(1), m.group(2)
    n, d = int(m.group(3)), int(m.group(4))
    has_labels = m.group(5) == "1"
    num_classes = int(m.group(6))
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != n:
        raise DimensionMismatchError(f"header declares n={n} but file has {len(rows)} rows")
    width = d + (1 if has_labels else 0)
    data = np.empty((n, d), dtype=np.float32)
    labels = np.empty(n, dtype=np.int64) if has_labels else None
    for i, ln in enumerate(rows):
        parts = ln.split(",")
        if len(parts) != width:
            raise DimensionMismatchError(
                f"row {i} has {len(parts)} fields, expected {width}"
            )
        try:
            data[i] = [np.float32(p) for p in parts[:d]]
            if has_labels:
                labels[i] = int(parts[d])
        except ValueError as exc:
            raise MalformedHeaderError(f"unparseable value in row {i}: {exc}") from exc
    return FeatureSet(
        extractor_id=extractor_id,
        domain_id=domain_id,
        data=data,
        labels=labels,
        num_classes=num_classes,
    )


def load_feature_set(path) -> FeatureSet:
    """Load a feature set from the binary or CSV format, validating fully."""
    raw = Path(path).read_bytes()
    if raw.startswith(MAGIC):
        return _load_binary(raw)
    if raw.startswith(b"#"):
        return _load_csv(raw.decode("utf-8"))
    raise MalformedHeaderError(
        f"{path}: not a recognized feature file (bad magic/header)"
    )


# -- dataset manifest --------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    extractor_id: str
    domain_id: str
    path: str


@dataclass(frozen=True)
class DatasetManifest:
    """Index of feature files: one entry per (extractor, domain) pair."""

    entries: tuple[ManifestEntry, ...]
    num_classes: Optional[int] = None

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            key = (e.extractor_id, e.domain_id)
            if key in seen:
                raise ValidationError(f"duplicate manifest entry for {key}")
            seen.add(key)

    def extractors(self) -> list[str]:
        out: list[str] = []
        for e in self.entries:
            if e.extractor_id not in out:
                out.append(e.extractor_id)
        return out

    def find(self, extractor_id: str, domain_id: str) -> Optional[ManifestEntry]:
        for e in self.entries:
            if e.extractor_id == extractor_id and e.domain_id == domain_id:
                return e
        return None


def manifest_from_dict(doc: dict) -> DatasetManifest:
    """Build a manifest from its JSON document form.

    Expected shape::

        {"num_classes": 31,             # optional
         "entries": [{"extractor": "...", "domain": "...", "path": "..."}]}
    """
    if not isinstance(doc, dict):
        raise ValidationError("manifest document must be a JSON object")
    unknown = set(doc) - {"entries", "num_classes"}
    if unknown:
        raise ValidationError(f"unknown manifest keys: {sorted(unknown)}")
    raw_entries = doc.get("entries")
    if not isinstance(raw_entries, list) or not raw_entries:
        raise ValidationError("manifest needs a non-empty 'entries' list")
    entries = []
    for i, item in enumerate(raw_entries):
        if not isinstance(item, dict) or set(item) != {"extractor", "domain", "path"}:
            raise ValidationError(
                f"manifest entry {i} must have exactly keys extractor/domain/path"
            )
        entries.append(ManifestEntry(item["extractor"], item["domain"], item["path"]))
    num_classes = doc.get("num_classes")
    if num_classes is not None and (not isinstance(num_classes, int) or num_classes < 2):
        raise ValidationError("manifest num_classes must be an integer >= 2")
    return DatasetManifest(entries=tuple(entries), num_classes=num_classes)


# -- synthetic generator -------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for the Gaussian-blob source/target generator.

    Class c's mean sits at ``class_mean_separation`` along axis c (random unit
    directions when num_classes > d). Target samples are additionally offset
    by a fixed random-direction vector of L2 norm ``domain_shift``.
    """

    num_classes: int
    d: int
    n_per_class_source: int
    n_per_class_target: int
    class_mean_separation: float
    domain_shift: float
    noise_sigma: float

    def __post_init__(self):
        if self.num_classes < 1 or self.d < 1:
            raise ValidationError("num_classes and d must be >= 1")
        if self.n_per_class_source < 1 or self.n_per_class_target < 1:
            raise ValidationError("per-class sample counts must be >= 1")
        if self.noise_sigma <= 0:
            raise ValidationError("noise_sigma must be > 0")
        if self.domain_shift < 0 or self.class_mean_separation < 0:
            raise ValidationError("separations must be >= 0")


def _class_means(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    means = np.zeros((spec.num_classes, spec.d))
    if spec.num_classes <= spec.d:
        for c in range(spec.num_classes):
            means[c, c] = spec.class_mean_separation
    else:
        dirs = rng.standard_normal((spec.num_classes, spec.d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        means = spec.class_mean_separation * dirs
    return means


def synth_shift_vector(spec: SynthSpec, seed: int) -> np.ndarray:
    """The exact target-domain offset used by ``synth_gaussian_domains``."""
    rng = np.random.default_rng(seed)
    _class_means(spec, rng)  # consume the same draws as the generator
    if spec.domain_shift == 0:
        return np.zeros(spec.d)
    direction = rng.standard_normal(spec.d)
    direction /= np.linalg.norm(direction)
    return spec.domain_shift * direction


def synth_gaussian_domains(spec: SynthSpec, seed: int) -> tuple[FeatureSet, FeatureSet]:
    """Draw a labeled (source, target) pair of Gaussian class blobs.

    Pure function of (spec, seed). Target labels are ground truth meant for
    evaluation only; the training path never reads them.
    """
    rng = np.random.default_rng(seed)
    means = _class_means(spec, rng)
    if spec.domain_shift == 0:
        shift = np.zeros(spec.d)
    else:
        direction = rng.standard_normal(spec.d)
        direction /= np.linalg.norm(direction)
        shift = spec.domain_shift * direction

    def draw(n_per_class: int, offset: np.ndarray, domain: str) -> FeatureSet:
        n = n_per_class * spec.num_classes
        labels = np.repeat(np.arange(spec.num_classes), n_per_class)
        noise = rng.standard_normal((n, spec.d)) * spec.noise_sigma
        data = means[labels] + offset + noise
        return FeatureSet(
            extractor_id="synthetic",
            domain_id=domain,
            data=data.astype(np.float32),
            labels=labels,
            num_classes=spec.num_classes,
        )

    source = draw(spec.n_per_class_source, np.zeros(spec.d), "source")
    target = draw(spec.n_per_class_target, shift, "target")
    return source, target
