"""Datasets, query workloads and the binary index manifest.

Manifest layout (little-endian):

    magic  8 bytes  b"RAGGIDX\\x00"
    version  uint32
    sha256 of everything after the digest  32 bytes
    sections: tag (4 ASCII bytes), payload length (uint64), payload

Sections hold the config and derived parameters as JSON, the dataset
fingerprint, the points, the aggregation tree arrays and the multi-scale
bucket intervals. LSH functions are not stored: they are regenerated from the
build seed, which reproduces them bit for bit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rangeagg.aifp import AifpIndex, build_aifp
from rangeagg.ameb import AmebIndex, build_ameb
from rangeagg.core import GlobalConfig, PointSet, RngStream
from rangeagg.tree import AggregationTree

MAGIC = b"RAGGIDX\x00"
FORMAT_VERSION = 1
_TREE_FIELDS = ("parent", "left", "right", "s", "height", "re", "lo", "hi", "perm")


class DataError(ValueError):
    """Unreadable or inconsistent input data."""


class ManifestError(DataError):
    pass


# -- datasets ----------------------------------------------------------------------


def save_dataset(path, coords: np.ndarray, fmt: str = "auto") -> None:
    coords = np.asarray(coords, dtype=np.float64)
    fmt = _format(path, fmt)
    if fmt == "bin":
        n, d = coords.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<ii", n, d))
            fh.write(coords.astype("<f8").tobytes())
    else:
        np.savetxt(path, coords, fmt="%.17g")


def load_dataset(path, fmt: str = "auto") -> PointSet:
    fmt = _format(path, fmt)
    try:
        if fmt == "bin":
            raw = Path(path).read_bytes()
            if len(raw) < 8:
                raise DataError(f"{path}: truncated header")
            n, d = struct.unpack("<ii", raw[:8])
            if n < 1 or d < 1 or len(raw) != 8 + 8 * n * d:
                raise DataError(f"{path}: header says {n}x{d} but the file holds {len(raw) - 8} data bytes")
            coords = np.frombuffer(raw, dtype="<f8", offset=8).reshape(n, d).astype(np.float64)
        else:
            coords = np.loadtxt(path, dtype=np.float64, ndmin=2)
        return PointSet(coords)
    except DataError:
        raise
    except (OSError, ValueError) as e:
        raise DataError(f"{path}: {e}") from e


def _format(path, fmt: str) -> str:
    if fmt == "auto":
        return "bin" if str(path).endswith(".bin") else "text"
    if fmt not in ("bin", "text"):
        raise ValueError(f"unknown dataset format {fmt!r}")
    return fmt


# -- workloads ---------------------------------------------------------------------


@dataclass(frozen=True)
class QueryRecord:
    kind: str  # "aifp", "ameb" or "bd"
    center: np.ndarray
    radius: float
    q: np.ndarray | None = None  # aifp only
    seed: int = 0
    out_center: np.ndarray | None = None  # bd only
    out_radius: float | None = None

    def to_json(self) -> str:
        rec = {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius, "seed": self.seed}
        if self.q is not None:
            rec["q"] = self.q.tolist()
        if self.out_center is not None:
            rec["out_center"] = self.out_center.tolist()
            rec["out_radius"] = self.out_radius
        return json.dumps(rec)


def parse_record(line: str, d: int | None = None) -> QueryRecord:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise DataError(f"not a JSON object: {e}") from e
    if not isinstance(rec, dict):
        raise DataError("record must be a JSON object")
    kind = rec.get("kind")
    if kind not in ("aifp", "ameb", "bd"):
        raise DataError(f"unknown kind {kind!r}")

    def vec(key):
        v = np.asarray(rec[key], dtype=np.float64)
        if v.ndim != 1 or (d is not None and v.shape[0] != d) or not np.all(np.isfinite(v)):
            raise DataError(f"field {key!r} is not a finite vector of dimension {d}")
        return v

    try:
        center = vec("center")
        radius = float(rec["radius"])
        seed = int(rec.get("seed", 0))
        q = vec("q") if kind == "aifp" else None
        out_c = vec("out_center") if kind == "bd" else None
        out_r = float(rec["out_radius"]) if kind == "bd" else None
    except KeyError as e:
        raise DataError(f"missing field {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise DataError(str(e)) from e
    if not radius >= 0 or (out_r is not None and not out_r > 0):
        raise DataError("radii must be non-negative")
    return QueryRecord(kind, center, radius, q, seed, out_c, out_r)


def write_workload(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


# -- manifest ----------------------------------------------------------------------


@dataclass
class IndexBundle:
    """Everything a query needs: the points, the AIFP index and the AMEB wrapper."""

    points: PointSet
    config: GlobalConfig
    aifp: AifpIndex
    ameb: AmebIndex

    @property
    def tree(self) -> AggregationTree:
        return self.aifp.tree


def build_bundle(points: PointSet | np.ndarray, config: GlobalConfig, tree: AggregationTree | None = None) -> IndexBundle:
    points = points if isinstance(points, PointSet) else PointSet(points)
    root = RngStream(config.seed)
    aifp = build_aifp(points, config, root.child("aifp"), tree)
    ameb = build_ameb(points, config, root.child("ameb"), aifp.tree)
    return IndexBundle(points, config, aifp, ameb)


def _array_blob(arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dt = arr.dtype.newbyteorder("<").str.encode()
        key = name.encode()
        buf.write(struct.pack("<H", len(key)) + key + struct.pack("<H", len(dt)) + dt)
        buf.write(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}q", *arr.shape))
        buf.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())
    return buf.getvalue()


def _read_arrays(blob: bytes) -> dict[str, np.ndarray]:
    view = memoryview(blob)
    pos = 0

    def take(k):
        nonlocal pos
        if pos + k > len(view):
            raise ManifestError("array section is truncated")
        out = view[pos : pos + k]
        pos += k
        return out

    (count,) = struct.unpack("<I", take(4))
    arrays = {}
    for _ in range(count):
        (kl,) = struct.unpack("<H", take(2))
        name = bytes(take(kl)).decode()
        (dl,) = struct.unpack("<H", take(2))
        dt = np.dtype(bytes(take(dl)).decode())
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}q", take(8 * ndim))
        size = int(np.prod(shape)) * dt.itemsize
        arrays[name] = np.frombuffer(bytes(take(size)), dtype=dt).reshape(shape).astype(dt.newbyteorder("="))
    return arrays


def _params_json(bundle: IndexBundle) -> bytes:
    return json.dumps(
        {"aifp": dataclasses.asdict(bundle.aifp.params), "ameb": dataclasses.asdict(bundle.ameb.params)},
        sort_keys=True,
    ).encode()


def save_index(path, bundle: IndexBundle) -> None:
    tree = bundle.tree
    ms = bundle.aifp.multi
    sections = [
        (b"CONF", json.dumps(dataclasses.asdict(bundle.config), sort_keys=True).encode()),
        (b"PARM", _params_json(bundle)),
        (b"FPRT", bundle.points.fingerprint().encode()),
        (b"PNTS", _array_blob({"coords": bundle.points.coords})),
        (b"TREE", _array_blob({f: getattr(tree, f) for f in _TREE_FIELDS})),
        (b"BUCK", _array_blob({"cand_lo": ms.cand_lo, "cand_hi": ms.cand_hi})),
        (b"SEED", struct.pack("<q", bundle.config.seed)),
    ]
    body = b"".join(tag + struct.pack("<Q", len(data)) + data for tag, data in sections)
    header = MAGIC + struct.pack("<I", FORMAT_VERSION)
    Path(path).write_bytes(header + hashlib.sha256(body).digest() + body)


def read_sections(path) -> dict[bytes, bytes]:
    raw = Path(path).read_bytes()
    if len(raw) < 44 or raw[:8] != MAGIC:
        raise ManifestError(f"{path}: not an index manifest")
    (version,) = struct.unpack("<I", raw[8:12])
    if version > FORMAT_VERSION:
        raise ManifestError(f"{path}: manifest version {version} is newer than supported version {FORMAT_VERSION}")
    digest, body = raw[12:44], raw[44:]
    if hashlib.sha256(body).digest() != digest:
        raise ManifestError(f"{path}: checksum mismatch, the manifest is corrupted")
    sections = {}
    pos = 0
    while pos < len(body):
        if pos + 12 > len(body):
            raise ManifestError(f"{path}: truncated section header")
        tag = body[pos : pos + 4]
        (size,) = struct.unpack("<Q", body[pos + 4 : pos + 12])
        sections[tag] = body[pos + 12 : pos + 12 + size]
        pos += 12 + size
    return sections


def load_index(path) -> IndexBundle:
    sec = read_sections(path)
    missing = {b"CONF", b"PARM", b"FPRT", b"PNTS", b"TREE", b"BUCK", b"SEED"} - sec.keys()
    if missing:
        raise ManifestError(f"{path}: missing sections {sorted(m.decode() for m in missing)}")
    conf = json.loads(sec[b"CONF"])
    config = GlobalConfig(**conf)
    points = PointSet(_read_arrays(sec[b"PNTS"])["coords"])
    if points.fingerprint() != sec[b"FPRT"].decode():
        raise ManifestError(f"{path}: stored points do not match the stored fingerprint")
    arrays = _read_arrays(sec[b"TREE"])
    tree = AggregationTree(points.n, points.d, **{f: arrays[f] for f in _TREE_FIELDS})
    bundle = build_bundle(points, config, tree)
    if _params_json(bundle) != sec[b"PARM"]:
        raise ManifestError(f"{path}: derived parameters differ from the stored ones")
    buck = _read_arrays(sec[b"BUCK"])
    ms = bundle.aifp.multi
    if not (np.array_equal(buck["cand_lo"], ms.cand_lo) and np.array_equal(buck["cand_hi"], ms.cand_hi)):
        raise ManifestError(f"{path}: bucket intervals differ from the stored ones")
    return bundle
