"""File formats: canonical JSON, feature JSON-lines, packed binary features,
dataset JSON-lines and the reproducibility stamp.

Binary feature layout (little-endian)::

    b"CLFV"  u8 version (=1)  u8 kind-length  kind (ascii)  u32 dim  u32 count
    count x [ u16 id-length  pair_id (utf-8)  u32 k  dim x f64 ]
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from coverlens.errors import FeatureFileError
from coverlens.features import FeatureKind, FeatureVector

BINARY_MAGIC = b"CLFV"
BINARY_VERSION = 1


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _encode(obj, out: list):
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(": ")
            _encode(val, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, val in enumerate(obj):
            if i:
                out.append(", ")
            _encode(val, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with insertion-ordered keys and floats at 17 significant digits.

    Non-finite floats become ``null``.
    """
    out: list[str] = []
    _encode(obj, out)
    return "".join(out)


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()[:16]


def write_stamp(out_dir, subcommand: str, seed, cfg: dict) -> Path:
    from coverlens import __version__
    from coverlens._backend import BACKEND

    path = Path(out_dir) / f"{subcommand}.stamp.json"
    write_json(
        {
            "subcommand": subcommand,
            "seed": seed,
            "config_hash": config_hash(cfg),
            "tool_version": __version__,
            "kernel_backend": BACKEND,
            "config": cfg,
        },
        path,
    )
    return path


def feature_record(fv: FeatureVector) -> dict:
    return {"pair_id": fv.pair_id, "k": fv.k, "kind": fv.kind.value, "vector": fv.values}


def write_features_jsonl(features, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for fv in features:
            fh.write(dumps(feature_record(fv)) + "\n")


def _floats(values, where):
    try:
        return np.array([math.nan if v is None else float(v) for v in values])
    except (TypeError, ValueError) as exc:
        raise FeatureFileError(f"{where}: bad vector ({exc})") from None


def read_features_jsonl(path) -> list[FeatureVector]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
                fv = FeatureVector(FeatureKind(rec["kind"]), _floats(rec["vector"], where),
                                   str(rec["pair_id"]), int(rec["k"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise FeatureFileError(f"{where}: {exc}") from None
            out.append(fv)
    return out


def write_features_binary(features, path) -> None:
    features = list(features)
    if not features:
        raise FeatureFileError("nothing to write")
    kind = features[0].kind
    dim = len(features[0].values)
    kind_b = kind.value.encode("ascii")
    parts = [BINARY_MAGIC, struct.pack("<BB", BINARY_VERSION, len(kind_b)), kind_b,
             struct.pack("<II", dim, len(features))]
    for fv in features:
        if fv.kind is not kind or len(fv.values) != dim:
            raise FeatureFileError("binary feature files hold one kind and one dimension")
        pid = fv.pair_id.encode("utf-8")
        parts.append(struct.pack("<H", len(pid)) + pid + struct.pack("<I", fv.k))
        parts.append(np.asarray(fv.values, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_features_binary(path) -> list[FeatureVector]:
    data = Path(path).read_bytes()
    if data[:4] != BINARY_MAGIC:
        raise FeatureFileError(f"{path}: bad magic")
    try:
        version, klen = struct.unpack_from("<BB", data, 4)
        if version != BINARY_VERSION:
            raise FeatureFileError(f"{path}: unsupported version {version}")
        pos = 6
        kind = FeatureKind(data[pos:pos + klen].decode("ascii"))
        pos += klen
        dim, count = struct.unpack_from("<II", data, pos)
        pos += 8
        out = []
        for _ in range(count):
            (plen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            pid = data[pos:pos + plen].decode("utf-8")
            pos += plen
            (k,) = struct.unpack_from("<I", data, pos)
            pos += 4
            values = np.frombuffer(data, dtype="<f8", count=dim, offset=pos).astype(np.float64)
            pos += 8 * dim
            out.append(FeatureVector(kind, values, pid, k))
    except (struct.error, ValueError) as exc:
        raise FeatureFileError(f"{path}: truncated or corrupt ({exc})") from None
    if pos != len(data):
        raise FeatureFileError(f"{path}: {len(data) - pos} trailing bytes")
    return out


def read_features(path) -> list[FeatureVector]:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        return read_features_binary(path)
    return read_features_jsonl(path)
