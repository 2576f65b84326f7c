# Tensor archive: a directory holding manifest.json plus one little-endian
# float32 blob. The manifest maps tensor names to {shape, dtype, offset,
# length}; offsets are relative to the end of the blob's magic header.
# Round trips are bit-exact.

import json
import os

import numpy as np

MAGIC = b"ADMGTNS1"
MANIFEST_NAME = "manifest.json"
BLOB_NAME = "tensors.bin"
FORMAT_ID = "adamerge-tensor-archive-v1"


class ArchiveError(ValueError):
    pass


def save_archive(path: str, tensors: dict, meta: dict | None = None) -> None:
    """Write tensors (name -> float32 array) plus free-form meta."""
    os.makedirs(path, exist_ok=True)
    entries = {}
    offset = 0
    chunks = []
    for name in tensors:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw = arr.tobytes()
        entries[name] = {
            "shape": list(arr.shape),
            "dtype": "f32",
            "offset": offset,
            "length": len(raw),
        }
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format": FORMAT_ID,
        "meta": meta or {},
        "tensors": entries,
    }
    with open(os.path.join(path, BLOB_NAME), "wb") as f:
        f.write(MAGIC)
        for chunk in chunks:
            f.write(chunk)
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)


def load_archive(path: str) -> tuple[dict, dict]:
    """Read back (tensors, meta); validates magic, dtypes and extents."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    blob_path = os.path.join(path, BLOB_NAME)
    if not os.path.isfile(manifest_path) or not os.path.isfile(blob_path):
        raise ArchiveError(f"not a tensor archive: {path}")
    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format") != FORMAT_ID:
        raise ArchiveError(
            f"unsupported archive format: {manifest.get('format')!r}")
    with open(blob_path, "rb") as f:
        blob = f.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ArchiveError(f"bad magic in {blob_path}")
    payload = blob[len(MAGIC):]

    tensors = {}
    for name, entry in manifest["tensors"].items():
        if entry["dtype"] != "f32":
            raise ArchiveError(f"tensor {name}: unsupported dtype {entry['dtype']}")
        off, length = entry["offset"], entry["length"]
        if off < 0 or off + length > len(payload):
            raise ArchiveError(f"tensor {name}: extent beyond blob (truncated file?)")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        if count * 4 != length:
            raise ArchiveError(f"tensor {name}: length {length} != shape {shape}")
        arr = np.frombuffer(payload[off:off + length], dtype="<f4").reshape(shape)
        tensors[name] = arr.astype(np.float32)
    return tensors, manifest.get("meta", {})
