"""Named-parameter container files.

Binary layout: a one-line format-version header, a little-endian uint32
entry count, then per entry a uint16 name length, the UTF-8 name, a uint8
dtype-string length, the numpy dtype string (little-endian), a uint8 rank,
uint32 dims, and the raw little-endian values.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"glyphfix-ckpt 1\n"


def save_params(path: str | Path, arrays: dict[str, np.ndarray],
                meta: dict | None = None) -> None:
    """Write named arrays; optional metadata goes to a JSON sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            if arr.ndim and not arr.flags["C_CONTIGUOUS"]:
                arr = np.ascontiguousarray(arr)
            le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
            nm = name.encode("utf-8")
            dt = le.dtype.str.encode("ascii")
            fh.write(struct.pack("<H", len(nm)))
            fh.write(nm)
            fh.write(struct.pack("<B", len(dt)))
            fh.write(dt)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(le.tobytes())
    if meta is not None:
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")


def load_params(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    blob = path.read_bytes()
    if not blob.startswith(MAGIC):
        raise ValueError(f"{path} is not a parameter container (bad header)")
    off = len(MAGIC)

    def take(fmt: str):
        nonlocal off
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    (count,) = take("<I")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = take("<H")
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (dlen,) = take("<B")
        dtype = np.dtype(blob[off:off + dlen].decode("ascii"))
        off += dlen
        (rank,) = take("<B")
        shape = tuple(take("<" + "I" * rank)) if rank else ()
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if rank else dtype.itemsize
        arr = np.frombuffer(blob[off:off + nbytes], dtype=dtype).reshape(shape).copy()
        off += nbytes
        out[name] = arr
    return out


def load_meta(path: str | Path) -> dict | None:
    side = sidecar_path(Path(path))
    if not side.exists():
        return None
    return json.loads(side.read_text(encoding="utf-8"))


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json")
