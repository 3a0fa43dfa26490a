"""Versioned named-tensor checkpoint bundle.

Layout: magic "DCRG", version u32, tensor count u32, then per tensor:
name length u16 + UTF-8 name, dtype code u8 (0 = f32, 1 = f64), rank u8,
dims as u64 each, raw little-endian values. Round-trips byte-exactly.
"""

import struct

import numpy as np

from .errors import ParseError

MAGIC = b"DCRG"
VERSION = 1
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def save_checkpoint(path, named_arrays):
    """Write an ordered list of (name, array) pairs."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(named_arrays)))
        for name, arr in named_arrays:
            arr = np.asarray(arr)
            if arr.dtype not in _CODE_FOR:
                arr = arr.astype(np.float64)
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", _CODE_FOR[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path):
    """Read a checkpoint into an ordered dict name -> array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ParseError(f"{path}: bad magic {blob[:4]!r}")
    try:
        version, count = struct.unpack_from("<II", blob, 4)
        if version != VERSION:
            raise ParseError(f"{path}: unsupported checkpoint version {version}")
        off = 12
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off:off + nlen].decode("utf-8")
            off += nlen
            code, rank = struct.unpack_from("<BB", blob, off)
            off += 2
            if code not in _DTYPE_CODES:
                raise ParseError(f"{path}: unknown dtype code {code}")
            dims = struct.unpack_from(f"<{rank}Q", blob, off)
            off += 8 * rank
            dt = _DTYPE_CODES[code]
            n = int(np.prod(dims)) if rank else 1
            payload = blob[off:off + n * dt.itemsize]
            if len(payload) != n * dt.itemsize:
                raise ParseError(f"{path}: truncated payload for tensor {name!r}")
            arr = np.frombuffer(payload, dtype=dt).reshape(dims)
            off += n * dt.itemsize
            out[name] = arr.copy()
        if off != len(blob):
            raise ParseError(f"{path}: {len(blob) - off} trailing bytes")
        return out
    except struct.error as exc:
        raise ParseError(f"{path}: truncated checkpoint ({exc})") from exc


def model_arrays(model, prefix):
    """Parameters then buffers of a Module, name-prefixed."""
    out = [(prefix + name, p.data) for name, p in model.named_parameters()]
    out += [(prefix + "buf." + name, b) for name, b in model.named_buffers()]
    return out


def restore_model(model, arrays, prefix):
    """Load arrays saved by model_arrays back into a freshly built model."""
    for name, p in model.named_parameters():
        src = arrays.get(prefix + name)
        if src is None:
            raise ParseError(f"checkpoint missing parameter {prefix + name}")
        if src.shape != p.data.shape:
            raise ParseError(f"{prefix + name}: shape {src.shape} != model {p.data.shape}")
        p.data = src.astype(p.data.dtype)
    for name, b in model.named_buffers():
        src = arrays.get(prefix + "buf." + name)
        if src is None:
            raise ParseError(f"checkpoint missing buffer {prefix}buf.{name}")
        b[...] = src.reshape(b.shape)
