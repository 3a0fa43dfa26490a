"""Minimal RIFF/WAVE reader and writer for 16-bit PCM mono at 16 kHz."""

import struct

import numpy as np

from .errors import ParseError

SAMPLE_RATE = 16000
_SCALE = 32768.0


def read_wav(path):
    """Return (waveform in [-1, 1), sample_rate); rejects anything but PCM16 mono 16 kHz."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise ParseError(f"{path}: not a RIFF/WAVE file")
    off = 12
    fmt = None
    data = None
    while off + 8 <= len(blob):
        cid = blob[off:off + 4]
        (size,) = struct.unpack_from("<I", blob, off + 4)
        body = blob[off + 8:off + 8 + size]
        if len(body) < size:
            raise ParseError(f"{path}: truncated {cid!r} chunk")
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            data = body
        off += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise ParseError(f"{path}: missing fmt/data chunk")
    if len(fmt) < 16:
        raise ParseError(f"{path}: fmt chunk too short")
    audio_fmt, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if audio_fmt != 1:
        raise ParseError(f"{path}: unsupported audio format {audio_fmt} (want PCM)")
    if channels != 1:
        raise ParseError(f"{path}: {channels} channels unsupported (want mono)")
    if bits != 16:
        raise ParseError(f"{path}: {bits}-bit samples unsupported (want 16)")
    if rate != SAMPLE_RATE:
        raise ParseError(f"{path}: sample rate {rate} unsupported (want {SAMPLE_RATE})")
    samples = np.frombuffer(data[:len(data) // 2 * 2], dtype="<i2").astype(np.float64)
    return samples / _SCALE, rate


def write_wav(path, waveform):
    """Write [-1, 1) floats as PCM16 mono 16 kHz, rounding half away from zero."""
    x = np.asarray(waveform, dtype=np.float64) * _SCALE
    ints = np.sign(x) * np.floor(np.abs(x) + 0.5)
    ints = np.clip(ints, -32768, 32767).astype("<i2")
    data = ints.tobytes()
    with open(path, "wb") as fh:
        fh.write(b"RIFF")
        fh.write(struct.pack("<I", 36 + len(data)))
        fh.write(b"WAVE")
        fh.write(b"fmt ")
        fh.write(struct.pack("<IHHIIHH", 16, 1, 1, SAMPLE_RATE,
                             SAMPLE_RATE * 2, 2, 16))
        fh.write(b"data")
        fh.write(struct.pack("<I", len(data)))
        fh.write(data)
