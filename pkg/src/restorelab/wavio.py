"""Minimal RIFF/WAVE codec for mono 16-bit PCM and 32-bit float audio."""

from __future__ import annotations

import logging
import os
import struct

import numpy as np

from .dsp import AudioBuffer

log = logging.getLogger(__name__)

FORMATS = ("pcm16", "float32")
_PCM = 1
_FLOAT = 3
_EXTENSIBLE = 0xFFFE
PCM16_MAX = 1.0 - 2.0 ** -15


class WavError(ValueError):
    pass


def _chunks(data: bytes):
    """Yield ``(id, payload)`` for each chunk after the RIFF header."""
    pos = 12
    while pos < len(data):
        if pos + 8 > len(data):
            raise WavError(f"truncated chunk header at byte {pos}")
        cid = data[pos:pos + 4].decode("latin-1")
        size = struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise WavError(f"truncated '{cid.strip()}' chunk: expected {size} bytes, "
                           f"found {len(body)}")
        yield cid, body
        pos += 8 + size + (size & 1)


def decode_wav(data: bytes) -> AudioBuffer:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavError("missing RIFF/WAVE header")
    fmt = None
    payload = None
    for cid, body in _chunks(data):
        if cid == "fmt ":
            if len(body) < 16:
                raise WavError("'fmt' chunk is shorter than 16 bytes")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if fmt[0] == _EXTENSIBLE and len(body) >= 26:
                fmt = (struct.unpack("<H", body[24:26])[0],) + fmt[1:]
        elif cid == "data":
            payload = body
            if fmt is not None:
                break
    if fmt is None:
        raise WavError("missing 'fmt' chunk")
    if payload is None:
        raise WavError("missing 'data' chunk")
    tag, channels, rate, _, _, bits = fmt
    if channels < 1:
        raise WavError("channel count must be >= 1")
    if tag == _PCM and bits == 16:
        x = np.frombuffer(payload[:len(payload) // 2 * 2], dtype="<i2").astype(np.float64) / 32768.0
    elif tag == _FLOAT and bits == 32:
        x = np.frombuffer(payload[:len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        raise WavError(f"unsupported sample format (tag {tag}, {bits} bits)")
    frames = x.size // channels
    x = x[:frames * channels].reshape(frames, channels)
    samples = x[:, 0] if channels == 1 else x.mean(axis=1)
    return AudioBuffer(samples, rate)


def read_wav(path) -> AudioBuffer:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return decode_wav(data)
    except WavError as exc:
        raise WavError(f"{os.fspath(path)}: {exc}") from None


def encode_wav(audio: AudioBuffer, fmt: str = "float32") -> bytes:
    x = audio.samples
    if fmt == "pcm16":
        if x.size and (x.min() < -1.0 or x.max() > PCM16_MAX):
            log.warning("clipping %d samples outside the 16-bit range",
                        int(np.sum((x < -1.0) | (x > PCM16_MAX))))
        q = np.round(np.clip(x, -1.0, PCM16_MAX) * 32768.0)
        payload = np.clip(q, -32768, 32767).astype("<i2").tobytes()
        tag, bits = _PCM, 16
    elif fmt == "float32":
        payload = x.astype("<f4").tobytes()
        tag, bits = _FLOAT, 32
    else:
        raise ValueError(f"unknown WAV format {fmt!r}; choose from {FORMATS}")
    block = bits // 8
    fmt_chunk = struct.pack("<4sIHHIIHH", b"fmt ", 16, tag, 1, audio.sample_rate,
                            audio.sample_rate * block, block, bits)
    data_chunk = struct.pack("<4sI", b"data", len(payload)) + payload
    if len(payload) & 1:
        data_chunk += b"\x00"
    body = b"WAVE" + fmt_chunk + data_chunk
    return struct.pack("<4sI", b"RIFF", len(body)) + body


def write_wav(path, audio: AudioBuffer, fmt: str = "float32") -> None:
    data = encode_wav(audio, fmt)
    tmp = f"{os.fspath(path)}.part"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
