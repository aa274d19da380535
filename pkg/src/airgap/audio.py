"""Mono audio container, WAV I/O, resampling and level helpers.

Samples are held as float64 internally; the file boundary is either
16-bit PCM or 32-bit IEEE float.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import DomainError, UnsupportedEncodingError, WavFormatError

__all__ = [
    "AudioBuffer",
    "read_wav",
    "write_wav",
    "resample",
    "rms_power",
    "peak",
    "peak_normalize",
    "RESAMPLE_WINDOW",
    "RESAMPLE_HALF_ZEROS",
]

_PCM = 0x0001
_IEEE_FLOAT = 0x0003
_EXTENSIBLE = 0xFFFE

PCM16_MAX = 1.0 - 2.0**-15

# Resampler: polyphase windowed-sinc FIR (Kaiser, beta 5.0) spanning
# RESAMPLE_HALF_ZEROS zero crossings of the anti-alias sinc on each side,
# i.e. 2 * RESAMPLE_HALF_ZEROS * max(up, down) + 1 taps.
RESAMPLE_WINDOW = ("kaiser", 5.0)
RESAMPLE_HALF_ZEROS = 10


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono float64 samples plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"AudioBuffer holds mono audio, got shape {samples.shape}")
        rate = int(self.sample_rate)
        if rate <= 0 or rate != self.sample_rate:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", rate)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        name = cid.decode("latin-1")
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(name, f"declares {size} bytes, only {len(body)} present")
        yield name, body
        pos += 8 + size + (size & 1)


def read_wav(path) -> AudioBuffer:
    """Read a PCM16 or float32 WAV file, downmixing channels by their mean."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavFormatError("RIFF", "file shorter than the 12-byte RIFF header")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF":
        raise WavFormatError("RIFF", f"expected 'RIFF' tag, found {riff!r}")
    if wave != b"WAVE":
        raise WavFormatError("RIFF", f"expected 'WAVE' form type, found {wave!r}")

    fmt = None
    payload = None
    for name, body in _iter_chunks(data):
        if name == "fmt ":
            fmt = body
        elif name == "data":
            payload = body
            if fmt is not None:
                break
    if fmt is None:
        raise WavFormatError("fmt ", "chunk missing")
    if len(fmt) < 16:
        raise WavFormatError("fmt ", f"needs at least 16 bytes, has {len(fmt)}")
    if payload is None:
        raise WavFormatError("data", "chunk missing")

    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == _EXTENSIBLE:
        if len(fmt) < 40:
            raise WavFormatError("fmt ", "extensible format shorter than 40 bytes")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels < 1:
        raise WavFormatError("fmt ", "zero channels")
    if rate < 1:
        raise WavFormatError("fmt ", "zero sample rate")

    if tag == _PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedEncodingError(
            f"{path}: format tag 0x{tag:04x} with {bits} bits/sample is not supported "
            "(only 16-bit PCM and 32-bit float)"
        )
    if block_align != channels * dtype.itemsize:
        raise WavFormatError("fmt ", f"block align {block_align} inconsistent with {channels}x{bits} bits")

    usable = len(payload) - len(payload) % block_align
    frames = np.frombuffer(payload[:usable], dtype=dtype).reshape(-1, channels)
    samples = frames.astype(np.float64) * scale
    if channels > 1:
        samples = samples.mean(axis=1)
    else:
        samples = samples[:, 0]
    return AudioBuffer(samples, rate)


def write_wav(path, buffer: AudioBuffer, encoding: str = "float32") -> None:
    """Write ``buffer`` as a mono WAV file.

    ``pcm16`` clamps to [-1, 1 - 2**-15] and rounds to the nearest code;
    ``float32`` stores the samples as IEEE floats (no clamping).
    """
    if encoding == "pcm16":
        clipped = np.clip(buffer.samples, -1.0, PCM16_MAX)
        payload = np.round(clipped * 32768.0).astype("<i2").tobytes()
        fmt = struct.pack("<HHIIHH", _PCM, 1, buffer.sample_rate, buffer.sample_rate * 2, 2, 16)
        extra = b""
    elif encoding == "float32":
        payload = buffer.samples.astype("<f4").tobytes()
        fmt = struct.pack("<HHIIHHH", _IEEE_FLOAT, 1, buffer.sample_rate, buffer.sample_rate * 4, 4, 32, 0)
        # non-PCM formats carry a fact chunk with the frame count
        extra = b"fact" + struct.pack("<II", 4, len(buffer))
    else:
        raise ValueError(f"unknown encoding {encoding!r}; use 'pcm16' or 'float32'")

    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + extra
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def resample(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited rate conversion with a fixed polyphase windowed-sinc filter."""
    if int(target_rate) != target_rate or target_rate <= 0:
        raise ValueError(f"target_rate must be a positive integer, got {target_rate!r}")
    target_rate = int(target_rate)
    if target_rate == buffer.sample_rate or len(buffer) == 0:
        return AudioBuffer(buffer.samples, target_rate)
    g = gcd(target_rate, buffer.sample_rate)
    up, down = target_rate // g, buffer.sample_rate // g
    max_rate = max(up, down)
    taps = firwin(2 * RESAMPLE_HALF_ZEROS * max_rate + 1, 1.0 / max_rate, window=RESAMPLE_WINDOW)
    out = resample_poly(buffer.samples, up, down, window=taps)
    return AudioBuffer(out, target_rate)


def rms_power(buffer: AudioBuffer) -> float:
    """Mean of squared samples, (1/N) * sum(s**2)."""
    if len(buffer) == 0:
        raise DomainError("power of an empty buffer is undefined")
    s = buffer.samples
    return float(np.dot(s, s) / s.shape[0])


def peak(buffer: AudioBuffer) -> float:
    return float(np.max(np.abs(buffer.samples))) if len(buffer) else 0.0


def peak_normalize(buffer: AudioBuffer, target_peak: float = 1.0) -> AudioBuffer:
    if not 0.0 < target_peak <= 1.0:
        raise ValueError(f"target_peak must lie in (0, 1], got {target_peak}")
    current = peak(buffer)
    if current == 0.0:
        return buffer
    return buffer.with_samples(buffer.samples * (target_peak / current))
