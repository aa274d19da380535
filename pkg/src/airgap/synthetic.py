"""Synthetic two-class corpus and room impulse responses.

Bona fide items are voiced, harmonic tone complexes with a syllable-rate
envelope over a low noise floor. Spoofed items are the same kind of signal
passed through a fixed "synthesis artifact" filter: a high-frequency shelf
boost plus a narrow resonance. Synthetic RIRs combine a direct path, an
exponentially decaying diffuse tail with high-frequency damping, and a
band-limited loudspeaker/microphone response.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter, sosfilt

from .audio import AudioBuffer, write_wav
from .manifest import ARCHITECTURES, BONA_FIDE, LANGUAGES, SPOOF, ManifestEntry
from .replay import Rir, RirBank
from .seeding import rng_for

SAMPLE_RATE = 16000
DURATION = 1.0

# artifact filter: shelf gain above ARTIFACT_SHELF_HZ and a resonance peak
ARTIFACT_SHELF_HZ = 4000.0
ARTIFACT_SHELF_DB = 12.0
ARTIFACT_PEAK_HZ = 5500.0
ARTIFACT_PEAK_DB = 10.0
ARTIFACT_PEAK_WIDTH_HZ = 300.0


def artifact_response(freqs: np.ndarray) -> np.ndarray:
    """Linear magnitude response of the synthesis-artifact filter."""
    shelf = ARTIFACT_SHELF_DB / (1.0 + np.exp(-(freqs - ARTIFACT_SHELF_HZ) / 250.0))
    peak = ARTIFACT_PEAK_DB * np.exp(-0.5 * ((freqs - ARTIFACT_PEAK_HZ) / ARTIFACT_PEAK_WIDTH_HZ) ** 2)
    return 10.0 ** ((shelf + peak) / 20.0)


def apply_artifact(x: np.ndarray, sample_rate: int) -> np.ndarray:
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.shape[0], 1.0 / sample_rate)
    return np.fft.irfft(spec * artifact_response(freqs), x.shape[0])


def voiced_signal(rng: np.random.Generator, sample_rate: int = SAMPLE_RATE, duration: float = DURATION) -> np.ndarray:
    n = int(round(sample_rate * duration))
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(90.0, 260.0)
    vibrato = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * f0 * np.cumsum(vibrato) / sample_rate
    tilt = rng.uniform(0.8, 1.4)
    x = np.zeros(n)
    for h in range(1, int(0.45 * sample_rate / f0)):
        x += np.sin(h * phase + rng.uniform(0, 2 * np.pi)) / h**tilt
    # syllable-rate amplitude envelope
    rate = rng.uniform(2.5, 5.0)
    env = 0.55 + 0.45 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
    x *= env**2
    floor = rng.standard_normal(n)
    snr_db = rng.uniform(15.0, 25.0)
    floor *= np.sqrt(np.mean(x**2) / np.mean(floor**2) / 10 ** (snr_db / 10))
    return x + floor


def make_item(label: str, seed: int, index: int, sample_rate: int = SAMPLE_RATE, duration: float = DURATION) -> AudioBuffer:
    """One corpus item; spoof items carry the artifact filter. Peak 0.9."""
    rng = rng_for(seed, "item", label, index)
    x = voiced_signal(rng, sample_rate, duration)
    if label == SPOOF:
        x = apply_artifact(x, sample_rate)
    x *= 0.9 / np.max(np.abs(x))
    return AudioBuffer(x, sample_rate)


def synthetic_rir(seed: int, key, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """A plausible loudspeaker-room-microphone impulse response, peak 1."""
    rng = rng_for(seed, "rir", key)
    rt60 = rng.uniform(0.25, 0.8)
    length = int(sample_rate * min(1.0, rt60 * 1.2))
    t = np.arange(length) / sample_rate
    tail = rng.standard_normal(length) * np.exp(-6.9 * t / rt60)
    # high frequencies decay faster in the diffuse field
    a = rng.uniform(0.4, 0.85)
    tail = lfilter([1 - a], [1, -a], tail)
    delay = int(rng.integers(20, 160))
    tail[:delay] = 0.0
    drr = 10 ** (rng.uniform(-6.0, 6.0) / 20)
    tail *= 1.0 / (drr * np.sqrt(np.sum(tail**2)))
    h = tail
    h[0] += 1.0
    # band-limited playback/capture chain
    lo = rng.uniform(80.0, 250.0)
    hi = rng.uniform(2500.0, 5000.0)
    sos = butter(2, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")
    h = sosfilt(sos, h)
    return h / np.max(np.abs(h))


def rir_bank(seed: int, count: int, prefix: str = "setup", sample_rate: int = SAMPLE_RATE) -> RirBank:
    rirs = [
        Rir(AudioBuffer(synthetic_rir(seed, f"{prefix}{i}", sample_rate), sample_rate), f"{prefix}_{i:03d}",
            mic=f"synthetic mic {i}", speaker=f"synthetic speaker {i}")
        for i in range(count)
    ]
    return RirBank.from_rirs(rirs)


@dataclass
class Corpus:
    entries: list[ManifestEntry]
    root: Path


def write_corpus(root, per_class: int, seed: int, sample_rate: int = SAMPLE_RATE) -> Corpus:
    """Write ``per_class`` bona fide and spoof WAVs under ``root``.

    Spoof items rotate over the four architectures and all items over the
    six languages so the corpus also fills a pool definition.
    """
    root = Path(root)
    entries = []
    for label in (BONA_FIDE, SPOOF):
        for i in range(per_class):
            lang = LANGUAGES[i % len(LANGUAGES)]
            arch = ARCHITECTURES[(i // len(LANGUAGES)) % len(ARCHITECTURES)] if label == SPOOF else None
            sub = Path("bona_fide" if label == BONA_FIDE else f"spoof/{arch}") / lang
            rel = sub / f"{i:05d}.wav"
            (root / sub).mkdir(parents=True, exist_ok=True)
            write_wav(root / rel, make_item(label, seed, i, sample_rate), "float32")
            entries.append(ManifestEntry(rel.as_posix(), label, lang, arch))
    return Corpus(entries, root)
