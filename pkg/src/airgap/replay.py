"""Air-gap simulation by room impulse response convolution.

A replayed recording is approximated as the source convolved with the
setup's RIR, truncated to the source length and rescaled to the source's
peak, optionally followed by an additive noise floor.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import AudioBuffer, peak, peak_normalize, read_wav, resample, write_wav
from .errors import AirgapError, DomainError, RateMismatchError
from .manifest import Manifest, ManifestEntry, with_recorded
from .noise import CLIP_PEAK, MixResult, NoiseSpec, mix_at_snr
from .seeding import rng_for

log = logging.getLogger(__name__)

RIR_FILENAME = "RIR.wav"
META_FILENAME = "meta.json"

# Below this many multiply-adds (len(signal) * len(kernel)) the direct sum is
# used, above it an FFT product with full zero padding. Kernels this short
# always take the direct sum, which keeps a unit delta an exact identity.
FFT_THRESHOLD = 32_768
SHORT_KERNEL = 32


@dataclass(frozen=True, eq=False)
class Rir:
    impulse: AudioBuffer
    uid: str
    mic: str = ""
    speaker: str = ""

    def __post_init__(self):
        if len(self.impulse) == 0:
            raise DomainError(f"RIR {self.uid!r} is empty")
        if not self.uid:
            raise ValueError("RIR uid must be non-empty")


@dataclass
class RirBank:
    entries: dict[str, Rir]
    source_dir: Path | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.entries:
            raise AirgapError("an RIR bank needs at least one entry")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, uid: str) -> Rir:
        return self.entries[uid]

    def __contains__(self, uid) -> bool:
        return uid in self.entries

    @property
    def uids(self) -> list[str]:
        return sorted(self.entries)

    @classmethod
    def from_rirs(cls, rirs: Sequence[Rir]) -> "RirBank":
        entries = {}
        for r in rirs:
            if r.uid in entries:
                raise ValueError(f"duplicate RIR uid {r.uid!r}")
            entries[r.uid] = r
        return cls(entries)


def linear_convolve(x: np.ndarray, h: np.ndarray, method: str = "auto") -> np.ndarray:
    """Full linear convolution, length ``len(x) + len(h) - 1``."""
    n, m = len(x), len(h)
    if n == 0 or m == 0:
        return np.zeros(0)
    if method == "auto":
        method = "direct" if n * m <= FFT_THRESHOLD or min(n, m) <= SHORT_KERNEL else "fft"
    if method == "direct":
        return np.convolve(x, h)
    if method != "fft":
        raise ValueError(f"unknown convolution method {method!r}")
    size = n + m - 1
    nfft = 1 << (size - 1).bit_length()
    y = np.fft.irfft(np.fft.rfft(x, nfft) * np.fft.rfft(h, nfft), nfft)
    return y[:size]


def convolve(signal: AudioBuffer, rir: Rir, truncate: bool = True, method: str = "auto") -> AudioBuffer:
    """Convolve ``signal`` with the RIR and restore the signal's original peak.

    With ``truncate`` (the default) the output keeps the input length; the
    reverberant tail past the end of the input is dropped.
    """
    if signal.sample_rate != rir.impulse.sample_rate:
        raise RateMismatchError(
            f"signal at {signal.sample_rate} Hz vs RIR {rir.uid!r} at {rir.impulse.sample_rate} Hz; resample first"
        )
    if len(signal) == 0:
        return signal
    y = linear_convolve(signal.samples, rir.impulse.samples, method)
    if truncate:
        y = y[: len(signal)]
    out = signal.with_samples(y)
    target = peak(signal)
    current = peak(out)
    if current == 0.0 or target == 0.0:
        return out
    return out.with_samples(y * (target / current))


def replay_with_mix(signal: AudioBuffer, rir: Rir, noise_floor: NoiseSpec | None = None) -> tuple[AudioBuffer, MixResult | None]:
    """``simulate_replay`` that also returns the noise-mix details (or None)."""
    out = convolve(signal, rir)
    mix = None
    if noise_floor is not None:
        mix = mix_at_snr(out, noise_floor)
        out = mix.mixture
    if peak(out) > 1.0:
        out = peak_normalize(out, CLIP_PEAK)
    return out, mix


def simulate_replay(signal: AudioBuffer, rir: Rir, noise_floor: NoiseSpec | None = None) -> AudioBuffer:
    """Convolve with ``rir``, then optionally add a noise floor. Output peak never exceeds 1."""
    return replay_with_mix(signal, rir, noise_floor)[0]


def rir_at_rate(rir: Rir, rate: int) -> Rir:
    if rir.impulse.sample_rate == rate:
        return rir
    return Rir(resample(rir.impulse, rate), rir.uid, rir.mic, rir.speaker)


def load_rir_bank(directory) -> RirBank:
    """Load ``<directory>/<uid>/RIR.wav`` (+ optional ``meta.json``) for every subfolder.

    Unreadable or missing RIRs are skipped and described in ``bank.warnings``.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise AirgapError(f"RIR directory {directory} does not exist")
    folders = sorted(p for p in directory.iterdir() if p.is_dir())
    if not folders:
        raise AirgapError(f"RIR directory {directory} has no setup folders")
    entries = {}
    warnings = []
    for folder in folders:
        uid = folder.name
        wav = folder / RIR_FILENAME
        if not wav.is_file():
            warnings.append(f"{uid}: no {RIR_FILENAME}")
            continue
        try:
            impulse = read_wav(wav)
            meta = {}
            meta_path = folder / META_FILENAME
            if meta_path.is_file():
                meta = json.loads(meta_path.read_text())
            entries[uid] = Rir(impulse, uid, str(meta.get("mic", "")), str(meta.get("speaker", "")))
        except (ValueError, OSError) as exc:
            warnings.append(f"{uid}: {exc}")
    for w in warnings:
        log.warning("skipping RIR %s", w)
    if not entries:
        raise AirgapError(f"no usable RIRs under {directory}: " + "; ".join(warnings))
    return RirBank(entries, directory, warnings)


def save_rir_bank(bank: RirBank, directory) -> None:
    directory = Path(directory)
    for uid, rir in bank.entries.items():
        folder = directory / uid
        folder.mkdir(parents=True, exist_ok=True)
        write_wav(folder / RIR_FILENAME, rir.impulse, "float32")
        (folder / META_FILENAME).write_text(json.dumps({"mic": rir.mic, "speaker": rir.speaker}))


def plan_augmentation(entries: Sequence[ManifestEntry], uids: Sequence[str], probability: float, seed: int) -> list[str | None]:
    """Decide per entry whether to augment it and with which RIR uid.

    Each decision uses its own generator keyed on (seed, position, original
    file), so plans do not depend on processing order.
    """
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {probability}")
    uids = sorted(uids)
    plan = []
    for i, entry in enumerate(entries):
        rng = rng_for(seed, "augment", i, entry.original_file)
        if rng.random() < probability:
            plan.append(uids[int(rng.integers(len(uids)))])
        else:
            plan.append(None)
    return plan


@dataclass
class AugmentResult:
    manifest: Manifest
    errors: list[str]
    written: int


def augmented_path(out_root, uid: str, original_file: str) -> Path:
    rel = Path(original_file)
    if rel.is_absolute():
        rel = Path(*rel.parts[1:])
    return Path(out_root) / uid / rel.with_suffix(".wav")


def augment_manifest(
    manifest: Manifest,
    bank: RirBank,
    probability: float,
    seed: int,
    audio_root=".",
    out_root="augmented",
    encoding: str = "float32",
    workers: int = 1,
) -> AugmentResult:
    """Replace entries by simulated replays with the given probability.

    Chosen entries get ``recorded_file`` pointing at the convolved copy
    (relative to ``audio_root``) and the RIR uid in the ``rir_uid`` field.
    Unreadable audio is reported in ``errors`` and the entry is left as is.
    """
    audio_root = Path(audio_root)
    plan = plan_augmentation(manifest.entries, bank.uids, probability, seed)

    def work(item):
        entry, uid = item
        if uid is None:
            return entry, None
        try:
            signal = read_wav(audio_root / entry.original_file)
            out = simulate_replay(signal, rir_at_rate(bank[uid], signal.sample_rate))
            dest = augmented_path(out_root, uid, entry.original_file)
            dest.parent.mkdir(parents=True, exist_ok=True)
            write_wav(dest, out, encoding)
        except (OSError, ValueError, AirgapError) as exc:
            return entry, f"{entry.original_file}: {exc}"
        return with_recorded(entry, os.path.relpath(dest, audio_root), rir_uid=uid), ""

    items = list(zip(manifest.entries, plan))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(it) for it in items]

    entries = [e for e, _ in results]
    errors = [msg for _, msg in results if msg]
    written = sum(1 for _, msg in results if msg == "")
    return AugmentResult(Manifest(entries, manifest.seed, manifest.n_per_cell), errors, written)
