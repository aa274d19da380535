"""Recording-quality proxies and quality/performance correlation.

PESQ and MOS are ingested from CSV files; segmental SNR and log-spectral
distance are computed natively as reference-based proxies.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .audio import AudioBuffer
from .errors import DomainError, UndefinedCorrelationError
from .metrics import pearson

FRAME_SECONDS = 0.032
SEGSNR_FLOOR_DB = -10.0
SEGSNR_CEIL_DB = 35.0
LOG_FLOOR = 1e-10
MOS_RANGE = (1.0, 5.0)
PESQ_RANGE = (-0.5, 4.5)
MIN_LISTENERS = 4


def _frames(x: np.ndarray, sample_rate: int) -> np.ndarray:
    """32 ms frames with 50% overlap; a short signal becomes a single frame."""
    frame = max(2, int(round(FRAME_SECONDS * sample_rate)))
    if x.shape[0] <= frame:
        return x[None, :]
    hop = frame // 2
    count = 1 + (x.shape[0] - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(count)[:, None]
    return x[idx]


def _check_pair(reference: AudioBuffer, degraded: AudioBuffer) -> None:
    if len(reference) != len(degraded):
        raise ValueError(f"length mismatch: reference {len(reference)} vs degraded {len(degraded)} samples")
    if reference.sample_rate != degraded.sample_rate:
        raise ValueError(f"rate mismatch: {reference.sample_rate} vs {degraded.sample_rate} Hz")
    if len(reference) == 0:
        raise DomainError("quality of an empty signal is undefined")


def segmental_snr(reference: AudioBuffer, degraded: AudioBuffer) -> float:
    """Mean per-frame SNR in dB, each frame clipped to [-10, 35] dB.

    Frames where the reference is silent are skipped.
    """
    _check_pair(reference, degraded)
    ref = _frames(reference.samples, reference.sample_rate)
    err = ref - _frames(degraded.samples, degraded.sample_rate)
    num = np.sum(ref**2, axis=1)
    den = np.sum(err**2, axis=1)
    active = num > 0
    if not active.any():
        raise DomainError("reference is silent in every frame")
    num, den = num[active], den[active]
    with np.errstate(divide="ignore"):
        snr = np.where(den > 0, 10.0 * np.log10(num / np.where(den > 0, den, 1.0)), np.inf)
    return float(np.mean(np.clip(snr, SEGSNR_FLOOR_DB, SEGSNR_CEIL_DB)))


def log_spectral_distance(reference: AudioBuffer, degraded: AudioBuffer) -> float:
    """RMS over frames of the per-frame RMS log-magnitude difference in dB.

    Hann-windowed frames as in ``segmental_snr``; magnitudes floored at
    ``LOG_FLOOR`` before the log, frames with a silent reference skipped.
    """
    _check_pair(reference, degraded)
    ref = _frames(reference.samples, reference.sample_rate)
    deg = _frames(degraded.samples, degraded.sample_rate)
    active = np.any(ref != 0, axis=1)
    if not active.any():
        raise DomainError("reference is silent in every frame")
    window = np.hanning(ref.shape[1]) if ref.shape[1] > 2 else np.ones(ref.shape[1])
    spec_r = np.abs(np.fft.rfft(ref[active] * window, axis=1))
    spec_d = np.abs(np.fft.rfft(deg[active] * window, axis=1))
    diff = 20.0 * (np.log10(np.maximum(spec_r, LOG_FLOOR)) - np.log10(np.maximum(spec_d, LOG_FLOOR)))
    per_frame = np.sqrt(np.mean(diff**2, axis=1))
    return float(np.sqrt(np.mean(per_frame**2)))


@dataclass
class SetupQuality:
    uid: str
    spoof_accuracy: float
    mos: float | None = None
    pesq: float | None = None
    num_spoof: int = 0

    def __post_init__(self):
        if not 0.0 <= self.spoof_accuracy <= 1.0:
            raise ValueError(f"{self.uid}: spoof accuracy {self.spoof_accuracy} outside [0, 1]")
        _check_range(self.mos, MOS_RANGE, "MOS", self.uid)
        _check_range(self.pesq, PESQ_RANGE, "PESQ", self.uid)


def _check_range(value, bounds, name, uid):
    if value is not None and not bounds[0] <= value <= bounds[1]:
        raise ValueError(f"{uid}: {name} {value} outside [{bounds[0]}, {bounds[1]}]")


@dataclass
class Correlations:
    acc_vs_mos: float | None = None
    acc_vs_pesq: float | None = None
    mos_vs_pesq: float | None = None
    pairs: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def quality_correlation(per_setup: Sequence[SetupQuality]) -> Correlations:
    """Pearson correlations over pairwise-complete setups.

    A correlation with fewer than two complete pairs (or a constant side)
    is reported as ``None`` with a warning; exactly two pairs are flagged
    because the coefficient is then always +-1.
    """
    columns = {
        "acc_vs_mos": ("spoof_accuracy", "mos"),
        "acc_vs_pesq": ("spoof_accuracy", "pesq"),
        "mos_vs_pesq": ("mos", "pesq"),
    }
    out = Correlations()
    for name, (a, b) in columns.items():
        pairs = [(getattr(s, a), getattr(s, b)) for s in per_setup]
        pairs = [(u, v) for u, v in pairs if u is not None and v is not None]
        out.pairs[name] = len(pairs)
        if len(pairs) < 2:
            out.warnings.append(f"{name}: {len(pairs)} complete pair(s), correlation undefined")
            continue
        if len(pairs) == 2:
            out.warnings.append(f"{name}: only two setups, |r| is trivially 1")
        try:
            setattr(out, name, pearson([u for u, _ in pairs], [v for _, v in pairs]))
        except UndefinedCorrelationError as exc:
            out.warnings.append(f"{name}: {exc}")
    return out


def read_quality_csv(path, column: str) -> dict[str, float]:
    """Read a ``uid,<column>`` CSV (``column`` is ``mos`` or ``pesq``)."""
    bounds = {"mos": MOS_RANGE, "pesq": PESQ_RANGE}[column]
    values = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"uid", column} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'uid,{column}'")
        for lineno, row in enumerate(reader, 2):
            value = float(row[column])
            if not bounds[0] <= value <= bounds[1]:
                raise ValueError(f"{path}:{lineno}: {column} {value} outside [{bounds[0]}, {bounds[1]}]")
            values[row["uid"]] = value
    return values


def mos_from_listeners(path) -> tuple[dict[str, float], list[str]]:
    """Average raw ``uid,listener,score`` ratings into one MOS per setup.

    Returns the MOS table and warnings for setups rated by fewer than
    ``MIN_LISTENERS`` distinct listeners.
    """
    scores = defaultdict(list)
    listeners = defaultdict(set)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"uid", "listener", "score"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'uid,listener,score'")
        for lineno, row in enumerate(reader, 2):
            value = float(row["score"])
            if not MOS_RANGE[0] <= value <= MOS_RANGE[1]:
                raise ValueError(f"{path}:{lineno}: rating {value} outside [1, 5]")
            scores[row["uid"]].append(value)
            listeners[row["uid"]].add(row["listener"])
    warnings = [
        f"{uid}: {len(who)} listener(s), fewer than {MIN_LISTENERS}"
        for uid, who in listeners.items()
        if len(who) < MIN_LISTENERS
    ]
    return {uid: math.fsum(v) / len(v) for uid, v in scores.items()}, warnings
