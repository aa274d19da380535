"""Synthetic noise generation and mixing at a target SNR.

Three noise kinds are supported: ``gaussian`` (i.i.d. normal amplitudes),
``white`` (i.i.d. uniform amplitudes on [-1, 1]) and ``pink`` (1/f power
spectrum). Every generated noise is scaled to an RMS of ``NOISE_RMS``.

Signal power is the whole-signal mean square; no voice-activity weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, rms_power
from .errors import DomainError
from .seeding import derive_seed

NOISE_KINDS = ("gaussian", "white", "pink")
NOISE_RMS = 0.1
# a mixture whose peak exceeds 1 is rescaled to this peak
CLIP_PEAK = 0.95


@dataclass(frozen=True)
class NoiseSpec:
    """Noise kind, seed, and either a fixed SNR or an inclusive [lo, hi] range in dB."""

    kind: str
    seed: int
    snr_db: float | tuple[float, float]

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        lo, hi = self.snr_range
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("SNR targets must be finite")
        if lo > hi:
            raise ValueError(f"SNR range lower bound {lo} exceeds upper bound {hi}")

    @property
    def snr_range(self) -> tuple[float, float]:
        if isinstance(self.snr_db, (tuple, list)):
            lo, hi = self.snr_db
            return float(lo), float(hi)
        return float(self.snr_db), float(self.snr_db)

    def draw_snr(self) -> float:
        lo, hi = self.snr_range
        if lo == hi:
            return lo
        rng = np.random.default_rng(derive_seed(self.seed, "snr"))
        return float(rng.uniform(lo, hi))


@dataclass(frozen=True, eq=False)
class MixResult:
    mixture: AudioBuffer
    achieved_snr_db: float
    gain: float
    drawn_snr_db: float
    seed: int
    kind: str
    post_scale: float = 1.0

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "drawn_snr_db": self.drawn_snr_db,
            "achieved_snr_db": self.achieved_snr_db,
            "gain": self.gain,
            "post_scale": self.post_scale,
        }


def _pink(rng: np.random.Generator, n: int) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n)
    mask = np.zeros_like(freqs)
    mask[1:] = 1.0 / np.sqrt(freqs[1:])
    return np.fft.irfft(spectrum * mask, n)


def generate_noise(kind: str, num_samples: int, sample_rate: int, seed: int) -> AudioBuffer:
    """Deterministic noise of the given kind, RMS-normalized to ``NOISE_RMS``."""
    if kind not in NOISE_KINDS:
        raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {kind!r}")
    if num_samples <= 0:
        raise ValueError("num_samples must be positive")
    rng = np.random.default_rng(derive_seed(seed, "noise", kind))
    if kind == "gaussian":
        x = rng.standard_normal(num_samples)
    elif kind == "white":
        x = rng.uniform(-1.0, 1.0, num_samples)
    else:
        x = _pink(rng, num_samples)
    power = float(np.dot(x, x)) / num_samples
    if power > 0:
        x *= NOISE_RMS / math.sqrt(power)
    return AudioBuffer(x, sample_rate)


def snr_gain(signal_power: float, noise_power: float, target_snr_db: float) -> float:
    """Linear noise gain g with 10*log10(Ps / (g**2 * Pn)) == target_snr_db."""
    if signal_power <= 0 or noise_power <= 0:
        raise DomainError(
            f"SNR gain needs positive powers (signal={signal_power}, noise={noise_power}); "
            "is the input silent?"
        )
    if not math.isfinite(target_snr_db):
        raise DomainError("target SNR must be finite")
    return math.sqrt(signal_power / (noise_power * 10.0 ** (target_snr_db / 10.0)))


def snr_db(signal: AudioBuffer, noise: AudioBuffer) -> float:
    return 10.0 * math.log10(rms_power(signal) / rms_power(noise))


def mix_at_snr(signal: AudioBuffer, spec: NoiseSpec) -> MixResult:
    """Add ``spec.kind`` noise to ``signal`` at the drawn target SNR.

    The noise has the signal's length and rate. If the mixture would clip
    (peak > 1) it is rescaled to ``CLIP_PEAK`` and the factor is stored in
    ``post_scale``; the SNR is unaffected by that rescaling.
    """
    if len(signal) == 0:
        raise DomainError("cannot mix noise into an empty signal")
    p_signal = rms_power(signal)
    if p_signal == 0.0:
        raise DomainError("cannot mix at an SNR into a silent signal")
    target = spec.draw_snr()
    noise = generate_noise(spec.kind, len(signal), signal.sample_rate, spec.seed)
    gain = snr_gain(p_signal, rms_power(noise), target)
    scaled = noise.samples * gain
    achieved = 10.0 * math.log10(p_signal / (float(np.dot(scaled, scaled)) / scaled.shape[0]))
    mixture = signal.samples + scaled
    post_scale = 1.0
    top = float(np.max(np.abs(mixture)))
    if top > 1.0:
        post_scale = CLIP_PEAK / top
        mixture = mixture * post_scale
    return MixResult(
        mixture=signal.with_samples(mixture),
        achieved_snr_db=achieved,
        gain=gain,
        drawn_snr_db=target,
        seed=spec.seed,
        kind=spec.kind,
        post_scale=post_scale,
    )
