"""Reference spoof detector: log band-energy statistics + logistic regression.

Features are the per-band mean and standard deviation, over frames, of log
energies in ``n_bands`` triangular bands spaced on the mel scale. The
classifier is trained by full-batch gradient descent on the mean logistic
negative log-likelihood; it outputs P(spoof).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import AudioBuffer
from .errors import DomainError
from .manifest import SPOOF, canonical_label

ENERGY_FLOOR = 1e-10
LOG_FLOOR = math.log(ENERGY_FLOOR)


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    frame_size: int = 512
    hop: int = 256
    n_bands: int = 40
    fmin: float = 0.0
    fmax: float | None = None

    @property
    def dim(self) -> int:
        return 2 * self.n_bands

    @property
    def upper(self) -> float:
        return self.fmax if self.fmax is not None else self.sample_rate / 2


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 3000
    seed: int = 0
    tol: float = 1e-8


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def band_edges(config: FeatureConfig) -> np.ndarray:
    """``n_bands + 2`` frequencies in Hz: band k spans edges[k]..edges[k+2], peaking at edges[k+1]."""
    mels = np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.upper), config.n_bands + 2)
    return mel_to_hz(mels)


def filterbank(config: FeatureConfig) -> np.ndarray:
    freqs = np.fft.rfftfreq(config.frame_size, 1.0 / config.sample_rate)
    edges = band_edges(config)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    return np.clip(np.minimum(rising, falling), 0.0, None)


def extract_features(audio: AudioBuffer, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    if audio.sample_rate != config.sample_rate:
        raise ValueError(f"audio at {audio.sample_rate} Hz, features configured for {config.sample_rate} Hz")
    x = audio.samples
    if x.shape[0] < config.frame_size:
        raise DomainError(f"audio of {x.shape[0]} samples is shorter than one {config.frame_size}-sample frame")
    count = 1 + (x.shape[0] - config.frame_size) // config.hop
    idx = np.arange(config.frame_size)[None, :] + config.hop * np.arange(count)[:, None]
    frames = x[idx] * np.hanning(config.frame_size)
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    energies = power @ filterbank(config).T
    logs = np.log(np.maximum(energies, ENERGY_FLOOR))
    return np.concatenate([logs.mean(axis=0), logs.std(axis=0)])


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss_grad(weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Mean logistic NLL and its gradient with respect to (weights, bias)."""
    z = X @ weights + bias
    # log(1 + e^z) - y z, written stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    resid = _sigmoid(z) - y
    return loss, X.T @ resid / X.shape[0], float(np.mean(resid))


@dataclass
class DetectorModel:
    weights: np.ndarray
    bias: float
    means: np.ndarray
    stds: np.ndarray
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.stds = np.asarray(self.stds, dtype=float)
        if not (self.weights.shape == self.means.shape == self.stds.shape):
            raise ValueError("weights, means and stds must share one dimension")

    def to_dict(self) -> dict:
        return {
            "feature_config": asdict(self.feature_config),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorModel":
        return cls(d["weights"], float(d["bias"]), d["means"], d["stds"], FeatureConfig(**d["feature_config"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "DetectorModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _labels_to_array(labels) -> np.ndarray:
    y = []
    for lab in labels:
        if isinstance(lab, str):
            y.append(1.0 if canonical_label(lab) == SPOOF else 0.0)
        else:
            y.append(1.0 if lab else 0.0)
    return np.asarray(y)


def train(features: Sequence, labels: Sequence, config: TrainConfig = TrainConfig(), feature_config: FeatureConfig | None = None) -> DetectorModel:
    """Fit a logistic detector; labels are 1/True/"spoof" for spoof.

    Features are z-scored with training statistics (stored in the model;
    constant dimensions get unit scale). Weights start at zero and training
    stops early once one step improves the loss by less than ``config.tol``.
    """
    X = np.asarray(features, dtype=float)
    y = _labels_to_array(labels)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"features {X.shape} do not match {y.shape[0]} labels")
    if y.min() == y.max():
        raise DomainError("training data must contain both spoof and bona fide examples")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[stds == 0] = 1.0
    Z = (X - means) / stds

    w = np.zeros(X.shape[1])
    b = 0.0
    history = []
    prev = math.inf
    for _ in range(config.epochs):
        loss, gw, gb = logistic_loss_grad(w, b, Z, y)
        history.append(loss)
        if prev - loss < config.tol:
            break
        prev = loss
        w = w - config.learning_rate * gw
        b = b - config.learning_rate * gb
    fc = feature_config or FeatureConfig()
    return DetectorModel(w, b, means, stds, fc, history)


def score(model: DetectorModel, features) -> float | np.ndarray:
    """P(spoof) for one feature vector or a batch (rows)."""
    X = np.asarray(features, dtype=float)
    if X.shape[-1] != model.weights.shape[0]:
        raise ValueError(f"feature dimension {X.shape[-1]} does not match model dimension {model.weights.shape[0]}")
    p = _sigmoid((X - model.means) / model.stds @ model.weights + model.bias)
    return float(p) if X.ndim == 1 else p
