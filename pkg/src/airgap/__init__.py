"""Replay-attack simulation and robustness evaluation for audio deepfake detectors."""

from .audio import AudioBuffer, peak_normalize, read_wav, resample, rms_power, write_wav
from .manifest import (
    AudioPool,
    Manifest,
    ManifestEntry,
    build_manifest,
    read_manifest,
    validate_manifest,
    write_manifest,
)
from .metrics import (
    ScoreRecord,
    accuracy_at_threshold,
    aggregate_trials,
    compute_eer,
    per_attack_accuracy,
    pearson,
)
from .noise import NoiseSpec, generate_noise, mix_at_snr, snr_gain
from .quality import log_spectral_distance, quality_correlation, segmental_snr
from .replay import Rir, RirBank, augment_manifest, convolve, load_rir_bank, simulate_replay

__version__ = "0.1.0"
