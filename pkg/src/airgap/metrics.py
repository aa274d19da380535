"""Detector evaluation: EER, threshold accuracy, per-attack tables, correlation.

Score convention: a higher score means "more spoof-like" and spoof is the
positive class. At a threshold ``t``

* false acceptance rate  FAR(t) = fraction of bona fide scores >= t
* false rejection rate   FRR(t) = fraction of spoof scores < t

Accuracy counts a record as predicted spoof when ``score > threshold``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, JoinError, UndefinedCorrelationError
from .manifest import ARCHITECTURES, BONA_FIDE, SPOOF, Manifest, ManifestEntry, canonical_label

ATTACK_GROUPS = ARCHITECTURES + (BONA_FIDE,)
ATTACK_TITLES = {
    "bark": "Bark",
    "vits": "VITS",
    "xtts_v1.1": "XTTS v1.1",
    "xtts_v2.0": "XTTS v2",
    BONA_FIDE: "bona fide",
}


@dataclass(frozen=True)
class ScoreRecord:
    file_id: str
    score: float
    label: str | None = None

    def __post_init__(self):
        score = float(self.score)
        if not math.isfinite(score):
            raise ValueError(f"score for {self.file_id!r} is not finite: {self.score!r}")
        object.__setattr__(self, "score", score)
        if self.label is not None and self.label != "":
            object.__setattr__(self, "label", canonical_label(self.label))
        else:
            object.__setattr__(self, "label", None)


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float
    num_spoof: int
    num_bona: int


def read_scores(path) -> list[ScoreRecord]:
    """Read a ``file_id,score[,label]`` CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"file_id", "score"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: score CSV needs a 'file_id,score[,label]' header")
        records = []
        for lineno, row in enumerate(reader, 2):
            try:
                records.append(ScoreRecord(row["file_id"], float(row["score"]), row.get("label") or None))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return records


def write_scores(records: Iterable[ScoreRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["file_id", "score", "label"])
        for r in records:
            w.writerow([r.file_id, repr(r.score), r.label or ""])


def _split(records: Sequence[ScoreRecord]) -> tuple[np.ndarray, np.ndarray]:
    spoof, bona = [], []
    for r in records:
        if r.label is None:
            raise ValueError(f"record {r.file_id!r} has no label; join it with a manifest first")
        (spoof if r.label == SPOOF else bona).append(r.score)
    return np.asarray(spoof, dtype=float), np.asarray(bona, dtype=float)


def eer_from_scores(spoof_scores, bona_scores) -> EerResult:
    """EER by sweeping every distinct score as a threshold.

    FAR decreases and FRR increases with the threshold. The first operating
    point (lowest threshold) where FAR <= FRR is located; if the two are
    equal there, that is the EER, otherwise both rates are linearly
    interpolated between it and the previous operating point. A final
    operating point above every score (FAR 0, FRR 1) closes the sweep.
    """
    spoof = np.sort(np.asarray(spoof_scores, dtype=float))
    bona = np.sort(np.asarray(bona_scores, dtype=float))
    ns, nb = spoof.size, bona.size
    if ns == 0 or nb == 0:
        raise DomainError(f"EER needs both classes (got {ns} spoof, {nb} bona fide)")

    thresholds = np.unique(np.concatenate([spoof, bona]))
    # integer counts keep the FAR == FRR test exact
    fa = nb - np.searchsorted(bona, thresholds, side="left")
    fr = np.searchsorted(spoof, thresholds, side="left")
    fa = np.append(fa, 0).astype(np.int64)
    fr = np.append(fr, ns).astype(np.int64)
    diff = fa * ns - fr * nb  # sign of FAR - FRR

    i = int(np.argmax(diff <= 0))
    far_i, frr_i = fa[i] / nb, fr[i] / ns
    if diff[i] == 0:
        return EerResult(far_i, float(thresholds[i]), ns, nb)
    # diff[0] > 0 always (FAR at the lowest score is 1), so i >= 1 here
    far_p, frr_p = fa[i - 1] / nb, fr[i - 1] / ns
    alpha = diff[i - 1] / (diff[i - 1] - diff[i])
    eer = far_p + alpha * (far_i - far_p)
    if i < thresholds.size:
        thr = thresholds[i - 1] + alpha * (thresholds[i] - thresholds[i - 1])
    else:
        thr = thresholds[i - 1]
    return EerResult(float(eer), float(thr), ns, nb)


def compute_eer(records: Sequence[ScoreRecord]) -> EerResult:
    spoof, bona = _split(records)
    return eer_from_scores(spoof, bona)


def accuracy_at_threshold(records: Sequence[ScoreRecord], threshold: float = 0.5) -> float:
    """Fraction of records with ``(score > threshold) == (label == spoof)``."""
    labelled = [r for r in records if r.label is not None]
    if not labelled:
        raise DomainError("accuracy needs at least one labelled record")
    hits = sum((r.score > threshold) == (r.label == SPOOF) for r in labelled)
    return hits / len(labelled)


def join_records(records: Sequence[ScoreRecord], entries: Iterable[ManifestEntry]) -> list[tuple[ScoreRecord, ManifestEntry, str]]:
    """Attach each record to its manifest entry.

    Returns ``(record, entry, condition)`` with condition ``"processed"`` for
    records naming a recorded file and ``"baseline"`` for original files.
    Records without a label inherit the entry's label.
    """
    recorded: dict[str, ManifestEntry] = {}
    original: dict[str, ManifestEntry] = {}
    for e in entries:
        if e.recorded_file:
            recorded.setdefault(e.recorded_file, e)
        original.setdefault(e.original_file, e)
    joined, missing = [], []
    for r in records:
        if r.file_id in recorded:
            entry, cond = recorded[r.file_id], "processed"
        elif r.file_id in original:
            entry, cond = original[r.file_id], "baseline"
        else:
            missing.append(r.file_id)
            continue
        if r.label is None:
            r = ScoreRecord(r.file_id, r.score, entry.label)
        joined.append((r, entry, cond))
    if missing:
        raise JoinError(missing)
    return joined


def _group(entry: ManifestEntry) -> str:
    return entry.architecture if entry.is_spoof else BONA_FIDE


def per_attack_accuracy(records: Sequence[ScoreRecord], manifest: Manifest | Iterable[ManifestEntry], threshold: float = 0.5) -> dict[str, float]:
    """Accuracy per TTS architecture, with bona fide as its own group.

    Only groups that have records are present; keys follow table order
    (bark, vits, xtts_v1.1, xtts_v2.0, bona fide).
    """
    entries = manifest.entries if isinstance(manifest, Manifest) else manifest
    groups: dict[str, list[ScoreRecord]] = {}
    for r, e, _ in join_records(records, entries):
        groups.setdefault(_group(e), []).append(r)
    return {g: accuracy_at_threshold(groups[g], threshold) for g in ATTACK_GROUPS if g in groups}


def _exact_ratio(values: Sequence[float]) -> tuple[list[int], int]:
    """Scale floats to integers sharing one power-of-two denominator."""
    ratios = [float(v).as_integer_ratio() for v in values]
    den = max(q for _, q in ratios)
    return [p * (den // q) for p, q in ratios], den


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient.

    Sums are accumulated in exact integer arithmetic, so the result is the
    correctly rounded coefficient of the given floats: it is exactly
    antisymmetric under negation and exactly invariant under affine maps
    that are themselves exact in floating point.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise UndefinedCorrelationError("correlation needs at least two points")
    if not all(math.isfinite(v) for v in list(x) + list(y)):
        raise ValueError("correlation inputs must be finite")
    xi, _ = _exact_ratio(x)
    yi, _ = _exact_ratio(y)
    sx, sy = sum(xi), sum(yi)
    sxx = n * sum(a * a for a in xi) - sx * sx
    syy = n * sum(b * b for b in yi) - sy * sy
    sxy = n * sum(a * b for a, b in zip(xi, yi)) - sx * sy
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant input")
    r2 = (sxy * sxy) / (sxx * syy)  # int / int is correctly rounded
    return math.copysign(math.sqrt(r2), sxy) if sxy else 0.0


def aggregate_trials(trial_reports: Sequence[Mapping[str, float]]) -> dict[str, dict[str, float]]:
    """Mean and population standard deviation of each metric across trials."""
    metrics: dict[str, list[float]] = {}
    for report in trial_reports:
        for name, value in report.items():
            if value is not None:
                metrics.setdefault(name, []).append(float(value))
    return {
        name: {"mean": float(np.mean(v)), "std": float(np.std(v)), "n": len(v)}
        for name, v in metrics.items()
    }
