"""Evaluation reports: per-condition EER/accuracy, per-attack rows, per-setup quality.

Records naming an original file form the ``baseline`` condition, records
naming a recorded file (replayed, simulated or noise-mixed) the
``processed`` condition. Several score files may be passed as independent
trials; reported values are trial means and the per-trial values are kept
alongside. Rates in the JSON report are percentages (``*_pct`` keys).
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from html import escape
from pathlib import Path
from typing import Sequence

from .errors import DomainError
from .manifest import BONA_FIDE, SPOOF, Manifest
from .metrics import (
    ATTACK_GROUPS,
    ATTACK_TITLES,
    ScoreRecord,
    accuracy_at_threshold,
    aggregate_trials,
    eer_from_scores,
    join_records,
)
from .quality import Correlations, SetupQuality, quality_correlation

CONDITIONS = ("baseline", "processed")


@dataclass
class EvalReport:
    threshold: float
    overall: dict[str, dict] = field(default_factory=dict)
    per_attack: dict[str, dict[str, float]] = field(default_factory=dict)
    per_setup: list[SetupQuality] = field(default_factory=list)
    correlations: Correlations | None = None
    trials: list[dict[str, float]] = field(default_factory=list)
    aggregate: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "overall": self.overall,
            "per_attack": self.per_attack,
            "per_setup": [asdict(s) for s in self.per_setup],
            "correlations": self.correlations.to_dict() if self.correlations else None,
            "trials": self.trials,
            "aggregate": self.aggregate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        corr = d.get("correlations")
        return cls(
            threshold=d["threshold"],
            overall=d.get("overall", {}),
            per_attack=d.get("per_attack", {}),
            per_setup=[SetupQuality(**s) for s in d.get("per_setup", [])],
            correlations=Correlations(**corr) if corr else None,
            trials=d.get("trials", []),
            aggregate=d.get("aggregate", {}),
        )

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def read(cls, path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _trial_metrics(joined, threshold):
    """Flat metric dict for one trial plus per-setup spoof hit counts."""
    flat: dict[str, float] = {}
    by_cond = defaultdict(list)
    for r, e, cond in joined:
        by_cond[cond].append((r, e))
    setups = defaultdict(lambda: [0, 0])
    for cond in CONDITIONS:
        pairs = by_cond.get(cond)
        if not pairs:
            continue
        records = [r for r, _ in pairs]
        flat[f"{cond}/accuracy_pct"] = 100.0 * accuracy_at_threshold(records, threshold)
        spoof = [r.score for r in records if r.label == SPOOF]
        bona = [r.score for r in records if r.label == BONA_FIDE]
        flat[f"{cond}/num_spoof"] = len(spoof)
        flat[f"{cond}/num_bona"] = len(bona)
        if spoof and bona:
            flat[f"{cond}/eer_pct"] = 100.0 * eer_from_scores(spoof, bona).eer
        groups = defaultdict(list)
        for r, e in pairs:
            groups[e.architecture if e.is_spoof else BONA_FIDE].append(r)
        for g in ATTACK_GROUPS:
            if g in groups:
                flat[f"{cond}/attack/{g}"] = 100.0 * accuracy_at_threshold(groups[g], threshold)
        if cond == "processed":
            for r, e in pairs:
                if r.label == SPOOF:
                    hit = setups[e.uid]
                    hit[0] += r.score > threshold
                    hit[1] += 1
    return flat, setups


def evaluate(trials: Sequence[Sequence[ScoreRecord]], manifest: Manifest, threshold: float = 0.5) -> EvalReport:
    """Join every trial's scores to ``manifest`` and summarize them.

    Raises ``JoinError`` if any file id is missing from the manifest.
    """
    if not trials:
        raise DomainError("evaluate needs at least one trial")
    flats = []
    setup_hits = defaultdict(list)
    for records in trials:
        flat, setups = _trial_metrics(join_records(records, manifest.entries), threshold)
        flats.append(flat)
        for uid, (hits, total) in setups.items():
            setup_hits[uid].append((hits, total))

    agg = aggregate_trials(flats)
    report = EvalReport(threshold=threshold, trials=flats, aggregate=agg)
    for cond in CONDITIONS:
        if f"{cond}/accuracy_pct" not in agg:
            continue
        row = {
            "accuracy_pct": agg[f"{cond}/accuracy_pct"]["mean"],
            "accuracy_pct_std": agg[f"{cond}/accuracy_pct"]["std"],
            "num_spoof": int(agg[f"{cond}/num_spoof"]["mean"]),
            "num_bona": int(agg[f"{cond}/num_bona"]["mean"]),
        }
        if f"{cond}/eer_pct" in agg:
            row["eer_pct"] = agg[f"{cond}/eer_pct"]["mean"]
            row["eer_pct_std"] = agg[f"{cond}/eer_pct"]["std"]
        report.overall[cond] = row
        report.per_attack[cond] = {
            g: agg[f"{cond}/attack/{g}"]["mean"] for g in ATTACK_GROUPS if f"{cond}/attack/{g}" in agg
        }
    for uid in sorted(setup_hits):
        hits = setup_hits[uid]
        acc = sum(h / t for h, t in hits) / len(hits)
        report.per_setup.append(SetupQuality(uid, acc, num_spoof=hits[0][1]))
    return report


def attach_quality(report: EvalReport, mos: dict[str, float] | None, pesq: dict[str, float] | None) -> EvalReport:
    mos, pesq = mos or {}, pesq or {}
    report.per_setup = [
        SetupQuality(s.uid, s.spoof_accuracy, mos.get(s.uid), pesq.get(s.uid), s.num_spoof) for s in report.per_setup
    ]
    report.correlations = quality_correlation(report.per_setup)
    return report


def _fmt(value, std=None) -> str:
    if value is None:
        return "-"
    if std:
        return f"{value:.1f} ± {std:.1f}"
    return f"{value:.1f}"


def render_table(report: EvalReport) -> str:
    conds = [c for c in CONDITIONS if c in report.overall]
    titles = {"baseline": "Baseline", "processed": "Processed"}
    width = max(12, *(len(t) for t in ATTACK_TITLES.values())) + 2
    col = 16
    lines = [f"threshold {report.threshold:g}, {len(report.trials)} trial(s)", ""]
    head = "".ljust(width) + "".join(titles[c].rjust(col) for c in conds)
    lines.append(head)
    for key, label in (("accuracy_pct", "Accuracy (%)"), ("eer_pct", "EER (%)")):
        cells = [_fmt(report.overall[c].get(key), report.overall[c].get(key + "_std")) for c in conds]
        lines.append(label.ljust(width) + "".join(x.rjust(col) for x in cells))
    lines += ["", "Per-attack accuracy (%)", head]
    for g in ATTACK_GROUPS:
        cells = [_fmt(report.per_attack.get(c, {}).get(g)) for c in conds]
        lines.append(ATTACK_TITLES[g].ljust(width) + "".join(x.rjust(col) for x in cells))
    if report.correlations is not None:
        c = report.correlations
        lines += ["", "Pearson correlation"]
        for name in ("acc_vs_mos", "acc_vs_pesq", "mos_vs_pesq"):
            value = getattr(c, name)
            lines.append(f"  {name:<12} {'-' if value is None else f'{value:+.3f}'}  (n={c.pairs.get(name, 0)})")
    return "\n".join(lines)


def write_scatter_csv(per_setup: Sequence[SetupQuality], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["uid", "spoof_accuracy", "mos", "pesq"])
        for s in per_setup:
            w.writerow([s.uid, repr(s.spoof_accuracy), "" if s.mos is None else repr(s.mos), "" if s.pesq is None else repr(s.pesq)])


def scatter_svg(per_setup: Sequence[SetupQuality], correlations: Correlations | None = None) -> str:
    """Two side-by-side panels: spoof accuracy against MOS and against PESQ."""
    panels = [("mos", "MOS", (1.0, 5.0), "#1f5fbf"), ("pesq", "PESQ", (-0.5, 4.5), "#2e8b3d")]
    pw, ph, margin = 320, 260, 48
    width = len(panels) * (pw + margin) + margin
    height = ph + 2 * margin
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for k, (attr, name, (lo, hi), colour) in enumerate(panels):
        x0 = margin + k * (pw + margin)
        y0 = margin
        out.append(f'<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        r = getattr(correlations, f"acc_vs_{attr}", None) if correlations else None
        title = f"spoof accuracy vs {name}" + ("" if r is None else f" (r = {r:.3f})")
        out.append(f'<text x="{x0 + pw / 2}" y="{y0 - 10}" text-anchor="middle">{escape(title)}</text>')
        out.append(f'<text x="{x0 + pw / 2}" y="{y0 + ph + 32}" text-anchor="middle">{name}</text>')
        for tick in range(int(lo) if lo == int(lo) else int(lo) + 1, int(hi) + 1):
            tx = x0 + (tick - lo) / (hi - lo) * pw
            out.append(f'<text x="{tx:.1f}" y="{y0 + ph + 16}" text-anchor="middle">{tick}</text>')
        for tick in (0.0, 0.5, 1.0):
            ty = y0 + ph - tick * ph
            out.append(f'<text x="{x0 - 6}" y="{ty + 4:.1f}" text-anchor="end">{tick:g}</text>')
        for s in per_setup:
            q = getattr(s, attr)
            if q is None:
                continue
            cx = x0 + (q - lo) / (hi - lo) * pw
            cy = y0 + ph - s.spoof_accuracy * ph
            out.append(
                f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{colour}" fill-opacity="0.75">'
                f"<title>{escape(s.uid)}</title></circle>"
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
