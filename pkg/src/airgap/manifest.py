"""Balanced evaluation manifests.

A manifest pairs original audio files with their replayed counterparts for
every recording setup (loudspeaker/microphone pair, keyed by ``uid``). For
each setup, language and TTS architecture it holds ``n`` spoofed files from
that (language, architecture) cell and ``n`` bona fide files of the same
language, so that every setup contributes ``6 * 4 * 2 * n`` entries with an
exact 1:1 spoof to bona fide ratio.

Manifests are stored as JSONL, one entry per line. An optional first line
``{"__manifest__": {"seed": ..., "n_per_cell": ...}}`` carries build
parameters.
"""

from __future__ import annotations

import glob
import json
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import CellShortfallError, ManifestError
from .seeding import derive_seed

SPOOF = "spoof"
BONA_FIDE = "bona fide"
LABELS = (SPOOF, BONA_FIDE)
LANGUAGES = ("en", "de", "fr", "it", "pl", "es")
ARCHITECTURES = ("bark", "vits", "xtts_v1.1", "xtts_v2.0")
ENTRIES_PER_LANGUAGE = 2 * len(ARCHITECTURES)  # per unit of n
ENTRIES_PER_SETUP = ENTRIES_PER_LANGUAGE * len(LANGUAGES)  # 48 per unit of n

HEADER_KEY = "__manifest__"

_LABEL_ALIASES = {
    "spoof": SPOOF,
    "bona fide": BONA_FIDE,
    "bona-fide": BONA_FIDE,
    "bona_fide": BONA_FIDE,
    "bonafide": BONA_FIDE,
    "bona~fide": BONA_FIDE,
}
_LANGUAGE_ALIASES = {"sp": "es"}
_ARCH_ALIASES = {
    "xtts v1.1": "xtts_v1.1",
    "xtts_v1_1": "xtts_v1.1",
    "xtts v2.0": "xtts_v2.0",
    "xtts v2": "xtts_v2.0",
    "xtts_v2": "xtts_v2.0",
}


def canonical_label(value: str) -> str:
    key = str(value).strip().lower()
    try:
        return _LABEL_ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown label {value!r}; expected 'spoof' or 'bona fide'") from None


def canonical_language(value: str) -> str:
    key = str(value).strip().lower()
    key = _LANGUAGE_ALIASES.get(key, key)
    if key not in LANGUAGES:
        raise ValueError(f"unknown language {value!r}; expected one of {LANGUAGES}")
    return key


def canonical_architecture(value: str | None) -> str | None:
    if value is None or value == "":
        return None
    key = str(value).strip().lower()
    key = _ARCH_ALIASES.get(key, key)
    if key not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {value!r}; expected one of {ARCHITECTURES}")
    return key


@dataclass(frozen=True)
class ManifestEntry:
    original_file: str
    label: str
    language: str
    architecture: str | None = None
    recorded_file: str = ""
    mic: str = ""
    speaker: str = ""
    uid: str = ""
    setup_image: str | None = None
    extra: Mapping = field(default_factory=dict, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "label", canonical_label(self.label))
        object.__setattr__(self, "language", canonical_language(self.language))
        object.__setattr__(self, "architecture", canonical_architecture(self.architecture))
        if self.label == BONA_FIDE and self.architecture is not None:
            raise ValueError(f"bona fide entry {self.original_file!r} cannot carry an architecture")
        if self.label == SPOOF and self.architecture is None:
            raise ValueError(f"spoof entry {self.original_file!r} needs an architecture")
        object.__setattr__(self, "extra", dict(self.extra))

    @property
    def is_spoof(self) -> bool:
        return self.label == SPOOF

    @property
    def audio_file(self) -> str:
        """The processed file if there is one, else the original."""
        return self.recorded_file or self.original_file

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "extra"}
        if d["setup_image"] is None:
            del d["setup_image"]
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ManifestEntry":
        known = {f.name for f in fields(cls)} - {"extra"}
        missing = [k for k in ("original_file", "label", "language") if k not in d]
        if missing:
            raise KeyError(", ".join(missing))
        kwargs = {k: d[k] for k in known if k in d}
        extra = {k: v for k, v in d.items() if k not in known}
        return cls(**kwargs, extra=extra)


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    seed: int | None = None
    n_per_cell: int | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def uids(self) -> list[str]:
        return list(dict.fromkeys(e.uid for e in self.entries))


@dataclass
class AudioPool:
    """Candidate files for one label.

    Spoof pools are keyed by ``(language, architecture)``, bona fide pools
    by ``language``.
    """

    label: str
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        self.label = canonical_label(self.label)
        index = {}
        for key, files in self.index.items():
            if self.label == SPOOF:
                if not isinstance(key, tuple) or len(key) != 2:
                    raise ValueError(f"spoof pool keys are (language, architecture), got {key!r}")
                key = (canonical_language(key[0]), canonical_architecture(key[1]))
            else:
                if isinstance(key, tuple):
                    raise ValueError(f"bona fide pool keys are languages, got {key!r}")
                key = canonical_language(key)
            index.setdefault(key, []).extend(str(f) for f in files)
        self.index = index

    def cell(self, language: str, architecture: str | None = None) -> list[str]:
        key = (language, architecture) if self.label == SPOOF else language
        return self.index.get(key, [])


def _choose(files: Sequence[str], n: int, seed: int) -> list[str]:
    # sort first so the draw does not depend on how the pool was listed
    ordered = sorted(files)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(ordered), size=n, replace=False)
    return [ordered[i] for i in picks]


def build_manifest(
    bona_pool: AudioPool,
    spoof_pool: AudioPool,
    uids: Sequence[str],
    n: int,
    seed: int,
    setup_info: Mapping[str, Mapping] | None = None,
) -> Manifest:
    """Select ``n`` spoof and ``n`` bona fide files per (uid, language, architecture).

    Selection inside a cell is uniform without replacement and seeded by
    hashing ``(seed, uid, language, architecture, label)``; the same source
    file may recur in other cells and other setups. Entry order follows the
    nested loops uid -> language -> architecture -> (bona fide, spoof).

    ``setup_info`` optionally maps a uid to ``{"mic", "speaker", "setup_image"}``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if bona_pool.label != BONA_FIDE or spoof_pool.label != SPOOF:
        raise ValueError("build_manifest expects (bona fide pool, spoof pool)")
    if len(set(uids)) != len(uids):
        raise ValueError("uids must be unique")
    if n == 0:
        return Manifest([], seed=seed, n_per_cell=0)

    for lang in LANGUAGES:
        have = len(bona_pool.cell(lang))
        if have < n:
            raise CellShortfallError((BONA_FIDE, lang), have, n)
        for arch in ARCHITECTURES:
            have = len(spoof_pool.cell(lang, arch))
            if have < n:
                raise CellShortfallError((SPOOF, lang, arch), have, n)

    setup_info = setup_info or {}
    entries = []
    for uid in uids:
        info = setup_info.get(uid, {})
        common = dict(
            uid=uid,
            mic=info.get("mic", ""),
            speaker=info.get("speaker", ""),
            setup_image=info.get("setup_image"),
        )
        for lang in LANGUAGES:
            for arch in ARCHITECTURES:
                bona = _choose(bona_pool.cell(lang), n, derive_seed(seed, uid, lang, arch, BONA_FIDE))
                spoof = _choose(spoof_pool.cell(lang, arch), n, derive_seed(seed, uid, lang, arch, SPOOF))
                entries.extend(ManifestEntry(f, BONA_FIDE, lang, **common) for f in bona)
                entries.extend(ManifestEntry(f, SPOOF, lang, arch, **common) for f in spoof)
    return Manifest(entries, seed=seed, n_per_cell=n)


@dataclass
class Violation:
    uid: str
    problems: list[str]

    def __str__(self) -> str:
        return f"setup {self.uid!r}: " + "; ".join(self.problems)


@dataclass
class ValidationReport:
    per_uid: dict[str, dict[str, int]]
    per_language: dict[str, dict[str, int]]
    per_uid_language: dict[tuple[str, str], int]
    violations: list[Violation]

    @property
    def valid(self) -> bool:
        return not self.violations

    @property
    def total_spoof(self) -> int:
        return sum(c[SPOOF] for c in self.per_uid.values())

    @property
    def total_bona(self) -> int:
        return sum(c[BONA_FIDE] for c in self.per_uid.values())

    def summary(self) -> str:
        lines = [
            f"{self.total_spoof + self.total_bona} entries "
            f"({self.total_spoof} spoof / {self.total_bona} bona fide) "
            f"across {len(self.per_uid)} setups",
        ]
        lines += [f"  {lang}: {c[SPOOF]} spoof / {c[BONA_FIDE]} bona fide" for lang, c in self.per_language.items()]
        lines.append("valid" if self.valid else f"{len(self.violations)} violations")
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines)


def validate_manifest(manifest: Manifest) -> ValidationReport:
    """Count entries and collect balance violations, at most one per setup.

    Checked per setup: spoof count equals bona fide count; each language's
    spoof and bona fide counts match; no file repeats inside a spoof cell;
    and, when ``n_per_cell`` is known, every (language, architecture) spoof
    cell holds ``n`` files and every language ``8 * n`` entries.
    """
    per_uid: dict[str, Counter] = defaultdict(Counter)
    per_language: dict[str, Counter] = defaultdict(Counter)
    per_uid_lang: dict[tuple, Counter] = defaultdict(Counter)
    spoof_cells: dict[tuple, Counter] = defaultdict(Counter)
    for e in manifest.entries:
        per_uid[e.uid][e.label] += 1
        per_language[e.language][e.label] += 1
        per_uid_lang[(e.uid, e.language)][e.label] += 1
        if e.is_spoof:
            spoof_cells[(e.uid, e.language, e.architecture)][e.original_file] += 1

    n = manifest.n_per_cell
    violations = []
    for uid, counts in per_uid.items():
        problems = []
        if counts[SPOOF] != counts[BONA_FIDE]:
            problems.append(f"{counts[SPOOF]} spoof vs {counts[BONA_FIDE]} bona fide")
        for lang in LANGUAGES:
            c = per_uid_lang.get((uid, lang), Counter())
            if c[SPOOF] != c[BONA_FIDE]:
                problems.append(f"language {lang}: {c[SPOOF]} spoof vs {c[BONA_FIDE]} bona fide")
            if n is not None and c[SPOOF] + c[BONA_FIDE] != ENTRIES_PER_LANGUAGE * n:
                problems.append(
                    f"language {lang}: {c[SPOOF] + c[BONA_FIDE]} entries, expected {ENTRIES_PER_LANGUAGE * n}"
                )
            for arch in ARCHITECTURES:
                cell = spoof_cells.get((uid, lang, arch), Counter())
                if n is not None and sum(cell.values()) != n:
                    problems.append(f"cell {lang}/{arch}: {sum(cell.values())} spoof files, expected {n}")
                dups = sorted(f for f, k in cell.items() if k > 1)
                if dups:
                    problems.append(f"cell {lang}/{arch}: repeated files {dups}")
        if problems:
            violations.append(Violation(uid, problems))

    return ValidationReport(
        per_uid={u: {SPOOF: c[SPOOF], BONA_FIDE: c[BONA_FIDE]} for u, c in per_uid.items()},
        per_language={
            lang: {SPOOF: per_language[lang][SPOOF], BONA_FIDE: per_language[lang][BONA_FIDE]}
            for lang in LANGUAGES
            if lang in per_language
        },
        per_uid_language={k: sum(c.values()) for k, c in per_uid_lang.items()},
        violations=violations,
    )


def iter_manifest(path) -> Iterator[ManifestEntry]:
    """Stream entries from a JSONL manifest, skipping the header line."""
    for _, entry in _iter_lines(path):
        if entry is not None:
            yield entry


def _iter_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON ({exc.msg})", line=lineno) from None
            if not isinstance(obj, dict):
                raise ManifestError("expected a JSON object", line=lineno)
            if HEADER_KEY in obj:
                if lineno != 1:
                    raise ManifestError("header object only allowed on the first line", line=lineno)
                yield obj[HEADER_KEY], None
                continue
            try:
                yield None, ManifestEntry.from_dict(obj)
            except KeyError as exc:
                raise ManifestError(f"missing required field(s): {exc.args[0]}", line=lineno) from None
            except (TypeError, ValueError) as exc:
                raise ManifestError(str(exc), line=lineno) from None


def read_manifest(path) -> Manifest:
    header: dict = {}
    entries = []
    for head, entry in _iter_lines(path):
        if head is not None:
            header = head
        else:
            entries.append(entry)
    return Manifest(entries, seed=header.get("seed"), n_per_cell=header.get("n_per_cell"))


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if manifest.seed is not None or manifest.n_per_cell is not None:
            header = {"seed": manifest.seed, "n_per_cell": manifest.n_per_cell}
            fh.write(json.dumps({HEADER_KEY: header}) + "\n")
        for entry in manifest.entries:
            fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")


def with_recorded(entry: ManifestEntry, recorded_file: str, **extra) -> ManifestEntry:
    return replace(entry, recorded_file=recorded_file, extra={**entry.extra, **extra})


def load_pools(path, root=None) -> tuple[AudioPool, AudioPool]:
    """Build (bona fide, spoof) pools from a JSON pool definition.

    The file holds a list of ``{"label", "language", ["architecture"], "glob"}``
    objects; ``glob`` (a string or list of strings) is resolved relative to
    ``root`` (default: the definition file's directory). Pool paths are
    stored relative to ``root``.
    """
    path = Path(path)
    root = Path(root) if root is not None else path.parent
    spec = json.loads(path.read_text())
    if isinstance(spec, dict):
        spec = spec.get("pools", [])
    bona: dict = {}
    spoof: dict = {}
    for i, item in enumerate(spec):
        try:
            label = canonical_label(item["label"])
            lang = canonical_language(item["language"])
            patterns = item["glob"]
        except KeyError as exc:
            raise ManifestError(f"pool definition #{i} lacks {exc.args[0]!r}") from None
        if isinstance(patterns, str):
            patterns = [patterns]
        files = []
        for pattern in patterns:
            hits = glob.glob(str(root / pattern), recursive=True)
            files.extend(os.path.relpath(h, root) for h in sorted(hits))
        if label == SPOOF:
            arch = canonical_architecture(item.get("architecture"))
            if arch is None:
                raise ManifestError(f"pool definition #{i}: spoof pools need an architecture")
            spoof.setdefault((lang, arch), []).extend(files)
        else:
            bona.setdefault(lang, []).extend(files)
    return AudioPool(BONA_FIDE, bona), AudioPool(SPOOF, spoof)


def entries_by_file(entries: Iterable[ManifestEntry]) -> dict[str, ManifestEntry]:
    """Index entries by recorded file, then by original file (first occurrence wins)."""
    index: dict[str, ManifestEntry] = {}
    entries = list(entries)
    for e in entries:
        if e.recorded_file:
            index.setdefault(e.recorded_file, e)
    for e in entries:
        index.setdefault(e.original_file, e)
    return index
