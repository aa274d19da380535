"""Command-line entry point: ``airgap <subcommand> ...``.

Exit codes: 0 success, 1 internal error, 2 invalid input or per-file
failures. Paths written to manifests and score files are relative to
``--root``. ``AIRGAP_LOG_LEVEL`` and ``AIRGAP_WORKERS`` set the defaults of
``--log-level`` and ``--workers``; ``--config FILE`` supplies flag defaults
from a JSON object whose keys are flag names.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import detector, manifest as mf, report as rp, synthetic
from .audio import read_wav, resample, write_wav
from .errors import AirgapError, CellShortfallError, JoinError
from .metrics import ScoreRecord, read_scores, write_scores
from .noise import NOISE_KINDS, NoiseSpec, mix_at_snr
from .quality import mos_from_listeners, read_quality_csv
from .replay import (
    augment_manifest,
    augmented_path,
    load_rir_bank,
    replay_with_mix,
    rir_at_rate,
    save_rir_bank,
)
from .seeding import derive_seed

log = logging.getLogger("airgap")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2
DEFAULT_SEED = 0


class InputError(AirgapError):
    """Invalid command-line input; exits with status 2."""


def _map(fn, items, workers: int):
    # results come back in input order, so outputs never depend on scheduling
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _rel(path, root) -> str:
    return Path(os.path.relpath(path, root)).as_posix()


def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_uids(args) -> tuple[list[str], dict]:
    if args.uids:
        lines = Path(args.uids).read_text().splitlines()
        return [u.strip() for u in lines if u.strip() and not u.startswith("#")], {}
    if args.rir_dir:
        bank = load_rir_bank(args.rir_dir)
        info = {u: {"mic": r.mic, "speaker": r.speaker} for u, r in bank.entries.items()}
        return bank.uids, info
    raise InputError("build-manifest needs --uids FILE or --rir-dir DIR")


def cmd_build_manifest(args) -> int:
    bona, spoof = mf.load_pools(args.pools, args.root)
    uids, info = _read_uids(args)
    try:
        manifest = mf.build_manifest(bona, spoof, uids, args.n, args.seed, info)
    except CellShortfallError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    mf.write_manifest(manifest, args.out)
    check = mf.validate_manifest(manifest)
    print(f"{len(manifest)} entries")
    print(check.summary())
    print(f"seed={args.seed}")
    return EXIT_OK if check.valid else EXIT_INPUT


def _noise_spec(args, seed) -> NoiseSpec | None:
    if not getattr(args, "noise_kind", None):
        return None
    return NoiseSpec(args.noise_kind, seed, tuple(args.snr))


def cmd_simulate(args) -> int:
    root = Path(args.root)
    manifest = mf.read_manifest(args.manifest)
    bank = load_rir_bank(args.rir_dir)
    out_dir = Path(args.out_dir)

    jobs = {}
    plan = []
    for entry in manifest.entries:
        if args.rir_policy == "match":
            uid = entry.uid if entry.uid in bank else None
        else:
            rng = np.random.default_rng(derive_seed(args.seed, "rir", entry.uid, entry.original_file))
            uid = bank.uids[int(rng.integers(len(bank)))]
        plan.append(uid)
        if uid is not None:
            jobs.setdefault((uid, entry.original_file), None)

    def work(key):
        uid, original = key
        file_seed = derive_seed(args.seed, "simulate", uid, original)
        dest = augmented_path(out_dir, uid, original)
        try:
            signal = read_wav(root / original)
            out, mix = replay_with_mix(signal, rir_at_rate(bank[uid], signal.sample_rate), _noise_spec(args, file_seed))
            dest.parent.mkdir(parents=True, exist_ok=True)
            write_wav(dest, out, args.encoding)
        except (OSError, ValueError, AirgapError) as exc:
            return key, None, f"{original} [{uid}]: {exc}"
        meta = {"input": Path(original).as_posix(), "output": _rel(dest, root), "rir_uid": uid, "seed": file_seed}
        if mix is not None:
            meta["noise"] = mix.metadata()
        _write_json(dest.with_suffix(".json"), meta)
        return key, meta, None

    results = {key: (meta, err) for key, meta, err in _map(work, list(jobs), args.workers)}
    errors = [err for _, err in results.values() if err]
    for entry, uid in zip(manifest.entries, plan):
        if uid is None:
            errors.append(f"{entry.original_file}: setup {entry.uid!r} not in RIR bank")
    entries = []
    for entry, uid in zip(manifest.entries, plan):
        meta = results.get((uid, entry.original_file), (None, None))[0] if uid else None
        entries.append(mf.with_recorded(entry, meta["output"], rir_uid=uid) if meta else entry)
    mf.write_manifest(mf.Manifest(entries, manifest.seed, manifest.n_per_cell), args.out_manifest)
    _write_json(out_dir / "run.json", {"command": "simulate", "seed": args.seed, "files": len(jobs), "errors": errors})
    written = sum(1 for meta, _ in results.values() if meta)
    print(f"{written} files written, {len(errors)} errors, seed={args.seed}")
    for err in errors[:20]:
        print(f"  {err}", file=sys.stderr)
    return EXIT_INPUT if errors else EXIT_OK


def cmd_mix_noise(args) -> int:
    root = Path(args.root)
    manifest = mf.read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    originals = list(dict.fromkeys(e.original_file for e in manifest.entries))

    def work(original):
        file_seed = derive_seed(args.seed, "noise", original)
        dest = out_dir / Path(original).with_suffix(".wav")
        try:
            signal = read_wav(root / original)
            mix = mix_at_snr(signal, NoiseSpec(args.kind, file_seed, tuple(args.snr)))
            dest.parent.mkdir(parents=True, exist_ok=True)
            write_wav(dest, mix.mixture, args.encoding)
        except (OSError, ValueError, AirgapError) as exc:
            return original, None, f"{original}: {exc}"
        meta = {"input": Path(original).as_posix(), "output": _rel(dest, root), **mix.metadata()}
        _write_json(dest.with_suffix(".json"), meta)
        return original, meta, None

    results = {o: (meta, err) for o, meta, err in _map(work, originals, args.workers)}
    errors = [err for _, err in results.values() if err]
    entries = []
    for entry in manifest.entries:
        meta = results[entry.original_file][0]
        if meta is None:
            entries.append(entry)
            continue
        entries.append(
            mf.with_recorded(
                entry, meta["output"], noise_kind=meta["kind"], noise_seed=meta["seed"],
                drawn_snr_db=meta["drawn_snr_db"], achieved_snr_db=meta["achieved_snr_db"],
            )
        )
    mf.write_manifest(mf.Manifest(entries, manifest.seed, manifest.n_per_cell), args.out_manifest)
    metas = [m for m, _ in results.values() if m]
    with open(out_dir / "mix_metadata.jsonl", "w", encoding="utf-8") as fh:
        for meta in metas:
            fh.write(json.dumps(meta, sort_keys=True) + "\n")
    _write_json(out_dir / "run.json", {"command": "mix-noise", "seed": args.seed, "kind": args.kind,
                                       "snr": list(args.snr), "files": len(originals), "errors": errors})
    print(f"{len(metas)} files mixed ({args.kind}, SNR {args.snr[0]:g}-{args.snr[1]:g} dB), "
          f"{len(errors)} skipped, seed={args.seed}")
    for err in errors[:20]:
        print(f"  {err}", file=sys.stderr)
    return EXIT_OK


def cmd_augment(args) -> int:
    manifest = mf.read_manifest(args.manifest)
    bank = load_rir_bank(args.rir_dir)
    result = augment_manifest(
        manifest, bank, args.probability, args.seed, audio_root=args.root,
        out_root=args.out_dir, encoding=args.encoding, workers=args.workers,
    )
    mf.write_manifest(result.manifest, args.out_manifest)
    print(f"{result.written} of {len(manifest)} entries augmented (p={args.probability:g}), "
          f"{len(result.errors)} errors, seed={args.seed}")
    for err in result.errors[:20]:
        print(f"  {err}", file=sys.stderr)
    return EXIT_INPUT if result.errors else EXIT_OK


def _audio_path(entry: mf.ManifestEntry, use: str) -> str:
    if use == "original":
        return entry.original_file
    if use == "recorded":
        if not entry.recorded_file:
            raise InputError(f"{entry.original_file} has no recorded_file")
        return entry.recorded_file
    return entry.audio_file


def _features_for(paths, root, config: detector.FeatureConfig, workers: int):
    def work(path):
        audio = read_wav(Path(root) / path)
        if audio.sample_rate != config.sample_rate:
            audio = resample(audio, config.sample_rate)
        return detector.extract_features(audio, config)

    return np.array(_map(work, paths, workers))


def cmd_train_baseline(args) -> int:
    manifest = mf.read_manifest(args.manifest)
    if not manifest.entries:
        raise InputError("training manifest is empty")
    fc = detector.FeatureConfig(sample_rate=args.sample_rate)
    tc = detector.TrainConfig(learning_rate=args.learning_rate, epochs=args.epochs, seed=args.seed)
    paths = [_audio_path(e, args.use) for e in manifest.entries]
    X = _features_for(paths, args.root, fc, args.workers)
    model = detector.train(X, [e.label for e in manifest.entries], tc, fc)
    data = model.to_dict()
    data["train_config"] = {"learning_rate": tc.learning_rate, "epochs": tc.epochs, "seed": tc.seed}
    data["epochs_run"] = len(model.loss_history)
    data["final_loss"] = model.loss_history[-1]
    _write_json(args.out, data)
    acc = np.mean((detector.score(model, X) > 0.5) == np.array([e.is_spoof for e in manifest.entries]))
    print(f"trained on {len(paths)} files: {len(model.loss_history)} epochs, "
          f"loss {model.loss_history[-1]:.4g}, train accuracy {100 * acc:.1f}%, seed={args.seed}")
    return EXIT_OK


def cmd_score_baseline(args) -> int:
    model = detector.DetectorModel.load(args.model)
    manifest = mf.read_manifest(args.manifest)
    labels = {}
    for e in manifest.entries:
        labels.setdefault(_audio_path(e, args.use), e.label)
    paths = list(labels)
    X = _features_for(paths, args.root, model.feature_config, args.workers)
    scores = np.atleast_1d(detector.score(model, X)) if paths else []
    write_scores([ScoreRecord(p, float(s), labels[p]) for p, s in zip(paths, scores)], args.out)
    print(f"{len(paths)} files scored -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = mf.read_manifest(args.manifest)
    trials = [read_scores(p) for p in args.scores]
    try:
        report = rp.evaluate(trials, manifest, args.threshold)
    except JoinError as exc:
        print(f"error: {len(exc.offenders)} score ids not in manifest; first ones:", file=sys.stderr)
        for fid in exc.offenders[:10]:
            print(f"  {fid}", file=sys.stderr)
        return EXIT_INPUT
    report.write(args.out)
    table = rp.render_table(report)
    Path(args.out).with_suffix(".txt").write_text(table + "\n")
    print(table)
    return EXIT_OK


def cmd_correlate(args) -> int:
    report = rp.EvalReport.read(args.report)
    mos = pesq = None
    if args.mos:
        mos = read_quality_csv(args.mos, "mos")
    elif args.listeners:
        mos, warnings = mos_from_listeners(args.listeners)
        for w in warnings:
            log.warning("MOS: %s", w)
    if args.pesq:
        pesq = read_quality_csv(args.pesq, "pesq")
    rp.attach_quality(report, mos, pesq)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "correlations.json", report.correlations.to_dict())
    rp.write_scatter_csv(report.per_setup, out / "scatter.csv")
    (out / "scatter.svg").write_text(rp.scatter_svg(report.per_setup, report.correlations))
    report.write(out / "report_with_quality.json")
    c = report.correlations
    for name in ("acc_vs_mos", "acc_vs_pesq", "mos_vs_pesq"):
        value = getattr(c, name)
        print(f"{name}: {'absent' if value is None else f'{value:.4f}'} (n={c.pairs[name]})")
    for w in c.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_synth_corpus(args) -> int:
    out = Path(args.out_dir)
    corpus = synthetic.write_corpus(out / "audio", args.per_class, args.seed)
    pools = [{"label": mf.BONA_FIDE, "language": lang, "glob": f"audio/bona_fide/{lang}/*.wav"} for lang in mf.LANGUAGES]
    pools += [
        {"label": mf.SPOOF, "language": lang, "architecture": arch, "glob": f"audio/spoof/{arch}/{lang}/*.wav"}
        for lang in mf.LANGUAGES
        for arch in mf.ARCHITECTURES
    ]
    _write_json(out / "pools.json", pools)
    save_rir_bank(synthetic.rir_bank(args.seed, args.rirs), out / "rirs")
    entries = [
        mf.ManifestEntry(Path("audio", e.original_file).as_posix(), e.label, e.language, e.architecture)
        for e in corpus.entries
    ]
    mf.write_manifest(mf.Manifest(entries, args.seed), out / "corpus.jsonl")
    print(f"{len(entries)} files, {args.rirs} RIRs under {out}, seed={args.seed}")
    return EXIT_OK


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value else default


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with flag defaults")
    common.add_argument("--log-level", default=os.environ.get("AIRGAP_LOG_LEVEL", "WARNING"))
    common.add_argument("--workers", type=int, default=_env_int("AIRGAP_WORKERS", 1))
    common.add_argument("--root", default=".", help="directory that manifest paths are relative to")

    parser = argparse.ArgumentParser(prog="airgap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    subparsers = {}

    def add(name, fn, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=fn)
        subparsers[name] = p
        return p

    p = add("build-manifest", cmd_build_manifest, "select a balanced evaluation manifest")
    p.add_argument("--pools", required=True, help="pool definition JSON")
    p.add_argument("--uids", help="file with one setup uid per line")
    p.add_argument("--rir-dir", help="take setup uids (and mic/speaker) from an RIR bank")
    p.add_argument("--n", type=int, default=10, help="files per (language, architecture) cell")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)

    p = add("simulate", cmd_simulate, "simulate replay by RIR convolution")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rir-dir", required=True)
    p.add_argument("--rir-policy", choices=("match", "random"), default="match",
                   help="match: use the entry's setup uid; random: seeded uniform draw")
    p.add_argument("--noise-kind", choices=NOISE_KINDS, help="optional noise floor after convolution")
    p.add_argument("--snr", type=float, nargs=2, default=(30.0, 30.0), metavar=("LO", "HI"))
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--encoding", choices=("float32", "pcm16"), default="float32")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out-manifest", required=True)

    p = add("mix-noise", cmd_mix_noise, "add synthetic noise at a random target SNR")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", choices=NOISE_KINDS, required=True)
    p.add_argument("--snr", type=float, nargs=2, default=(15.0, 40.0), metavar=("LO", "HI"))
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--encoding", choices=("float32", "pcm16"), default="float32")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out-manifest", required=True)

    p = add("augment", cmd_augment, "RIR-augment a training manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rir-dir", required=True)
    p.add_argument("--probability", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--encoding", choices=("float32", "pcm16"), default="float32")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out-manifest", required=True)

    p = add("train-baseline", cmd_train_baseline, "train the reference logistic detector")
    p.add_argument("--manifest", required=True)
    p.add_argument("--use", choices=("auto", "original", "recorded"), default="auto")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--learning-rate", type=float, default=detector.TrainConfig.learning_rate)
    p.add_argument("--epochs", type=int, default=detector.TrainConfig.epochs)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)

    p = add("score-baseline", cmd_score_baseline, "score audio with a trained reference detector")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--use", choices=("auto", "original", "recorded"), default="auto")
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "EER / accuracy / per-attack report from score CSVs")
    p.add_argument("--scores", nargs="+", required=True, help="one CSV per independent trial")
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("correlate", cmd_correlate, "correlate per-setup accuracy with MOS / PESQ")
    p.add_argument("--report", required=True)
    p.add_argument("--mos", help="CSV uid,mos")
    p.add_argument("--listeners", help="raw listener CSV uid,listener,score (averaged to MOS)")
    p.add_argument("--pesq", help="CSV uid,pesq")
    p.add_argument("--out-dir", required=True)

    p = add("synth-corpus", cmd_synth_corpus, "write a synthetic two-class corpus and RIR bank")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--rirs", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.subcommands = subparsers
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` act as defaults for optional flags."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if not a.startswith("-")), None)
    if known.config and command in parser.subcommands:
        config = json.loads(Path(known.config).read_text())
        parser.subcommands[command].set_defaults(**{k.replace("-", "_"): v for k, v in config.items()})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=str(args.log_level).upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AirgapError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
