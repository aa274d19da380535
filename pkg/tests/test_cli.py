import csv
import json
from pathlib import Path

import numpy as np
import pytest

from oracles import pearson_definition

from airgap.audio import AudioBuffer, write_wav
from airgap.cli import main
from airgap.manifest import ARCHITECTURES, BONA_FIDE, LANGUAGES, SPOOF, read_manifest
from airgap.metrics import compute_eer, read_scores
from airgap.report import EvalReport
from airgap.replay import Rir, RirBank, save_rir_bank
from airgap.synthetic import make_item, synthetic_rir


def _touch_pools(root, per_cell=10, skip=None):
    """Empty placeholder files plus a pool definition; enough for build-manifest."""
    spec = []
    for lang in LANGUAGES:
        d = root / "bona" / lang
        d.mkdir(parents=True)
        for i in range(per_cell):
            (d / f"{i}.wav").touch()
        spec.append({"label": BONA_FIDE, "language": lang, "glob": f"bona/{lang}/*.wav"})
        for arch in ARCHITECTURES:
            d = root / "spoof" / arch / lang
            d.mkdir(parents=True)
            count = 2 if (lang, arch) == skip else per_cell
            for i in range(count):
                (d / f"{i}.wav").touch()
            spec.append({"label": SPOOF, "language": lang, "architecture": arch, "glob": f"spoof/{arch}/{lang}/*.wav"})
    (root / "pools.json").write_text(json.dumps(spec))


def _uids(root, count):
    (root / "uids.txt").write_text("\n".join(f"id_{i}" for i in range(count)) + "\n")


def _build(root, n, count):
    return main(["build-manifest", "--root", str(root), "--pools", str(root / "pools.json"),
                 "--uids", str(root / "uids.txt"), "--n", str(n), "--seed", "4", "--out", str(root / "m.jsonl")])


def test_build_manifest_full_scale(tmp_path, capsys):
    _touch_pools(tmp_path)
    _uids(tmp_path, 109)
    assert _build(tmp_path, 10, 109) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "52320 entries"
    assert "seed=4" in out
    assert len(read_manifest(tmp_path / "m.jsonl")) == 52320


def test_build_manifest_n0(tmp_path, capsys):
    _touch_pools(tmp_path, per_cell=1)
    _uids(tmp_path, 3)
    assert _build(tmp_path, 0, 3) == 0
    assert capsys.readouterr().out.splitlines()[0] == "0 entries"


def test_build_manifest_shortfall(tmp_path, capsys):
    _touch_pools(tmp_path, per_cell=5, skip=("it", "bark"))
    _uids(tmp_path, 2)
    assert _build(tmp_path, 5, 2) == 2
    err = capsys.readouterr().err
    assert "it" in err and "bark" in err


def test_missing_input_exits_2(tmp_path, capsys):
    assert main(["evaluate", "--scores", str(tmp_path / "none.csv"), "--manifest", str(tmp_path / "m.jsonl"),
                 "--out", str(tmp_path / "r.json")]) == 2


@pytest.fixture
def corpus(tmp_path, capsys):
    """Small synthetic corpus with an RIR bank, via the CLI itself."""
    assert main(["synth-corpus", "--out-dir", str(tmp_path), "--per-class", "24", "--rirs", "3", "--seed", "5"]) == 0
    capsys.readouterr()
    return tmp_path


def _delta_bank(root, uids):
    for uid in uids:
        (root / uid).mkdir(parents=True)
        write_wav(root / uid / "RIR.wav", AudioBuffer(np.array([1.0]), 16000))


def _files(directory, suffix):
    return sorted(p for p in Path(directory).rglob(f"*{suffix}"))


def test_simulate_delta_bank_is_byte_identical(corpus, capsys):
    _delta_bank(corpus / "delta", ["d0"])
    args = ["simulate", "--root", str(corpus), "--manifest", str(corpus / "corpus.jsonl"), "--rir-dir",
            str(corpus / "delta"), "--rir-policy", "random", "--out-dir", str(corpus / "sim"),
            "--out-manifest", str(corpus / "sim.jsonl")]
    assert main(args) == 0
    m = read_manifest(corpus / "sim.jsonl")
    assert all(e.recorded_file for e in m)
    for e in m:
        assert (corpus / e.recorded_file).read_bytes() == (corpus / e.original_file).read_bytes()


def test_simulate_rerun_is_identical(corpus, capsys):
    common = ["simulate", "--root", str(corpus), "--manifest", str(corpus / "corpus.jsonl"), "--rir-dir",
              str(corpus / "rirs"), "--rir-policy", "random", "--noise-kind", "pink", "--snr", "20", "30",
              "--seed", "11"]
    assert main(common + ["--out-dir", str(corpus / "a"), "--out-manifest", str(corpus / "a.jsonl")]) == 0
    assert main(common + ["--out-dir", str(corpus / "b"), "--out-manifest", str(corpus / "b.jsonl"),
                          "--workers", "4"]) == 0
    fa, fb = _files(corpus / "a", ".wav"), _files(corpus / "b", ".wav")
    assert len(fa) == len(fb) > 0
    for x, y in zip(fa, fb):
        assert x.relative_to(corpus / "a") == y.relative_to(corpus / "b")
        assert x.read_bytes() == y.read_bytes()
    run = json.loads((corpus / "a" / "run.json").read_text())
    assert run["seed"] == 11


def test_simulate_480_entries_one_rir(tmp_path, capsys):
    # 1 uid, n=10 gives 480 entries; the real RIR bank has that single uid
    _touch_pools(tmp_path, per_cell=10)
    for i, wav in enumerate(sorted(tmp_path.rglob("*.wav"))):
        write_wav(wav, make_item(SPOOF if "spoof" in wav.parts else BONA_FIDE, 0, i, duration=0.1))
    _uids(tmp_path, 1)
    assert _build(tmp_path, 10, 1) == 0
    impulse = AudioBuffer(synthetic_rir(1, 0), 16000)
    save_rir_bank(RirBank.from_rirs([Rir(impulse, "id_0")]), tmp_path / "rirs")
    assert main(["simulate", "--root", str(tmp_path), "--manifest", str(tmp_path / "m.jsonl"), "--rir-dir",
                 str(tmp_path / "rirs"), "--out-dir", str(tmp_path / "sim"), "--out-manifest",
                 str(tmp_path / "sim.jsonl")]) == 0
    m = read_manifest(tmp_path / "sim.jsonl")
    assert len(m) == 480
    assert all(e.recorded_file for e in m)


def _mix(corpus, lo, hi, out):
    return main(["mix-noise", "--root", str(corpus), "--manifest", str(corpus / "corpus.jsonl"), "--kind",
                 "gaussian", "--snr", str(lo), str(hi), "--seed", "2", "--out-dir", str(corpus / out),
                 "--out-manifest", str(corpus / f"{out}.jsonl")])


def test_mix_noise_ranges_and_determinism(corpus, capsys):
    assert _mix(corpus, 15, 40, "n1") == 0
    metas = [json.loads(line) for line in (corpus / "n1" / "mix_metadata.jsonl").read_text().splitlines()]
    assert len(metas) == 48
    assert all(14.9 <= m["achieved_snr_db"] <= 40.1 for m in metas)
    assert _mix(corpus, 15, 40, "n2") == 0
    assert (corpus / "n1" / "mix_metadata.jsonl").read_text().replace("n1/", "n2/") == \
        (corpus / "n2" / "mix_metadata.jsonl").read_text()
    assert _mix(corpus, 20, 20, "n3") == 0
    metas = [json.loads(line) for line in (corpus / "n3" / "mix_metadata.jsonl").read_text().splitlines()]
    assert {m["drawn_snr_db"] for m in metas} == {20.0}
    m = read_manifest(corpus / "n3.jsonl")
    assert all(e.extra["drawn_snr_db"] == 20.0 for e in m)


def test_augment_p0_leaves_manifest(corpus, capsys):
    assert main(["augment", "--root", str(corpus), "--manifest", str(corpus / "corpus.jsonl"), "--rir-dir",
                 str(corpus / "rirs"), "--probability", "0", "--out-dir", str(corpus / "aug"),
                 "--out-manifest", str(corpus / "aug.jsonl")]) == 0
    assert read_manifest(corpus / "aug.jsonl").entries == read_manifest(corpus / "corpus.jsonl").entries


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["file_id", "score", "label"])
        w.writerows(rows)


def test_evaluate_perfect_scores(corpus, capsys):
    m = read_manifest(corpus / "corpus.jsonl")
    _write_csv(corpus / "s.csv", [(e.original_file, 0.9 if e.is_spoof else 0.1, "") for e in m])
    assert main(["evaluate", "--scores", str(corpus / "s.csv"), "--manifest", str(corpus / "corpus.jsonl"),
                 "--out", str(corpus / "r.json")]) == 0
    table = capsys.readouterr().out
    report = EvalReport.read(corpus / "r.json")
    assert report.overall["baseline"]["accuracy_pct"] == 100.0
    assert report.overall["baseline"]["eer_pct"] == 0.0
    assert list(report.per_attack["baseline"]) == ["bark", "vits", "xtts_v1.1", "xtts_v2.0", BONA_FIDE]
    for row in ("Bark", "VITS", "XTTS v1.1", "XTTS v2", "bona fide"):
        assert row in table


def test_evaluate_eer_matches_oracle(corpus, capsys):
    m = read_manifest(corpus / "corpus.jsonl")
    rng = np.random.default_rng(0)
    _write_csv(corpus / "s.csv", [(e.original_file, float(rng.random()) + 0.2 * e.is_spoof, e.label) for e in m])
    assert main(["evaluate", "--scores", str(corpus / "s.csv"), "--manifest", str(corpus / "corpus.jsonl"),
                 "--out", str(corpus / "r.json")]) == 0
    report = EvalReport.read(corpus / "r.json")
    assert report.overall["baseline"]["eer_pct"] == pytest.approx(100 * compute_eer(read_scores(corpus / "s.csv")).eer)


def test_evaluate_unjoinable_ids(corpus, capsys):
    _write_csv(corpus / "s.csv", [("ghost.wav", 0.4, "spoof")])
    assert main(["evaluate", "--scores", str(corpus / "s.csv"), "--manifest", str(corpus / "corpus.jsonl"),
                 "--out", str(corpus / "r.json")]) == 2
    assert "ghost.wav" in capsys.readouterr().err


def _report_with_setups(path, accs):
    from airgap.quality import SetupQuality

    rep = EvalReport(0.5, per_setup=[SetupQuality(f"id_{i}", a, num_spoof=10) for i, a in enumerate(accs)])
    rep.write(path)


def test_correlate(tmp_path, capsys):
    rng = np.random.default_rng(1)
    accs = rng.random(30).tolist()
    _report_with_setups(tmp_path / "r.json", accs)
    (tmp_path / "mos.csv").write_text("uid,mos\n" + "".join(f"id_{i},{a * 4 + 1!r}\n" for i, a in enumerate(accs)))
    assert main(["correlate", "--report", str(tmp_path / "r.json"), "--mos", str(tmp_path / "mos.csv"),
                 "--out-dir", str(tmp_path / "c")]) == 0
    corr = json.loads((tmp_path / "c" / "correlations.json").read_text())
    assert corr["acc_vs_mos"] == pytest.approx(1.0, abs=1e-12)
    assert corr["acc_vs_pesq"] is None
    assert (tmp_path / "c" / "scatter.svg").read_text().startswith("<svg")

    pesq = rng.uniform(-0.5, 4.5, 30).tolist()
    (tmp_path / "pesq.csv").write_text("uid,pesq\n" + "".join(f"id_{i},{p!r}\n" for i, p in enumerate(pesq)))
    assert main(["correlate", "--report", str(tmp_path / "r.json"), "--pesq", str(tmp_path / "pesq.csv"),
                 "--out-dir", str(tmp_path / "c2")]) == 0
    corr = json.loads((tmp_path / "c2" / "correlations.json").read_text())
    assert corr["acc_vs_pesq"] == pytest.approx(pearson_definition(accs, pesq), abs=1e-9)
    assert corr["acc_vs_mos"] is None


def test_baseline_pipeline_joins_cleanly(corpus, capsys):
    assert main(["train-baseline", "--root", str(corpus), "--manifest", str(corpus / "corpus.jsonl"),
                 "--epochs", "200", "--out", str(corpus / "model.json")]) == 0
    assert main(["score-baseline", "--root", str(corpus), "--model", str(corpus / "model.json"),
                 "--manifest", str(corpus / "corpus.jsonl"), "--out", str(corpus / "s.csv")]) == 0
    assert main(["evaluate", "--scores", str(corpus / "s.csv"), "--manifest", str(corpus / "corpus.jsonl"),
                 "--out", str(corpus / "r.json")]) == 0
    report = EvalReport.read(corpus / "r.json")
    assert report.overall["baseline"]["accuracy_pct"] > 90.0


def test_config_file_supplies_defaults(tmp_path, capsys):
    _touch_pools(tmp_path, per_cell=2)
    _uids(tmp_path, 2)
    (tmp_path / "cfg.json").write_text(json.dumps({"n": 2, "seed": 9}))
    assert main(["build-manifest", "--config", str(tmp_path / "cfg.json"), "--root", str(tmp_path), "--pools",
                 str(tmp_path / "pools.json"), "--uids", str(tmp_path / "uids.txt"),
                 "--out", str(tmp_path / "m.jsonl")]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "192 entries"
    assert "seed=9" in out
