"""End-to-end command tests, run in process through main(argv)."""

import json

import numpy as np
import pytest

from conftest import TONE_CLASSES, tone_arrays, write_rscd
from dlnet.cli import main
from dlnet.trainloop import load_checkpoint


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def trained(tone_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "vgg.pt"
    rc = run(["train", "--arch", "vgg", "--data", str(tone_corpus),
              "--out", str(out), "--pairs", "3", "--width", "16",
              "--epochs", "8", "--patience", "8", "--batch", "64",
              "--seed", "0", "--no-amp"])
    assert rc == 0
    return out


def test_train_writes_checkpoint_and_echo(trained):
    assert trained.exists()
    echo = json.loads(
        (trained.parent / (trained.name + ".json")).read_text())
    assert echo["format"] == "dlnet-checkpoint"
    assert echo["classes"] == list(TONE_CLASSES)
    assert echo["split"]["fractions"] == [0.7, 0.1, 0.2]
    assert echo["history"]
    model, meta = load_checkpoint(trained)
    assert model.spec.kind == "vgg"
    assert meta["config_hash"] == "00112233445566aa"


def test_eval_writes_curve_confusion_meta(trained, tone_corpus, tmp_path):
    prefix = tmp_path / "scores"
    rc = run(["eval", "--ckpt", str(trained), "--data", str(tone_corpus),
              "--out-prefix", str(prefix)])
    assert rc == 0
    curve = (tmp_path / "scores.curve.csv").read_text().strip().split("\n")
    assert curve[0] == "snr_db,n,accuracy"
    rows = [line.split(",") for line in curve[1:]]
    assert [r[0] for r in rows] == ["0", "10", "20"]
    conf = (tmp_path / "scores.confusion.csv").read_text().strip().split("\n")
    assert conf[0] == "," + ",".join(TONE_CLASSES)
    assert len(conf) == 1 + len(TONE_CLASSES)
    meta = json.loads((tmp_path / "scores.meta.json").read_text())
    assert meta["partition"] == "test"
    assert meta["accuracy"] >= 0.7
    assert meta["n"] == sum(int(r[1]) for r in rows)


def test_eval_partition_all_covers_whole_corpus(trained, tone_corpus,
                                                tmp_path):
    prefix = tmp_path / "all"
    rc = run(["eval", "--ckpt", str(trained), "--data", str(tone_corpus),
              "--out-prefix", str(prefix), "--partition", "all"])
    assert rc == 0
    meta = json.loads((tmp_path / "all.meta.json").read_text())
    assert meta["n"] == 360


def test_eval_rejects_dataset_with_other_hash(trained, tmp_path):
    iq, labels, snrs = tone_arrays(n=36, length=64)
    other = write_rscd(tmp_path / "other.rscd", iq, labels, snrs,
                       TONE_CLASSES, config_hash="deadbeefdeadbeef")
    rc = run(["eval", "--ckpt", str(trained), "--data", str(other),
              "--out-prefix", str(tmp_path / "x")])
    assert rc == 3


def test_eval_rejects_mismatched_classes(trained, tmp_path):
    iq, labels, snrs = tone_arrays(n=36, length=64)
    other = write_rscd(tmp_path / "named.rscd", iq, labels, snrs,
                       ("one", "two", "three"), config_hash=None)
    rc = run(["eval", "--ckpt", str(trained), "--data", str(other),
              "--out-prefix", str(tmp_path / "x")])
    assert rc == 3


def test_eval_missing_data_file(trained, tmp_path):
    rc = run(["eval", "--ckpt", str(trained),
              "--data", str(tmp_path / "absent.rscd"),
              "--out-prefix", str(tmp_path / "x")])
    assert rc == 3


def test_train_rejects_empty_train_fraction(tone_corpus, tmp_path):
    rc = run(["train", "--arch", "vgg", "--data", str(tone_corpus),
              "--out", str(tmp_path / "m.pt"), "--pairs", "3",
              "--val-frac", "0.6", "--test-frac", "0.5"])
    assert rc == 2


def test_train_rejects_undivisible_length(tone_corpus, tmp_path):
    # seven halvings do not fit a 64-sample example
    rc = run(["train", "--arch", "vgg", "--data", str(tone_corpus),
              "--out", str(tmp_path / "m.pt"), "--pairs", "7"])
    assert rc == 2


def test_transfer_improves_and_saves(trained, tone_corpus_remapped,
                                     tmp_path, capsys):
    out = tmp_path / "tuned.pt"
    rc = run(["transfer", "--ckpt", str(trained),
              "--data", str(tone_corpus_remapped), "--out", str(out),
              "--epochs", "10", "--patience", "10", "--batch", "64",
              "--seed", "1", "--no-amp"])
    assert rc == 0
    printed = capsys.readouterr().out
    line = next(l for l in printed.split("\n")
                if l.startswith("frozen accuracy"))
    frozen = float(line.split()[2])
    tuned = float(line.split()[5])
    assert tuned >= frozen + 0.3
    model, meta = load_checkpoint(out)
    assert meta["config_hash"] == "ffeeddccbbaa9988"
    assert meta["history"]


def test_transfer_zero_epochs_matches_frozen(trained, tone_corpus_remapped,
                                             tmp_path, capsys):
    out = tmp_path / "asis.pt"
    rc = run(["transfer", "--ckpt", str(trained),
              "--data", str(tone_corpus_remapped), "--out", str(out),
              "--epochs", "0", "--no-amp"])
    assert rc == 0
    line = next(l for l in capsys.readouterr().out.split("\n")
                if l.startswith("frozen accuracy"))
    frozen = float(line.split()[2])
    tuned = float(line.split()[5])
    assert tuned == pytest.approx(frozen)
    assert "(0 epochs)" in line
