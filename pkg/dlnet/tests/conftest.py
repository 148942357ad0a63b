"""Shared fixtures: synthetic datasets written byte for byte in the
container format, so reader tests depend only on the documented layout and
trainer tests get a corpus a small network can actually learn."""

import json
import struct
from pathlib import Path

import numpy as np
import pytest

MAGIC = b"RSCD"
SENTINEL = 0x52534344
TONE_CLASSES = ("low", "mid", "high")


def write_rscd(path, iq, labels, snrs, classes, params=None,
               config_hash="00112233445566aa", write_manifest=True,
               manifest_extra=None):
    """Serialize (n, 2, length) float32 I/Q into a dataset file.

    Follows the documented container layout: 24-byte header, 34-byte record
    prefixes with interleaved I/Q samples, u32 end sentinel, JSON manifest
    beside the binary.
    """
    iq = np.asarray(iq, dtype=np.float32)
    n, _, length = iq.shape
    if params is None:
        params = np.zeros((n, 7), dtype=np.float32)
    blob = [struct.pack("<4sIQII", MAGIC, 1, n, length, len(classes))]
    for i in range(n):
        blob.append(struct.pack("<Hf", int(labels[i]), float(snrs[i])))
        blob.append(np.asarray(params[i], dtype=np.float32).tobytes())
        inter = np.empty(2 * length, dtype=np.float32)
        inter[0::2] = iq[i, 0]
        inter[1::2] = iq[i, 1]
        blob.append(inter.tobytes())
    blob.append(struct.pack("<I", SENTINEL))
    path = Path(path)
    path.write_bytes(b"".join(blob))
    if write_manifest:
        doc = {"format": "modrec-dataset", "n_examples": n,
               "example_len": length, "classes": list(classes),
               "config_hash": config_hash}
        if manifest_extra:
            doc.update(manifest_extra)
        Path(str(path) + ".json").write_text(json.dumps(doc))
    return path


def tone_arrays(n=360, length=64, k=3, noise=0.1, seed=0,
                snr_grid=(0.0, 10.0, 20.0), label_map=None):
    """Complex tones at k distinct frequencies plus white noise.

    Classes are separable by frequency alone, so a few epochs of a small
    network reach high accuracy. `label_map` relabels tone c as
    label_map[c], which builds target domains where the frequency-to-class
    assignment changed but the signal family did not.
    """
    rng = np.random.default_rng(seed)
    tones = np.arange(n) % k
    labels = (np.asarray(label_map, dtype=np.int64)[tones]
              if label_map is not None else tones.astype(np.int64))
    snrs = np.array([snr_grid[(i // k) % len(snr_grid)] for i in range(n)],
                    dtype=np.float32)
    t = np.arange(length)
    iq = np.empty((n, 2, length), dtype=np.float32)
    for i in range(n):
        freq = (tones[i] + 1) / (2.0 * (k + 1))
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = np.exp(1j * (2.0 * np.pi * freq * t + phase))
        wave = wave + noise * (rng.standard_normal(length)
                               + 1j * rng.standard_normal(length))
        iq[i, 0] = wave.real
        iq[i, 1] = wave.imag
    return iq, labels, snrs


@pytest.fixture(scope="session")
def tone_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("tones")
    iq, labels, snrs = tone_arrays()
    return write_rscd(root / "tones.rscd", iq, labels, snrs, TONE_CLASSES)


@pytest.fixture(scope="session")
def tone_corpus_remapped(tmp_path_factory):
    """Same tone family, different frequency-to-class assignment and more
    noise; the natural target domain for transfer tests."""
    root = tmp_path_factory.mktemp("tones_remapped")
    iq, labels, snrs = tone_arrays(noise=0.25, seed=1, label_map=(1, 2, 0))
    return write_rscd(root / "tones_remapped.rscd", iq, labels, snrs,
                      TONE_CLASSES, config_hash="ffeeddccbbaa9988")
