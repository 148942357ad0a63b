"""Reader tests against byte-level fixtures built in conftest."""

import json
import struct

import numpy as np
import pytest

from conftest import SENTINEL, TONE_CLASSES, tone_arrays, write_rscd
from dlnet.errors import ConfigError, DataError
from dlnet.rscd import load_arrays, open_rscd, split_indices


@pytest.fixture()
def small(tmp_path):
    iq, labels, snrs = tone_arrays(n=24, length=16)
    path = write_rscd(tmp_path / "small.rscd", iq, labels, snrs, TONE_CLASSES)
    return path, iq, labels, snrs


def test_open_reads_header_and_records(small):
    path, iq, labels, snrs = small
    ds = open_rscd(path)
    assert ds.n_examples == 24
    assert ds.example_len == 16
    assert ds.n_classes == 3
    assert ds.classes == TONE_CLASSES
    assert ds.config_hash == "00112233445566aa"
    np.testing.assert_array_equal(ds.labels, labels.astype(np.uint16))
    np.testing.assert_array_equal(ds.snrs, snrs)


def test_iq_deinterleaves_to_planar(small):
    path, iq, labels, snrs = small
    ds = open_rscd(path)
    got = ds.iq(slice(None))
    assert got.shape == (24, 2, 16)
    np.testing.assert_array_equal(got, iq)
    # spot-check the byte order directly: record 3, sample 5
    rec_size = 34 + 8 * 16
    base = 24 + 3 * rec_size + 34 + 5 * 8
    raw = path.read_bytes()
    i_val, q_val = struct.unpack_from("<ff", raw, base)
    assert got[3, 0, 5] == np.float32(i_val)
    assert got[3, 1, 5] == np.float32(q_val)


def test_load_arrays_normalizes_to_unit_power(small):
    path, iq, labels, snrs = small
    x, y, s, ds = load_arrays(path)
    assert x.dtype == np.float32 and y.dtype == np.int64
    power = np.mean(np.square(x), axis=(1, 2)) * 2.0
    np.testing.assert_allclose(power, 1.0, rtol=1e-5)
    np.testing.assert_array_equal(y, labels)
    x_raw, _, _, _ = load_arrays(path, normalize=False)
    np.testing.assert_array_equal(x_raw, iq)


def test_load_arrays_rejects_zero_power(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    iq[4] = 0.0
    path = write_rscd(tmp_path / "z.rscd", iq, labels, snrs, TONE_CLASSES)
    with pytest.raises(DataError, match="zero-power"):
        load_arrays(path)


def test_missing_manifest_falls_back_to_numeric_classes(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    path = write_rscd(tmp_path / "bare.rscd", iq, labels, snrs, TONE_CLASSES,
                      write_manifest=False)
    ds = open_rscd(path)
    assert ds.manifest is None
    assert ds.classes == ("0", "1", "2")
    assert ds.config_hash is None


def test_bad_magic(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    path = write_rscd(tmp_path / "m.rscd", iq, labels, snrs, TONE_CLASSES)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(DataError, match="magic"):
        open_rscd(path)


def test_bad_version(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    path = write_rscd(tmp_path / "v.rscd", iq, labels, snrs, TONE_CLASSES)
    blob = bytearray(path.read_bytes())
    struct.pack_into("<I", blob, 4, 9)
    path.write_bytes(bytes(blob))
    with pytest.raises(DataError, match="version"):
        open_rscd(path)


def test_truncated_file(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    path = write_rscd(tmp_path / "t.rscd", iq, labels, snrs, TONE_CLASSES)
    blob = path.read_bytes()
    path.write_bytes(blob[:-10])
    with pytest.raises(DataError, match="size"):
        open_rscd(path)


def test_tiny_file(tmp_path):
    path = tmp_path / "tiny.rscd"
    path.write_bytes(b"RSCD")
    with pytest.raises(DataError, match="too small"):
        open_rscd(path)


def test_missing_sentinel(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    path = write_rscd(tmp_path / "s.rscd", iq, labels, snrs, TONE_CLASSES)
    blob = bytearray(path.read_bytes())
    struct.pack_into("<I", blob, len(blob) - 4, SENTINEL + 1)
    path.write_bytes(bytes(blob))
    with pytest.raises(DataError, match="sentinel"):
        open_rscd(path)


def test_label_beyond_declared_classes(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    labels = labels.copy()
    labels[2] = 7
    path = write_rscd(tmp_path / "l.rscd", iq, labels, snrs, TONE_CLASSES)
    with pytest.raises(DataError, match="class count"):
        open_rscd(path)


def test_manifest_disagreeing_with_header(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    path = write_rscd(tmp_path / "d.rscd", iq, labels, snrs, TONE_CLASSES,
                      manifest_extra={"n_examples": 7})
    with pytest.raises(DataError, match="disagrees"):
        open_rscd(path)


def test_manifest_with_wrong_format_tag(tmp_path):
    iq, labels, snrs = tone_arrays(n=6, length=16)
    path = write_rscd(tmp_path / "f.rscd", iq, labels, snrs, TONE_CLASSES)
    side = json.loads((tmp_path / "f.rscd.json").read_text())
    side["format"] = "something-else"
    (tmp_path / "f.rscd.json").write_text(json.dumps(side))
    with pytest.raises(DataError, match="manifest"):
        open_rscd(path)


# ---------------------------------------------------------------------------
# splits


def test_split_indices_partitions_everything():
    _, labels, snrs = tone_arrays(n=300, length=16)
    fractions = (0.7, 0.1, 0.2)
    train, val, test = split_indices(labels, snrs, fractions, seed=3)
    allidx = np.concatenate([train, val, test])
    assert np.array_equal(np.sort(allidx), np.arange(300))
    # quotas are rounded per cell, so each part sits within one example
    # per cell of its exact share (9 cells here)
    for part, frac in zip((train, val, test), fractions):
        assert abs(part.size - 300 * frac) <= 9
        assert np.array_equal(part, np.sort(part))


def test_split_indices_covers_cells_when_feasible():
    _, labels, snrs = tone_arrays(n=360, length=16)
    train, val, test = split_indices(labels, snrs, (0.6, 0.2, 0.2), seed=0)
    # 9 cells of 40 members each; every part sees every cell
    for part in (train, val, test):
        cells = {(int(l), float(s)) for l, s in zip(labels[part], snrs[part])}
        assert len(cells) == 9


def test_split_indices_deterministic_and_seeded():
    _, labels, snrs = tone_arrays(n=300, length=16)
    a = split_indices(labels, snrs, seed=5)
    b = split_indices(labels, snrs, seed=5)
    for pa, pb in zip(a, b):
        np.testing.assert_array_equal(pa, pb)
    c = split_indices(labels, snrs, seed=6)
    assert any(not np.array_equal(pa, pc) for pa, pc in zip(a, c))


def test_split_indices_validation():
    _, labels, snrs = tone_arrays(n=60, length=16)
    with pytest.raises(ConfigError, match="sum to 1"):
        split_indices(labels, snrs, (0.5, 0.2))
    with pytest.raises(ConfigError, match="positive"):
        split_indices(labels, snrs, (1.2, -0.2))
    with pytest.raises(ConfigError, match="aligned"):
        split_indices(labels, snrs[:-1])
    with pytest.raises(ConfigError, match="empty"):
        split_indices(labels[:2], snrs[:2], (0.98, 0.01, 0.01))
