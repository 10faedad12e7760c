from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from wecs.fileio import (
    FormatError,
    ManifestEntry,
    StackManifest,
    encode_csv,
    encode_wecs1,
    load_manifest,
    read_image,
    read_pgm_scale,
    write_matrix,
)


def test_wecs1_known_bytes(tmp_path):
    p = tmp_path / "m.wecs"
    p.write_bytes(b"WECS1" + struct.pack("<II", 2, 2) + b"f64" + struct.pack("<4d", 1, 2, 3, 4))
    assert read_image(p).tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert encode_wecs1(np.array([[1.0, 2.0], [3.0, 4.0]])) == p.read_bytes()


@pytest.mark.parametrize("dtype", ["f64", "f32"])
def test_wecs1_round_trip(tmp_path, dtype):
    m = np.random.default_rng(0).normal(size=(64, 64))
    if dtype == "f32":
        m = m.astype(np.float32).astype(np.float64)
    write_matrix(m, tmp_path / "a.wecs", "wecs1", dtype)
    back = read_image(tmp_path / "a.wecs")
    assert back.dtype == np.float64 and np.array_equal(back, m)


def test_csv_identity_and_round_trip(tmp_path):
    assert encode_csv(np.eye(2)) == b"1,0\n0,1"
    m = np.random.default_rng(1).normal(size=(64, 64))
    write_matrix(m, tmp_path / "a.csv", "csv")
    assert np.array_equal(read_image(tmp_path / "a.csv"), m)


def test_csv_header_and_errors(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b\n1,2\n3,4\n")
    assert read_image(p).tolist() == [[1, 2], [3, 4]]
    p.write_text("1,2\n3\n")
    with pytest.raises(FormatError, match="line 2: ragged"):
        read_image(p)
    p.write_text("1,2\n3,nan\n")
    with pytest.raises(FormatError, match="line 2: non-finite"):
        read_image(p)
    p.write_text("1,2\n3,x\n")
    with pytest.raises(FormatError, match="line 2: non-numeric"):
        read_image(p)


def test_pgm_zero_matrix(tmp_path):
    write_matrix(np.zeros((3, 4)), tmp_path / "z.pgm", "pgm")
    raw = (tmp_path / "z.pgm").read_bytes()
    assert raw.startswith(b"P5\n4 3\n65535\n") and set(raw[14:]) == {0}
    assert read_pgm_scale(tmp_path / "z.pgm") == (0.0, 0.0)
    assert (tmp_path / "z.pgm.scale").read_text() == "min 0\nmax 0\nmaxval 65535\n"
    assert np.all(read_image(tmp_path / "z.pgm") == 0)


def test_pgm_8bit_with_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# comment\n3 2\n255\n" + bytes(6))
    assert read_image(p).shape == (2, 3) and not read_image(p).any()


def test_pgm_rescale_round_trip(tmp_path):
    m = np.random.default_rng(2).uniform(-3, 5, size=(20, 30))
    write_matrix(m, tmp_path / "r.pgm", "pgm")
    back = read_image(tmp_path / "r.pgm")
    assert np.max(np.abs(back - m)) <= 8.0 / 65535
    raw = read_image(tmp_path / "r.pgm", apply_scale=False)
    assert raw.min() == 0 and raw.max() == 65535


def test_deterministic_bytes(tmp_path):
    m = np.random.default_rng(3).normal(size=(5, 5))
    for fmt in ("wecs1", "pgm", "csv"):
        write_matrix(m, tmp_path / f"a.{fmt}", fmt)
        write_matrix(m, tmp_path / f"b.{fmt}", fmt)
        assert (tmp_path / f"a.{fmt}").read_bytes() == (tmp_path / f"b.{fmt}").read_bytes()


def test_binary_errors(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"WECS1" + struct.pack("<II", 2, 2) + b"f64" + bytes(8))
    with pytest.raises(FormatError, match="byte offset 16"):
        read_image(p)
    p.write_bytes(b"WECS1" + struct.pack("<II", 1, 1) + b"i32" + bytes(4))
    with pytest.raises(FormatError, match="dtype tag"):
        read_image(p)
    p.write_bytes(b"WECS1\x01")
    with pytest.raises(FormatError, match="truncated"):
        read_image(p)
    p.write_bytes(b"WECS1" + struct.pack("<II", 1, 1) + b"f64" + struct.pack("<d", np.inf))
    with pytest.raises(FormatError, match="non-finite"):
        read_image(p)
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(FormatError, match="magic"):
        read_image(p)
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(FormatError, match="truncated"):
        read_image(p)


def test_write_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_matrix(np.eye(2), blocker / "sub" / "m.wecs")


def _manifest(tmp_path, entries):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"format": "wecs-manifest/1", "entries": entries}))
    return p


def test_manifest_load(tmp_path):
    for i in range(3):
        write_matrix(np.full((2, 2), float(i)), tmp_path / f"{i}.wecs")
    p = _manifest(
        tmp_path,
        [{"path": f"{i}.wecs", "timestamp": f"2020-01-0{i + 1}T00:00:00", "channel": "VV"} for i in range(3)],
    )
    man = load_manifest(p)
    assert len(man) == 3 and man.timestamps()[0] == "2020-01-01T00:00:00"
    assert [img[0, 0] for img in man.iter_images()] == [0.0, 1.0, 2.0]
    again = StackManifest(man.entries, tmp_path).to_json()
    assert json.loads(again)["entries"][1] == {"path": "1.wecs", "timestamp": "2020-01-02T00:00:00", "channel": "VV"}


def test_manifest_errors(tmp_path):
    write_matrix(np.eye(2), tmp_path / "a.wecs")
    write_matrix(np.eye(2), tmp_path / "b.wecs")
    shuffled = [
        {"path": "b.wecs", "timestamp": "2020-02-01"},
        {"path": "a.wecs", "timestamp": "2020-01-01"},
    ]
    with pytest.raises(FormatError, match="strictly increasing"):
        load_manifest(_manifest(tmp_path, shuffled))
    with pytest.raises(FormatError, match="does not exist"):
        load_manifest(_manifest(tmp_path, [{"path": "missing.wecs"}]))
    with pytest.raises(FormatError, match="no entries"):
        load_manifest(_manifest(tmp_path, []))
    with pytest.raises(FormatError, match="all entries or none"):
        load_manifest(_manifest(tmp_path, [{"path": "a.wecs", "timestamp": "2020-01-01"}, {"path": "b.wecs"}]))
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"format": "other/2", "entries": [{"path": "a.wecs"}]}))
    with pytest.raises(FormatError, match="unsupported"):
        load_manifest(p)
    p.write_text("{not json")
    with pytest.raises(FormatError, match="invalid JSON"):
        load_manifest(p)


def test_manifest_entry_defaults():
    e = ManifestEntry("x.wecs")
    assert e.timestamp is None and e.channel is None
