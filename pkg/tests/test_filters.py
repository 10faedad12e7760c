from __future__ import annotations

import math

import numpy as np
import pytest

from wecs.filters import (
    SUPPORTED_BASES,
    UnknownBasisError,
    build_filter_bank,
    filter_origin,
    qmf_highpass,
    qmf_violations,
)

LENGTHS = {"haar": 2, "db2": 4, "db4": 8, "sym2": 4, "sym4": 8, "sym8": 16, "coif4": 24}


def test_supported_bases():
    assert set(SUPPORTED_BASES) == set(LENGTHS)


@pytest.mark.parametrize("name", SUPPORTED_BASES)
def test_bank_shape_and_orthonormality(name):
    bank = build_filter_bank(name)
    assert bank.length == LENGTHS[name]
    h, g = bank.lowpass, bank.highpass
    assert math.isclose(h.sum(), math.sqrt(2.0), abs_tol=1e-12)
    assert abs(g.sum()) < 1e-12
    assert math.isclose(np.dot(h, h), 1.0, abs_tol=1e-12)
    assert math.isclose(np.dot(g, g), 1.0, abs_tol=1e-12)
    L = bank.length
    for s in range(0, L // 2):
        # h and g are orthogonal at every even shift, and each is orthogonal to
        # its own nonzero even shifts
        cross = sum(h[k] * g[k + 2 * s] for k in range(L - 2 * s))
        assert abs(cross) < 1e-12
        if s:
            assert abs(sum(h[k] * h[k + 2 * s] for k in range(L - 2 * s))) < 1e-10


def test_haar_and_db2_values():
    r2 = math.sqrt(2.0)
    assert np.allclose(build_filter_bank("haar").lowpass, [1 / r2, 1 / r2], atol=1e-15)
    s3 = math.sqrt(3.0)
    db2 = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * r2)
    assert np.allclose(build_filter_bank("db2").lowpass, db2, atol=1e-15)


def test_db2_and_sym2_coincide():
    assert np.allclose(build_filter_bank("db2").lowpass, build_filter_bank("sym2").lowpass, atol=1e-15)


@pytest.mark.parametrize("name,moments", [("db2", 2), ("db4", 4), ("sym4", 4), ("sym8", 8)])
def test_vanishing_moments(name, moments):
    g = build_filter_bank(name).highpass
    k = np.arange(len(g), dtype=np.float64)
    for p in range(moments):
        scale = np.sum(np.abs(g) * k**p)
        assert abs(np.sum(g * k**p)) < 1e-9 * max(scale, 1.0)


def test_qmf_rule():
    h = np.array([1.0, 2.0, 3.0, 4.0])
    assert qmf_highpass(h).tolist() == [4.0, -3.0, 2.0, -1.0]


def test_origins():
    got = {name: build_filter_bank(name).origin for name in SUPPORTED_BASES}
    assert got == {"haar": 0, "db2": 0, "db4": 1, "sym2": 0, "sym4": 4, "sym8": 8, "coif4": 8}
    assert filter_origin(np.array([0.0, 0.0, 1.0, 1.0])) == 2


def test_violations_detect_broken_filter():
    v = qmf_violations(np.array([0.7, 0.7]))
    assert v["norm"] > 1e-3 and v["sum"] > 1e-3


def test_name_is_case_insensitive():
    assert build_filter_bank("DB2").name == "db2"


def test_unknown_basis():
    with pytest.raises(UnknownBasisError, match="supported"):
        build_filter_bank("db3")


def test_bank_arrays_are_read_only():
    bank = build_filter_bank("db4")
    with pytest.raises(ValueError):
        bank.lowpass[0] = 0.0
