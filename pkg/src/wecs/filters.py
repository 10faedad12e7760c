"""Orthonormal wavelet filter banks.

Low-pass scaling filters are stored as literal constants (standard published
orthonormal coefficients, in "scaling filter" orientation so that analysis is a
plain correlation). High-pass filters are derived with the alternating-sign
quadrature mirror rule ``g[k] = (-1)**k * h[L-1-k]``.

Published symlet tables are only good to about 1e-12, so the sym entries were
refined by Newton iteration (at high precision) on the orthonormality and
vanishing-moment equations they satisfy; the change is below 1e-11 per tap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_LOWPASS: dict[str, tuple[float, ...]] = {
    "haar": (0.7071067811865476, 0.7071067811865476),
    "db2": (
        0.48296291314453416,
        0.8365163037378079,
        0.2241438680420134,
        -0.12940952255126037,
    ),
    "db4": (
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.027983769416859854,
        -0.18703481171909309,
        0.030841381835560764,
        0.0328830116668852,
        -0.010597401785069032,
    ),
    "sym2": (
        0.48296291314453416,
        0.8365163037378079,
        0.2241438680420134,
        -0.12940952255126037,
    ),
    "sym4": (
        0.03222310060405406,
        -0.012603967262034516,
        -0.09921954357662964,
        0.29785779560531617,
        0.8037387518051333,
        0.4976186676327669,
        -0.029635527646008054,
        -0.07576571478950322,
    ),
    "sym8": (
        0.001889950332773465,
        -0.0003029205147315696,
        -0.014952258337059793,
        0.0038087520139143687,
        0.0491371796737173,
        -0.027219029917142232,
        -0.051945838107796745,
        0.3644418948363743,
        0.7771857516996549,
        0.4813596512588593,
        -0.0612733590679497,
        -0.14329423835124785,
        0.007607487325024407,
        0.031695087811525254,
        -0.0005421323318121716,
        -0.0033824159510081773,
    ),
    "coif4": (
        0.000892313902537003,
        -0.001629492425226786,
        -0.007346167936268051,
        0.01606894713157503,
        0.02668230466960483,
        -0.08126671024919373,
        -0.05607731960356926,
        0.41530842700068227,
        0.7822389344242826,
        0.43438603311435653,
        -0.06662747236681717,
        -0.09622042453595264,
        0.03933442260558915,
        0.02508225333794961,
        -0.015211728187697211,
        -0.0056582838001308835,
        0.0037514346971460866,
        0.0012665610789256603,
        -0.0005890202246332165,
        -0.0002599743371222568,
        6.233885431278719e-05,
        3.1229861599195265e-05,
        -3.259647940030751e-06,
        -1.7849909144933469e-06,
    ),
}

SUPPORTED_BASES: tuple[str, ...] = tuple(_LOWPASS)


class UnknownBasisError(ValueError):
    pass


@dataclass(frozen=True)
class FilterBank:
    name: str
    lowpass: np.ndarray
    highpass: np.ndarray
    origin: int = 0

    @property
    def length(self) -> int:
        return len(self.lowpass)


def qmf_highpass(h: np.ndarray) -> np.ndarray:
    L = len(h)
    return np.array([(-1) ** k * h[L - 1 - k] for k in range(L)], dtype=np.float64)


def filter_origin(h: np.ndarray) -> int:
    """Tap index aligned with the first sample of each analysed pair.

    Rounded energy centroid of ``h`` minus one half, so that coefficient ``n``
    sits over samples ``(2n, 2n+1)`` regardless of the filter's phase.
    """
    k = np.arange(len(h))
    return int(round(float(np.sum(k * h * h) / np.sum(h * h)) - 0.5))


def qmf_violations(h: np.ndarray) -> dict[str, float]:
    """Absolute deviations of ``h`` from the orthonormal low-pass conditions."""
    h = np.asarray(h, dtype=np.float64)
    L = len(h)
    shifts = [
        abs(math.fsum(h[k] * h[k + 2 * s] for k in range(L - 2 * s)))
        for s in range(1, (L + 1) // 2)
    ]
    return {
        "sum": abs(math.fsum(h) - math.sqrt(2.0)),
        "norm": abs(math.fsum(h * h) - 1.0),
        "shift": max(shifts, default=0.0),
    }


def _check(name: str, h: np.ndarray) -> None:
    v = qmf_violations(h)
    if max(v.values()) > 1e-14:
        raise RuntimeError(f"filter {name!r} fails orthonormality checks: {v}")


def build_filter_bank(name: str) -> FilterBank:
    key = name.lower()
    if key not in _LOWPASS:
        raise UnknownBasisError(
            f"unknown wavelet basis {name!r}; supported: {', '.join(SUPPORTED_BASES)}"
        )
    h = np.array(_LOWPASS[key], dtype=np.float64)
    h.setflags(write=False)
    g = qmf_highpass(h)
    g.setflags(write=False)
    return FilterBank(key, h, g, filter_origin(h))


# transcription errors in the tables above should fail at import, not mid-analysis
for _name, _h in _LOWPASS.items():
    _check(_name, np.array(_h))
del _name, _h
