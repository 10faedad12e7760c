"""Correlation screening of coefficient series against a change signal."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .dwt import upsample_coeff_map
from .series import ChangeSignal, DeviationCube

# quantile grid of the reference threshold table
TABLE_QUANTILES: tuple[float, ...] = (
    0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95,
    0.99, 0.991, 0.992, 0.993, 0.994, 0.995, 0.996, 0.997, 0.998, 0.999,
)


class ScreeningError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationMap:
    kind: str
    values: np.ndarray
    degenerate_mask: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class ThresholdSpec:
    mode: str
    value: float

    def __post_init__(self):
        if self.mode == "absolute":
            if not self.value >= 0:
                raise ScreeningError(f"absolute threshold must be >= 0, got {self.value}")
        elif self.mode == "quantile":
            if not 0 <= self.value < 1:
                raise ScreeningError(f"quantile must lie in [0, 1), got {self.value}")
        else:
            raise ScreeningError(f"unknown threshold mode {self.mode!r}")

    @classmethod
    def quantile(cls, q: float) -> ThresholdSpec:
        return cls("quantile", float(q))

    @classmethod
    def absolute(cls, tau: float) -> ThresholdSpec:
        return cls("absolute", float(tau))


@dataclass(frozen=True)
class SelectionMask:
    indices: np.ndarray
    source: str
    spec: ThresholdSpec | None
    tau: float | None

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.indices))


@dataclass(frozen=True)
class TimeFlags:
    flagged: tuple[int, ...]
    median: float
    mad: float
    k: float

    @property
    def threshold(self) -> float:
        return self.median + self.k * self.mad


def correlation_map(cube: DeviationCube, signal: ChangeSignal) -> CorrelationMap:
    """Pearson correlation of every coefficient's series with the signal.

    Series with zero variance (on either side) get correlation 0 and are
    flagged as degenerate instead of producing NaN.
    """
    if cube.kind != signal.kind:
        raise ScreeningError(f"cube kind {cube.kind!r} does not match signal kind {signal.kind!r}")
    n = len(cube)
    if len(signal) != n:
        raise ScreeningError(f"cube has {n} time points but signal has {len(signal)}")
    if n < 3:
        raise ScreeningError(f"need at least 3 time points to screen, got {n}")
    grid = cube.entries.shape[1:]
    E = cube.entries.reshape(n, -1)
    s = np.asarray(signal.values, dtype=np.float64)
    sc = s - s.mean()
    Ec = E - E.mean(axis=0)
    num = (Ec * sc[:, None]).sum(axis=0)
    den = np.sqrt(np.square(Ec).sum(axis=0)) * np.sqrt(np.square(sc).sum())
    degenerate = np.ptp(E, axis=0) == 0
    if np.ptp(s) == 0:
        degenerate[:] = True
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    r = np.clip(r, -1.0, 1.0)
    return CorrelationMap(cube.kind, r.reshape(grid), degenerate.reshape(grid))


def pixel_resolution(cmap: CorrelationMap, target_dims: tuple[int, int], J: int) -> CorrelationMap:
    """Nearest-neighbour upsampling of a coefficient-grid map to pixel resolution.

    Identical to correlating nearest-upsampled cubes, since every pixel in a
    coefficient's footprint carries the same series.
    """
    values = upsample_coeff_map(cmap.values, target_dims, J, "nearest")
    deg = upsample_coeff_map(cmap.degenerate_mask.astype(np.float64), target_dims, J, "nearest")
    return CorrelationMap(cmap.kind, values, deg > 0)


def quantile_threshold(cmap: CorrelationMap, q: float) -> float:
    vals = np.abs(cmap.values[~cmap.degenerate_mask])
    if vals.size == 0:
        raise ScreeningError("every correlation entry is degenerate; nothing to screen")
    return float(np.quantile(vals, q))


def select_indices(cmap: CorrelationMap, spec: ThresholdSpec) -> SelectionMask:
    """Keep the coefficients with ``|R| > tau`` (strict)."""
    if cmap.degenerate_mask.all():
        raise ScreeningError("every correlation entry is degenerate; nothing to screen")
    if spec.mode == "quantile":
        tau = quantile_threshold(cmap, spec.value)
    else:
        tau = spec.value
    mask = (np.abs(cmap.values) > tau) & ~cmap.degenerate_mask
    return SelectionMask(mask, cmap.kind, spec, tau)


def union_selection(a: SelectionMask, b: SelectionMask) -> SelectionMask:
    if a.indices.shape != b.indices.shape:
        raise ScreeningError(f"mask grids differ: {a.indices.shape} vs {b.indices.shape}")
    spec = a.spec if a.spec == b.spec else None
    return SelectionMask(a.indices | b.indices, "union", spec, None)


def flag_change_times(signal: ChangeSignal | np.ndarray, k: float = 2.0) -> TimeFlags:
    """Flag time points whose value exceeds ``median + k * MAD`` (strictly).

    MAD is the plain median of absolute deviations from the median, without a
    normal-consistency factor. Flagged indices are 1-based time points.
    """
    values = np.asarray(getattr(signal, "values", signal), dtype=np.float64)
    if values.size < 2:
        raise ScreeningError("need at least two signal values to flag change times")
    if k < 0:
        raise ScreeningError(f"MAD multiplier must be >= 0, got {k}")
    med = float(np.median(values))
    mad = float(np.median(np.abs(values - med)))
    thr = med + k * mad
    flagged = tuple(int(i) + 1 for i in np.flatnonzero(values > thr))
    return TimeFlags(flagged, med, mad, float(k))


@dataclass(frozen=True)
class ReportRow:
    quantile: float
    tau_d: float
    count_d: int
    tau_t: float
    count_t: int
    count_union: int


@dataclass(frozen=True)
class ScreeningReport:
    rows: tuple[ReportRow, ...]
    mask_d: SelectionMask
    mask_t: SelectionMask
    mask_union: SelectionMask
    flags_d: TimeFlags
    flags_t: TimeFlags

    def table_csv(self) -> str:
        out = io.StringIO()
        out.write("quantile,tau_d,count_d,tau_t,count_t,count_union\n")
        for r in self.rows:
            out.write(f"{r.quantile!r},{r.tau_d!r},{r.count_d},{r.tau_t!r},{r.count_t},{r.count_union}\n")
        return out.getvalue()

    def flags_csv(self) -> str:
        out = io.StringIO()
        out.write("signal,median,mad,k,threshold,flagged\n")
        for name, f in (("d", self.flags_d), ("t", self.flags_t)):
            flagged = " ".join(str(m) for m in f.flagged)
            out.write(f"{name},{f.median!r},{f.mad!r},{f.k!r},{f.threshold!r},{flagged}\n")
        return out.getvalue()


def screening_report(
    map_d: CorrelationMap,
    map_t: CorrelationMap,
    signal_d: ChangeSignal,
    signal_t: ChangeSignal,
    quantiles: tuple[float, ...] = TABLE_QUANTILES,
    select: ThresholdSpec = ThresholdSpec("quantile", 0.99),
    mad_k: float = 2.0,
) -> ScreeningReport:
    if map_d.shape != map_t.shape:
        raise ScreeningError(f"d and t maps differ in shape: {map_d.shape} vs {map_t.shape}")
    rows = []
    for q in quantiles:
        spec = ThresholdSpec.quantile(q)
        md, mt = select_indices(map_d, spec), select_indices(map_t, spec)
        rows.append(ReportRow(float(q), md.tau, md.count, mt.tau, mt.count, union_selection(md, mt).count))
    mask_d = select_indices(map_d, select)
    mask_t = select_indices(map_t, select)
    return ScreeningReport(
        tuple(rows),
        mask_d,
        mask_t,
        union_selection(mask_d, mask_t),
        flag_change_times(signal_d, mad_k),
        flag_change_times(signal_t, mad_k),
    )
