"""Separable 2D discrete wavelet transform (approximation branch focused).

Conventions
-----------
* Analysis filters are applied as a correlation, no flip:
  ``lo[n] = sum_k h[k] * x_ext[2n + k - origin]`` and the same with ``g`` for
  ``hi``; downsampling keeps the even-indexed outputs. ``origin`` is the
  bank's phase offset (0 for Haar and db2), which keeps coefficient ``n``
  centred over samples ``2n, 2n+1`` for the longer, later-peaking filters.
* Rows are filtered first (along the last axis), then columns.
* Output length along an axis of length ``N`` is ``ceil(N / 2)``.
* ``periodic`` extension wraps the signal; it needs even lengths and gives an
  orthonormal (exactly invertible, energy preserving) transform.
  ``symmetric`` is half-sample symmetric extension (``x[-1] = x[0]``) and works
  for any length. ``auto`` picks periodic when every level sees even sizes.
* Synthesis is the adjoint of analysis. Under periodic extension that is the
  exact inverse; under symmetric extension it is only approximate near edges.

Every function accepts arrays with extra leading axes (e.g. a time stack of
shape ``(n, rows, cols)``); the transform acts on the last two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filters import FilterBank, build_filter_bank
from .numerics import fsum

BOUNDARY_MODES = ("auto", "periodic", "symmetric")


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class CoeffMatrix:
    level: int
    values: np.ndarray
    source_dims: tuple[int, int]
    bank_name: str
    boundary: str

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def _bank(bank: FilterBank | str) -> FilterBank:
    return build_filter_bank(bank) if isinstance(bank, str) else bank


def _ext_index(n: int, start: int, stop: int, mode: str) -> np.ndarray:
    """Source index of every extended position in ``[start, stop)``."""
    j = np.arange(start, stop)
    if mode == "periodic":
        return j % n
    j = j % (2 * n)
    return np.where(j < n, j, 2 * n - 1 - j)


def coarse_dims(dims: tuple[int, int], J: int) -> tuple[int, int]:
    r, c = dims
    for _ in range(J):
        r, c = -(-r // 2), -(-c // 2)
    return r, c


def resolve_boundary(dims: tuple[int, int], J: int, boundary: str) -> str:
    if boundary not in BOUNDARY_MODES:
        raise TransformError(f"unknown boundary mode {boundary!r}; use one of {BOUNDARY_MODES}")
    if boundary != "auto":
        return boundary
    step = 2 ** J
    return "periodic" if dims[0] % step == 0 and dims[1] % step == 0 else "symmetric"


def max_level(dims: tuple[int, int], filter_length: int, boundary: str = "symmetric") -> int:
    """Largest J such that every analysis step sees dims >= filter length
    (and even dims, for periodic extension)."""
    r, c = dims
    J = 0
    while r >= filter_length and c >= filter_length:
        if boundary == "periodic" and (r % 2 or c % 2):
            break
        r, c = -(-r // 2), -(-c // 2)
        J += 1
    return J


def _check_image(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise TransformError(f"expected a 2D image, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise TransformError("image contains non-finite values")
    return x


def _take(x: np.ndarray, sl: slice, axis: int) -> np.ndarray:
    idx = [slice(None)] * x.ndim
    idx[axis] = sl
    return x[tuple(idx)]


def _span(n: int, out: int, bank: FilterBank) -> tuple[int, int]:
    """Extended positions touched by ``out`` analysis outputs over length ``n``."""
    start = -bank.origin
    return start, max(start + 2 * (out - 1) + bank.length, n)


def analyze_axis(x: np.ndarray, bank: FilterBank, axis: int, mode: str) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[axis]
    out = -(-n // 2)
    start, stop = _span(n, out, bank)
    xe = np.take(x, _ext_index(n, start, stop, mode), axis=axis)
    lo = None
    hi = None
    for k in range(bank.length):
        seg = _take(xe, slice(k, k + 2 * out - 1, 2), axis)
        if lo is None:
            lo = bank.lowpass[k] * seg
            hi = bank.highpass[k] * seg
        else:
            lo += bank.lowpass[k] * seg
            hi += bank.highpass[k] * seg
    return lo, hi


def synthesize_axis(
    lo: np.ndarray, hi: np.ndarray | None, bank: FilterBank, axis: int, n: int, mode: str
) -> np.ndarray:
    """Adjoint of :func:`analyze_axis` producing length ``n`` along ``axis``."""
    out = lo.shape[axis]
    if -(-n // 2) != out:
        raise TransformError(f"cannot synthesize length {n} from {out} coefficients")
    start, stop = _span(n, out, bank)
    shape = list(lo.shape)
    shape[axis] = stop - start
    ye = np.zeros(shape)
    for k in range(bank.length):
        dst = _take(ye, slice(k, k + 2 * out - 1, 2), axis)
        dst += bank.lowpass[k] * lo
        if hi is not None:
            dst += bank.highpass[k] * hi
    x = _take(ye, slice(-start, -start + n), axis).copy()
    idx = _ext_index(n, start, stop, mode)
    outside = list(range(0, -start)) + list(range(n - start, stop - start))
    for pos in outside:
        _take(x, slice(idx[pos], idx[pos] + 1), axis)[...] += _take(ye, slice(pos, pos + 1), axis)
    return x


def dwt2_level(
    image: np.ndarray, bank: FilterBank | str, boundary: str = "auto"
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """One level of separable analysis.

    Returns ``(approx, (horizontal, vertical, diagonal))`` where horizontal is
    row-lowpass/column-highpass, vertical is row-highpass/column-lowpass and
    diagonal is high-pass along both axes.
    """
    bank = _bank(bank)
    x = _check_image(image)
    dims = x.shape[-2:]
    if min(dims) < bank.length:
        raise TransformError(
            f"image {dims[0]}x{dims[1]} is smaller than the {bank.name} filter support ({bank.length})"
        )
    mode = resolve_boundary(dims, 1, boundary)
    if mode == "periodic" and (dims[0] % 2 or dims[1] % 2):
        raise TransformError(f"periodic boundary needs even dims, got {dims[0]}x{dims[1]}")
    lo, hi = analyze_axis(x, bank, -1, mode)
    ll, lh = analyze_axis(lo, bank, -2, mode)
    hl, hh = analyze_axis(hi, bank, -2, mode)
    return ll, (lh, hl, hh)


def idwt2_level(
    approx: np.ndarray,
    details: tuple[np.ndarray, np.ndarray, np.ndarray] | None,
    bank: FilterBank | str,
    target_dims: tuple[int, int],
    boundary: str = "auto",
) -> np.ndarray:
    bank = _bank(bank)
    mode = resolve_boundary(tuple(target_dims), 1, boundary)
    lh = hl = hh = None
    if details is not None:
        lh, hl, hh = details
    lo = synthesize_axis(approx, lh, bank, -2, target_dims[0], mode)
    hi = None if hl is None else synthesize_axis(hl, hh, bank, -2, target_dims[0], mode)
    if hi is None:
        return synthesize_axis(lo, None, bank, -1, target_dims[1], mode)
    return synthesize_axis(lo, hi, bank, -1, target_dims[1], mode)


def approx_coeffs(images: np.ndarray, bank: FilterBank | str, J: int, boundary: str = "auto") -> np.ndarray:
    """Level-J approximation coefficients of the trailing 2D plane(s)."""
    bank = _bank(bank)
    x = _check_image(images)
    if J < 0:
        raise TransformError(f"level must be non-negative, got {J}")
    if J == 0:
        return x
    dims = x.shape[-2:]
    mode = resolve_boundary(dims, J, boundary)
    top = max_level(dims, bank.length, mode)
    if J > top:
        raise TransformError(
            f"level {J} too large for {dims[0]}x{dims[1]} image with {bank.name} "
            f"({mode} boundary); maximum feasible level is {top}"
        )
    for _ in range(J):
        lo, _ = analyze_axis(x, bank, -1, mode)
        x, _ = analyze_axis(lo, bank, -2, mode)
    return x


def dwt2_approx(image: np.ndarray, bank: FilterBank | str, J: int, boundary: str = "auto") -> CoeffMatrix:
    bank = _bank(bank)
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise TransformError(f"expected a 2D image, got shape {x.shape}")
    dims = (x.shape[0], x.shape[1])
    values = approx_coeffs(x, bank, J, boundary)
    return CoeffMatrix(J, values, dims, bank.name, resolve_boundary(dims, J, boundary))


def reconstruct_approx(
    coeffs: np.ndarray,
    bank: FilterBank | str,
    J: int,
    target_dims: tuple[int, int],
    boundary: str = "auto",
) -> np.ndarray:
    """Run J synthesis steps with all detail bands zeroed."""
    bank = _bank(bank)
    x = np.asarray(coeffs, dtype=np.float64)
    target_dims = (int(target_dims[0]), int(target_dims[1]))
    if x.shape[-2:] != coarse_dims(target_dims, J):
        raise TransformError(
            f"coefficient grid {x.shape[-2:]} inconsistent with target {target_dims} at level {J}"
        )
    mode = resolve_boundary(target_dims, J, boundary)
    chain = [coarse_dims(target_dims, j) for j in range(J)]
    for dims in reversed(chain):
        x = idwt2_level(x, None, bank, dims, mode)
    return x


def approx_energy_fraction(
    image: np.ndarray,
    bank: FilterBank | str,
    J: int,
    boundary: str = "auto",
    approx: np.ndarray | None = None,
) -> float:
    """Share of the image energy kept by its level-J wavelet approximation.

    The approximation is synthesised back to pixel resolution with zeroed
    details. ``approx`` may carry already computed level-J coefficients.
    """
    x = _check_image(image)
    energy = fsum(np.square(x))
    if energy == 0.0:
        raise TransformError("zero-energy image: energy fraction undefined")
    dims = x.shape[-2:]
    if approx is None:
        approx = approx_coeffs(x, bank, J, boundary)
    recon = reconstruct_approx(approx, bank, J, dims, boundary)
    return fsum(np.square(recon)) / energy


def upsample_coeff_map(
    cmap: np.ndarray,
    target_dims: tuple[int, int],
    J: int,
    mode: str = "nearest",
    bank: FilterBank | str | None = None,
    boundary: str = "auto",
) -> np.ndarray:
    """Bring a level-J coefficient map back to pixel resolution.

    ``nearest`` copies each coefficient over its ``2**J x 2**J`` footprint
    (cropped at the far edges for non-dyadic sizes); ``reconstruction`` runs J
    zero-detail synthesis steps and needs ``bank``.
    """
    m = np.asarray(cmap, dtype=np.float64)
    target_dims = (int(target_dims[0]), int(target_dims[1]))
    if m.shape[-2:] != coarse_dims(target_dims, J):
        raise TransformError(
            f"map dims {m.shape[-2:]} inconsistent with target {target_dims} at level {J}"
        )
    if mode == "nearest":
        f = 2 ** J
        up = np.repeat(np.repeat(m, f, axis=-2), f, axis=-1)
        return up[..., : target_dims[0], : target_dims[1]]
    if mode == "reconstruction":
        if bank is None:
            raise TransformError("reconstruction upsampling needs a filter bank")
        return reconstruct_approx(m, bank, J, target_dims, boundary)
    raise TransformError(f"unknown upsampling mode {mode!r}")
