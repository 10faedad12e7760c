"""Coefficient stacks, deviation/transition cubes and change signals."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .dwt import approx_coeffs, resolve_boundary
from .filters import FilterBank, build_filter_bank
from .numerics import fsum

DEFAULT_LOG_FLOOR = 1e-10
CHANNELS = ("VV", "VH", "combined", "generic")


class StackError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ImageStack:
    images: np.ndarray
    log_domain: bool = False
    channel: str = "generic"
    timestamps: tuple[str, ...] | None = None

    def __post_init__(self):
        imgs = np.asarray(self.images, dtype=np.float64)
        if imgs.ndim != 3:
            raise StackError(f"image stack must be (n, rows, cols), got shape {imgs.shape}")
        if imgs.shape[0] < 1:
            raise StackError("image stack is empty")
        if self.channel not in CHANNELS:
            raise StackError(f"unknown channel {self.channel!r}")
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != imgs.shape[0]:
                raise StackError("one timestamp per image is required")
            if any(a >= b for a, b in zip(ts, ts[1:])):
                raise StackError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "images", imgs)

    @property
    def n(self) -> int:
        return self.images.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.images.shape[1], self.images.shape[2]


def log_transform(raw: ImageStack, floor: float = DEFAULT_LOG_FLOOR) -> ImageStack:
    if raw.log_domain:
        raise StackError("stack is already in the log domain")
    if floor <= 0:
        raise StackError(f"log floor must be positive, got {floor}")
    if np.any(raw.images < 0):
        raise StackError("negative intensities cannot be log-transformed")
    return replace(raw, images=np.log(np.maximum(raw.images, floor)), log_domain=True)


def combine_channels_euclid(a: ImageStack, b: ImageStack) -> ImageStack:
    """Pixel-wise Euclidean norm of two raw-domain channels."""
    if a.images.shape != b.images.shape:
        raise StackError(f"channel stacks differ in shape: {a.images.shape} vs {b.images.shape}")
    if a.log_domain or b.log_domain:
        raise StackError("channels are combined on raw intensities, before the log transform")
    return ImageStack(np.hypot(a.images, b.images), False, "combined", a.timestamps)


@dataclass(frozen=True)
class CoeffStack:
    """Time-ordered level-J approximation coefficients ``X(1..n)``.

    The temporal mean is kept as a running sum so that appending images one by
    one reproduces a batch build bit for bit.
    """

    coeffs: np.ndarray
    level: int
    bank_name: str
    boundary: str
    source_dims: tuple[int, int]
    coeff_sum: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def grid_dims(self) -> tuple[int, int]:
        return self.coeffs.shape[1], self.coeffs.shape[2]

    @property
    def mean_coeffs(self) -> np.ndarray:
        return self.coeff_sum / self.n

    @classmethod
    def from_images(
        cls,
        images: Iterable[np.ndarray],
        bank: FilterBank | str,
        J: int,
        boundary: str = "auto",
    ) -> CoeffStack:
        """Transform images one at a time; only coefficients are retained."""
        bank = build_filter_bank(bank) if isinstance(bank, str) else bank
        first = {}

        def transformed():
            for img in images:
                img = np.asarray(img, dtype=np.float64)
                if img.ndim != 2:
                    raise StackError(f"expected 2D images, got shape {img.shape}")
                if not first:
                    first["dims"] = img.shape
                    first["mode"] = resolve_boundary(img.shape, J, boundary)
                elif img.shape != first["dims"]:
                    raise StackError(f"image dims {img.shape} differ from {first['dims']}")
                yield approx_coeffs(img, bank, J, first["mode"])

        coeffs, total = _accumulate(transformed())
        return cls(coeffs, J, bank.name, first["mode"], tuple(first["dims"]), total)

    @classmethod
    def from_coeffs(
        cls,
        coeffs: Iterable[np.ndarray],
        level: int,
        bank_name: str,
        boundary: str,
        source_dims: tuple[int, int],
    ) -> CoeffStack:
        """Assemble a stack from precomputed level-J coefficient grids."""
        arr, total = _accumulate(coeffs)
        return cls(arr, level, bank_name, boundary, tuple(source_dims), total)


def _accumulate(coeffs: Iterable[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    # time-ordered running sum; append_image extends it the same way
    out = []
    total = None
    for x in coeffs:
        x = np.asarray(x, dtype=np.float64)
        if out and x.shape != out[0].shape:
            raise StackError(f"coefficient grid {x.shape} differs from {out[0].shape}")
        out.append(x)
        total = x.copy() if total is None else total + x
    if not out:
        raise StackError("no images given")
    return _frozen(np.stack(out)), _frozen(total)


def build_coeff_stack(
    stack: ImageStack,
    bank: FilterBank | str,
    J: int,
    boundary: str = "auto",
    allow_raw: bool = False,
) -> CoeffStack:
    if not stack.log_domain and not allow_raw:
        raise StackError("stack is not log-transformed; pass allow_raw=True to analyze it as-is")
    return CoeffStack.from_images(stack.images, bank, J, boundary)


def append_image(cs: CoeffStack, image: np.ndarray) -> CoeffStack:
    """Return ``cs`` extended by one time point (same basis, level, boundary)."""
    img = np.asarray(image, dtype=np.float64)
    if img.shape != cs.source_dims:
        raise StackError(f"image dims {img.shape} differ from stack source dims {cs.source_dims}")
    x = approx_coeffs(img, cs.bank_name, cs.level, cs.boundary)
    coeffs = np.concatenate([cs.coeffs, x[None]])
    return replace(cs, coeffs=_frozen(coeffs), coeff_sum=_frozen(cs.coeff_sum + x))


@dataclass(frozen=True)
class DeviationCube:
    kind: str
    entries: np.ndarray

    def __len__(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ChangeSignal:
    kind: str
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def _need_two(cs: CoeffStack) -> None:
    if cs.n < 2:
        raise StackError(f"at least two time points are needed, got {cs.n}")


def deviation_cube(cs: CoeffStack) -> DeviationCube:
    """Squared deviations ``(X(m) - mean)**2`` for m = 1..n."""
    _need_two(cs)
    return DeviationCube("d", _frozen(np.square(cs.coeffs - cs.mean_coeffs)))


def transition_cube(cs: CoeffStack) -> DeviationCube:
    """Squared consecutive differences ``(X(m+1) - X(m))**2`` for m = 1..n-1."""
    _need_two(cs)
    return DeviationCube("t", _frozen(np.square(np.diff(cs.coeffs, axis=0))))


def change_signal(cube: DeviationCube) -> ChangeSignal:
    values = np.array([fsum(e) for e in cube.entries])
    return ChangeSignal(cube.kind, _frozen(values))


class Apportionment(NamedTuple):
    total: float
    mean_term: float
    deviation_term: float
    residual: float


def energy_apportionment(cs: CoeffStack) -> Apportionment:
    """Split total coefficient energy into mean and deviation parts.

    ``residual`` is ``|total - mean_term - deviation_term|`` relative to
    ``total``, or absolute when the total energy is zero.
    """
    mean = cs.mean_coeffs
    total = math.fsum(fsum(np.square(x)) for x in cs.coeffs)
    mean_term = cs.n * fsum(np.square(mean))
    deviation = math.fsum(fsum(np.square(x - mean)) for x in cs.coeffs)
    residual = abs(math.fsum([total, -mean_term, -deviation]))
    if total > 0:
        residual /= total
    return Apportionment(total, mean_term, deviation, residual)


def signals(cs: CoeffStack) -> tuple[DeviationCube, ChangeSignal, DeviationCube, ChangeSignal]:
    d_cube = deviation_cube(cs)
    t_cube = transition_cube(cs)
    return d_cube, change_signal(d_cube), t_cube, change_signal(t_cube)


def stack_from_arrays(images: Sequence[np.ndarray], log_domain: bool = False) -> ImageStack:
    return ImageStack(np.stack([np.asarray(i, dtype=np.float64) for i in images]), log_domain)
