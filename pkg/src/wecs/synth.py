"""Synthetic multi-temporal scenes with known change masks, plus speckle noise.

Random numbers come from numpy's PCG64 bit generator. Each image ``m`` of a
stack draws from its own stream seeded by ``SeedSequence([seed, m])``, so
generating images in any order gives the same result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .series import ImageStack

RNG_ALGORITHM = "numpy PCG64 / SeedSequence([seed, m])"


class SceneError(ValueError):
    pass


def image_rng(seed: int, m: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(m)])))


@dataclass(frozen=True)
class EllipseSpec:
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    rotation: float = 0.0
    amplitude: float = 2.0
    onset: int = 1

    def __post_init__(self):
        a, b = self.semi_axes
        if a <= 0 or b <= 0:
            raise SceneError(f"semi-axes must be positive, got {self.semi_axes}")
        if self.onset < 1:
            raise SceneError(f"onset must be >= 1, got {self.onset}")

    def extent(self) -> tuple[float, float]:
        """Half-height and half-width of the axis-aligned bounding box."""
        a, b = self.semi_axes
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return math.hypot(a * s, b * c), math.hypot(a * c, b * s)


def rasterize(spec: EllipseSpec, dims: tuple[int, int]) -> np.ndarray:
    """Boolean mask of pixels whose centre lies inside the ellipse.

    Pixel ``(i, j)`` has its centre at coordinates ``(i, j)``; the first semi-axis
    runs along the column direction before rotation.
    """
    rows, cols = dims
    hr, hc = spec.extent()
    r0, c0 = spec.center
    if r0 - hr < -0.5 or r0 + hr > rows - 0.5 or c0 - hc < -0.5 or c0 + hc > cols - 0.5:
        raise SceneError(f"ellipse {spec} does not fit in a {rows}x{cols} image")
    i, j = np.mgrid[0:rows, 0:cols]
    dr = i - r0
    dc = j - c0
    c, s = math.cos(spec.rotation), math.sin(spec.rotation)
    x = dc * c + dr * s
    y = -dc * s + dr * c
    a, b = spec.semi_axes
    return (x / a) ** 2 + (y / b) ** 2 <= 1.0


@dataclass(frozen=True)
class SceneSequence:
    images: ImageStack
    truth_mask: np.ndarray
    per_step_masks: np.ndarray  # entry m-2 holds pixels changed between m-1 and m
    base_mask: np.ndarray

    @property
    def n(self) -> int:
        return self.images.n

    @property
    def dims(self) -> tuple[int, int]:
        return self.images.dims


def gen_ellipse_scene(
    dims: tuple[int, int],
    base: list[EllipseSpec],
    changes: list[EllipseSpec],
    n: int,
) -> SceneSequence:
    if n < 2:
        raise SceneError(f"a scene needs n >= 2 images, got {n}")
    dims = (int(dims[0]), int(dims[1]))
    for e in base:
        if e.onset != 1:
            raise SceneError(f"base features must have onset 1, got {e.onset}")
    for e in changes:
        if not 2 <= e.onset <= n:
            raise SceneError(f"change onset must lie in [2, {n}], got {e.onset}")
    layers = np.zeros((n,) + dims)
    base_mask = np.zeros(dims, dtype=bool)
    for e in list(base) + list(changes):
        mask = rasterize(e, dims)
        layers[e.onset - 1] += e.amplitude * mask
        if e.onset == 1:
            base_mask |= mask
    images = np.cumsum(layers, axis=0)
    steps = images[1:] != images[:-1]
    truth = images[-1] != images[0]
    return SceneSequence(ImageStack(images), truth, steps, base_mask)


def default_scene_specs(dims: tuple[int, int] = (256, 256)) -> tuple[list[EllipseSpec], list[EllipseSpec]]:
    """Three elongated base ellipses, then large ellipses (m=2), smaller
    ellipses (m=3) and dots (m=4). Geometry is laid out on a 256x256 canvas
    and scaled to ``dims``; features do not overlap."""
    sr, sc = dims[0] / 256.0, dims[1] / 256.0
    sa = min(sr, sc)

    def e(r, c, a, b, rot, onset, dot=False):
        if dot:
            a, b = max(1.0, a * sa), max(1.0, b * sa)
        else:
            a, b = a * sa, b * sa
        return EllipseSpec((r * sr, c * sc), (a, b), rot, 2.0, onset)

    base = [
        e(30, 128, 95, 9, 0.0, 1),
        e(140, 30, 80, 8, math.pi / 2, 1),
        e(215, 150, 75, 10, math.pi / 7, 1),
    ]
    changes = [
        e(95, 105, 32, 18, 0.3, 2),
        e(130, 195, 26, 20, -0.5, 2),
        e(72, 200, 11, 6, 0.0, 3),
        e(150, 85, 12, 7, 1.0, 3),
        e(235, 45, 10, 5, 0.0, 3),
        e(160, 140, 9, 6, 0.4, 3),
        e(60, 60, 1.5, 1.5, 0.0, 4, True),
        e(120, 160, 2.0, 1.0, 0.0, 4, True),
        e(178, 118, 1.0, 1.0, 0.0, 4, True),
        e(45, 235, 2.0, 2.0, 0.0, 4, True),
        e(100, 240, 1.5, 1.0, 0.0, 4, True),
        e(185, 220, 2.0, 1.5, 0.0, 4, True),
    ]
    return base, changes


def default_scene(dims: tuple[int, int] = (256, 256), n: int = 4) -> SceneSequence:
    if n < 4:
        raise SceneError(f"the default scene spans four change waves and needs n >= 4, got {n}")
    base, changes = default_scene_specs(dims)
    return gen_ellipse_scene(dims, base, changes, n)


@dataclass(frozen=True)
class NoiseModel:
    kind: str  # "gamma", "gauss" or "none"
    param: float = 0.0

    def __post_init__(self):
        if self.kind == "gamma" and not self.param >= 1:
            raise SceneError(f"gamma speckle needs looks L >= 1, got {self.param}")
        if self.kind == "gauss" and not self.param >= 0:
            raise SceneError(f"gaussian noise needs sigma >= 0, got {self.param}")
        if self.kind not in ("gamma", "gauss", "none"):
            raise SceneError(f"unknown noise model {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> NoiseModel:
        """Parse ``gamma:L``, ``gauss:SIGMA`` or ``none``."""
        kind, _, val = text.partition(":")
        if kind == "none":
            return cls("none")
        try:
            return cls(kind, float(val))
        except ValueError as exc:
            raise SceneError(f"bad noise spec {text!r}") from exc

    def __str__(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}:{self.param:g}"


def add_speckle(stack: ImageStack, model: NoiseModel, seed: int, offset: float = 1.0) -> ImageStack:
    """Multiplicative Gamma(L, 1/L) speckle on ``pixel + offset``, or additive
    N(0, sigma^2) noise (no offset)."""
    if stack.log_domain:
        raise SceneError("noise is simulated on raw intensities, not log images")
    out = np.empty_like(stack.images)
    for m, img in enumerate(stack.images, start=1):
        rng = image_rng(seed, m)
        if model.kind == "gamma":
            base = img + offset
            if np.any(base < 0):
                raise SceneError("multiplicative speckle needs non-negative intensities")
            out[m - 1] = base * rng.gamma(model.param, 1.0 / model.param, size=img.shape)
        elif model.kind == "gauss":
            out[m - 1] = img + rng.normal(0.0, 1.0, size=img.shape) * model.param
        else:
            out[m - 1] = img
    return ImageStack(out, False, stack.channel, stack.timestamps)


def planted_change_stack(
    seed: int,
    grid: tuple[int, int] = (64, 64),
    J: int = 2,
    n: int = 20,
    e: int = 20,
    n_events: int = 1,
    amplitude: float = math.log(3.0),
    sigma: float = 0.5,
) -> tuple[ImageStack, np.ndarray]:
    """Log-domain stack with ``e`` planted step changes at coefficient sites.

    Images are ``grid * 2**J`` pixels of i.i.d. N(0, sigma^2) noise (sigma 0.5 is
    roughly the spread of log Gamma speckle with four looks). Each planted site
    raises its ``2**J x 2**J`` pixel footprint by ``amplitude`` (default: a
    threefold brightness jump) from one of ``n_events`` shared change times
    onwards. Under a Haar basis at level J a footprint maps onto exactly one
    approximation coefficient. Returns the stack and the boolean
    coefficient-grid mask of planted sites.
    """
    rng = image_rng(seed, 0)
    p = grid[0] * grid[1]
    sites = rng.choice(p, size=e, replace=False)
    events = np.sort(rng.choice(np.arange(2, n + 1), size=n_events, replace=False))
    onset = events[np.arange(e) % n_events]
    f = 2 ** J
    dims = (grid[0] * f, grid[1] * f)
    images = np.empty((n,) + dims)
    for m in range(1, n + 1):
        images[m - 1] = image_rng(seed, m).normal(0.0, sigma, size=dims)
    for site, m0 in zip(sites, onset):
        k, l = divmod(int(site), grid[1])
        images[m0 - 1 :, k * f : (k + 1) * f, l * f : (l + 1) * f] += amplitude
    truth = np.zeros(grid, dtype=bool)
    truth.flat[sites] = True
    return ImageStack(images, log_domain=True), truth
