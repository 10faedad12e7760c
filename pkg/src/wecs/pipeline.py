"""End-to-end analysis of an image sequence and its on-disk state.

``run_analysis`` streams images through the transform so only coefficient
grids stay in memory. Its output directory doubles as the state for
``append``: coefficients are stored losslessly, and re-summing them in time
order reproduces the batch running mean exactly, so an append followed by a
refresh writes the same bytes as a batch run over all images.
"""

from __future__ import annotations

import io
import json
import math
from collections.abc import Iterable, Iterator
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dwt import approx_coeffs, approx_energy_fraction, resolve_boundary
from .fileio import atomic_write, encode_matrix, encode_wecs1, read_image
from .screening import (
    TABLE_QUANTILES,
    CorrelationMap,
    ScreeningReport,
    ThresholdSpec,
    correlation_map,
    pixel_resolution,
    screening_report,
    select_indices,
    union_selection,
)
from .series import (
    DEFAULT_LOG_FLOOR,
    Apportionment,
    ChangeSignal,
    CoeffStack,
    ImageStack,
    append_image,
    energy_apportionment,
    log_transform,
    signals,
)

STATE_DIR = "state"


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class AnalysisConfig:
    basis: str = "db2"
    level: int = 2
    boundary: str = "auto"
    log: bool = True
    log_floor: float = DEFAULT_LOG_FLOOR
    combine: bool = False
    combine_after_log: bool = False
    quantiles: tuple[float, ...] = (0.99,)
    report_quantiles: tuple[float, ...] = TABLE_QUANTILES
    mad_k: float = 2.0
    pixel: bool = False
    energy_levels: tuple[int, ...] | None = None

    @property
    def levels_for_energy(self) -> tuple[int, ...]:
        if self.energy_levels is not None:
            return tuple(self.energy_levels)
        return (self.level,)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> AnalysisConfig:
        doc = dict(doc)
        for key in ("quantiles", "report_quantiles", "energy_levels"):
            if doc.get(key) is not None:
                doc[key] = tuple(doc[key])
        return cls(**doc)


def preprocess(image: np.ndarray, config: AnalysisConfig, other: np.ndarray | None = None) -> np.ndarray:
    """Euclidean channel combination and log transform.

    Channels are combined on raw intensities unless ``combine_after_log`` is
    set, in which case each channel is log-transformed first.
    """
    img = np.asarray(image, dtype=np.float64)
    if not config.combine:
        if other is not None:
            raise PipelineError("a second channel was given but the analysis is single-channel")
        return _log(img, config)
    if other is None:
        raise PipelineError("combined analysis needs the second channel image")
    other = np.asarray(other, dtype=np.float64)
    if other.shape != img.shape:
        raise PipelineError(f"channel images differ in shape: {img.shape} vs {other.shape}")
    if config.combine_after_log:
        return np.hypot(_log(img, config), _log(other, config))
    return _log(np.hypot(img, other), config)


def _log(img: np.ndarray, config: AnalysisConfig) -> np.ndarray:
    if not config.log:
        return img
    return log_transform(ImageStack(img[None]), config.log_floor).images[0]


@dataclass
class AnalysisResult:
    config: AnalysisConfig
    coeffs: CoeffStack
    energies: list[dict[int, float]]
    signal_d: ChangeSignal = field(init=False)
    signal_t: ChangeSignal = field(init=False)
    map_d: CorrelationMap = field(init=False)
    map_t: CorrelationMap = field(init=False)
    report: ScreeningReport = field(init=False)
    apportionment: Apportionment = field(init=False)

    def __post_init__(self):
        cs = self.coeffs
        cfg = self.config
        if cs.n < 4:
            raise PipelineError(f"analysis needs at least 4 images (t has n - 1 points to screen), got {cs.n}")
        d_cube, self.signal_d, t_cube, self.signal_t = signals(cs)
        self.map_d = correlation_map(d_cube, self.signal_d)
        self.map_t = correlation_map(t_cube, self.signal_t)
        if cfg.pixel:
            self.map_d = pixel_resolution(self.map_d, cs.source_dims, cs.level)
            self.map_t = pixel_resolution(self.map_t, cs.source_dims, cs.level)
        select = ThresholdSpec.quantile(cfg.quantiles[0]) if cfg.quantiles else ThresholdSpec.quantile(0.99)
        self.report = screening_report(
            self.map_d, self.map_t, self.signal_d, self.signal_t, cfg.report_quantiles, select, cfg.mad_k
        )
        self.apportionment = energy_apportionment(cs)

    def masks(self, q: float):
        spec = ThresholdSpec.quantile(q)
        md = select_indices(self.map_d, spec)
        mt = select_indices(self.map_t, spec)
        return md, mt, union_selection(md, mt)

    def outputs(self) -> dict[str, bytes]:
        """Every output file (relative path -> bytes), state included."""
        files: dict[str, bytes] = {}
        files["d.csv"] = _signal_csv(self.signal_d)
        files["t.csv"] = _signal_csv(self.signal_t)
        for kind, cmap in (("d", self.map_d), ("t", self.map_t)):
            for fmt in ("csv", "pgm"):
                for suffix, data in encode_matrix(np.abs(cmap.values), fmt).items():
                    files[f"corr_{kind}.{fmt}{suffix}"] = data
        files["report.csv"] = self.report.table_csv().encode()
        files["flags.csv"] = self.report.flags_csv().encode()
        for q in self.config.quantiles:
            for mask in self.masks(q):
                for suffix, data in encode_matrix(mask.indices.astype(np.float64), "pgm").items():
                    files[f"mask_{mask.source}_q{q!r}.pgm{suffix}"] = data
        files["energy.csv"] = _energy_csv(self.energies, self.config.levels_for_energy)
        a = self.apportionment
        files["apportionment.csv"] = (
            f"total,mean_term,deviation_term,residual\n{a.total!r},{a.mean_term!r},{a.deviation_term!r},{a.residual!r}\n"
        ).encode()
        files.update(self._state_files())
        return files

    def _state_files(self) -> dict[str, bytes]:
        cs = self.coeffs
        doc = {
            "config": self.config.to_json(),
            "n": cs.n,
            "bank": cs.bank_name,
            "level": cs.level,
            "boundary": cs.boundary,
            "source_dims": list(cs.source_dims),
        }
        files = {f"{STATE_DIR}/state.json": (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()}
        for m, x in enumerate(cs.coeffs, start=1):
            files[f"{STATE_DIR}/coeff_{m:04d}.wecs"] = encode_wecs1(x, "f64")
        levels = self.config.levels_for_energy
        lines = ["m," + ",".join(f"J{j}" for j in levels)]
        for m, e in enumerate(self.energies, start=1):
            lines.append(f"{m}," + ",".join(repr(e[j]) for j in levels))
        files[f"{STATE_DIR}/energy.csv"] = ("\n".join(lines) + "\n").encode()
        return files

    def write(self, out_dir: str | Path) -> list[Path]:
        out_dir = Path(out_dir)
        written = []
        for rel, data in sorted(self.outputs().items()):
            atomic_write(out_dir / rel, data)
            written.append(out_dir / rel)
        return written


def _signal_csv(sig: ChangeSignal) -> bytes:
    out = io.StringIO()
    out.write("m,value\n")
    for m, v in enumerate(sig.values, start=1):
        out.write(f"{m},{float(v)!r}\n")
    return out.getvalue().encode()


def _energy_csv(energies: list[dict[int, float]], levels: tuple[int, ...]) -> bytes:
    out = io.StringIO()
    out.write("level,mean_fraction,min_fraction,max_fraction\n")
    for j in levels:
        vals = [e[j] for e in energies if not math.isnan(e[j])] or [math.nan]
        out.write(f"{j},{math.fsum(vals) / len(vals)!r},{min(vals)!r},{max(vals)!r}\n")
    return out.getvalue().encode()


def _energy_row(img: np.ndarray, config: AnalysisConfig, approx: np.ndarray | None = None) -> dict[int, float]:
    if not np.any(img):
        # energy fraction of an all-zero image is undefined; keep the slot
        return {j: math.nan for j in config.levels_for_energy}
    return {
        j: approx_energy_fraction(
            img, config.basis, j, config.boundary, approx if j == config.level else None
        )
        for j in config.levels_for_energy
    }


def run_analysis(
    images: Iterable[np.ndarray],
    config: AnalysisConfig,
    others: Iterable[np.ndarray] | None = None,
) -> AnalysisResult:
    """Analyse raw images (plus a second channel when combining)."""
    energies: list[dict[int, float]] = []
    meta: dict = {}

    def transformed() -> Iterator[np.ndarray]:
        pairs = zip(images, others) if others is not None else ((im, None) for im in images)
        for img, oth in pairs:
            x = preprocess(img, config, oth)
            if not meta:
                meta["dims"] = x.shape
                meta["mode"] = resolve_boundary(x.shape, config.level, config.boundary)
            elif x.shape != meta["dims"]:
                raise PipelineError(f"image dims {x.shape} differ from {meta['dims']}")
            a = approx_coeffs(x, config.basis, config.level, meta["mode"])
            energies.append(_energy_row(x, config, a))
            yield a

    coeffs = list(transformed())
    if not coeffs:
        raise PipelineError("no images to analyse")
    cs = CoeffStack.from_coeffs(coeffs, config.level, config.basis, meta["mode"], meta["dims"])
    return AnalysisResult(config, cs, energies)


def load_state(out_dir: str | Path) -> AnalysisResult:
    state = Path(out_dir) / STATE_DIR
    doc_path = state / "state.json"
    if not doc_path.exists():
        raise PipelineError(f"{out_dir}: no analysis state found (expected {doc_path})")
    doc = json.loads(doc_path.read_text())
    config = AnalysisConfig.from_json(doc["config"])
    coeffs = [read_image(state / f"coeff_{m:04d}.wecs") for m in range(1, doc["n"] + 1)]
    total = None
    for x in coeffs:
        total = x.copy() if total is None else total + x
    arr = np.stack(coeffs)
    arr.setflags(write=False)
    total.setflags(write=False)
    cs = CoeffStack(arr, doc["level"], doc["bank"], doc["boundary"], tuple(doc["source_dims"]), total)
    lines = (state / "energy.csv").read_text().splitlines()
    levels = [int(h[1:]) for h in lines[0].split(",")[1:]]
    energies = []
    for line in lines[1:]:
        vals = [float(v) for v in line.split(",")[1:]]
        energies.append(dict(zip(levels, vals)))
    return AnalysisResult(config, cs, energies)


def append_to_state(prev: AnalysisResult, image: np.ndarray, other: np.ndarray | None = None) -> AnalysisResult:
    x = preprocess(image, prev.config, other)
    if x.shape != prev.coeffs.source_dims:
        raise PipelineError(f"image dims {x.shape} differ from analysed dims {prev.coeffs.source_dims}")
    energies = prev.energies + [_energy_row(x, prev.config)]
    return AnalysisResult(prev.config, append_image(prev.coeffs, x), energies)
