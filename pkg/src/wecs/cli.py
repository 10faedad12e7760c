"""Command-line entry point: ``wecs synth | analyze | append | roc | compare``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dwt import TransformError
from .evaluation import EvaluationError, roc_curve, run_comparison
from .fileio import (
    MAGIC,
    MANIFEST_FORMAT,
    FormatError,
    ManifestEntry,
    StackManifest,
    atomic_write,
    encode_matrix,
    load_manifest,
    read_image,
)
from .filters import SUPPORTED_BASES, UnknownBasisError
from .pipeline import AnalysisConfig, PipelineError, append_to_state, load_state, run_analysis
from .screening import TABLE_QUANTILES, ScreeningError
from .series import ImageStack, StackError
from .synth import RNG_ALGORITHM, NoiseModel, SceneError, SceneSequence, add_speckle, default_scene

SCENE_FILE = "scene.json"
CLEAN_MANIFEST = "manifest_clean.json"
NOISY_MANIFEST = "manifest.json"
DEFAULT_DETECTORS = "wecs-d/db2/J2,wecs-t/db2/J2,pixel-d,pixel-t,logratio"


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _dims(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None


def _noise(text: str) -> NoiseModel:
    try:
        return NoiseModel.parse(text)
    except SceneError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one machine-parseable line instead of the usage dump
        self.exit(2, f"error: usage: {self.prog}: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wecs", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=f"wecs {__version__} (matrix format {MAGIC.decode()}, manifest {MANIFEST_FORMAT}, rng {RNG_ALGORITHM})",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate the synthetic ellipse scene")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--dims", type=_dims, default=(256, 256))
    p.add_argument("--noise", type=_noise, default=NoiseModel("gamma", 4.0), help="gamma:L, gauss:SIGMA or none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--offset", type=float, default=1.0, help="intensity added before multiplicative speckle")

    p = sub.add_parser("analyze", help="change signals, correlation maps and screening report")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--basis", default="db2", choices=SUPPORTED_BASES)
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--boundary", default="auto", choices=("auto", "periodic", "symmetric"))
    p.add_argument("--no-log", action="store_true", help="analyse intensities as given")
    p.add_argument("--log-floor", type=float, default=1e-10)
    p.add_argument("--combine", metavar="euclid:MANIFEST", help="Euclidean combination with a second channel")
    p.add_argument("--combine-after-log", action="store_true", help="log each channel before combining")
    p.add_argument("--quantile", type=_floats, default=(0.99,), help="selection quantiles for mask output")
    p.add_argument("--report-quantiles", type=_floats, default=TABLE_QUANTILES)
    p.add_argument("--mad-k", type=float, default=2.0)
    p.add_argument("--levels", type=_ints, default=None, help="levels for the energy table (default: --level)")
    p.add_argument("--pixel", action="store_true", help="screen at pixel resolution (nearest upsampling)")
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("append", help="add one image to an existing analysis and refresh its outputs")
    p.add_argument("--state", required=True, type=Path)
    p.add_argument("--image", required=True, type=Path)
    p.add_argument("--other", type=Path, help="second-channel image for combined analyses")

    p = sub.add_parser("roc", help="ROC curve of a score map against a truth mask")
    p.add_argument("--scores", required=True, type=Path)
    p.add_argument("--truth", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("compare", help="ROC comparison of detectors on a synthetic scene")
    p.add_argument("--scene", required=True, type=Path)
    p.add_argument("--detectors", default=DEFAULT_DETECTORS)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--noise", type=_noise, default=None, help="override the scene's noise model")
    p.add_argument("--out", required=True, type=Path)
    return parser


def _write_files(out_dir: Path, files: dict[str, bytes]) -> None:
    for rel, data in sorted(files.items()):
        atomic_write(out_dir / rel, data)


def cmd_synth(args) -> None:
    if args.n < 4:
        raise CliError("usage", f"--n must be at least 4 for the ellipse scene, got {args.n}")
    scene = default_scene(args.dims, args.n)
    noisy = add_speckle(scene.images, args.noise, args.seed, args.offset)
    files: dict[str, bytes] = {}
    clean_entries, noisy_entries = [], []
    for m in range(1, scene.n + 1):
        name = f"img_{m:03d}.wecs"
        files[f"clean/{name}"] = encode_matrix(scene.images.images[m - 1], "wecs1")[""]
        files[name] = encode_matrix(noisy.images[m - 1], "wecs1")[""]
        clean_entries.append(ManifestEntry(f"clean/{name}"))
        noisy_entries.append(ManifestEntry(name))
    for suffix, data in encode_matrix(scene.truth_mask.astype(np.float64), "pgm").items():
        files[f"truth.pgm{suffix}"] = data
    for m, mask in enumerate(scene.per_step_masks, start=2):
        for suffix, data in encode_matrix(mask.astype(np.float64), "pgm").items():
            files[f"step_{m:03d}.pgm{suffix}"] = data
    files[CLEAN_MANIFEST] = StackManifest(tuple(clean_entries), args.out).to_json()
    files[NOISY_MANIFEST] = StackManifest(tuple(noisy_entries), args.out).to_json()
    meta = {
        "n": scene.n,
        "dims": list(scene.dims),
        "noise": str(args.noise),
        "seed": args.seed,
        "offset": args.offset,
        "rng": RNG_ALGORITHM,
    }
    files[SCENE_FILE] = (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode()
    _write_files(args.out, files)


def _analysis_config(args) -> AnalysisConfig:
    return AnalysisConfig(
        basis=args.basis,
        level=args.level,
        boundary=args.boundary,
        log=not args.no_log,
        log_floor=args.log_floor,
        combine=args.combine is not None,
        combine_after_log=args.combine_after_log,
        quantiles=tuple(args.quantile),
        report_quantiles=tuple(args.report_quantiles),
        mad_k=args.mad_k,
        pixel=args.pixel,
        energy_levels=None if args.levels is None else tuple(args.levels),
    )


def cmd_analyze(args) -> None:
    config = _analysis_config(args)
    if config.combine_after_log and not config.combine:
        raise CliError("usage", "--combine-after-log needs --combine")
    manifest = load_manifest(args.manifest)
    others = None
    if args.combine is not None:
        kind, _, other_path = args.combine.partition(":")
        if kind != "euclid" or not other_path:
            raise CliError("usage", f"--combine expects euclid:MANIFEST, got {args.combine!r}")
        other = load_manifest(other_path)
        if len(other) != len(manifest):
            raise CliError("input", f"channel manifests differ in length: {len(manifest)} vs {len(other)}")
        others = other.iter_images()
    result = run_analysis(manifest.iter_images(), config, others)
    result.write(args.out)


def cmd_append(args) -> None:
    prev = load_state(args.state)
    other = read_image(args.other) if args.other is not None else None
    result = append_to_state(prev, read_image(args.image), other)
    result.write(args.state)


def cmd_roc(args) -> None:
    scores = read_image(args.scores)
    truth = read_image(args.truth) != 0
    curve = roc_curve(scores, truth)
    rows = zip(curve.thresholds.tolist(), curve.fpr.tolist(), curve.tpr.tolist())
    lines = ["threshold,fpr,tpr"] + [f"{t!r},{f!r},{p!r}" for t, f, p in rows]
    atomic_write(args.out, ("\n".join(lines) + "\n").encode())
    print(f"auc {float(curve.auc)!r}")


def _load_scene(scene_dir: Path) -> tuple[SceneSequence, dict]:
    meta_path = scene_dir / SCENE_FILE
    if not meta_path.exists():
        raise CliError("input", f"{scene_dir}: not a synth output directory (missing {SCENE_FILE})")
    meta = json.loads(meta_path.read_text())
    clean = load_manifest(scene_dir / CLEAN_MANIFEST)
    images = np.stack(list(clean.iter_images()))
    truth = read_image(scene_dir / "truth.pgm") != 0
    steps = np.stack([read_image(scene_dir / f"step_{m:03d}.pgm") != 0 for m in range(2, len(clean) + 1)])
    return SceneSequence(ImageStack(images), truth, steps, np.zeros_like(truth)), meta


def cmd_compare(args) -> None:
    scene, meta = _load_scene(args.scene)
    noise = args.noise if args.noise is not None else NoiseModel.parse(meta["noise"])
    detectors = [d.strip() for d in args.detectors.split(",") if d.strip()]
    if args.seeds < 1:
        raise CliError("usage", f"--seeds must be positive, got {args.seeds}")
    seeds = [int(meta["seed"]) + k for k in range(args.seeds)]
    comp = run_comparison(scene, detectors, seeds, noise, float(meta.get("offset", 1.0)))
    files = {args.out.name: comp.to_csv().encode()}
    for det in dict.fromkeys(detectors):
        files[f"roc_{det.replace('/', '_')}.csv"] = comp.roc_csv(det).encode()
    _write_files(args.out.parent, files)
    for row in comp.rows:
        print(f"{row.detector}\tmean_auc={row.mean_auc:.4f}\ttime_ms={row.time_ms:.1f}")


COMMANDS = {
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "append": cmd_append,
    "roc": cmd_roc,
    "compare": cmd_compare,
}

_CATEGORIES = (
    (FormatError, "input"),
    (UnknownBasisError, "usage"),
    ((TransformError, StackError, ScreeningError, SceneError, EvaluationError, PipelineError), "compute"),
    (OSError, "io"),
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        for types, category in _CATEGORIES:
            if isinstance(exc, types):
                msg = str(exc).replace("\n", " ")
                print(f"error: {category}: {msg}", file=sys.stderr)
                return 1
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
