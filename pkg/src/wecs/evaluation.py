"""ROC evaluation of change detectors on synthetic scenes."""

from __future__ import annotations

import io
import re
import time
from dataclasses import dataclass, replace

import numpy as np

from .dwt import upsample_coeff_map
from .screening import correlation_map
from .series import (
    CoeffStack,
    ImageStack,
    change_signal,
    deviation_cube,
    log_transform,
    transition_cube,
)
from .synth import NoiseModel, SceneSequence, add_speckle

N_THRESHOLDS = 100


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreMap:
    values: np.ndarray
    detector_id: str


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float


def roc_curve(score: ScoreMap | np.ndarray, truth: np.ndarray, n_thresholds: int = N_THRESHOLDS) -> RocCurve:
    """ROC over equally spaced thresholds between the score's min and max.

    A pixel counts as detected when its score is strictly above the threshold.
    The AUC is the trapezoidal area under the points sorted by FPR, with the
    curve anchored at (0, 0) and (1, 1).
    """
    s = np.asarray(getattr(score, "values", score), dtype=np.float64)
    t = np.asarray(truth).astype(bool)
    if s.shape != t.shape:
        raise EvaluationError(f"score dims {s.shape} differ from truth dims {t.shape}")
    if not np.all(np.isfinite(s)):
        raise EvaluationError("score map contains non-finite values")
    pos = np.sort(s[t])
    neg = np.sort(s[~t])
    if pos.size == 0 or neg.size == 0:
        raise EvaluationError("truth mask needs at least one changed and one unchanged pixel")
    thresholds = np.linspace(s.min(), s.max(), n_thresholds)
    tp = pos.size - np.searchsorted(pos, thresholds, side="right")
    fp = neg.size - np.searchsorted(neg, thresholds, side="right")
    tpr = tp / pos.size
    fpr = fp / neg.size
    return RocCurve(thresholds, tpr, fpr, auc_from_points(fpr, tpr))


def auc_from_points(fpr: np.ndarray, tpr: np.ndarray) -> float:
    f = np.concatenate([[0.0], fpr, [1.0]])
    t = np.concatenate([[0.0], tpr, [1.0]])
    order = np.lexsort((t, f))
    return float(np.trapezoid(t[order], f[order]))


def score_truth_correlation(score: np.ndarray, truth: np.ndarray) -> float:
    s = np.asarray(score, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    sc, tc = s - s.mean(), t - t.mean()
    den = np.sqrt(np.dot(sc, sc) * np.dot(tc, tc))
    return float(np.dot(sc, tc) / den) if den > 0 else 0.0


def detector_wecs(stack: ImageStack, bank: str, J: int, kind: str, boundary: str = "auto") -> ScoreMap:
    """|R| of the d- or t-screening, copied back to pixel resolution.

    The stack is analysed as given (log-transform it first for speckled data).
    """
    if kind not in ("d", "t"):
        raise EvaluationError(f"kind must be 'd' or 't', got {kind!r}")
    cs = CoeffStack.from_images(stack.images, bank, J, boundary)
    cube = deviation_cube(cs) if kind == "d" else transition_cube(cs)
    cmap = correlation_map(cube, change_signal(cube))
    score = upsample_coeff_map(np.abs(cmap.values), stack.dims, J, "nearest")
    label = f"pixel-{kind}" if J == 0 else f"wecs-{kind}/{bank}/J{J}"
    return ScoreMap(score, label)


def detector_logratio(stack: ImageStack) -> ScoreMap:
    """Sum over time of absolute consecutive log differences."""
    if not stack.log_domain:
        raise EvaluationError("log-ratio aggregation expects a log-domain stack")
    if stack.n < 2:
        raise EvaluationError(f"need at least two images, got {stack.n}")
    return ScoreMap(np.abs(np.diff(stack.images, axis=0)).sum(axis=0), "logratio")


_WECS_ID = re.compile(r"^wecs-([dt])/([a-z0-9]+)/J(\d+)$")


def run_detector(detector_id: str, stack: ImageStack) -> ScoreMap:
    """Dispatch on ids like ``wecs-d/db2/J2``, ``pixel-t`` or ``logratio``."""
    if detector_id == "logratio":
        return detector_logratio(stack)
    if detector_id in ("pixel-d", "pixel-t"):
        return detector_wecs(stack, "haar", 0, detector_id[-1])
    m = _WECS_ID.match(detector_id)
    if m is None:
        raise EvaluationError(
            f"unknown detector {detector_id!r}; expected wecs-<d|t>/<basis>/J<level>, pixel-d, pixel-t or logratio"
        )
    return detector_wecs(stack, m.group(2), int(m.group(3)), m.group(1))


def noisy_replicate(scene: SceneSequence, noise: NoiseModel, seed: int, offset: float = 1.0) -> ImageStack:
    """Noisy copy of the scene in the additive domain detectors work in.

    Gamma speckle is applied to ``image + offset`` and then log-transformed.
    Gaussian (or no) noise is already additive and is returned as is.
    """
    noisy = add_speckle(scene.images, noise, seed, offset)
    if noise.kind == "gamma":
        return log_transform(noisy)
    return replace(noisy, log_domain=True)


@dataclass(frozen=True)
class ComparisonRow:
    detector: str
    aucs: tuple[float, ...]
    curves: tuple[RocCurve, ...]
    time_ms: float
    score_truth_corr: float

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.aucs))


@dataclass(frozen=True)
class Comparison:
    rows: tuple[ComparisonRow, ...]
    seeds: tuple[int, ...]

    def row(self, detector: str) -> ComparisonRow:
        for r in self.rows:
            if r.detector == detector:
                return r
        raise KeyError(detector)

    def to_csv(self, with_time: bool = True) -> str:
        out = io.StringIO()
        out.write("detector,mean_auc,time_ms,score_truth_corr\n" if with_time else "detector,mean_auc,score_truth_corr\n")
        for r in self.rows:
            if with_time:
                out.write(f"{r.detector},{r.mean_auc!r},{r.time_ms:.3f},{r.score_truth_corr!r}\n")
            else:
                out.write(f"{r.detector},{r.mean_auc!r},{r.score_truth_corr!r}\n")
        return out.getvalue()

    def roc_csv(self, detector: str) -> str:
        out = io.StringIO()
        out.write("seed,threshold,fpr,tpr\n")
        for seed, c in zip(self.seeds, self.row(detector).curves):
            for thr, f, t in zip(c.thresholds.tolist(), c.fpr.tolist(), c.tpr.tolist()):
                out.write(f"{seed},{thr!r},{f!r},{t!r}\n")
        return out.getvalue()


def run_comparison(
    scene: SceneSequence,
    detectors: list[str],
    seeds: list[int],
    noise: NoiseModel = NoiseModel("gamma", 4.0),
    offset: float = 1.0,
) -> Comparison:
    """Mean AUC, ROC curves, timing and score/truth correlation per detector.

    Every detector sees the same noisy replicate for a given seed; rows keep
    the order of ``detectors``.
    """
    if not detectors:
        raise EvaluationError("no detectors given")
    if not seeds:
        raise EvaluationError("no seeds given")
    replicates = [noisy_replicate(scene, noise, s, offset) for s in seeds]
    rows = []
    for det in detectors:
        curves, corrs = [], []
        elapsed = 0.0
        for stack in replicates:
            t0 = time.perf_counter()
            score = run_detector(det, stack)
            elapsed += time.perf_counter() - t0
            curves.append(roc_curve(score, scene.truth_mask))
            corrs.append(score_truth_correlation(score.values, scene.truth_mask))
        rows.append(
            ComparisonRow(
                det,
                tuple(c.auc for c in curves),
                tuple(curves),
                1000.0 * elapsed / len(replicates),
                float(np.mean(corrs)),
            )
        )
    return Comparison(tuple(rows), tuple(int(s) for s in seeds))
