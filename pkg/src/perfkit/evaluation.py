"""Lesion-level evaluation: candidate extraction, matching, FROC analysis,
quadratic weighted kappa and Dice.

Conventions (documented defaults, configurable where noted):
  - a candidate hits a ground-truth lesion when it covers >= `hit_ratio`
    (default 0.1) of the lesion's voxels; the lesion with the largest covered
    fraction wins;
  - detection errors enter the grading kappa through a 0-th "none" category:
    missed lesions land in column 0, false positives in row 0;
  - majority-vote ties for a candidate's grade resolve to the higher grade.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import (
    GsGroup,
    LabelVolume,
    LesionAnnotation,
    ProbabilityMap,
    gs_from_label_class,
    is_connected_26,
)

DEFAULT_THRESHOLD = 0.5
DEFAULT_HIT_RATIO = 0.1

# GS categories for the lesion-level confusion matrix: none + the 4 grades.
KAPPA_CATEGORIES = 5


@dataclass(frozen=True)
class LesionCandidate:
    """A predicted lesion: a connected voxel blob with a detection score."""

    voxel_set: frozenset
    score: float
    predicted_gs: GsGroup
    patient_id: str

    def __post_init__(self) -> None:
        voxels = frozenset(tuple(int(c) for c in v) for v in self.voxel_set)
        if not voxels:
            raise ValueError("candidate voxel set must be nonempty")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"candidate score must be in [0, 1], got {self.score}")
        if int(self.predicted_gs) < 1:
            raise ValueError("candidate grade must be a lesion grade (>= 1)")
        if not is_connected_26(voxels):
            raise ValueError("candidate voxel set is not 26-connected")
        object.__setattr__(self, "voxel_set", voxels)


@dataclass(frozen=True)
class FrocCurve:
    """Operating points (fp/patient, sensitivity), one per score threshold."""

    points: tuple[tuple[float, float], ...]
    thresholds: tuple[float, ...]
    n_patients: int
    n_lesions: int

    def __post_init__(self) -> None:
        pts = tuple((float(fp), float(se)) for fp, se in self.points)
        if not pts or len(pts) != len(self.thresholds):
            raise ValueError("curve needs one threshold per point")
        fps = [p[0] for p in pts]
        sens = [p[1] for p in pts]
        if any(fp < 0 for fp in fps) or any(not 0.0 <= s <= 1.0 for s in sens):
            raise ValueError("fp/patient must be >= 0 and sensitivity in [0, 1]")
        if any(b < a for a, b in zip(fps, fps[1:])) or any(b < a for a, b in zip(sens, sens[1:])):
            raise ValueError("curve must be sorted with non-decreasing fp and sensitivity")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    @property
    def max_sensitivity(self) -> float:
        return self.points[-1][1]

    @property
    def max_fp(self) -> float:
        return self.points[-1][0]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Ordinal confusion counts; rows are ground truth, columns predictions."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (arr < 0).any():
            raise ValueError("confusion counts must be non-negative")
        if arr.sum() == 0:
            raise ValueError("confusion matrix must have at least one entry")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)


def extract_candidates(
    pmap: ProbabilityMap,
    cs_only: bool = False,
    threshold: float = DEFAULT_THRESHOLD,
    patient_id: str = "",
) -> list[LesionCandidate]:
    """Connected components of voxels whose summed lesion probability exceeds
    the threshold.

    `cs_only` restricts the lesion mass to clinically significant classes
    (GS > 6). The candidate score is the mean lesion mass over the component;
    its grade is the per-voxel argmax majority among lesion classes, ties
    resolving to the higher grade.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    classes = (3, 4, 5) if cs_only else (2, 3, 4, 5)
    mass = pmap.probs[..., classes].sum(axis=3)
    foreground = mass > threshold
    comp, n_comp = ndimage.label(foreground, structure=np.ones((3, 3, 3), dtype=bool))
    out: list[LesionCandidate] = []
    for label in range(1, n_comp + 1):
        idx = np.nonzero(comp == label)
        score = float(mass[idx].mean())
        lesion_probs = pmap.probs[idx][:, list(classes)]
        votes = np.bincount(np.argmax(lesion_probs, axis=1), minlength=len(classes))
        winner = max(range(len(classes)), key=lambda c: (votes[c], c))  # tie -> higher GS
        out.append(
            LesionCandidate(
                voxel_set=frozenset(zip(*(a.tolist() for a in idx))),
                score=min(score, 1.0),
                predicted_gs=gs_from_label_class(classes[winner]),
                patient_id=patient_id,
            )
        )
    return out


def overlap_ratio(cand: LesionCandidate, gt: LesionAnnotation) -> float:
    """Fraction of the ground-truth lesion covered by the candidate."""
    return len(cand.voxel_set & gt.voxel_set) / len(gt.voxel_set)


def match(
    cand: LesionCandidate,
    gts: list[LesionAnnotation],
    hit_ratio: float = DEFAULT_HIT_RATIO,
) -> LesionAnnotation | None:
    """The ground-truth lesion this candidate hits, or None (false positive).

    The candidate matches the lesion maximizing the covered fraction
    |cand & gt| / |gt|, provided that fraction reaches `hit_ratio`; ratio ties
    break to the lower lesion id.
    """
    if not 0.0 < hit_ratio <= 1.0:
        raise ValueError(f"hit ratio must lie in (0, 1], got {hit_ratio}")
    best: LesionAnnotation | None = None
    best_ratio = 0.0
    for gt in sorted(gts, key=lambda g: g.id):
        if gt.patient_id != cand.patient_id:
            raise ValueError("candidate and annotations must belong to one patient")
        r = overlap_ratio(cand, gt)
        if r >= hit_ratio and r > best_ratio:
            best, best_ratio = gt, r
    return best


def _match_all(
    candidates: list[LesionCandidate],
    annotations: list[LesionAnnotation],
    hit_ratio: float,
) -> list[tuple[LesionAnnotation, float] | None]:
    by_patient: dict[str, list[LesionAnnotation]] = defaultdict(list)
    for a in annotations:
        by_patient[a.patient_id].append(a)
    out = []
    for c in candidates:
        gt = match(c, by_patient.get(c.patient_id, []), hit_ratio)
        out.append(None if gt is None else (gt, overlap_ratio(c, gt)))
    return out


def froc(
    candidates: list[LesionCandidate],
    annotations: list[LesionAnnotation],
    n_patients: int | None = None,
    hit_ratio: float = DEFAULT_HIT_RATIO,
) -> FrocCurve:
    """Sweep the detection-score threshold and record one operating point each.

    At threshold tau the kept candidates are those scoring >= tau; sensitivity
    is the fraction of ground-truth lesions hit by any kept candidate and
    fp/patient counts the kept candidates hitting nothing. The sweep starts at
    +inf (empty kept set), so every curve begins at (0, 0).
    """
    if not annotations:
        raise ValueError("FROC needs at least one ground-truth lesion")
    patients = {a.patient_id for a in annotations} | {c.patient_id for c in candidates}
    n_pat = n_patients if n_patients is not None else len(patients)
    if n_pat < 1:
        raise ValueError("FROC needs at least one patient")
    n_lesions = len(annotations)

    matches = _match_all(candidates, annotations, hit_ratio)
    order = sorted(range(len(candidates)), key=lambda i: -candidates[i].score)

    thresholds = [np.inf]
    points = [(0.0, 0.0)]
    hit_keys: set[tuple[str, int]] = set()
    n_fp = 0
    for rank, i in enumerate(order):
        if matches[i] is None:
            n_fp += 1
        else:
            gt = matches[i][0]
            hit_keys.add((gt.patient_id, gt.id))
        score = candidates[i].score
        last_of_score = rank + 1 == len(order) or candidates[order[rank + 1]].score != score
        if last_of_score:
            thresholds.append(score)
            points.append((n_fp / n_pat, len(hit_keys) / n_lesions))
    return FrocCurve(tuple(points), tuple(thresholds), n_pat, n_lesions)


def sensitivity_at_fp(curve: FrocCurve, fp_target: float) -> float:
    """Sensitivity read off the curve at a false-positive budget.

    Linear interpolation between bracketing points; targets beyond the curve's
    maximum fp saturate at the maximum sensitivity, targets below the first
    point scale linearly from (0, 0).
    """
    if fp_target < 0:
        raise ValueError("fp target must be >= 0")
    # Upper envelope: one point per distinct fp value (points are sorted, so
    # the last entry at each fp carries the best sensitivity).
    env: dict[float, float] = {}
    for fp, se in curve.points:
        env[fp] = se
    fps = sorted(env)
    sens = [env[f] for f in fps]
    if fp_target >= fps[-1]:
        return sens[-1]
    if fps[0] > 0.0:
        fps.insert(0, 0.0)
        sens.insert(0, 0.0)
    return float(np.interp(fp_target, fps, sens))


def quadratic_weighted_kappa(matrix: ConfusionMatrix | np.ndarray) -> float:
    """Cohen's kappa with quadratic penalty weights over ordinal categories.

    kappa = 1 - sum(w * O) / sum(w * E) with w_ij = (i - j)^2 / (C - 1)^2,
    O the observed proportions and E the outer product of the marginals.
    Returns 0 by convention when the expected disagreement is zero (all mass
    on one category in both marginals).
    """
    counts = matrix.counts if isinstance(matrix, ConfusionMatrix) else np.asarray(matrix)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.shape[0] < 2:
        raise ValueError("kappa needs a square matrix with at least 2 categories")
    total = counts.sum()
    if total <= 0:
        raise ValueError("kappa needs at least one rated item")
    c = counts.shape[0]
    observed = counts.astype(np.float64) / total
    idx = np.arange(c, dtype=np.float64)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (c - 1) ** 2
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    denom = float((weights * expected).sum())
    if denom == 0.0:
        return 0.0
    return float(1.0 - (weights * observed).sum() / denom)


def lesion_grading_confusion(
    candidates: list[LesionCandidate],
    annotations: list[LesionAnnotation],
    hit_ratio: float = DEFAULT_HIT_RATIO,
) -> ConfusionMatrix:
    """Lesion-level 5x5 confusion over {none, GS 3+3, GS 3+4, GS 4+3, GS >= 8}.

    Each ground-truth lesion contributes one entry at (its grade, grade of the
    highest-overlap matching candidate), column 0 when missed. Each false
    positive contributes at (0, its predicted grade).
    """
    counts = np.zeros((KAPPA_CATEGORIES, KAPPA_CATEGORIES), dtype=np.int64)
    matches = _match_all(candidates, annotations, hit_ratio)

    # Best candidate per ground-truth lesion: highest covered fraction, then
    # higher score, then higher grade. Content-based ranks keep the matrix
    # independent of candidate order.
    best: dict[tuple[str, int], tuple[float, float, int]] = {}
    for i, m in enumerate(matches):
        if m is None:
            counts[0, int(candidates[i].predicted_gs)] += 1
            continue
        gt, ratio = m
        key = (gt.patient_id, gt.id)
        rank = (ratio, candidates[i].score, int(candidates[i].predicted_gs))
        if key not in best or rank > best[key]:
            best[key] = rank

    for gt in annotations:
        entry = best.get((gt.patient_id, gt.id))
        counts[int(gt.gs), 0 if entry is None else entry[2]] += 1
    return ConfusionMatrix(counts)


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice overlap of two boolean masks; 1.0 when both are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    size = int(a.sum()) + int(b.sum())
    if size == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / size


def annotations_from_labels(labels: LabelVolume, patient_id: str) -> list[LesionAnnotation]:
    """Derive lesion annotations from a label map: one annotation per
    26-connected component of each lesion class."""
    out: list[LesionAnnotation] = []
    next_id = 1
    for label_class in (2, 3, 4, 5):
        comp, n_comp = ndimage.label(labels.labels == label_class, structure=np.ones((3, 3, 3), dtype=bool))
        for c in range(1, n_comp + 1):
            idx = np.nonzero(comp == c)
            out.append(
                LesionAnnotation(
                    id=next_id,
                    patient_id=patient_id,
                    gs=gs_from_label_class(label_class),
                    voxel_set=frozenset(zip(*(a.tolist() for a in idx))),
                )
            )
            next_id += 1
    return out
