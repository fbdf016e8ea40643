"""Cross-view referring tracking metrics.

Per description: restrict the ground truth to the referred identities (every
prediction of a non-referred object counts as a false positive), match boxes
per (view, frame) by minimum-cost assignment on 1 - IoU, tally misses, false
positives and mismatched pairs for the matching accuracy, and solve a global
identity bijection for the identity F1. Aggregation over descriptions clamps
negative per-description accuracy at zero.

Ratios are computed with exact rational arithmetic and exported as floats.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .assignment import FORBIDDEN, CostMatrix, solve_lap
from .datamodel import BBox, Detection, LanguageDescription, Scene, Track, iou


class UndefinedMetricError(ValueError):
    """A metric's denominator is empty; the caller must apply its own rule."""


class UndefinedAggregateError(ValueError):
    """Aggregation over zero descriptions is undefined."""


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation parameters; the 0.5 IoU gate is standard practice."""

    iou_threshold: float = 0.5


@dataclass(frozen=True)
class MetricCounts:
    """Per-frame event tallies, index-aligned across the tuples."""

    frames: tuple[int, ...]
    misses: tuple[int, ...]
    false_positives: tuple[int, ...]
    mismatches: tuple[int, ...]
    gt_totals: tuple[int, ...]

    @property
    def miss_total(self) -> int:
        return sum(self.misses)

    @property
    def fp_total(self) -> int:
        return sum(self.false_positives)

    @property
    def mismatch_total(self) -> int:
        return sum(self.mismatches)

    @property
    def gt_total(self) -> int:
        return sum(self.gt_totals)


@dataclass(frozen=True)
class IdMeasures:
    """Global identity-assignment tallies and the derived precision/recall."""

    idtp: int
    idfp: int
    idfn: int

    @property
    def total_predicted(self) -> int:
        return self.idtp + self.idfp

    @property
    def total_gt(self) -> int:
        return self.idtp + self.idfn

    def cvidp_exact(self) -> Fraction:
        if self.total_predicted == 0:
            return Fraction(0)
        return Fraction(self.idtp, self.total_predicted)

    def cvidr_exact(self) -> Fraction:
        if self.total_gt == 0:
            return Fraction(0)
        return Fraction(self.idtp, self.total_gt)

    @property
    def cvidp(self) -> float:
        return float(self.cvidp_exact())

    @property
    def cvidr(self) -> float:
        return float(self.cvidr_exact())


@dataclass(frozen=True)
class FrameMatch:
    """Result of matching one (view, frame): index pairs into the inputs."""

    pairs: tuple[tuple[int, int], ...]
    unmatched_gt: tuple[int, ...]
    unmatched_pred: tuple[int, ...]


@dataclass(frozen=True)
class DescriptionResult:
    """All metric output for one language description."""

    description_id: str
    cvidf1: float
    cvma_raw: float
    counts: MetricCounts
    id_measures: IdMeasures
    cvidf1_exact: Fraction
    cvma_exact: Fraction


@dataclass(frozen=True)
class AggregateResult:
    """Per-description means: identity F1 and clamped matching accuracy."""

    n_l: int
    cvridf1: float
    cvrma: float
    cvridf1_exact: Fraction
    cvrma_exact: Fraction


def restrict_gt(scene: Scene, desc: LanguageDescription) -> tuple[Track, ...]:
    """Ground-truth tracks whose identity the description refers to.

    Everything else is excluded, so any prediction matching a non-referred
    object can only be counted as a false positive.
    """
    return tuple(t for t in scene.gt_tracks if t.identity in desc.referred_identities)


def match_frame(
    gt_dets: Sequence[Detection],
    pred_dets: Sequence[Detection],
    iou_threshold: float = 0.5,
) -> FrameMatch:
    """Minimum-cost matching of one (view, frame) on cost 1 - IoU.

    Pairs below the IoU threshold are forbidden; the matching maximizes the
    number of matches first, then total IoU. Indices refer to the input
    sequences as given.
    """
    if not gt_dets or not pred_dets:
        return FrameMatch(
            (), tuple(range(len(gt_dets))), tuple(range(len(pred_dets)))
        )
    rows = []
    any_feasible = False
    for g in gt_dets:
        row = []
        for p in pred_dets:
            overlap = iou(g.bbox, p.bbox)
            if overlap >= iou_threshold:
                row.append(1.0 - overlap)
                any_feasible = True
            else:
                row.append(FORBIDDEN)
        rows.append(row)
    if not any_feasible:
        return FrameMatch(
            (), tuple(range(len(gt_dets))), tuple(range(len(pred_dets)))
        )
    assignment = solve_lap(CostMatrix.from_rows(rows))
    matched_gt = {r for r, _ in assignment.pairs}
    matched_pred = {c for _, c in assignment.pairs}
    return FrameMatch(
        assignment.pairs,
        tuple(i for i in range(len(gt_dets)) if i not in matched_gt),
        tuple(j for j in range(len(pred_dets)) if j not in matched_pred),
    )


def _index_by_slot(tracks: Sequence[Track]) -> dict[tuple[int, int], list[Detection]]:
    slots: dict[tuple[int, int], list[Detection]] = defaultdict(list)
    for track in tracks:
        for det in track.detections:
            slots[(det.view_id, det.frame)].append(det)
    return slots


def count_events(
    referred_gt: Sequence[Track],
    predictions: Sequence[Track],
    iou_threshold: float = 0.5,
) -> MetricCounts:
    """Per-frame misses, false positives, mismatched pairs, and GT totals.

    A mismatched pair is either temporal (a ground-truth identity matched in
    some view to a different predicted identity than at its previous matched
    frame in that view) or cross-view (an unordered pair of views where the
    same ground-truth identity is matched to two different predicted
    identities at the same frame). Frames where the referred objects are
    absent still contribute their false positives.
    """
    gt_slots = _index_by_slot(referred_gt)
    pred_slots = _index_by_slot(predictions)
    frames = sorted({f for _, f in gt_slots} | {f for _, f in pred_slots})
    views = sorted({v for v, _ in gt_slots} | {v for v, _ in pred_slots})

    last_matched: dict[tuple[int, int], int] = {}  # (gt identity, view) -> pred identity
    out_frames: list[int] = []
    out_m: list[int] = []
    out_fp: list[int] = []
    out_mme: list[int] = []
    out_gt: list[int] = []
    for frame in frames:
        m_t = fp_t = gt_t = 0
        matched_here: dict[int, dict[int, int]] = defaultdict(dict)  # gt id -> view -> pred id
        for view in views:
            gts = sorted(gt_slots.get((view, frame), []), key=lambda d: d.identity)
            preds = sorted(pred_slots.get((view, frame), []), key=lambda d: d.identity)
            gt_t += len(gts)
            match = match_frame(gts, preds, iou_threshold)
            m_t += len(match.unmatched_gt)
            fp_t += len(match.unmatched_pred)
            for gi, pj in match.pairs:
                matched_here[gts[gi].identity][view] = preds[pj].identity
        temporal = 0
        crossview = 0
        for gt_id in sorted(matched_here):
            by_view = matched_here[gt_id]
            for view in sorted(by_view):
                pred_id = by_view[view]
                previous = last_matched.get((gt_id, view))
                if previous is not None and previous != pred_id:
                    temporal += 1
                last_matched[(gt_id, view)] = pred_id
            pred_ids = [by_view[v] for v in sorted(by_view)]
            for i in range(len(pred_ids)):
                for j in range(i + 1, len(pred_ids)):
                    if pred_ids[i] != pred_ids[j]:
                        crossview += 1
        out_frames.append(frame)
        out_m.append(m_t)
        out_fp.append(fp_t)
        out_mme.append(temporal + crossview)
        out_gt.append(gt_t)
    return MetricCounts(
        tuple(out_frames), tuple(out_m), tuple(out_fp), tuple(out_mme), tuple(out_gt)
    )


def cvma_exact(counts: MetricCounts) -> Fraction:
    """Matching accuracy as an exact rational: 1 - (m + fp + 2*mme) / gt.

    May be negative when errors outnumber ground-truth objects.
    """
    if counts.gt_total == 0:
        raise UndefinedMetricError("matching accuracy is undefined with no GT objects")
    penalty = counts.miss_total + counts.fp_total + 2 * counts.mismatch_total
    return Fraction(1) - Fraction(penalty, counts.gt_total)


def cvma(counts: MetricCounts) -> float:
    return float(cvma_exact(counts))


def id_measures(
    referred_gt: Sequence[Track],
    predictions: Sequence[Track],
    iou_threshold: float = 0.5,
) -> IdMeasures:
    """Identity tallies under the optimal global GT/prediction bijection.

    Detections are pooled across all views and frames; each candidate
    (gt identity, predicted identity) pair is scored by the number of
    (view, frame) slots where the two boxes overlap at or above the IoU
    threshold, and a bijection maximizing the total overlap is solved exactly.
    """
    total_gt = sum(len(t.detections) for t in referred_gt)
    total_pred = sum(len(t.detections) for t in predictions)
    gt_ids = sorted(t.identity for t in referred_gt)
    pred_ids = sorted(t.identity for t in predictions)
    if not gt_ids or not pred_ids:
        return IdMeasures(0, total_pred, total_gt)
    gt_boxes: dict[int, dict[tuple[int, int], BBox]] = {
        t.identity: {(d.view_id, d.frame): d.bbox for d in t.detections} for t in referred_gt
    }
    pred_boxes: dict[int, dict[tuple[int, int], BBox]] = {
        t.identity: {(d.view_id, d.frame): d.bbox for d in t.detections} for t in predictions
    }
    overlap = [[0] * len(pred_ids) for _ in gt_ids]
    for i, g in enumerate(gt_ids):
        g_slots = gt_boxes[g]
        for j, p in enumerate(pred_ids):
            p_slots = pred_boxes[p]
            count = 0
            for slot, box in g_slots.items():
                other = p_slots.get(slot)
                if other is not None and iou(box, other) >= iou_threshold:
                    count += 1
            overlap[i][j] = count
    # Zero-overlap pairs stay feasible at cost 0, so maximum-cardinality
    # matching coincides with maximum total overlap.
    costs = [[-float(v) for v in row] for row in overlap]
    assignment = solve_lap(CostMatrix.from_rows(costs))
    idtp = sum(overlap[r][c] for r, c in assignment.pairs)
    return IdMeasures(idtp, total_pred - idtp, total_gt - idtp)


def cvidf1_exact(measures: IdMeasures) -> Fraction:
    """Harmonic mean of identity precision and recall; 0 when both are 0."""
    p = measures.cvidp_exact()
    r = measures.cvidr_exact()
    if p + r == 0:
        return Fraction(0)
    return 2 * p * r / (p + r)


def cvidf1(measures: IdMeasures) -> float:
    return float(cvidf1_exact(measures))


def evaluate_description(
    scene: Scene,
    desc: LanguageDescription,
    predictions: Sequence[Track],
    config: EvalConfig = EvalConfig(),
) -> DescriptionResult:
    """Evaluate one description's predictions against the restricted GT."""
    referred = restrict_gt(scene, desc)
    counts = count_events(referred, predictions, config.iou_threshold)
    total_pred = sum(len(t.detections) for t in predictions)
    if counts.gt_total > 0:
        raw = cvma_exact(counts)
    elif total_pred == 0:
        # Empty referred set and an empty tracker output is a success.
        raw = Fraction(1)
    else:
        raw = Fraction(1) - Fraction(counts.fp_total, max(counts.gt_total, 1))
    measures = id_measures(referred, predictions, config.iou_threshold)
    if counts.gt_total == 0 and total_pred == 0:
        f1 = Fraction(1)
    else:
        f1 = cvidf1_exact(measures)
    return DescriptionResult(
        description_id=desc.id,
        cvidf1=float(f1),
        cvma_raw=float(raw),
        counts=counts,
        id_measures=measures,
        cvidf1_exact=f1,
        cvma_exact=raw,
    )


def aggregate(results: Sequence[DescriptionResult]) -> AggregateResult:
    """Means over descriptions; negative matching accuracy clamps to zero."""
    if not results:
        raise UndefinedAggregateError("aggregation over zero descriptions is undefined")
    n = len(results)
    f1_sum = sum((r.cvidf1_exact for r in results), Fraction(0))
    ma_sum = sum((max(r.cvma_exact, Fraction(0)) for r in results), Fraction(0))
    cvridf1_frac = f1_sum / n
    cvrma_frac = ma_sum / n
    return AggregateResult(
        n_l=n,
        cvridf1=float(cvridf1_frac),
        cvrma=float(cvrma_frac),
        cvridf1_exact=cvridf1_frac,
        cvrma_exact=cvrma_frac,
    )
