"""Phrase-grounding evaluation metrics: IoU, dataset-pooled AP, Recall@K.

AP follows the standard detection convention: predictions pooled across all
queries, sorted by score (stable on ties), greedily matched to the
highest-IoU unmatched ground truth of their own query, with
precision-envelope interpolation of the PR curve. The final AP averages over
IoU thresholds 0.5:0.05:0.95 by default. AP is dataset-pooled, not averaged
per phrase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .data import BBox, load_annotations
from .errors import ContractViolation
from .losses import iou_area_terms

DEFAULT_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
DEFAULT_RECALL_IOU = 0.5


@dataclass(frozen=True)
class EvalRecord:
    """Ground truth boxes and scored predictions for one query phrase."""

    query_id: str
    gt_boxes: Tuple[BBox, ...]
    predictions: Tuple[Tuple[BBox, float], ...]

    def __init__(self, query_id, gt_boxes: Sequence[BBox], predictions=()):
        if not gt_boxes:
            raise ContractViolation(f"{query_id}: gt_boxes must be non-empty")
        for _, score in predictions:
            if score != score or score in (float("inf"), float("-inf")):
                raise ContractViolation(f"{query_id}: scores must be finite")
        object.__setattr__(self, "query_id", query_id)
        object.__setattr__(self, "gt_boxes", tuple(gt_boxes))
        object.__setattr__(self, "predictions", tuple(predictions))


def iou(a: BBox, b: BBox) -> float:
    inter, union, _ = iou_area_terms(a, b)
    return inter / union if union > 0 else 0.0


def _match_flags(records: Sequence[EvalRecord], threshold: float) -> Tuple[List[bool], int]:
    """Pooled, score-sorted TP/FP flags plus total ground-truth count."""
    pooled = []  # (score, insertion order, record idx, box)
    order = 0
    for r_idx, rec in enumerate(records):
        for box, score in rec.predictions:
            pooled.append((score, order, r_idx, box))
            order += 1
    pooled.sort(key=lambda t: (-t[0], t[1]))

    gt_used = [[False] * len(rec.gt_boxes) for rec in records]
    flags = []
    for _, _, r_idx, box in pooled:
        best_iou, best_gt = -1.0, None
        for g_idx, gt in enumerate(records[r_idx].gt_boxes):
            if gt_used[r_idx][g_idx]:
                continue
            value = iou(box, gt)
            if value >= threshold and value > best_iou:
                best_iou, best_gt = value, g_idx
        if best_gt is not None:
            gt_used[r_idx][best_gt] = True
            flags.append(True)
        else:
            flags.append(False)
    total_gt = sum(len(rec.gt_boxes) for rec in records)
    return flags, total_gt


def _ap_at_threshold(records: Sequence[EvalRecord], threshold: float) -> float:
    flags, total_gt = _match_flags(records, threshold)
    if total_gt == 0:
        return 0.0
    recalls, precisions = [], []
    tp = fp = 0
    for is_tp in flags:
        tp += int(is_tp)
        fp += int(not is_tp)
        recalls.append(tp / total_gt)
        precisions.append(tp / (tp + fp))
    # precision envelope: p(r) = max precision at recall >= r
    area = 0.0
    prev_recall = 0.0
    for i, r in enumerate(recalls):
        if r > prev_recall:
            envelope = max(precisions[i:])
            area += (r - prev_recall) * envelope
            prev_recall = r
    return area


def average_precision(
    records: Sequence[EvalRecord],
    thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
) -> float:
    """Mean AP over IoU thresholds (0.5 to 0.95 step 0.05 by default)."""
    if not thresholds:
        raise ContractViolation("thresholds must be non-empty")
    return sum(_ap_at_threshold(records, t) for t in thresholds) / len(thresholds)


def recall_at_k(
    records: Sequence[EvalRecord], k: int, iou_threshold: float = DEFAULT_RECALL_IOU
) -> float:
    """Fraction of queries whose top-k predictions hit any GT at IoU >= threshold."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    if not records:
        return 0.0
    hits = 0
    for rec in records:
        ranked = sorted(
            range(len(rec.predictions)), key=lambda i: (-rec.predictions[i][1], i)
        )[:k]
        for idx in ranked:
            box = rec.predictions[idx][0]
            if any(iou(box, gt) >= iou_threshold for gt in rec.gt_boxes):
                hits += 1
                break
    return hits / len(records)


def records_from_files(annotations_path, predictions_path) -> List[EvalRecord]:
    """Join an annotation file with a prediction file by query_id (image_id)."""
    samples = load_annotations(annotations_path)
    with open(predictions_path, "r", encoding="utf-8") as fh:
        pred_doc = json.load(fh)
    gt_by_query = {
        s.image_id: [b for ann in s.annotations for b in ann.boxes] for s in samples
    }
    preds_by_query = {}
    for entry in pred_doc.get("predictions", []):
        qid = entry["query_id"]
        if qid not in gt_by_query:
            raise ContractViolation(f"prediction query_id {qid!r} not in annotations")
        boxes = [BBox(*map(float, b)) for b in entry["boxes"]]
        scores = [float(s) for s in entry["scores"]]
        if len(boxes) != len(scores):
            raise ContractViolation(f"{qid}: boxes/scores length mismatch")
        preds_by_query[qid] = list(zip(boxes, scores))
    return [
        EvalRecord(qid, gt, preds_by_query.get(qid, []))
        for qid, gt in gt_by_query.items()
        if gt
    ]


def evaluate_prediction_files(annotations_path, predictions_path) -> dict:
    """AP and R@{1,5,10} for a prediction file, keyed ap/r1/r5/r10."""
    records = records_from_files(annotations_path, predictions_path)
    scores = {"ap": average_precision(records)}
    for k in (1, 5, 10):
        scores[f"r{k}"] = recall_at_k(records, k)
    return scores
