"""Reference implementations of the three grounding training losses.

These are evaluation-only oracles: symmetric object-text contrastive
alignment, soft token cross entropy, and L1 + GIoU box regression. Softmax
terms use max-subtracted log-sum-exp for stability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Set, Tuple

import numpy as np

from .data import BBox
from .errors import ContractViolation, ParameterError

DEFAULT_TEMPERATURE = 0.07


@dataclass(frozen=True)
class EmbeddingBatch:
    """Object and text embedding matrices (L x D and E x D)."""

    object_embeddings: np.ndarray
    text_embeddings: np.ndarray

    def __post_init__(self):
        obj = np.asarray(self.object_embeddings, dtype=np.float64)
        txt = np.asarray(self.text_embeddings, dtype=np.float64)
        if obj.ndim != 2 or txt.ndim != 2 or obj.shape[1] != txt.shape[1]:
            raise ContractViolation(
                f"incompatible embedding shapes {obj.shape} vs {txt.shape}"
            )
        if not (np.isfinite(obj).all() and np.isfinite(txt).all()):
            raise ContractViolation("embeddings must be finite")
        object.__setattr__(self, "object_embeddings", obj)
        object.__setattr__(self, "text_embeddings", txt)

    @property
    def num_objects(self) -> int:
        return self.object_embeddings.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.text_embeddings.shape[0]


@dataclass(frozen=True)
class AlignmentSets:
    """Positive token sets per object and positive object sets per token,
    0-indexed. The two directions must be duals of each other."""

    token_sets: Tuple[frozenset, ...]
    object_sets: Tuple[frozenset, ...]

    def __init__(self, token_sets: Sequence[Set[int]], object_sets: Sequence[Set[int]]):
        object.__setattr__(self, "token_sets", tuple(frozenset(s) for s in token_sets))
        object.__setattr__(self, "object_sets", tuple(frozenset(s) for s in object_sets))
        for i, ts in enumerate(self.token_sets):
            for j in ts:
                if i not in self.object_sets[j]:
                    raise ContractViolation(f"duality broken: {j} in T_{i}+ but {i} not in O_{j}+")
        for j, os_ in enumerate(self.object_sets):
            for i in os_:
                if j not in self.token_sets[i]:
                    raise ContractViolation(f"duality broken: {i} in O_{j}+ but {j} not in T_{i}+")

    @property
    def n_plus(self) -> int:
        return sum(1 for s in self.token_sets if s)


def _log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def contrastive_alignment_loss(
    batch: EmbeddingBatch, sets: AlignmentSets, tau: float = DEFAULT_TEMPERATURE
) -> float:
    """Symmetric InfoNCE over object/token pairs: (L_o + L_t) / 2.

    Objects (tokens) with empty positive sets contribute nothing; the
    normalizing softmax always runs over all tokens (objects)."""
    if tau <= 0:
        raise ParameterError("temperature must be positive")
    if len(sets.token_sets) != batch.num_objects or len(sets.object_sets) != batch.num_tokens:
        raise ContractViolation("alignment sets do not match batch dimensions")

    sim = batch.object_embeddings @ batch.text_embeddings.T / tau  # L x E
    log_p_tokens = _log_softmax(sim, axis=1)  # per object, over tokens
    log_p_objects = _log_softmax(sim, axis=0)  # per token, over objects

    loss_obj = 0.0
    for i, positives in enumerate(sets.token_sets):
        if positives:
            loss_obj += -sum(log_p_tokens[i, j] for j in positives) / len(positives)
    loss_txt = 0.0
    for j, positives in enumerate(sets.object_sets):
        if positives:
            loss_txt += -sum(log_p_objects[i, j] for i in positives) / len(positives)
    return float((loss_obj + loss_txt) / 2.0)


@dataclass(frozen=True)
class SoftTokenBatch:
    """Per-object token-position logits with uniform-over-positives targets.

    ``targets`` rows for unmatched objects are all-zero and excluded from the
    loss; each matched row must be uniform on its support and sum to 1."""

    logits: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if logits.shape != targets.shape or logits.ndim != 2:
            raise ContractViolation("logits/targets must share an L x E shape")
        for row in targets:
            support = row[row > 0]
            if support.size and not (
                np.isclose(row.sum(), 1.0) and np.allclose(support, support[0])
            ):
                raise ContractViolation("target rows must be uniform over their support")
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "targets", targets)

    @property
    def matched_rows(self) -> np.ndarray:
        return self.targets.sum(axis=1) > 0


def soft_token_loss(batch: SoftTokenBatch, n_plus: int | None = None) -> Tuple[float, bool]:
    """Mean cross entropy over matched rows; returns (loss, empty_batch_flag)."""
    matched = batch.matched_rows
    if n_plus is None:
        n_plus = int(matched.sum())
    if n_plus == 0:
        return 0.0, True
    log_probs = _log_softmax(batch.logits, axis=1)
    total = -(batch.targets[matched] * log_probs[matched]).sum()
    return float(total / n_plus), False


def iou_area_terms(a: BBox, b: BBox) -> Tuple[float, float, float]:
    """(intersection, union, hull) areas shared by IoU and GIoU."""
    ix = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    union = a.area + b.area - inter
    hull = (max(a.x_max, b.x_max) - min(a.x_min, b.x_min)) * (
        max(a.y_max, b.y_max) - min(a.y_min, b.y_min)
    )
    return inter, union, hull


def giou(a: BBox, b: BBox) -> float:
    """IoU minus normalized hull waste; in (-1, 1], equals IoU when hull == union."""
    inter, union, hull = iou_area_terms(a, b)
    return inter / union - (hull - union) / hull


@dataclass(frozen=True)
class BoxRegressionBatch:
    predicted: Tuple[BBox, ...]
    target: Tuple[BBox, ...]

    def __init__(self, predicted: Sequence[BBox], target: Sequence[BBox]):
        if len(predicted) != len(target):
            raise ContractViolation("predicted/target lists must be equal length")
        object.__setattr__(self, "predicted", tuple(predicted))
        object.__setattr__(self, "target", tuple(target))

    @property
    def n_plus(self) -> int:
        return len(self.predicted)


def box_loss(batch: BoxRegressionBatch) -> Tuple[float, bool]:
    """(1/n+) sum of [L1 + (1 - GIoU)] over matched pairs; (loss, empty_flag)."""
    if batch.n_plus == 0:
        return 0.0, True
    total = 0.0
    for pred, tgt in zip(batch.predicted, batch.target):
        l1 = (
            abs(pred.x_min - tgt.x_min)
            + abs(pred.y_min - tgt.y_min)
            + abs(pred.x_max - tgt.x_max)
            + abs(pred.y_max - tgt.y_max)
        )
        total += l1 + (1.0 - giou(pred, tgt))
    return float(total / batch.n_plus), False
