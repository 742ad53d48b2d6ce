"""Thin adapters between mapping/array payloads and the pairaug core types."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Tuple

import numpy as np

from pairaug.data import (
    BBox,
    CharSpan,
    GroundingSample,
    ImageBuffer,
    PhraseAnnotation,
)
from pairaug.metrics import evaluate_prediction_files
from pairaug.pipeline import augment_sample, policy_from_mapping
from pairaug.textops import (
    classify_flippability,
    contains_color_words,
    find_positional_terms,
)


@dataclass
class BoundSample:
    """GroundingSample mirror plus the in-memory image (H x W x 3 uint8)."""

    image_id: str
    image_path: str
    width: int
    height: int
    caption: str
    annotations: List[dict] = field(default_factory=list)
    image: Optional[np.ndarray] = None

    @classmethod
    def from_core(cls, sample: GroundingSample, img: Optional[ImageBuffer] = None):
        return cls(
            image_id=sample.image_id,
            image_path=sample.image_path,
            width=sample.width,
            height=sample.height,
            caption=sample.caption,
            annotations=[
                {
                    "spans": [sp.as_list() for sp in ann.spans],
                    "boxes": [b.as_list() for b in ann.boxes],
                }
                for ann in sample.annotations
            ],
            image=None if img is None else np.asarray(img.pixels),
        )

    def to_core(self) -> Tuple[GroundingSample, Optional[ImageBuffer]]:
        sample = GroundingSample(
            image_id=self.image_id,
            image_path=self.image_path,
            width=self.width,
            height=self.height,
            caption=self.caption,
            annotations=[
                PhraseAnnotation(
                    spans=[CharSpan(int(s), int(e)) for s, e in ann["spans"]],
                    boxes=[BBox(*map(float, b)) for b in ann["boxes"]],
                )
                for ann in self.annotations
            ],
        )
        img = None if self.image is None else ImageBuffer(self.image)
        return sample, img


def py_augment(
    sample: BoundSample,
    policy: Mapping,
    seed: Optional[int] = None,
    epoch: int = 0,
) -> Tuple[BoundSample, dict]:
    """Augment one bound sample; identical results to the CLI on the same
    inputs. Policy mapping keys follow the TOML policy schema; an explicit
    seed overrides the mapping's [seed] section."""
    core_policy = policy_from_mapping(dict(policy))
    if seed is not None:
        from dataclasses import replace

        core_policy = replace(core_policy, global_seed=seed)
    core_sample, img = sample.to_core()
    if img is None:
        raise ValueError(f"{sample.image_id}: BoundSample.image is required")
    out_sample, out_img, report = augment_sample(core_sample, img, core_policy, epoch)
    return BoundSample.from_core(out_sample, out_img), report.to_dict()


def py_metrics(annotations_path, predictions_path) -> dict:
    """AP and R@{1,5,10}; parity with `pairaug eval` on the same files."""
    return evaluate_prediction_files(annotations_path, predictions_path)


def py_contains_color_words(caption: str) -> bool:
    return contains_color_words(caption)


def py_find_positional_terms(caption: str) -> List[dict]:
    return [
        {
            "span": m.span.as_list(),
            "matched_form": m.matched_form,
            "replacement": m.replacement,
        }
        for m in find_positional_terms(caption)
    ]


def py_classify_flippability(caption: str) -> dict:
    cls = classify_flippability(caption)
    return {
        "kind": cls.kind.value,
        "matches": [
            {
                "span": m.span.as_list(),
                "matched_form": m.matched_form,
                "replacement": m.replacement,
            }
            for m in cls.matches
        ],
    }
