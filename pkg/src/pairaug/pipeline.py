"""Per-sample augmentation orchestration.

Each sample gets its own rng stream derived from (global seed, image id,
epoch), so runs are reproducible and samples are independent. Application
order is fixed: flip, color jitter, blur, pixel mask, block mask — geometry
first, photometric second, occlusion last.
"""

from __future__ import annotations

import hashlib
import struct
import sys
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Tuple

import numpy as np

from .data import (
    BBox,
    CharSpan,
    GroundingSample,
    ImageBuffer,
    PhraseAnnotation,
    caption_bytes,
)
from .errors import ContractViolation, ParameterError
from .imageops import (
    JitterParams,
    MaskParams,
    block_mask,
    color_jitter,
    gaussian_blur,
    hflip,
    pixel_mask,
)
from .textops import (
    ColorLexicon,
    FlipKind,
    PositionalLexicon,
    classify_flippability,
    contains_color_words,
    default_color_lexicon,
    default_positional_lexicon,
    rewrite_sample_caption,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FLIP_MODES = ("off", "thflip", "thflip_plus")


@dataclass(frozen=True)
class AugPolicy:
    """Which augmentations may fire, how often, and with what parameter ranges."""

    flip_mode: str = "thflip_plus"
    flip_prob: float = 0.5
    color_prob: float = 0.5
    brightness_range: Tuple[float, float] = (0.6, 1.4)
    contrast_range: Tuple[float, float] = (0.6, 1.4)
    saturation_range: Tuple[float, float] = (0.6, 1.4)
    hue_range: Tuple[float, float] = (-0.05, 0.05)
    blur_prob: float = 0.5
    blur_sigma_range: Tuple[float, float] = (0.1, 2.0)
    pixel_mask_prob: float = 0.5
    pixel_mask_p: float = 0.75
    pixel_mask_fill: int = 0
    block_mask_prob: float = 0.5
    block_area_range: Tuple[float, float] = (0.02, 0.33)
    block_aspect_range: Tuple[float, float] = (0.3, 3.3)
    block_fill: Optional[int] = None  # None: per-image channel mean
    global_seed: int = 0

    def __post_init__(self):
        if self.flip_mode not in FLIP_MODES:
            raise ParameterError(f"flip_mode must be one of {FLIP_MODES}")
        for name in ("flip_prob", "color_prob", "blur_prob", "pixel_mask_prob",
                     "block_mask_prob", "pixel_mask_p"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return asdict(self)


def load_policy(path) -> AugPolicy:
    """Read an AugPolicy from its TOML file format."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return policy_from_mapping(doc)


_POLICY_KEYS = {
    "flip": {"mode", "prob"},
    "color": {"prob", "brightness", "contrast", "saturation", "hue"},
    "blur": {"prob", "sigma"},
    "pixel_mask": {"prob", "p", "fill"},
    "block_mask": {"prob", "area", "aspect", "fill"},
    "seed": {"value"},
}


def policy_from_mapping(doc: dict) -> AugPolicy:
    """Build an AugPolicy from a mapping shaped like the TOML policy file."""
    unknown = set(doc) - set(_POLICY_KEYS)
    if unknown:
        raise ParameterError(f"unknown policy sections: {sorted(unknown)}")
    for section, allowed in _POLICY_KEYS.items():
        extra = set(doc.get(section, {})) - allowed
        if extra:
            raise ParameterError(f"unknown key in [{section}]: {sorted(extra)}")
    kwargs = {}
    flip = doc.get("flip", {})
    if "mode" in flip:
        kwargs["flip_mode"] = flip["mode"]
    if "prob" in flip:
        kwargs["flip_prob"] = flip["prob"]
    color = doc.get("color", {})
    if "prob" in color:
        kwargs["color_prob"] = color["prob"]
    for key, target in (
        ("brightness", "brightness_range"),
        ("contrast", "contrast_range"),
        ("saturation", "saturation_range"),
        ("hue", "hue_range"),
    ):
        if key in color:
            kwargs[target] = tuple(color[key])
    blur = doc.get("blur", {})
    if "prob" in blur:
        kwargs["blur_prob"] = blur["prob"]
    if "sigma" in blur:
        kwargs["blur_sigma_range"] = tuple(blur["sigma"])
    pm = doc.get("pixel_mask", {})
    if "prob" in pm:
        kwargs["pixel_mask_prob"] = pm["prob"]
    if "p" in pm:
        kwargs["pixel_mask_p"] = pm["p"]
    if "fill" in pm:
        kwargs["pixel_mask_fill"] = pm["fill"]
    bm = doc.get("block_mask", {})
    if "prob" in bm:
        kwargs["block_mask_prob"] = bm["prob"]
    if "area" in bm:
        kwargs["block_area_range"] = tuple(bm["area"])
    if "aspect" in bm:
        kwargs["block_aspect_range"] = tuple(bm["aspect"])
    if "fill" in bm:
        kwargs["block_fill"] = None if bm["fill"] == "mean" else int(bm["fill"])
    seed = doc.get("seed", {})
    if "value" in seed:
        kwargs["global_seed"] = int(seed["value"])
    return AugPolicy(**kwargs)


_SEED_DOMAIN = b"pairaug.derive_seed.v1"


def derive_seed(global_seed: int, image_id: str, epoch: int) -> int:
    """Collision-resistant 64-bit mix of (global seed, sample id, epoch):
    the first 8 bytes, little-endian, of BLAKE2b over the packed inputs."""
    h = hashlib.blake2b(digest_size=8)
    h.update(_SEED_DOMAIN)
    h.update(struct.pack("<Q", global_seed & 0xFFFFFFFFFFFFFFFF))
    ident = image_id.encode("utf-8")
    h.update(struct.pack("<Q", len(ident)))
    h.update(ident)
    h.update(struct.pack("<Q", epoch & 0xFFFFFFFFFFFFFFFF))
    return struct.unpack("<Q", h.digest())[0]


@dataclass
class AugReport:
    """Record of what fired on one sample; replays to an identical output."""

    image_id: str
    epoch: int
    seed: int
    flip_fired: bool = False
    flip_classification: Optional[str] = None
    caption_rewritten: bool = False
    new_caption: Optional[str] = None
    color_fired: bool = False
    skipped_color_words: bool = False
    blur_fired: bool = False
    pixel_mask_fired: bool = False
    block_mask_fired: bool = False
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _flip_boxes(sample: GroundingSample) -> List[PhraseAnnotation]:
    w = sample.width
    return [
        PhraseAnnotation(
            spans=ann.spans,
            boxes=[BBox(w - b.x_max, b.y_min, w - b.x_min, b.y_max) for b in ann.boxes],
        )
        for ann in sample.annotations
    ]


def augment_sample(
    sample: GroundingSample,
    img: ImageBuffer,
    policy: AugPolicy,
    epoch: int = 0,
    color_lexicon: Optional[ColorLexicon] = None,
    positional_lexicon: Optional[PositionalLexicon] = None,
) -> Tuple[GroundingSample, ImageBuffer, AugReport]:
    """Apply the policy's augmentations to one sample, deterministically."""
    if (img.width, img.height) != (sample.width, sample.height):
        raise ContractViolation(
            f"{sample.image_id}: image is {img.width}x{img.height}, "
            f"annotations say {sample.width}x{sample.height}"
        )
    color_lexicon = color_lexicon or default_color_lexicon()
    positional_lexicon = positional_lexicon or default_positional_lexicon()

    seed = derive_seed(policy.global_seed, sample.image_id, epoch)
    rng = np.random.default_rng(seed)
    report = AugReport(image_id=sample.image_id, epoch=epoch, seed=seed)

    # all firing decisions come first so parameter draws cannot shift them
    draws = rng.random(5)
    want_flip = policy.flip_mode != "off" and draws[0] < policy.flip_prob
    want_color = draws[1] < policy.color_prob
    want_blur = draws[2] < policy.blur_prob
    want_pixel = draws[3] < policy.pixel_mask_prob
    want_block = draws[4] < policy.block_mask_prob

    caption = sample.caption
    annotations = list(sample.annotations)

    if want_flip:
        classification = classify_flippability(caption, positional_lexicon)
        report.flip_classification = classification.kind.value
        do_flip = classification.kind == FlipKind.FREELY_FLIPPABLE or (
            policy.flip_mode == "thflip_plus"
            and classification.kind == FlipKind.REWRITABLE_FLIP
        )
        if do_flip:
            img, _ = hflip(img, [])
            annotations = _flip_boxes(sample)
            report.flip_fired = True
            if classification.kind == FlipKind.REWRITABLE_FLIP:
                interim = GroundingSample(
                    image_id=sample.image_id,
                    image_path=sample.image_path,
                    width=sample.width,
                    height=sample.height,
                    caption=caption,
                    annotations=annotations,
                )
                rewritten, _ = rewrite_sample_caption(interim, classification.matches)
                caption = rewritten.caption
                annotations = list(rewritten.annotations)
                report.caption_rewritten = True
                report.new_caption = caption

    if want_color:
        if contains_color_words(sample.caption, color_lexicon):
            report.skipped_color_words = True
        else:
            params = JitterParams(
                brightness_factor=float(rng.uniform(*policy.brightness_range)),
                contrast_factor=float(rng.uniform(*policy.contrast_range)),
                saturation_factor=float(rng.uniform(*policy.saturation_range)),
                hue_shift=float(rng.uniform(*policy.hue_range)),
            )
            img = color_jitter(img, params)
            report.color_fired = True
            report.params["jitter"] = asdict(params)

    if want_blur:
        sigma = float(rng.uniform(*policy.blur_sigma_range))
        img = gaussian_blur(img, sigma)
        report.blur_fired = True
        report.params["blur_sigma"] = sigma

    if want_pixel:
        img = pixel_mask(img, policy.pixel_mask_p, policy.pixel_mask_fill, rng)
        report.pixel_mask_fired = True
        report.params["pixel_mask_p"] = policy.pixel_mask_p

    if want_block:
        params = MaskParams(
            pixel_mask_prob=policy.pixel_mask_p,
            block_area_range=policy.block_area_range,
            block_aspect_range=policy.block_aspect_range,
            fill_value=policy.block_fill,
        )
        img = block_mask(img, params, rng)
        report.block_mask_fired = True

    out_sample = GroundingSample(
        image_id=sample.image_id,
        image_path=sample.image_path,
        width=sample.width,
        height=sample.height,
        caption=caption,
        annotations=annotations,
    )
    return out_sample, img, report


def validate_consistency(
    sample: GroundingSample, img: Optional[ImageBuffer] = None
) -> List[str]:
    """Structural check of an (augmented) sample; empty list means consistent."""
    violations = []
    if sample.width <= 0 or sample.height <= 0:
        violations.append(f"{sample.image_id}: non-positive dimensions")
    if img is not None and (img.width, img.height) != (sample.width, sample.height):
        violations.append(
            f"{sample.image_id}: image {img.width}x{img.height} does not match "
            f"declared {sample.width}x{sample.height}"
        )
    raw = caption_bytes(sample.caption)
    for a_idx, ann in enumerate(sample.annotations):
        for span in ann.spans:
            if not (0 <= span.start < span.end <= len(raw)):
                violations.append(
                    f"{sample.image_id}: annotation {a_idx} span out of range "
                    f"[{span.start}, {span.end})"
                )
        for box in ann.boxes:
            if box.x_min >= box.x_max or box.y_min >= box.y_max:
                violations.append(f"{sample.image_id}: annotation {a_idx} degenerate box")
            elif not box.within(sample.width, sample.height):
                violations.append(
                    f"{sample.image_id}: annotation {a_idx} box {box.as_list()} out of bounds"
                )
    return violations
