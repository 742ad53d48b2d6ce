"""Grounding-sample data model: boxes, caption spans, samples, image buffers.

Caption spans are byte offsets into the UTF-8 encoding of the caption so that
rewrite arithmetic stays exact for multi-byte text. Boxes are absolute-pixel
``[x_min, y_min, x_max, y_max]`` in image space; the on-disk loader also
accepts ``"box_format": "xywh"`` and normalizes on read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import AnnotationParseError, PairAugError, ValidationError

PathLike = Union[str, Path]


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in absolute pixel coordinates, corners format."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(
                f"degenerate box [{self.x_min}, {self.y_min}, {self.x_max}, {self.y_max}]"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def within(self, width: float, height: float) -> bool:
        return 0 <= self.x_min and 0 <= self.y_min and self.x_max <= width and self.y_max <= height

    def as_list(self) -> list:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BBox":
        return cls(x, y, x + w, y + h)


@dataclass(frozen=True)
class CharSpan:
    """Half-open byte range [start, end) into a caption's UTF-8 bytes."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValidationError(f"invalid span [{self.start}, {self.end})")

    def as_list(self) -> list:
        return [self.start, self.end]


def caption_bytes(caption: str) -> bytes:
    return caption.encode("utf-8")


def extract_span(caption: str, span: CharSpan) -> str:
    """Substring addressed by a byte span; raises if offsets split a character."""
    raw = caption_bytes(caption)
    if span.end > len(raw):
        raise ValidationError(f"span [{span.start}, {span.end}) exceeds caption length {len(raw)}")
    piece = raw[span.start:span.end]
    try:
        return piece.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"span [{span.start}, {span.end}) splits a multi-byte character") from exc


def _on_char_boundary(raw: bytes, offset: int) -> bool:
    if offset == 0 or offset == len(raw):
        return True
    return (raw[offset] & 0xC0) != 0x80


@dataclass(frozen=True)
class PhraseAnnotation:
    """One phrase: its caption spans and the box(es) it grounds to."""

    spans: tuple
    boxes: tuple

    def __init__(self, spans: Iterable[CharSpan], boxes: Iterable[BBox]):
        object.__setattr__(self, "spans", tuple(spans))
        object.__setattr__(self, "boxes", tuple(boxes))
        if not self.spans or not self.boxes:
            raise ValidationError("annotation needs at least one span and one box")


@dataclass(frozen=True)
class GroundingSample:
    """One image-caption pair with phrase-to-region links."""

    image_id: str
    image_path: str
    width: int
    height: int
    caption: str
    annotations: tuple = field(default_factory=tuple)

    def __init__(self, image_id, image_path, width, height, caption, annotations=()):
        object.__setattr__(self, "image_id", image_id)
        object.__setattr__(self, "image_path", str(image_path))
        object.__setattr__(self, "width", int(width))
        object.__setattr__(self, "height", int(height))
        object.__setattr__(self, "caption", caption)
        object.__setattr__(self, "annotations", tuple(annotations))
        self.validate()

    def validate(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"{self.image_id}: non-positive image dimensions")
        raw = caption_bytes(self.caption)
        for ann in self.annotations:
            for span in ann.spans:
                if span.end > len(raw):
                    raise ValidationError(
                        f"{self.image_id}: span [{span.start}, {span.end}) out of range "
                        f"for caption of {len(raw)} bytes"
                    )
                if not (_on_char_boundary(raw, span.start) and _on_char_boundary(raw, span.end)):
                    raise ValidationError(
                        f"{self.image_id}: span [{span.start}, {span.end}) splits a character"
                    )
                if not extract_span(self.caption, span).strip():
                    raise ValidationError(
                        f"{self.image_id}: span [{span.start}, {span.end}) covers only whitespace"
                    )
            for box in ann.boxes:
                if not box.within(self.width, self.height):
                    raise ValidationError(
                        f"{self.image_id}: box {box.as_list()} outside "
                        f"{self.width}x{self.height} image"
                    )


class ImageBuffer:
    """8-bit RGB raster, stored as an H x W x 3 uint8 array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValidationError(f"expected HxWx3 array, got shape {pixels.shape}")
        self.pixels = pixels
        self.pixels.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, ImageBuffer) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"ImageBuffer({self.width}x{self.height})"


def load_image(path: PathLike) -> ImageBuffer:
    """Decode a PNG/JPEG to RGB; grayscale replicates channels, alpha is dropped."""
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            return ImageBuffer(np.asarray(rgb))
    except (UnidentifiedImageError, OSError) as exc:
        raise PairAugError(f"cannot decode image {path}: {exc}") from exc


def save_image(img: ImageBuffer, path: PathLike, format: str = "PNG") -> None:
    Image.fromarray(img.pixels).save(path, format=format)


def _parse_sample(record: dict, index: int, box_format: str) -> GroundingSample:
    try:
        image_id = record["image_id"]
        annotations = []
        for ann in record.get("annotations", []):
            spans = [CharSpan(int(s), int(e)) for s, e in ann["spans"]]
            if box_format == "xywh":
                boxes = [BBox.from_xywh(*map(float, b)) for b in ann["boxes"]]
            else:
                boxes = [BBox(*map(float, b)) for b in ann["boxes"]]
            annotations.append(PhraseAnnotation(spans, boxes))
        return GroundingSample(
            image_id=image_id,
            image_path=record["file_name"],
            width=record["width"],
            height=record["height"],
            caption=record["caption"],
            annotations=annotations,
        )
    except ValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        ident = record.get("image_id", f"record #{index}")
        raise AnnotationParseError(f"malformed annotation record {ident}: {exc}") from exc


def load_annotations(path: PathLike) -> list:
    """Read an annotation JSON file into validated samples, preserving file order."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "samples" not in doc:
        raise AnnotationParseError(f"{path}: expected top-level object with 'samples'")
    box_format = doc.get("box_format", "xyxy")
    if box_format not in ("xyxy", "xywh"):
        raise AnnotationParseError(f"{path}: unknown box_format {box_format!r}")
    return [_parse_sample(rec, i, box_format) for i, rec in enumerate(doc["samples"])]


def save_annotations(samples: Sequence[GroundingSample], path: PathLike) -> None:
    """Write samples in the canonical xyxy schema; round-trips through load_annotations."""
    doc = {
        "box_format": "xyxy",
        "samples": [
            {
                "image_id": s.image_id,
                "file_name": s.image_path,
                "width": s.width,
                "height": s.height,
                "caption": s.caption,
                "annotations": [
                    {
                        "spans": [sp.as_list() for sp in ann.spans],
                        "boxes": [b.as_list() for b in ann.boxes],
                    }
                    for ann in s.annotations
                ],
            }
            for s in samples
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
