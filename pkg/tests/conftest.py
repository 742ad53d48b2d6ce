import random
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pairaug.data import (
    BBox,
    CharSpan,
    GroundingSample,
    ImageBuffer,
    PhraseAnnotation,
    save_image,
)

NEUTRAL_WORDS = [
    "a", "the", "man", "woman", "dog", "cat", "ball", "tree", "running",
    "standing", "holding", "near", "with", "small", "large", "two", "three",
    "wooden", "child", "bench", "grass", "sky", "hat", "window", "door",
]
POSITIONAL_WORDS = ["left", "right", "leftmost", "rightmost", "left-side", "upper-right"]
COLOR_WORDS = ["red", "blue", "green", "yellow", "purple", "black", "white"]
MULTIBYTE_WORDS = ["café", "naïve", "entrée"]


def make_caption(rng: random.Random, pools=None, n_words=(3, 8)):
    pools = pools or [NEUTRAL_WORDS]
    words = [rng.choice(rng.choice(pools)) for _ in range(rng.randint(*n_words))]
    return " ".join(words)


def word_spans(caption: str):
    """Byte spans of the whitespace-separated words of a caption."""
    spans = []
    pos = 0
    raw = caption.encode("utf-8")
    for word in caption.split(" "):
        wb = word.encode("utf-8")
        start = raw.index(wb, pos)
        spans.append(CharSpan(start, start + len(wb)))
        pos = start + len(wb)
    return spans


def random_box(rng: random.Random, width: int, height: int) -> BBox:
    # coordinates quantized to 1/256 px: realistic and exactly mirrorable
    def q(v):
        return round(v * 256) / 256

    x1 = q(rng.uniform(0, width - 2))
    y1 = q(rng.uniform(0, height - 2))
    x2 = q(rng.uniform(x1 + 1, width))
    y2 = q(rng.uniform(y1 + 1, height))
    return BBox(x1, y1, x2, y2)


def make_sample(rng: random.Random, image_id="img0", width=64, height=48, pools=None):
    caption = make_caption(rng, pools=pools)
    spans = word_spans(caption)
    n_ann = rng.randint(1, min(3, len(spans)))
    chosen = rng.sample(spans, n_ann)
    annotations = [
        PhraseAnnotation(spans=[sp], boxes=[random_box(rng, width, height)])
        for sp in chosen
    ]
    return GroundingSample(
        image_id=image_id,
        image_path=f"{image_id}.png",
        width=width,
        height=height,
        caption=caption,
        annotations=annotations,
    )


def make_image(rng_seed: int, width=64, height=48) -> ImageBuffer:
    gen = np.random.default_rng(rng_seed)
    return ImageBuffer(gen.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def dataset_dir(tmp_path, rng):
    """Small on-disk dataset: annotation file plus matching PNG images."""
    from pairaug.data import save_annotations

    images = tmp_path / "images"
    images.mkdir()
    samples = []
    for i in range(5):
        sample = make_sample(rng, image_id=f"img{i}")
        samples.append(sample)
        save_image(make_image(i, sample.width, sample.height), images / sample.image_path)
    ann = tmp_path / "annotations.json"
    save_annotations(samples, ann)
    return tmp_path, ann, images, samples
