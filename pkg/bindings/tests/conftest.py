import random

import numpy as np
import pytest

from pairaug.data import (
    BBox,
    CharSpan,
    GroundingSample,
    ImageBuffer,
    PhraseAnnotation,
    save_annotations,
    save_image,
)

WORDS = [
    "a", "the", "man", "dog", "ball", "tree", "left", "right", "leftmost",
    "red", "blue", "running", "standing", "upper-right", "near",
]


def make_sample(rng: random.Random, image_id: str, width=48, height=36):
    words = [rng.choice(WORDS) for _ in range(rng.randint(3, 7))]
    caption = " ".join(words)
    raw = caption.encode("utf-8")
    pos = 0
    spans = []
    for word in words:
        wb = word.encode("utf-8")
        start = raw.index(wb, pos)
        spans.append(CharSpan(start, start + len(wb)))
        pos = start + len(wb)
    annotations = [
        PhraseAnnotation(
            spans=[rng.choice(spans)],
            boxes=[BBox(
                round(rng.uniform(0, 20) * 4) / 4,
                round(rng.uniform(0, 15) * 4) / 4,
                round(rng.uniform(24, width) * 4) / 4,
                round(rng.uniform(18, height) * 4) / 4,
            )],
        )
    ]
    return GroundingSample(image_id, f"{image_id}.png", width, height, caption, annotations)


def make_image(seed: int, width=48, height=36) -> ImageBuffer:
    gen = np.random.default_rng(seed)
    return ImageBuffer(gen.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


@pytest.fixture
def dataset(tmp_path):
    rng = random.Random(7)
    images = tmp_path / "images"
    images.mkdir()
    samples = []
    for i in range(8):
        sample = make_sample(rng, f"img{i}")
        samples.append(sample)
        save_image(make_image(i), images / sample.image_path)
    ann = tmp_path / "annotations.json"
    save_annotations(samples, ann)
    return tmp_path, ann, images, samples
