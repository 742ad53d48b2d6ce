"""Command-line surface: augment, validate, inspect, eval.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 I/O error.
Log level comes from the PAIRAUG_LOG environment variable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from PIL import Image, ImageDraw

from . import __version__
from .data import (
    GroundingSample,
    ImageBuffer,
    load_annotations,
    load_image,
    save_annotations,
    save_image,
)
from .errors import PairAugError
from .imageops import JitterParams, MaskParams, block_mask, color_jitter, gaussian_blur, hflip, pixel_mask
from .metrics import evaluate_prediction_files
from .pipeline import AugPolicy, augment_sample, load_policy, validate_consistency
from .textops import classify_flippability, FlipKind, rewrite_sample_caption
from .data import BBox

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("pairaug")


def _setup_logging():
    level = os.environ.get("PAIRAUG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_policy(args) -> AugPolicy:
    policy = load_policy(args.policy) if args.policy else AugPolicy()
    if args.seed is not None:
        policy = replace(policy, global_seed=args.seed)
    return policy


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def cmd_augment(args) -> int:
    out_dir = Path(args.out)
    images_dir = Path(args.images)
    try:
        samples = load_annotations(args.input)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PairAugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    policy = _resolve_policy(args)
    epoch = args.epoch

    out_images = out_dir / "images"
    if not args.dry_run:
        out_images.mkdir(parents=True, exist_ok=True)
    else:
        out_dir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()

    def process(sample: GroundingSample):
        img_path = images_dir / sample.image_path
        if not img_path.exists():
            raise FileNotFoundError(f"missing image for {sample.image_id}: {img_path}")
        img = load_image(img_path)
        aug_sample, aug_img, report = augment_sample(sample, img, policy, epoch)
        violations = validate_consistency(aug_sample, aug_img)
        out_name = f"{sample.image_id}-aug-e{epoch}.png"
        if not args.dry_run:
            save_image(aug_img, out_images / out_name)
        aug_sample = GroundingSample(
            image_id=aug_sample.image_id,
            image_path=f"images/{out_name}",
            width=aug_sample.width,
            height=aug_sample.height,
            caption=aug_sample.caption,
            annotations=aug_sample.annotations,
        )
        return aug_sample, report, violations

    try:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(process, samples))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    all_violations = []
    reports = []
    aug_samples = []
    for aug_sample, report, violations in results:
        aug_samples.append(aug_sample)
        reports.append(report)
        all_violations.extend(violations)

    stem = Path(args.input).stem
    ann_out = out_dir / f"{stem}-aug-e{epoch}.json"
    if not args.dry_run:
        save_annotations(aug_samples, ann_out)

    elapsed = time.perf_counter() - started
    report_digests = [hashlib.sha256(_canonical_json(r.to_dict())).hexdigest() for r in reports]
    deterministic = {
        "version": __version__,
        "policy": policy.to_dict(),
        "global_seed": policy.global_seed,
        "epoch": epoch,
        "sample_reports": report_digests,
    }
    manifest = dict(deterministic)
    manifest["input"] = str(args.input)
    manifest["images"] = str(args.images)
    manifest["out"] = str(args.out)
    manifest["digest"] = hashlib.sha256(_canonical_json(deterministic)).hexdigest()
    manifest["stats"] = {
        "samples_processed": len(samples),
        "wall_clock_seconds": elapsed,
        "samples_per_second": len(samples) / elapsed if elapsed > 0 else 0.0,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, ensure_ascii=False)
        fh.write("\n")

    if all_violations:
        for v in all_violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    log.info("augmented %d samples in %.2fs", len(samples), elapsed)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        samples = load_annotations(args.input)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PairAugError as exc:
        if args.format == "json":
            print(json.dumps({"violations": [str(exc)]}))
        else:
            print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    violations = []
    for sample in samples:
        img = None
        if args.images:
            img_path = Path(args.images) / sample.image_path
            if img_path.exists():
                img = load_image(img_path)
            else:
                violations.append(f"{sample.image_id}: image file missing: {img_path}")
        violations.extend(validate_consistency(sample, img))
    if args.format == "json":
        print(json.dumps({"violations": violations}))
    else:
        for v in violations:
            print(f"violation: {v}")
        print(f"{len(samples)} samples, {len(violations)} violations")
    return EXIT_VALIDATION if violations else EXIT_OK


_INSPECT_AUGS = ("hflip", "thflip_plus", "color", "blur", "pixel_mask", "block_mask")


def cmd_inspect(args) -> int:
    import numpy as np

    try:
        samples = load_annotations(args.input)
    except PairAugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    by_id = {s.image_id: s for s in samples}
    if args.id not in by_id:
        print(f"error: unknown image_id {args.id!r}", file=sys.stderr)
        return EXIT_VALIDATION
    sample = by_id[args.id]
    img_path = Path(args.images) / sample.image_path
    if not img_path.exists():
        print(f"error: missing image {img_path}", file=sys.stderr)
        return EXIT_IO
    img = load_image(img_path)
    rng = np.random.default_rng(args.seed or 0)

    panels = [(img, sample.caption, sample)]
    requested = [a for a in (args.aug.split(",") if args.aug else []) if a]
    for name in requested:
        if name not in _INSPECT_AUGS:
            print(f"error: unknown augmentation {name!r}", file=sys.stderr)
            return EXIT_USAGE
        aug_img, caption, shown = img, sample.caption, sample
        if name in ("hflip", "thflip_plus"):
            aug_img, _ = hflip(img, [])
            from .pipeline import _flip_boxes

            annotations = _flip_boxes(sample)
            shown = GroundingSample(sample.image_id, sample.image_path, sample.width,
                                    sample.height, sample.caption, annotations)
            if name == "thflip_plus":
                cls = classify_flippability(sample.caption)
                if cls.kind == FlipKind.REWRITABLE_FLIP:
                    shown, _ = rewrite_sample_caption(shown, cls.matches)
                    caption = shown.caption
        elif name == "color":
            aug_img = color_jitter(img, JitterParams(1.2, 1.2, 1.3, 0.03))
        elif name == "blur":
            aug_img = gaussian_blur(img, 1.5)
        elif name == "pixel_mask":
            aug_img = pixel_mask(img, 0.75, 0, rng)
        elif name == "block_mask":
            aug_img = block_mask(img, MaskParams(), rng)
        panels.append((aug_img, caption, shown))

    pad, caption_h = 8, 28
    total_w = sum(p[0].width for p in panels) + pad * (len(panels) + 1)
    total_h = max(p[0].height for p in panels) + 2 * pad + caption_h
    canvas = Image.new("RGB", (total_w, total_h), (30, 30, 30))
    draw = ImageDraw.Draw(canvas)
    x = pad
    for panel_img, caption, shown in panels:
        pil = Image.fromarray(panel_img.pixels)
        canvas.paste(pil, (x, pad))
        pdraw = ImageDraw.Draw(canvas)
        for ann in shown.annotations:
            for b in ann.boxes:
                pdraw.rectangle(
                    [x + b.x_min, pad + b.y_min, x + b.x_max - 1, pad + b.y_max - 1],
                    outline=(255, 64, 64),
                )
        pdraw.text((x, pad + panel_img.height + 4), caption[:60], fill=(230, 230, 230))
        x += panel_img.width + pad
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    canvas.save(out, format="PNG")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        scores = evaluate_prediction_files(args.input, args.predictions)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PairAugError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.format == "json":
        print(json.dumps(scores))
    else:
        print(f"AP   {scores['ap']:.4f}")
        for k in (1, 5, 10):
            print(f"R@{k:<2} {scores[f'r{k}']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairaug",
        description="Deterministic augmentation toolkit for phrase-grounding datasets",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, images_required=True):
        p.add_argument("--input", required=True, help="annotation JSON file")
        p.add_argument("--seed", type=int, default=None, help="override policy seed")
        p.add_argument("--epoch", type=int, default=0)
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--format", choices=("text", "json"), default="text")

    p_aug = sub.add_parser("augment", help="augment a dataset")
    common(p_aug)
    p_aug.add_argument("--images", required=True, help="input image directory")
    p_aug.add_argument("--out", required=True, help="output directory")
    p_aug.add_argument("--policy", default=None, help="policy TOML file")
    p_aug.add_argument("--dry-run", action="store_true", help="emit only the manifest")
    p_aug.set_defaults(func=cmd_augment)

    p_val = sub.add_parser("validate", help="validate an annotation file")
    common(p_val)
    p_val.add_argument("--images", default=None, help="optional image dir for dimension checks")
    p_val.set_defaults(func=cmd_validate)

    p_ins = sub.add_parser("inspect", help="render a side-by-side augmentation composite")
    common(p_ins)
    p_ins.add_argument("--images", required=True)
    p_ins.add_argument("--out", required=True, help="output composite PNG path")
    p_ins.add_argument("--id", required=True, help="image_id to inspect")
    p_ins.add_argument("--aug", default="", help="comma-separated augmentations to show")
    p_ins.set_defaults(func=cmd_inspect)

    p_eval = sub.add_parser("eval", help="score predictions against annotations")
    common(p_eval)
    p_eval.add_argument("--predictions", required=True, help="prediction JSON file")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
