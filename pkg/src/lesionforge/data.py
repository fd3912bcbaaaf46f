"""Dataset ingestion and synthetic lesion-image generation.

A dataset directory holds ``<id>.png`` images, optional ``<id>.mask.png``
ground-truth sidecars, an optional ``clicks.json`` mapping image ids to a
point inside the lesion, and an optional ``split.json`` naming the train and
test ids (default: first half / second half in lexicographic id order).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import imgio

__all__ = ["ImageRecord", "ingest", "split_records", "synth_generate"]

log = logging.getLogger(__name__)

SIZE = imgio.WORKING_SIZE


@dataclass
class ImageRecord:
    """One loaded image at working resolution plus its optional annotations."""

    id: str
    pixels: np.ndarray  # (240, 240, 3) uint8
    source_path: str
    ground_truth: np.ndarray | None = None  # (240, 240) bool
    click: tuple[int, int] | None = None  # (x, y) in image space

    def __post_init__(self):
        if self.pixels.shape != (SIZE, SIZE, 3):
            raise ValueError(
                f"{self.id}: pixels must be {SIZE}x{SIZE}x3, got {self.pixels.shape}"
            )
        if self.ground_truth is not None and self.ground_truth.shape != (SIZE, SIZE):
            raise ValueError(
                f"{self.id}: ground-truth extents {self.ground_truth.shape} "
                f"do not match image extents {(SIZE, SIZE)}"
            )

    def pixels01(self) -> np.ndarray:
        """Pixels as float32 in [0, 1], channel-first (3, H, W)."""
        return (self.pixels.astype(np.float32) / 255.0).transpose(2, 0, 1)


def ingest(directory: str | Path) -> list[ImageRecord]:
    """Load every PNG in a dataset directory, resized to working resolution."""
    directory = Path(directory)
    clicks: dict = {}
    clicks_path = directory / "clicks.json"
    if clicks_path.exists():
        clicks = json.loads(clicks_path.read_text())

    records = []
    for path in sorted(directory.glob("*.png")):
        if path.name.endswith(".mask.png"):
            continue
        image_id = path.stem
        try:
            pixels = imgio.load_rgb(path)
        except Exception as exc:  # undecodable file: skip, do not abort the run
            log.warning("skipping undecodable image %s: %s", path, exc)
            continue
        pixels = imgio.resize_rgb(pixels)

        mask = None
        mask_path = directory / f"{image_id}.mask.png"
        if mask_path.exists():
            raw = imgio.load_rgb(mask_path)[:, :, 0]
            resized = imgio.resize_mask(raw)
            if resized.shape != (SIZE, SIZE):
                raise ValueError(f"{mask_path}: mask extents {resized.shape} after resize")
            mask = resized >= 128

        click = None
        if image_id in clicks:
            cx, cy = clicks[image_id]
            click = (int(cx), int(cy))
        records.append(
            ImageRecord(image_id, pixels, str(path), ground_truth=mask, click=click)
        )
    return records


def split_records(
    records: list[ImageRecord], directory: str | Path | None = None
) -> tuple[list[ImageRecord], list[ImageRecord]]:
    """Train/test split: from split.json when present, else first/second half."""
    if directory is not None:
        split_path = Path(directory) / "split.json"
        if split_path.exists():
            spec = json.loads(split_path.read_text())
            by_id = {r.id: r for r in records}
            train_ids, test_ids = spec["train"], spec["test"]
            overlap = set(train_ids) & set(test_ids)
            if overlap:
                raise ValueError(f"split.json train/test overlap: {sorted(overlap)}")
            missing = [i for i in train_ids + test_ids if i not in by_id]
            if missing:
                raise ValueError(f"split.json names unknown ids: {missing}")
            return [by_id[i] for i in train_ids], [by_id[i] for i in test_ids]
    half = len(records) // 2
    return records[:half], records[half:]


# ---------------------------------------------------------------- synthetic data


@dataclass
class _Lesion:
    cy: float
    cx: float
    a: float
    b: float
    theta: float
    intensity: float


def _ellipse_mask(yy, xx, lesion: _Lesion) -> np.ndarray:
    ct, st = np.cos(lesion.theta), np.sin(lesion.theta)
    u = (xx - lesion.cx) * ct + (yy - lesion.cy) * st
    v = -(xx - lesion.cx) * st + (yy - lesion.cy) * ct
    return (u / lesion.a) ** 2 + (v / lesion.b) ** 2 <= 1.0


def _render_image(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, tuple[int, int]]:
    """One synthetic scan: image uint8, lesion mask bool, click point (x, y)."""
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)

    # dark background with smooth low-frequency structure
    base = rng.uniform(25, 45)
    noise = ndimage.gaussian_filter(rng.normal(0, 1, (SIZE, SIZE)), sigma=24)
    noise = noise / (np.abs(noise).max() + 1e-9)
    img = base + 18.0 * noise

    lesion = _Lesion(
        cy=rng.uniform(70, 170),
        cx=rng.uniform(70, 170),
        a=rng.uniform(25, 55),
        b=rng.uniform(22, 45),
        theta=rng.uniform(0, np.pi),
        intensity=rng.uniform(195, 240),
    )
    mask = _ellipse_mask(yy, xx, lesion)
    lesion_layer = np.where(mask, lesion.intensity, 0.0)
    lesion_layer = ndimage.gaussian_filter(lesion_layer, sigma=1.8)  # soft boundary

    # dimmer distractor blobs, kept clear of the lesion
    n_distract = rng.integers(1, 4)
    distract = np.zeros((SIZE, SIZE))
    placed = 0
    attempts = 0
    while placed < n_distract and attempts < 50:
        attempts += 1
        dy, dx = rng.uniform(25, SIZE - 25, 2)
        r = rng.uniform(9, 18)
        gap = np.hypot(dy - lesion.cy, dx - lesion.cx)
        if gap < max(lesion.a, lesion.b) + r + 18:
            continue
        blob = np.exp(-(((yy - dy) ** 2 + (xx - dx) ** 2) / (2 * r * r)))
        distract += rng.uniform(70, 110) * blob
        placed += 1

    img = np.maximum(img + distract, lesion_layer)
    img = np.clip(img + rng.normal(0, 2.0, (SIZE, SIZE)), 0, 255)
    rgb = np.repeat(img[:, :, None], 3, axis=2).astype(np.uint8)

    click = (int(round(lesion.cx)), int(round(lesion.cy)))
    return rgb, mask, click


def synth_generate(directory: str | Path, count: int, seed: int = 0) -> list[str]:
    """Write ``count`` synthetic images + masks + clicks + split to a directory.

    Every mask lands strictly inside the candidate size filter
    (1000, total - 1000) and the click is the lesion centroid.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ids = []
    clicks = {}
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        rgb, mask, click = _render_image(rng)
        size = int(mask.sum())
        assert 1000 < size < SIZE * SIZE - 1000, f"generator produced mask of {size} px"
        image_id = f"synth{i:03d}"
        imgio.save_rgb(rgb, directory / f"{image_id}.png")
        imgio.save_mask(mask, directory / f"{image_id}.mask.png")
        clicks[image_id] = [click[0], click[1]]
        ids.append(image_id)
    (directory / "clicks.json").write_text(json.dumps(clicks, indent=2, sort_keys=True))
    half = count // 2
    (directory / "split.json").write_text(
        json.dumps({"train": ids[:half], "test": ids[half:]}, indent=2)
    )
    return ids
