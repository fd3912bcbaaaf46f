"""SLIC superpixel tiling in (R, G, B, x, y) feature space.

Localized k-means over a regular grid of seeds: each pixel considers the
seeds of nearby grid cells, with the combined distance

    D = sqrt(d_color^2 + (d_xy / S)^2 * m^2)

where S = sqrt(pixels / target_count) is the grid interval and m the
compactness weight.  Color features are raw RGB in [0, 255].  A
connectivity pass merges stray fragments afterwards so every superpixel is
one 4-connected region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

__all__ = ["SlicConfig", "SuperpixelMap", "slic_segment", "enforce_connectivity",
           "boundary_overlay"]


@dataclass
class SlicConfig:
    target_count: int
    compactness: float = 100.0
    iterations: int = 10
    seed: int = 0  # kept for interface symmetry; the algorithm is deterministic

    def __post_init__(self):
        if self.target_count < 1:
            raise ValueError("target_count must be positive")
        if self.compactness <= 0:
            raise ValueError("compactness must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")


@dataclass
class SuperpixelMap:
    """Per-pixel superpixel ids forming a partition with contiguous ids 0..count-1."""

    labels: np.ndarray
    count: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.count)

    def validate(self) -> None:
        labels = self.labels
        uniq = np.unique(labels)
        if uniq.size != self.count or uniq[0] != 0 or uniq[-1] != self.count - 1:
            raise ValueError("superpixel ids are not contiguous 0..count-1")


def _grid_shape(h: int, w: int, k: int) -> tuple[int, int]:
    """Pick (rows, cols) of the seed grid: product closest to k, cells square-ish.

    Ties prefer more columns, so an even split of a square image runs
    left/right rather than top/bottom.
    """
    best = None
    for nx in range(1, min(k, w) + 1):
        for ny in {max(1, math.floor(k / nx)), max(1, math.ceil(k / nx))}:
            if ny > h:
                continue
            err = abs(nx * ny - k)
            aspect = abs(math.log((w / nx) / (h / ny)))
            key = (err, aspect, -nx)
            if best is None or key < best[0]:
                best = (key, ny, nx)
    return best[1], best[2]


def _as_pixels(image) -> np.ndarray:
    pixels = getattr(image, "pixels", image)
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[:, :, None], 3, axis=2)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) or (H, W) image, got shape {pixels.shape}")
    if pixels.min() < 0 or pixels.max() > 255:
        raise ValueError("channel values must lie in [0, 255]")
    return pixels


def slic_segment(image, config: SlicConfig) -> SuperpixelMap:
    """Tile an image into roughly ``config.target_count`` superpixels."""
    pixels = _as_pixels(image)
    h, w, _ = pixels.shape
    k = config.target_count
    if k > h * w:
        raise ValueError(f"target_count {k} exceeds pixel count {h * w}")

    s = math.sqrt(h * w / k)
    m = config.compactness
    ny, nx = _grid_shape(h, w, k)
    n_centers = ny * nx

    cy = (np.arange(ny) + 0.5) * h / ny - 0.5
    cx = (np.arange(nx) + 0.5) * w / nx - 0.5
    centers_y = np.repeat(cy, nx)
    centers_x = np.tile(cx, ny)
    sample_y = np.clip(np.round(centers_y).astype(int), 0, h - 1)
    sample_x = np.clip(np.round(centers_x).astype(int), 0, w - 1)
    centers_color = pixels[sample_y, sample_x]  # (n_centers, 3)

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # grid-cell index of each pixel; candidate seeds live within +/-2 cells,
    # which over-covers the standard 2S x 2S search window
    cell_i = np.minimum((yy * ny / h).astype(int), ny - 1)
    cell_j = np.minimum((xx * nx / w).astype(int), nx - 1)

    labels = np.zeros((h, w), dtype=np.int32)
    window = 2.0 * s
    for _ in range(config.iterations):
        best_d = np.full((h, w), np.inf)
        best_d_any = np.full((h, w), np.inf)
        labels_any = np.zeros((h, w), dtype=np.int32)
        labels.fill(0)
        assigned = np.zeros((h, w), dtype=bool)
        # candidates scanned in ascending center index: argmin-style updates
        # with strict < keep the lowest index on distance ties
        for di in range(-2, 3):
            for dj in range(-2, 3):
                ci = cell_i + di
                cj = cell_j + dj
                valid = (ci >= 0) & (ci < ny) & (cj >= 0) & (cj < nx)
                ci_c = np.clip(ci, 0, ny - 1)
                cj_c = np.clip(cj, 0, nx - 1)
                idx = ci_c * nx + cj_c
                dy = yy - centers_y[idx]
                dx = xx - centers_x[idx]
                d_xy2 = dy * dy + dx * dx
                d_col2 = np.sum((pixels - centers_color[idx]) ** 2, axis=2)
                dist = d_col2 + d_xy2 * (m * m) / (s * s)
                dist = np.where(valid, dist, np.inf)
                in_window = valid & (np.abs(dy) <= window) & (np.abs(dx) <= window)
                take = in_window & (dist < best_d)
                best_d = np.where(take, dist, best_d)
                labels = np.where(take, idx.astype(np.int32), labels)
                assigned |= take
                # windowless fallback for pixels no seed window reaches
                take_any = dist < best_d_any
                best_d_any = np.where(take_any, dist, best_d_any)
                labels_any = np.where(take_any, idx.astype(np.int32), labels_any)
        labels = np.where(assigned, labels, labels_any)

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n_centers).astype(np.float64)
        nonzero = counts > 0
        for c in range(3):
            sums = np.bincount(flat, weights=pixels[:, :, c].ravel(), minlength=n_centers)
            centers_color[nonzero, c] = sums[nonzero] / counts[nonzero]
        sums_y = np.bincount(flat, weights=yy.ravel(), minlength=n_centers)
        sums_x = np.bincount(flat, weights=xx.ravel(), minlength=n_centers)
        centers_y = np.where(nonzero, sums_y / np.maximum(counts, 1), centers_y)
        centers_x = np.where(nonzero, sums_x / np.maximum(counts, 1), centers_x)

    raw = _compact_ids(labels)
    return enforce_connectivity(raw)


def _compact_ids(labels: np.ndarray) -> SuperpixelMap:
    """Renumber labels to contiguous ids in first-occurrence (raster) order."""
    flat = labels.ravel()
    uniq, first_pos, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_pos))  # dense rank by first appearance
    return SuperpixelMap(order[inverse].reshape(labels.shape).astype(np.int32), len(uniq))


def _partition_components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected components of a label partition, ids in raster order."""
    h, w = labels.shape
    n = h * w
    idx = np.arange(n).reshape(h, w)
    right = labels[:, :-1] == labels[:, 1:]
    down = labels[:-1, :] == labels[1:, :]
    src = np.concatenate([idx[:, :-1][right], idx[:-1, :][down]])
    dst = np.concatenate([idx[:, 1:][right], idx[1:, :][down]])
    graph = sparse.coo_matrix(
        (np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n)
    )
    n_comp, comp = connected_components(graph, directed=False)
    return comp.reshape(h, w), n_comp


def enforce_connectivity(spmap: SuperpixelMap) -> SuperpixelMap:
    """Split disconnected labels and merge small fragments into neighbours.

    Fragments smaller than a quarter of the input map's mean superpixel size
    are absorbed by their largest adjacent region (lowest id on ties); the
    survivors are renumbered contiguously in raster order.
    """
    labels = spmap.labels
    h, w = labels.shape
    comp, n_comp = _partition_components(labels)
    threshold = (h * w / max(spmap.count, 1)) / 4.0

    sizes = np.bincount(comp.ravel(), minlength=n_comp).astype(np.int64)

    # component adjacency from 4-neighbour boundaries
    a = np.concatenate([comp[:, :-1].ravel(), comp[:-1, :].ravel()])
    b = np.concatenate([comp[:, 1:].ravel(), comp[1:, :].ravel()])
    diff = a != b
    pairs = np.unique(np.stack([np.minimum(a[diff], b[diff]),
                                np.maximum(a[diff], b[diff])], axis=1), axis=0)
    neighbors: list[list[int]] = [[] for _ in range(n_comp)]
    for u, v in pairs:
        neighbors[u].append(int(v))
        neighbors[v].append(int(u))

    parent = np.arange(n_comp)

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    cur_size = sizes.copy()
    for c in sorted(range(n_comp), key=lambda i: (sizes[i], i)):
        root = find(c)
        if cur_size[root] >= threshold:
            continue
        adjacent_roots = {find(nb) for nb in neighbors[c]} - {root}
        if not adjacent_roots:
            continue
        target = max(adjacent_roots, key=lambda r: (cur_size[r], -r))
        parent[root] = target
        cur_size[target] += cur_size[root]

    roots = np.array([find(i) for i in range(n_comp)])
    merged = roots[comp]
    return _compact_ids(merged)


def boundary_overlay(pixels: np.ndarray, labels: np.ndarray,
                     color: tuple[int, int, int] = (255, 220, 0)) -> np.ndarray:
    """Copy of the image with superpixel boundaries painted for inspection."""
    out = np.asarray(pixels, dtype=np.uint8).copy()
    edge = np.zeros(labels.shape, dtype=bool)
    edge[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    edge[:-1, :] |= labels[:-1, :] != labels[1:, :]
    out[edge] = color
    return out
