"""Vectorized diagram representations: reflected 2D histograms, persistence
images, and Betti curves.

All three share the [0, 1] bounding frame produced by
:func:`topohash.diagrams.normalize` and a common grid resolution (default 50).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .diagrams import PersistenceDiagram

__all__ = [
    "HistogramVector",
    "DenseVector",
    "histogram",
    "histogram_from_points",
    "persistence_image",
    "betti_curve",
]

DEFAULT_RESOLUTION = 50


@dataclass(frozen=True)
class HistogramVector:
    """Reflected 2D count grid plus the extra total-count cell.

    ``grid[i, j]`` counts points binned at (birth-bin i, death-bin j); every
    point is also mirrored into the transposed cell (j, i), filling the empty
    half below the diagonal.  ``total_count`` is the extra cell holding the
    number of points in the source diagram; ``source_size`` records the same
    size as metadata.
    """

    grid: np.ndarray
    total_count: int
    source_size: int

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"histogram grid must be square, got {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    @property
    def resolution(self) -> int:
        return self.grid.shape[0]


@dataclass(frozen=True)
class DenseVector:
    """Flat real-valued vector of length resolution**2 (persistence image,
    row-major) or resolution (Betti curve)."""

    values: np.ndarray
    resolution: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("DenseVector values must be one-dimensional")
        if len(v) not in (self.resolution, self.resolution**2):
            raise ValueError(
                f"length {len(v)} matches neither resolution {self.resolution} "
                f"nor its square"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


def _bin_index(coord: np.ndarray, resolution: int) -> np.ndarray:
    # Coordinates equal to 1.0 fall in the last cell so counts are preserved.
    idx = np.floor(coord * resolution).astype(np.int64)
    return np.minimum(idx, resolution - 1)


def histogram_from_points(points: np.ndarray, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Bin an (n, 2) array of [0, 1]-coordinates into a reflected count grid.

    Used directly by the hashing path, where clamped points may sit exactly on
    the diagonal; a point whose birth and death bin to the same cell adds 2 to
    that one cell.
    """
    points = np.asarray(points, dtype=np.float64)
    grid = np.zeros((resolution, resolution), dtype=np.int64)
    if points.size == 0:
        return grid
    if points.min() < 0.0 or points.max() > 1.0:
        raise ValueError("histogram input coordinates must lie in [0, 1]")
    i = _bin_index(points[:, 0], resolution)
    j = _bin_index(points[:, 1], resolution)
    np.add.at(grid, (i, j), 1)
    np.add.at(grid, (j, i), 1)
    return grid


def histogram(
    diagram: PersistenceDiagram, resolution: int = DEFAULT_RESOLUTION
) -> HistogramVector:
    """Convert a normalized diagram into its reflected 2D histogram.

    Each point (b, d) increments cell (floor(b*r), floor(d*r)) and the
    transposed cell, with coordinates equal to 1.0 clamped into the last bin.
    The grid therefore sums to 2 * len(diagram).
    """
    grid = histogram_from_points(diagram.points, resolution)
    n = len(diagram)
    return HistogramVector(grid=grid, total_count=n, source_size=n)


def persistence_image(
    diagram: PersistenceDiagram,
    resolution: int = DEFAULT_RESOLUTION,
    bandwidth: float = 0.02,
    weight: str = "persistence-linear",
) -> DenseVector:
    """Weighted Gaussian density of the rotated diagram, sampled on a grid.

    Points are rotated to (birth, persistence) and each contributes an
    isotropic Gaussian of standard deviation ``bandwidth``, evaluated at pixel
    centers over [0, 1]^2 and scaled by a per-point weight:

    * ``persistence-linear`` (default): persistence / max persistence in the
      diagram, the usual convention of weighting long-lived features up;
    * ``persistence-reciprocal``: 1 / persistence, which diverges near the
      diagonal and is provided for comparability only.

    Returns a row-major vector of length resolution**2.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if weight not in ("persistence-linear", "persistence-reciprocal"):
        raise ValueError(f"unknown weight scheme {weight!r}")
    values = np.zeros((resolution, resolution), dtype=np.float64)
    pts = diagram.points
    if len(pts):
        if pts.min() < 0.0 or pts.max() > 1.0:
            raise ValueError("persistence_image expects a normalized diagram")
        rotated = np.column_stack([pts[:, 0], pts[:, 1] - pts[:, 0]])
        pers = rotated[:, 1]
        if weight == "persistence-linear":
            w = pers / pers.max()
        else:
            w = 1.0 / pers
        centers = (np.arange(resolution) + 0.5) / resolution
        # (points, pixels) squared distances, separable in x and y
        dx2 = (centers[None, :] - rotated[:, 0][:, None]) ** 2
        dy2 = (centers[None, :] - rotated[:, 1][:, None]) ** 2
        norm = 1.0 / (2.0 * np.pi * bandwidth**2)
        gx = np.exp(-dx2 / (2.0 * bandwidth**2))
        gy = np.exp(-dy2 / (2.0 * bandwidth**2))
        values = norm * np.einsum("p,px,py->xy", w, gx, gy)
    return DenseVector(values=values.reshape(-1), resolution=resolution)


def betti_curve(
    diagram: PersistenceDiagram, resolution: int = DEFAULT_RESOLUTION
) -> DenseVector:
    """Count of features alive at each sample t_k = (k + 0.5) / resolution.

    A point (b, d) contributes +1 to every sample with b <= t_k < d.
    """
    samples = (np.arange(resolution) + 0.5) / resolution
    pts = diagram.points
    if len(pts):
        alive = (pts[:, 0][:, None] <= samples[None, :]) & (
            samples[None, :] < pts[:, 1][:, None]
        )
        values = alive.sum(axis=0).astype(np.float64)
    else:
        values = np.zeros(resolution, dtype=np.float64)
    return DenseVector(values=values, resolution=resolution)
