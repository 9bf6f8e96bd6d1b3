"""Persistence diagram data model, file I/O, normalization, and synthetic generation.

A persistence diagram is a multiset of (birth, death) points with death > birth.
Diagrams are stored as immutable float arrays of shape (n, 2).  Points with
infinite or non-finite coordinates are rejected at ingest; downstream code can
therefore assume every coordinate is a finite real and every point lies
strictly above the diagonal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "DiagramFormatError",
    "DiagramValidationError",
    "DegenerateRangeError",
    "PersistencePoint",
    "PersistenceDiagram",
    "DiagramSet",
    "BoundingBox",
    "load_diagram",
    "save_diagram",
    "load_manifest",
    "save_manifest",
    "normalize",
    "apply_bounding_box",
    "generate_synthetic_diagram",
    "generate_training_set",
]


class DiagramFormatError(ValueError):
    """A diagram file could not be parsed under its declared format."""


class DiagramValidationError(ValueError):
    """A parsed point violates the death > birth invariant."""


class DegenerateRangeError(ValueError):
    """A diagram set has no usable coordinate range (empty, or min == max)."""


@dataclass(frozen=True)
class PersistencePoint:
    """A single (birth, death) pair in filtration units."""

    birth: float
    death: float

    def __post_init__(self):
        if not (math.isfinite(self.birth) and math.isfinite(self.death)):
            raise DiagramValidationError(
                f"non-finite persistence point ({self.birth}, {self.death})"
            )
        if not self.death > self.birth:
            raise DiagramValidationError(
                f"death must exceed birth, got ({self.birth}, {self.death})"
            )

    @property
    def persistence(self) -> float:
        return self.death - self.birth


def _as_point_array(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DiagramValidationError(
            f"expected an (n, 2) array of (birth, death) pairs, got shape {arr.shape}"
        )
    return arr


@dataclass(frozen=True)
class PersistenceDiagram:
    """A multiset of persistence points, with an optional evaluation-only label.

    ``points`` is an (n, 2) float64 array of (birth, death) rows in file order.
    Duplicate points are permitted.  The label is carried opaquely and never
    consulted by any algorithm.
    """

    points: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        arr = _as_point_array(self.points)
        if arr.size:
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
                raise DiagramValidationError(f"point {bad}: non-finite coordinate")
            if not np.all(arr[:, 1] > arr[:, 0]):
                bad = int(np.flatnonzero(arr[:, 1] <= arr[:, 0])[0])
                raise DiagramValidationError(
                    f"point {bad}: death {arr[bad, 1]} <= birth {arr[bad, 0]}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        for b, d in self.points:
            yield PersistencePoint(float(b), float(d))

    @property
    def births(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def deaths(self) -> np.ndarray:
        return self.points[:, 1]


@dataclass(frozen=True)
class BoundingBox:
    """Shared coordinate range (both axes) of a diagram set: the square the
    diagrams live in.  Recorded by :func:`normalize` so that new diagrams can
    be mapped into the same [0, 1] frame later."""

    min_value: float
    max_value: float

    def __post_init__(self):
        if not self.max_value > self.min_value:
            raise DegenerateRangeError(
                f"bounding box needs max > min, got [{self.min_value}, {self.max_value}]"
            )

    @property
    def extent(self) -> float:
        return self.max_value - self.min_value


@dataclass(frozen=True)
class DiagramSet:
    """An ordered collection of diagrams, optionally tagged with the bounding
    box they were normalized by."""

    diagrams: tuple
    bounding_box: Optional[BoundingBox] = None

    def __post_init__(self):
        object.__setattr__(self, "diagrams", tuple(self.diagrams))
        if len(self.diagrams) < 1:
            raise DiagramValidationError("a diagram set needs at least one diagram")

    def __len__(self) -> int:
        return len(self.diagrams)

    def __iter__(self):
        return iter(self.diagrams)

    def __getitem__(self, i):
        return self.diagrams[i]

    def total_points(self) -> int:
        return sum(len(d) for d in self.diagrams)

    def mean_points(self) -> float:
        return self.total_points() / len(self.diagrams)


# ---------------------------------------------------------------------------
# File I/O
#
# CSV: one point per line, "birth,death", no header, UTF-8, LF endings.
# JSON: {"points": [[b, d], ...], "label": optional string}.
# Manifest: {"diagrams": [{"path": ..., "label": ...}, ...]}, paths relative
# to the manifest file.
# ---------------------------------------------------------------------------


def _parse_csv(text: str, origin: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DiagramFormatError(
                f"{origin}, line {lineno}: expected 'birth,death', got {line!r}"
            )
        try:
            b, d = float(parts[0]), float(parts[1])
        except ValueError:
            raise DiagramFormatError(
                f"{origin}, line {lineno}: non-numeric coordinate in {line!r}"
            ) from None
        if not (math.isfinite(b) and math.isfinite(d)):
            raise DiagramValidationError(
                f"{origin}, line {lineno}: non-finite point ({b}, {d})"
            )
        if not d > b:
            raise DiagramValidationError(
                f"{origin}, line {lineno}: death {d} <= birth {b}"
            )
        rows.append((b, d))
    return np.array(rows, dtype=np.float64) if rows else np.empty((0, 2))


def load_diagram(path: Union[str, Path], format: Optional[str] = None) -> PersistenceDiagram:
    """Load one diagram from a CSV or JSON file.

    ``format`` is "csv" or "json"; when omitted it is taken from the file
    extension.  Parse failures raise :class:`DiagramFormatError` with the line
    number; points with death <= birth raise :class:`DiagramValidationError`
    naming the offending line.
    """
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    if fmt not in ("csv", "json"):
        raise DiagramFormatError(f"unsupported diagram format {fmt!r} for {path}")
    text = path.read_text(encoding="utf-8")
    if fmt == "csv":
        return PersistenceDiagram(_parse_csv(text, str(path)))
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DiagramFormatError(f"{path}, line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "points" not in doc:
        raise DiagramFormatError(f"{path}: JSON diagram must be an object with 'points'")
    try:
        return PersistenceDiagram(doc["points"], label=doc.get("label"))
    except DiagramValidationError as exc:
        raise DiagramValidationError(f"{path}: {exc}") from None


def save_diagram(diagram: PersistenceDiagram, path: Union[str, Path]) -> None:
    """Write a diagram as CSV (birth,death per line, LF endings)."""
    path = Path(path)
    lines = [f"{b!r},{d!r}" for b, d in diagram.points]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8", newline="\n")


def load_manifest(path: Union[str, Path]) -> DiagramSet:
    """Load a dataset manifest and every diagram it references."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DiagramFormatError(f"{path}, line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "diagrams" not in doc:
        raise DiagramFormatError(f"{path}: manifest must be an object with 'diagrams'")
    diagrams = []
    for entry in doc["diagrams"]:
        dpath = path.parent / entry["path"]
        d = load_diagram(dpath)
        if entry.get("label") is not None:
            d = PersistenceDiagram(d.points, label=str(entry["label"]))
        diagrams.append(d)
    return DiagramSet(diagrams)


def save_manifest(
    set_: DiagramSet, directory: Union[str, Path], prefix: str = "diagram"
) -> Path:
    """Write every diagram of a set as CSV files plus a manifest.json.

    Returns the manifest path.  File names are zero-padded so that the
    manifest order matches a lexicographic listing.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(len(set_) - 1)))
    entries = []
    for i, diagram in enumerate(set_):
        name = f"{prefix}_{i:0{width}d}.csv"
        save_diagram(diagram, directory / name)
        entry = {"path": name}
        if diagram.label is not None:
            entry["label"] = diagram.label
        entries.append(entry)
    manifest = directory / "manifest.json"
    manifest.write_text(
        json.dumps({"diagrams": entries}, indent=2) + "\n", encoding="utf-8", newline="\n"
    )
    return manifest


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def normalize(set_: DiagramSet) -> tuple[DiagramSet, BoundingBox]:
    """Map every coordinate of a set into [0, 1] by the global min/max.

    One (min, max) pair over all births and deaths is shared by both axes, so
    the diagonal b = d stays the diagonal.  The returned bounding box lets new
    diagrams be mapped into the same frame later (see
    :func:`apply_bounding_box`).

    Raises :class:`DegenerateRangeError` if the set has no points or only one
    distinct coordinate value.
    """
    coords = [d.points for d in set_ if len(d)]
    if not coords:
        raise DegenerateRangeError("cannot normalize a set with no points")
    stacked = np.concatenate(coords)
    lo = float(stacked.min())
    hi = float(stacked.max())
    if not hi > lo:
        raise DegenerateRangeError(f"degenerate coordinate range [{lo}, {hi}]")
    box = BoundingBox(lo, hi)
    out = [
        PersistenceDiagram((d.points - lo) / (hi - lo), label=d.label) for d in set_
    ]
    return DiagramSet(out, bounding_box=box), box


def apply_bounding_box(
    diagram: PersistenceDiagram, box: BoundingBox, clamp: bool = True
) -> tuple[np.ndarray, bool]:
    """Map a diagram's points into [0, 1] using a recorded bounding box.

    Returns ``(points, clamped)`` where ``points`` is the mapped (n, 2) array
    and ``clamped`` is True when any coordinate fell outside the box and was
    clipped.  Clamping can collapse a point onto the diagonal, so the result
    is returned as a raw array rather than a validated diagram.
    """
    mapped = (diagram.points - box.min_value) / box.extent
    clamped = False
    if mapped.size:
        clamped = bool((mapped < 0.0).any() or (mapped > 1.0).any())
        if clamp and clamped:
            mapped = np.clip(mapped, 0.0, 1.0)
    return mapped, clamped


# ---------------------------------------------------------------------------
# Synthetic diagrams
# ---------------------------------------------------------------------------


def generate_synthetic_diagram(
    n_points: int, rng: np.random.Generator
) -> PersistenceDiagram:
    """Draw a diagram of ``n_points`` uniform points above the diagonal.

    Points are sampled uniformly from [0, 1]^2 and resampled whole until
    death > birth, which is exactly uniform on the open triangle.  The draw
    sequence is deterministic for a given generator state.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    out = np.empty((n_points, 2), dtype=np.float64)
    have = 0
    while have < n_points:
        block = rng.random((n_points - have, 2))
        good = block[block[:, 1] > block[:, 0]]
        out[have : have + len(good)] = good
        have += len(good)
    return PersistenceDiagram(out)


def generate_training_set(
    count: int = 4000,
    points_per_diagram: int = 50,
    rng: Optional[np.random.Generator] = None,
) -> DiagramSet:
    """Generate ``count`` independent synthetic diagrams for hash training.

    The defaults (4000 diagrams of 50 points) match the standard training
    corpus size; vary ``points_per_diagram`` to target datasets with a
    different average diagram size.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    return DiagramSet(
        [generate_synthetic_diagram(points_per_diagram, rng) for _ in range(count)]
    )
