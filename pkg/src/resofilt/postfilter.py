"""False-detection removal: histogram evidence and cross-frame correlation.

Static scenes: each candidate object box is compared against its
surrounding ring through per-row and per-column gray-level histograms;
the outer product of the differences concentrates where the object really
differs, and a density rule over small cells gives the verdict.

Dynamic scenes: candidate objects are confirmed by the overlap ratio of
detection masks across a short window of consecutive frames; transient
speckle decorrelates and is dropped.

Coordinates follow (row, column) = (x, y) throughout, boxes inclusive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .filtering import DetectionMask


@dataclass(frozen=True)
class ObjectBox:
    """Inclusive pixel rectangle, with optional ring width and frame tag."""

    x0: int
    y0: int
    x1: int
    y1: int
    extension: int = 0
    frame_index: int = 0

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError("box corners are not ordered")
        if self.extension < 0:
            raise ValueError("extension must be non-negative")

    @property
    def height(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def width(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def area(self) -> int:
        return self.height * self.width

    @property
    def center(self):
        return ((self.x0 + self.x1) // 2, (self.y0 + self.y1) // 2)

    def extended(self, e: int, shape) -> "ObjectBox":
        """Box grown by e on all sides, clipped to an image shape."""
        return ObjectBox(
            x0=max(0, self.x0 - e),
            y0=max(0, self.y0 - e),
            x1=min(shape[0] - 1, self.x1 + e),
            y1=min(shape[1] - 1, self.y1 + e),
            extension=e,
            frame_index=self.frame_index,
        )


@dataclass(frozen=True)
class HistogramEvidence:
    """Row/column histogram differences against the ring, and their product."""

    g_row: np.ndarray
    g_col: np.ndarray
    product: np.ndarray
    levels: int
    binary: np.ndarray = None


@dataclass(frozen=True)
class TrackedObject:
    center: tuple
    size: tuple
    box: ObjectBox


@dataclass(frozen=True)
class TrackState:
    """Immutable snapshot of L consecutive detection masks plus candidates.

    ``masks`` are positive-valued rasters (mask convention of the
    detector); ``objects`` are the frame-0 candidates to confirm.
    """

    masks: tuple
    objects: tuple
    r_threshold: float

    def __post_init__(self):
        if len(self.masks) < 1:
            raise ValueError("at least one frame is required")
        if not (0.0 <= self.r_threshold <= 1.0):
            raise ValueError("r_threshold must lie in [0, 1]")
        object.__setattr__(self, "masks", tuple(np.asarray(m, float) for m in self.masks))
        object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def window(self) -> int:
        return len(self.masks)


def connected_components(mask, min_area: int = 1):
    """Bounding boxes of 8-connected positive components, small ones dropped."""
    if isinstance(mask, DetectionMask):
        raster = mask.positive()
    else:
        raster = np.asarray(mask) > 0
    labels, count = ndimage.label(raster, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return []
    areas = np.bincount(labels.ravel())
    boxes = []
    for idx, slc in enumerate(ndimage.find_objects(labels), start=1):
        if slc is None or areas[idx] < min_area:
            continue
        boxes.append(
            ObjectBox(
                x0=slc[0].start,
                y0=slc[1].start,
                x1=slc[0].stop - 1,
                y1=slc[1].stop - 1,
            )
        )
    return boxes


def _histogram(values: np.ndarray, levels: int) -> np.ndarray:
    """Unit-mass histogram over integer bins 0..levels-1 (values clipped)."""
    bins = np.clip(np.floor(values.ravel()).astype(int), 0, levels - 1)
    h = np.bincount(bins, minlength=levels).astype(float)
    total = h.sum()
    return h / total if total > 0 else h


def histogram_difference(
    image_gray: np.ndarray, box: ObjectBox, e: int = 7, levels: int = 256
) -> HistogramEvidence:
    """Row and column histogram differences of a box against its ring.

    Every histogram (per object row, per object column, and the single
    ring histogram over the extended box minus the object) is normalised
    to unit mass before subtraction; otherwise the wildly different sample
    counts would dominate the product matrix.
    """
    image_gray = np.asarray(image_gray, dtype=float)
    if levels < 2:
        raise ValueError("levels must be at least 2")
    outer = box.extended(e, image_gray.shape)
    if (
        box.x0 - e < 0
        or box.y0 - e < 0
        or box.x1 + e >= image_gray.shape[0]
        or box.y1 + e >= image_gray.shape[1]
    ):
        warnings.warn("extended box clipped to the image bounds", stacklevel=2)

    ring = np.ones((outer.height, outer.width), dtype=bool)
    ring[box.x0 - outer.x0 : box.x1 - outer.x0 + 1, box.y0 - outer.y0 : box.y1 - outer.y0 + 1] = False
    ring_values = image_gray[outer.x0 : outer.x1 + 1, outer.y0 : outer.y1 + 1][ring]
    if ring_values.size == 0:
        raise ValueError("empty ring: extension does not clear the object box")
    g_ring = _histogram(ring_values, levels)

    rows = box.height
    cols = box.width
    g_row = np.empty((rows, levels))
    for i in range(rows):
        g_row[i] = _histogram(image_gray[box.x0 + i, box.y0 : box.y1 + 1], levels) - g_ring
    g_col = np.empty((levels, cols))
    for j in range(cols):
        g_col[:, j] = _histogram(image_gray[box.x0 : box.x1 + 1, box.y0 + j], levels) - g_ring

    return HistogramEvidence(g_row=g_row, g_col=g_col, product=g_row @ g_col, levels=levels)


def binarize_evidence(product: np.ndarray, epsilon_c: float) -> np.ndarray:
    """Binary evidence: 1 where the product exceeds the threshold."""
    product = np.asarray(product, dtype=float)
    if not np.all(np.isfinite(product)):
        raise ValueError("evidence matrix has non-finite entries")
    return (product > epsilon_c).astype(np.uint8)


def default_evidence_threshold(product: np.ndarray) -> float:
    """Threshold policy when none is configured: mean + 2 std of the evidence."""
    product = np.asarray(product, dtype=float)
    return float(product.mean() + 2.0 * product.std())


def density_verdict(binary: np.ndarray, cell_size: int = 5, fill: float = 0.75):
    """True when any cell of the tiling reaches the fill fraction.

    Returns (verdict, per-cell fill fractions).  Fill is always counted
    against the full cell area, so trailing partial cells (and boxes
    smaller than one cell) must light up proportionally more of what they
    have; a box far smaller than a cell can never confirm.
    """
    if cell_size < 1:
        raise ValueError("cell_size must be positive")
    if not (0.0 < fill <= 1.0):
        raise ValueError("fill must lie in (0, 1]")
    binary = np.asarray(binary)
    rows = -(-binary.shape[0] // cell_size)
    cols = -(-binary.shape[1] // cell_size)
    cell_area = cell_size * cell_size
    fills = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            cell = binary[
                i * cell_size : (i + 1) * cell_size, j * cell_size : (j + 1) * cell_size
            ]
            fills[i, j] = np.count_nonzero(cell) / cell_area
    return bool((fills >= fill).any()), fills


def combine_binaries(binaries, mode: str = "or") -> np.ndarray:
    """Channel combination of binary evidence: disjunction or conjunction."""
    stack = np.stack([np.asarray(b, dtype=bool) for b in binaries])
    if mode == "or":
        return stack.any(axis=0).astype(np.uint8)
    if mode == "and":
        return stack.all(axis=0).astype(np.uint8)
    raise ValueError(f"unknown combination mode {mode!r}")


def _window_slices(center, size, shape):
    hi, hk = size[0] // 2, size[1] // 2
    x0 = max(0, center[0] - hi)
    x1 = min(shape[0] - 1, center[0] + hi)
    y0 = max(0, center[1] - hk)
    y1 = min(shape[1] - 1, center[1] + hk)
    return slice(x0, x1 + 1), slice(y0, y1 + 1)


def binary_correlation(track: TrackState, object_index: int) -> float:
    """Mask overlap ratio of one candidate across the frame window.

    r = sum_t |{v0 > 0} and {vt > 0}| / sum_t |{vt > 0}| over the object
    window; 1 when every frame repeats the frame-0 support, small when
    later frames are disorganised.  An all-empty window yields 0 with a
    warning.
    """
    obj = track.objects[object_index]
    sx, sy = _window_slices(obj.center, obj.size, track.masks[0].shape)
    ref = track.masks[0][sx, sy] > 0
    numerator = 0
    denominator = 0
    for frame in track.masks:
        cur = frame[sx, sy] > 0
        numerator += int(np.count_nonzero(ref & cur))
        denominator += int(np.count_nonzero(cur))
    if denominator == 0:
        warnings.warn("empty track window: correlation undefined, using 0", stacklevel=2)
        return 0.0
    return numerator / denominator


def track_filter(track: TrackState, extension: int = 7):
    """Confirmed objects, re-emitted with their background-extended boxes."""
    shape = track.masks[0].shape
    confirmed = []
    for idx, obj in enumerate(track.objects):
        r = binary_correlation(track, idx)
        if r > track.r_threshold:
            confirmed.append(replace(obj.box.extended(extension, shape), frame_index=obj.box.frame_index))
    return confirmed
