"""Dense per-level training targets from word-level annotations.

Every image-frame annotation (polygon or weak anchor hint, plus a
transcription) is converted into grids aligned with the feature pyramid:
confidence, 4-distance geometry, center-line sampling coordinates, full
resolution instance masks and per-anchor transcription labels.

Weak annotations (anchor point + text, no polygon) contribute only to the
confidence and text targets; their cells are flagged in weak_mask and
excluded from geometry/sampling/mask supervision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point, Polygon, center_line, rasterize, shrink_positive_region, uniform_points

ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"
BLANK = 0
NUM_CLASSES = len(ALPHABET) + 1  # 36 symbols + blank
_CHAR_TO_INDEX = {c: i + 1 for i, c in enumerate(ALPHABET)}


class LevelAssignmentError(ValueError):
    """No pyramid level accepts the instance's height."""


class WeakAnnotationError(ValueError):
    """Operation needs a polygon but the annotation is anchor-only."""


def encode_transcription(text: str) -> list[int]:
    """Label indices for a transcription: a-z -> 1..26, 0-9 -> 27..36.

    Case-folded; symbols outside the alphabet are dropped with a warning.
    """
    folded = text.lower()
    kept = [c for c in folded if c in _CHAR_TO_INDEX]
    if len(kept) != len(folded):
        dropped = "".join(c for c in folded if c not in _CHAR_TO_INDEX)
        warnings.warn(f"dropped out-of-alphabet symbols {dropped!r} from {text!r}")
    return [_CHAR_TO_INDEX[c] for c in kept]


def decode_labels(indices) -> str:
    """Inverse of encode_transcription (blanks skipped)."""
    return "".join(ALPHABET[i - 1] for i in indices if i != BLANK)


@dataclass(frozen=True)
class LevelSpec:
    """One pyramid level: stride and the open height interval it owns."""

    level_index: int
    stride: int
    height_thresholds: tuple[float, float]

    def grid_shape(self, image_hw: tuple[int, int]) -> tuple[int, int]:
        h, w = image_hw
        return (math.ceil(h / self.stride), math.ceil(w / self.stride))


DEFAULT_LEVELS = (
    LevelSpec(level_index=2, stride=4, height_thresholds=(0.0, 40.0)),
    LevelSpec(level_index=3, stride=8, height_thresholds=(40.0, math.inf)),
)


@dataclass
class InstanceAnnotation:
    """One ground-truth word: polygon + text, or (weak mode) anchor + text."""

    transcription: str
    polygon: Polygon | None = None
    anchor_hint: Point | None = None
    is_weak: bool = False
    care: bool = True

    def __post_init__(self):
        if self.is_weak:
            if self.anchor_hint is None or self.polygon is not None:
                raise ValueError("weak annotation carries an anchor hint only")
        else:
            if self.polygon is None or self.anchor_hint is not None:
                raise ValueError("strong annotation carries a polygon only")
        if not self.transcription:
            raise ValueError("transcription must be non-empty")


def average_height(inst: InstanceAnnotation) -> float:
    """Mean distance between paired vertices (i, 2n-1-i)."""
    if inst.polygon is None:
        raise WeakAnnotationError("average_height needs a polygon")
    pts = inst.polygon.as_array()
    n = len(pts) // 2
    if len(pts) % 2 != 0 or n < 2:
        raise ValueError(f"malformed polygon with {len(pts)} vertices")
    top = pts[:n]
    bottom = pts[len(pts) - 1:n - 1:-1]
    return float(np.linalg.norm(top - bottom, axis=1).mean())


def assign_level(h_star: float, levels=DEFAULT_LEVELS) -> LevelSpec:
    """Level whose open height interval contains h_star.

    A value exactly on an interior threshold goes to the coarser level.
    Zero height fits no level.
    """
    ordered = sorted(levels, key=lambda lv: lv.stride)
    for spec in ordered:
        low, high = spec.height_thresholds
        if low < h_star < high:
            return spec
    for spec in ordered:
        if h_star == spec.height_thresholds[0] and h_star > 0:
            return spec
    raise LevelAssignmentError(f"height {h_star} fits no level")


@dataclass
class LevelTargets:
    """Dense targets for one pyramid level, arrays indexed [row, col]."""

    level: LevelSpec
    confidence: np.ndarray      # (H, W) uint8
    geometry: np.ndarray        # (4, H, W) float64, (top, right, bottom, left) px
    sampling: np.ndarray        # (2K, H, W) float64, stride-normalized offsets
    instance_index: np.ndarray  # (H, W) int32, -1 background
    positive_mask: np.ndarray   # (H, W) bool
    weak_mask: np.ndarray       # (H, W) bool, subset of positive_mask
    valid_mask: np.ndarray      # (H, W) bool: positive and not weak


@dataclass
class TargetBundle:
    """All levels plus per-instance full-resolution masks and label sequences."""

    levels: list[LevelTargets]
    masks: list[np.ndarray | None]   # (H_img, W_img) uint8 per instance, None if weak
    texts: list[list[int] | None]    # label indices per instance, None if unusable
    image_hw: tuple[int, int]
    instances: list[InstanceAnnotation] = field(default_factory=list)


def _anchor_cell(p: Point, stride: int) -> tuple[int, int]:
    return int(p.x // stride), int(p.y // stride)


def _paint_owner_grid(insts, indices, level: LevelSpec, image_hw) -> np.ndarray:
    """Per-cell owning instance (or -1). Overlaps go to the smaller region:
    strong regions are painted in descending area order, weak discs last.
    """
    gh, gw = level.grid_shape(image_hw)
    owner = np.full((gh, gw), -1, dtype=np.int32)

    strong = [(i, inst) for i, inst in zip(indices, insts) if not inst.is_weak]
    strong.sort(key=lambda pair: -pair[1].polygon.area)
    for idx, inst in strong:
        region = shrink_positive_region(inst.polygon)
        cells = rasterize(region, gw, gh, stride=level.stride).astype(bool)
        if not cells.any():
            # tiny shrunk region between cell centers: fall back to the cell
            # containing its centroid so every instance keeps >= 1 anchor
            c = region.centroid()
            w = min(max(int(c.x // level.stride), 0), gw - 1)
            h = min(max(int(c.y // level.stride), 0), gh - 1)
            cells[h, w] = True
        if (owner[cells] >= 0).any():
            warnings.warn(
                f"overlapping positive regions at level {level.level_index}; "
                "smaller instance kept")
        owner[cells] = idx

    for idx, inst in zip(indices, insts):
        if not inst.is_weak:
            continue
        cw, ch = _anchor_cell(inst.anchor_hint, level.stride)
        for dh, dw in ((0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)):
            h, w = ch + dh, cw + dw
            if 0 <= h < gh and 0 <= w < gw:
                if owner[h, w] >= 0 and owner[h, w] != idx:
                    warnings.warn("weak anchor disc overlaps another instance")
                owner[h, w] = idx
    return owner


def build_confidence_gt(insts, level: LevelSpec, image_hw) -> np.ndarray:
    """Binary positive-anchor grid for instances assigned to this level."""
    owner = _paint_owner_grid(insts, list(range(len(insts))), level, image_hw)
    return (owner >= 0).astype(np.uint8)


def build_geometry_gt(insts, level: LevelSpec, image_hw, owner: np.ndarray | None = None):
    """Distances (top, right, bottom, left) in pixels from each positive cell
    center to the owning instance's bounding rectangle, plus a validity grid
    (weak cells invalid).
    """
    if owner is None:
        owner = _paint_owner_grid(insts, list(range(len(insts))), level, image_hw)
    gh, gw = owner.shape
    geometry = np.zeros((4, gh, gw), dtype=np.float64)
    validity = np.zeros((gh, gw), dtype=np.uint8)
    s = level.stride
    for idx, inst in enumerate(insts):
        if inst.is_weak:
            continue
        cells = owner == idx
        if not cells.any():
            continue
        box = inst.polygon.bounding_box()
        hh, ww = np.nonzero(cells)
        cx = (ww + 0.5) * s
        cy = (hh + 0.5) * s
        geometry[0, hh, ww] = cy - box.top
        geometry[1, hh, ww] = box.right - cx
        geometry[2, hh, ww] = box.bottom - cy
        geometry[3, hh, ww] = cx - box.left
        validity[cells] = 1
    return geometry, validity


def build_sampling_gt(insts, level: LevelSpec, image_hw, K: int = 25,
                      owner: np.ndarray | None = None):
    """Stride-normalized offsets from each positive cell center to K uniform
    center-line points, interleaved (x0, y0, x1, y1, ...), plus validity.
    """
    if owner is None:
        owner = _paint_owner_grid(insts, list(range(len(insts))), level, image_hw)
    gh, gw = owner.shape
    sampling = np.zeros((2 * K, gh, gw), dtype=np.float64)
    validity = np.zeros((gh, gw), dtype=np.uint8)
    s = level.stride
    for idx, inst in enumerate(insts):
        if inst.is_weak:
            continue
        cells = owner == idx
        if not cells.any():
            continue
        line = center_line(inst.polygon)
        pts = np.array([(p.x, p.y) for p in uniform_points(line, K)])  # (K, 2)
        hh, ww = np.nonzero(cells)
        cx = (ww + 0.5) * s
        cy = (hh + 0.5) * s
        off_x = (pts[:, 0:1] - cx[None, :]) / s  # (K, N)
        off_y = (pts[:, 1:2] - cy[None, :]) / s
        sampling[0::2][:, hh, ww] = off_x
        sampling[1::2][:, hh, ww] = off_y
        validity[cells] = 1
    return sampling, validity


def build_mask_gt(insts, image_hw) -> list[np.ndarray | None]:
    """Full-resolution binary mask per instance (None for weak annotations)."""
    h, w = image_hw
    masks = []
    for inst in insts:
        if inst.is_weak:
            masks.append(None)
        else:
            masks.append(rasterize(inst.polygon, w, h, stride=1))
    return masks


def build_text_gt(insts) -> list[list[int] | None]:
    """Label sequence per instance; None (skipped) when nothing survives
    alphabet filtering.
    """
    texts = []
    for inst in insts:
        seq = encode_transcription(inst.transcription)
        if not seq:
            warnings.warn(f"instance with empty encodable text {inst.transcription!r} skipped")
            texts.append(None)
        else:
            texts.append(seq)
    return texts


def build_targets(insts, image_hw, levels=DEFAULT_LEVELS, K: int = 25) -> TargetBundle:
    """Assign instances to levels and build the full target bundle.

    Strong instances go to the level owning their average height; weak
    instances (no polygon, hence no height) go to the finest level.
    """
    ordered = sorted(levels, key=lambda lv: lv.stride)
    finest = ordered[0]
    per_level: dict[int, list[int]] = {lv.level_index: [] for lv in ordered}
    for i, inst in enumerate(insts):
        if inst.is_weak:
            per_level[finest.level_index].append(i)
            continue
        try:
            spec = assign_level(average_height(inst), ordered)
        except LevelAssignmentError:
            warnings.warn(f"instance {inst.transcription!r} has zero height, skipped")
            continue
        per_level[spec.level_index].append(i)

    level_targets = []
    for spec in ordered:
        idxs = per_level[spec.level_index]
        members = [insts[i] for i in idxs]
        owner_local = _paint_owner_grid(members, idxs, spec, image_hw)
        confidence = (owner_local >= 0).astype(np.uint8)
        geometry, validity = build_geometry_gt(
            members, spec, image_hw,
            owner=_relabel(owner_local, idxs))
        sampling, _ = build_sampling_gt(
            members, spec, image_hw, K=K,
            owner=_relabel(owner_local, idxs))
        positive = owner_local >= 0
        weak = np.zeros_like(positive)
        for i in idxs:
            if insts[i].is_weak:
                weak |= owner_local == i
        level_targets.append(LevelTargets(
            level=spec,
            confidence=confidence,
            geometry=geometry,
            sampling=sampling,
            instance_index=owner_local,
            positive_mask=positive,
            weak_mask=weak,
            valid_mask=positive & ~weak,
        ))

    return TargetBundle(
        levels=level_targets,
        masks=build_mask_gt(insts, image_hw),
        texts=build_text_gt(insts),
        image_hw=tuple(image_hw),
        instances=list(insts),
    )


def _relabel(owner: np.ndarray, global_indices: list[int]) -> np.ndarray:
    """Map a global-index owner grid to local positions in a member list."""
    local = np.full_like(owner, -1)
    for local_idx, global_idx in enumerate(global_indices):
        local[owner == global_idx] = local_idx
    return local
