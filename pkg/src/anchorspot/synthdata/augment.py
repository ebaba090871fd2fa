"""Training-time augmentation: scale, rotate, square crop.

Image and polygon coordinates go through the same affine map, so
annotation/image registration is preserved. Instances whose center leaves
the crop are dropped; instances that lose more than 70% of their area to
the crop window are kept but marked don't-care.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.geometry import box as shapely_box

from ..geometry import Point, Polygon
from ..labelgen import InstanceAnnotation


@dataclass(frozen=True)
class AugmentConfig:
    scale: tuple[float, float] = (0.4, 1.7)
    rotation_deg: tuple[float, float] = (-10.0, 10.0)
    crop_size: int = 640
    center_on_instance_prob: float = 0.5
    keep_fraction_care_threshold: float = 0.3
    enabled: bool = True


def _transform_points(pts: np.ndarray, m: np.ndarray) -> np.ndarray:
    return pts @ m[:, :2].T + m[:, 2]


def augment(image: np.ndarray, annos: list[InstanceAnnotation],
            cfg: AugmentConfig, rng: np.random.Generator
            ) -> tuple[np.ndarray, list[InstanceAnnotation]]:
    if not cfg.enabled:
        return image, list(annos)
    h, w = image.shape[:2]
    crop = cfg.crop_size
    s = float(rng.uniform(*cfg.scale))
    theta = math.radians(float(rng.uniform(*cfg.rotation_deg)))

    # pick the crop center in source coordinates, biased toward instances
    strong = [a for a in annos if a.polygon is not None]
    if strong and rng.random() < cfg.center_on_instance_prob:
        inst = strong[int(rng.integers(len(strong)))]
        c = inst.polygon.centroid()
        center = np.array([c.x, c.y])
        center += rng.uniform(-0.15, 0.15, size=2) * crop / s
    else:
        center = np.array([rng.uniform(0, w), rng.uniform(0, h)])
    # clamp so the crop window stays inside the scaled image where possible
    reach = (crop / 2) * (abs(math.cos(theta)) + abs(math.sin(theta))) / s
    for axis, limit in ((0, w), (1, h)):
        if 2 * reach < limit:
            center[axis] = min(max(center[axis], reach), limit - reach)
        else:
            center[axis] = limit / 2

    cs, sn = s * math.cos(theta), s * math.sin(theta)
    rot = np.array([[cs, -sn], [sn, cs]])
    t = np.array([crop / 2, crop / 2]) - rot @ center
    m = np.concatenate([rot, t[:, None]], axis=1)

    border = tuple(int(v) for v in np.median(image.reshape(-1, 3), axis=0))
    out = cv2.warpAffine(image, m, (crop, crop), flags=cv2.INTER_LINEAR,
                         borderMode=cv2.BORDER_CONSTANT, borderValue=border)

    crop_box = shapely_box(0, 0, crop, crop)
    kept: list[InstanceAnnotation] = []
    for anno in annos:
        if anno.is_weak:
            p = _transform_points(np.array([[anno.anchor_hint.x,
                                             anno.anchor_hint.y]]), m)[0]
            if 0 <= p[0] < crop and 0 <= p[1] < crop:
                kept.append(InstanceAnnotation(
                    transcription=anno.transcription,
                    anchor_hint=Point(float(p[0]), float(p[1])),
                    is_weak=True, care=anno.care))
            continue
        pts = _transform_points(anno.polygon.as_array(), m)
        cx, cy = pts.mean(axis=0)
        if not (0 <= cx < crop and 0 <= cy < crop):
            continue
        care = anno.care
        if care:
            shp = ShapelyPolygon(pts)
            if not shp.is_valid:
                shp = shp.buffer(0)
            if shp.area > 0:
                kept_fraction = shp.intersection(crop_box).area / shp.area
                if kept_fraction < cfg.keep_fraction_care_threshold:
                    care = False
        kept.append(InstanceAnnotation(
            transcription=anno.transcription,
            polygon=Polygon([(x, y) for x, y in pts]),
            care=care))
    return out, kept
