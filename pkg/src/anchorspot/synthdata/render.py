"""Deterministic synthetic word-image generator.

Words are drawn as vector strokes along a straight or circular-arc
baseline. Each word emits the true paired-vertex polygon (baseline
stations offset by half the band height along the local normal) and its
transcription. Sample i of a config is a pure function of (seed, i).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import cv2
import numpy as np

from ..geometry import Point, Polygon
from ..labelgen import InstanceAnnotation
from .glyphs import GLYPH_ASPECT, GLYPH_STROKES

DEFAULT_VOCABULARY = (
    "the", "and", "for", "are", "but", "not", "you", "all", "can", "her",
    "was", "one", "our", "out", "day", "get", "has", "him", "how", "man",
    "new", "now", "old", "see", "two", "way", "who", "boy", "did", "its",
    "let", "put", "say", "she", "too", "use", "that", "with", "have", "this",
    "will", "your", "from", "they", "know", "want", "been", "good", "much",
    "some", "time", "very", "when", "come", "here", "just", "like", "long",
    "make", "many", "more", "only", "over", "such", "take", "than", "them",
    "well", "were", "about", "after", "again", "could", "every", "first",
    "found", "great", "house", "large", "learn", "never", "other", "place",
    "plant", "point", "right", "small", "sound", "spell", "still", "study",
    "their", "there", "these", "thing", "think", "three", "water", "where",
    "which", "world", "gate7", "zone42",
)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    vocabulary: tuple[str, ...] = DEFAULT_VOCABULARY
    image_size: int = 160
    words_per_image: tuple[int, int] = (1, 3)
    curvature_deg: tuple[float, float] = (30.0, 90.0)  # arc sweep range
    rotation_deg: tuple[float, float] = (-25.0, 25.0)
    cap_height: tuple[float, float] = (10.0, 28.0)
    straight_fraction: float = 0.5   # remaining words get an arc baseline
    noise: bool = True
    blur: bool = True


def _rotate(pts: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return pts @ np.array([[c, s], [-s, c]])  # row-vector convention


def _word_layout(word: str, cap: float, sweep_deg: float):
    """Stations, tangents and glyph frames in the word's local frame.

    Returns (stations (n+1, 2), normals (n+1, 2), glyph_mids (n, 2),
    glyph_tangent_angles (n,), band_half_height).
    """
    n = len(word)
    advance = 0.85 * cap
    total = n * advance
    thickness = max(1, int(round(cap * 0.13)))
    half = cap / 2 + thickness / 2 + 1.5
    end_pad = thickness / 2 + 1.5  # keep stroke caps inside the end edges

    if abs(sweep_deg) < 1e-6:
        xs = np.arange(n + 1) * advance - total / 2
        stations = np.stack([xs, np.zeros(n + 1)], axis=1)
        normals = np.tile([0.0, -1.0], (n + 1, 1))
        mids = np.stack([(xs[:-1] + xs[1:]) / 2, np.zeros(n)], axis=1)
        angles = np.zeros(n)
        stations[0, 0] -= end_pad
        stations[-1, 0] += end_pad
        return stations, normals, mids, angles, half

    sweep = math.radians(sweep_deg)
    radius = total / abs(sweep)
    sign = 1.0 if sweep > 0 else -1.0
    phis = (np.arange(n + 1) / n - 0.5) * abs(sweep)
    # circle center sits at (0, sign * radius); phi = 0 is the word middle
    stations = np.stack([radius * np.sin(phis),
                         sign * radius * (1 - np.cos(phis))], axis=1)
    normals = np.stack([sign * np.sin(phis), -np.cos(phis)], axis=1)
    mid_phis = (phis[:-1] + phis[1:]) / 2
    mids = np.stack([radius * np.sin(mid_phis),
                     sign * radius * (1 - np.cos(mid_phis))], axis=1)
    angles = sign * mid_phis
    tangent_start = np.array([math.cos(phis[0]), sign * math.sin(phis[0])])
    tangent_end = np.array([math.cos(phis[-1]), sign * math.sin(phis[-1])])
    stations[0] -= end_pad * tangent_start
    stations[-1] += end_pad * tangent_end
    return stations, normals, mids, angles, half


def _word_polygon(stations, normals, half, straight: bool) -> np.ndarray:
    if straight:
        top = stations[[0, -1]] + half * normals[[0, -1]]
        bottom = stations[[0, -1]] - half * normals[[0, -1]]
    else:
        top = stations + half * normals
        bottom = stations - half * normals
    return np.concatenate([top, bottom[::-1]], axis=0)


def _draw_word(image, word, cap, mids, angles, theta, center, color, thickness):
    h_box = cap
    w_box = GLYPH_ASPECT * cap
    for ch, mid, ang in zip(word, mids, angles):
        strokes = GLYPH_STROKES[ch]
        total_ang = ang  # local tangent; global rotation applied afterwards
        ca, sa = math.cos(total_ang), math.sin(total_ang)
        for stroke in strokes:
            pts = np.array(stroke, dtype=np.float64)
            local = np.stack([(pts[:, 0] - 0.5) * w_box,
                              (pts[:, 1] - 0.5) * h_box], axis=1)
            rotated = local @ np.array([[ca, sa], [-sa, ca]])
            placed = _rotate(rotated + mid, theta) + center
            placed = np.round(placed).astype(np.int32)
            for a, b in zip(placed[:-1], placed[1:]):
                cv2.line(image, tuple(a), tuple(b), color, thickness,
                         lineType=cv2.LINE_8)


def render_sample(cfg: SynthConfig, index: int) -> tuple[np.ndarray, list[InstanceAnnotation]]:
    """Render sample `index`: (H, W, 3) uint8 image plus its annotations.

    Bit-identical for a fixed (cfg.seed, index). Words that cannot be
    placed after shrinking retries are skipped with a warning.
    """
    rng = np.random.default_rng([cfg.seed, index])
    size = cfg.image_size
    bg = rng.integers(150, 231, size=3)
    image = np.full((size, size, 3), bg, dtype=np.uint8)

    annotations: list[InstanceAnnotation] = []
    placed_boxes: list[np.ndarray] = []
    n_words = int(rng.integers(cfg.words_per_image[0], cfg.words_per_image[1] + 1))

    for _ in range(n_words):
        word = str(rng.choice(cfg.vocabulary))
        cap = float(rng.uniform(*cfg.cap_height))
        theta = math.radians(float(rng.uniform(*cfg.rotation_deg)))
        if rng.random() < cfg.straight_fraction:
            sweep = 0.0
        else:
            sweep = float(rng.uniform(*cfg.curvature_deg)) * (1 if rng.random() < 0.5 else -1)

        placed = False
        for attempt in range(40):
            if attempt and attempt % 8 == 0:
                cap *= 0.85
            stations, normals, mids, angles, half = _word_layout(word, cap, sweep)
            poly_local = _word_polygon(stations, normals, half, sweep == 0.0)
            poly_rot = _rotate(poly_local, theta)
            lo = poly_rot.min(axis=0)
            hi = poly_rot.max(axis=0)
            extent = hi - lo
            margin = 3.0
            if extent[0] > size - 2 * margin or extent[1] > size - 2 * margin:
                continue
            cx = float(rng.uniform(margin - lo[0], size - margin - hi[0]))
            cy = float(rng.uniform(margin - lo[1], size - margin - hi[1]))
            center = np.array([cx, cy])
            box = np.concatenate([lo + center - 2, hi + center + 2])
            if any(_boxes_overlap(box, other) for other in placed_boxes):
                continue

            color = tuple(int(v) for v in rng.integers(0, 81, size=3))
            thickness = max(1, int(round(cap * 0.13)))
            _draw_word(image, word, cap, mids, angles, theta, center,
                       color, thickness)
            poly = Polygon([(x, y) for x, y in poly_rot + center])
            annotations.append(InstanceAnnotation(transcription=word, polygon=poly))
            placed_boxes.append(box)
            placed = True
            break
        if not placed:
            warnings.warn(f"could not place word {word!r} in sample {index}")

    if cfg.noise:
        noise = rng.normal(0, 5, size=image.shape)
        image = np.clip(image.astype(np.float64) + noise, 0, 255).astype(np.uint8)
    if cfg.blur and rng.random() < 0.3:
        image = cv2.GaussianBlur(image, (3, 3), 0.8)
    return image, annotations


def _boxes_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])
