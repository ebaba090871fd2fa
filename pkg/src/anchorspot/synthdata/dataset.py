"""Dataset directory layout, annotation schema and mixture sampling.

A dataset is a directory:

    <root>/images/000000.png ...   lossless rasters
    <root>/annotations.json        UTF-8 JSON, schema below

    {"schema_version": 1,
     "records": [{"image": "images/000000.png",
                  "instances": [{"polygon": [x0, y0, x1, y1, ...],
                                 "text": "word", "care": true}
                                | {"anchor": [x, y], "text": "word"}]}]}

Weak records carry "anchor" instead of "polygon". Round-trips are exact.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from ..geometry import Point, Polygon, center_line, uniform_points
from ..labelgen import InstanceAnnotation
from .render import SynthConfig, render_sample

SCHEMA_VERSION = 1


class SchemaVersionError(ValueError):
    """Annotation file written by an incompatible schema."""


def instance_to_json(inst: InstanceAnnotation) -> dict:
    if inst.is_weak:
        return {"anchor": [inst.anchor_hint.x, inst.anchor_hint.y],
                "text": inst.transcription}
    flat = [float(v) for xy in inst.polygon.vertices for v in (xy.x, xy.y)]
    return {"polygon": flat, "text": inst.transcription, "care": inst.care}


def instance_from_json(d: dict) -> InstanceAnnotation:
    if "anchor" in d:
        x, y = d["anchor"]
        return InstanceAnnotation(transcription=d["text"],
                                  anchor_hint=Point(x, y), is_weak=True)
    flat = d["polygon"]
    pts = [(flat[i], flat[i + 1]) for i in range(0, len(flat), 2)]
    return InstanceAnnotation(transcription=d["text"], polygon=Polygon(pts),
                              care=d.get("care", True))


@dataclass
class DatasetRecord:
    image_path: str  # relative to the dataset root
    instances: list[InstanceAnnotation]


class Dataset:
    """Read handle over a dataset directory; images load lazily."""

    def __init__(self, root, records: list[DatasetRecord]):
        self.root = Path(root)
        self.records = records

    def __len__(self) -> int:
        return len(self.records)

    def load_image(self, index: int) -> np.ndarray:
        path = self.root / self.records[index].image_path
        image = cv2.imread(str(path), cv2.IMREAD_COLOR)
        if image is None:
            raise FileNotFoundError(f"missing or unreadable image {path}")
        return image

    def load_sample(self, index: int) -> tuple[np.ndarray, list[InstanceAnnotation]]:
        return self.load_image(index), self.records[index].instances


def write_dataset(root, samples) -> Dataset:
    """samples: iterable of (image, instances). Returns the read handle."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for i, (image, instances) in enumerate(samples):
        rel = f"images/{i:06d}.png"
        ok = cv2.imwrite(str(root / rel), image)
        if not ok:
            raise IOError(f"failed to write {root / rel}")
        records.append(DatasetRecord(image_path=rel, instances=list(instances)))
    payload = {
        "schema_version": SCHEMA_VERSION,
        "records": [
            {"image": r.image_path,
             "instances": [instance_to_json(inst) for inst in r.instances]}
            for r in records
        ],
    }
    with open(root / "annotations.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=1)
    return Dataset(root, records)


def read_dataset(root) -> Dataset:
    root = Path(root)
    with open(root / "annotations.json", encoding="utf-8") as f:
        payload = json.load(f)
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"annotations schema_version {version}, expected {SCHEMA_VERSION}")
    records = [
        DatasetRecord(image_path=rec["image"],
                      instances=[instance_from_json(d) for d in rec["instances"]])
        for rec in payload["records"]
    ]
    return Dataset(root, records)


def generate_dataset(cfg: SynthConfig, count: int, root) -> Dataset:
    """Render `count` samples of cfg and write them as a dataset."""
    return write_dataset(root, (render_sample(cfg, i) for i in range(count)))


def weaken_instance(inst: InstanceAnnotation) -> InstanceAnnotation:
    """Strip a polygon annotation down to its center point + transcription."""
    if inst.is_weak:
        return inst
    anchor = uniform_points(center_line(inst.polygon), 1)[0]
    return InstanceAnnotation(transcription=inst.transcription,
                              anchor_hint=anchor, is_weak=True)


def weaken_dataset(src: Dataset, out_root) -> Dataset:
    """Copy of src with every polygon annotation reduced to an anchor point."""
    def samples():
        for i in range(len(src)):
            image, instances = src.load_sample(i)
            yield image, [weaken_instance(inst) for inst in instances]
    return write_dataset(out_root, samples())


def mixture_sampler(datasets: list[Dataset], ratios, rng: np.random.Generator):
    """Endless stream of (image, instances), datasets drawn by ratio.

    Zero-ratio datasets are never drawn; a positive-ratio empty dataset is
    a configuration error.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if len(ratios) != len(datasets):
        raise ValueError("one ratio per dataset required")
    if (ratios < 0).any() or ratios.sum() <= 0:
        raise ValueError("ratios must be nonnegative and not all zero")
    for ds, ratio in zip(datasets, ratios):
        if ratio > 0 and len(ds) == 0:
            raise ValueError("dataset with positive ratio is empty")
    p = ratios / ratios.sum()
    while True:
        di = int(rng.choice(len(datasets), p=p))
        idx = int(rng.integers(len(datasets[di])))
        yield datasets[di].load_sample(idx)
