"""From head outputs to spotting results.

Pipeline: threshold the confidence maps into candidates, decode boxes from
the geometry distances, NMS across both levels jointly, then per survivor
assemble its instance mask into a polygon and decode its transcription
from the gathered character sequence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .geometry import AxisAlignedBox, Point, Polygon, mask_to_polygons
from .labelgen import BLANK, decode_labels
from .network import HeadOutputs, SpotterModel, gather_sequence, normalize_image

DEFAULT_CONF_THRESH = 0.5
DEFAULT_NMS_IOU = 0.5


@dataclass
class Candidate:
    """One positive anchor point and everything hanging off it."""

    level: int                  # index into config.levels (0 = finest)
    cell: tuple[int, int]       # (col, row) grid coords
    score: float
    box: AxisAlignedBox         # image pixels
    coefficients: np.ndarray    # (k,)
    text: str = ""
    text_score: float = 0.0
    polygon: Polygon | None = None
    anchor_point: Point | None = None          # image pixels
    sample_points: list[Point] = field(default_factory=list)


@dataclass(frozen=True)
class Lexicon:
    words: tuple[str, ...]
    mode: str = "full"  # "none" disables correction

    @staticmethod
    def from_words(words, mode="full") -> "Lexicon":
        folded = sorted({w.lower() for w in words if w})
        return Lexicon(words=tuple(folded), mode=mode)


@dataclass
class SpotEntry:
    polygon: Polygon
    text: str
    score: float


@dataclass
class SpotResult:
    entries: list[SpotEntry]
    candidates: list[Candidate] = field(default_factory=list)  # debug capture

    def polygons(self):
        return [e.polygon for e in self.entries]

    def texts(self):
        return [e.text for e in self.entries]


def select_candidates(heads: HeadOutputs, strides, conf_thresh=DEFAULT_CONF_THRESH,
                      batch_index: int = 0) -> list[Candidate]:
    """Every cell whose confidence reaches the threshold, box decoded from
    the stride-unit geometry distances around the cell center.
    """
    cands = []
    for level, stride in enumerate(strides):
        conf = heads.confidence[level][batch_index, 0].detach().cpu().numpy()
        geo = heads.geometry[level][batch_index].detach().cpu().numpy()
        coeff = heads.coefficients[level][batch_index].detach().cpu().numpy()
        rows, cols = np.nonzero(conf >= conf_thresh)
        for h, w in zip(rows, cols):
            cx = (w + 0.5) * stride
            cy = (h + 0.5) * stride
            t, r, b, l = geo[:, h, w] * stride
            cands.append(Candidate(
                level=level,
                cell=(int(w), int(h)),
                score=float(conf[h, w]),
                box=AxisAlignedBox(cx - l, cy - t, cx + r, cy + b),
                coefficients=coeff[:, h, w].copy(),
                anchor_point=Point(cx, cy),
            ))
    return cands


def nms(cands: list[Candidate], iou_thresh=DEFAULT_NMS_IOU) -> list[Candidate]:
    """Greedy descending-score suppression on axis-aligned box IoU.

    A candidate is suppressed when its IoU with an already-kept box exceeds
    the threshold (ties at exactly the threshold are kept). Equal scores
    break by original candidate order.
    """
    if not cands:
        return []
    boxes = np.array([[c.box.left, c.box.top, c.box.right, c.box.bottom]
                      for c in cands])
    scores = np.array([c.score for c in cands])
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    order = np.argsort(-scores, kind="stable")

    keep = []
    while order.size > 0:
        i = order[0]
        keep.append(int(i))
        if order.size == 1:
            break
        rest = order[1:]
        xx1 = np.maximum(boxes[i, 0], boxes[rest, 0])
        yy1 = np.maximum(boxes[i, 1], boxes[rest, 1])
        xx2 = np.minimum(boxes[i, 2], boxes[rest, 2])
        yy2 = np.minimum(boxes[i, 3], boxes[rest, 3])
        inter = np.maximum(0.0, xx2 - xx1) * np.maximum(0.0, yy2 - yy1)
        union = areas[i] + areas[rest] - inter
        iou = np.where(union > 0, inter / np.maximum(union, 1e-12), 0.0)
        order = rest[iou <= iou_thresh]
    return [cands[i] for i in sorted(keep)]


def assemble_mask(prototypes: torch.Tensor, coefficients: np.ndarray) -> np.ndarray:
    """Binary mask = sigmoid(sum_j coeff_j * prototype_j) >= 0.5.

    Computed on logits (>= 0), so the all-zero-coefficient case lands on
    the boundary and is foreground by convention.
    """
    coeff = torch.as_tensor(coefficients, dtype=prototypes.dtype,
                            device=prototypes.device)
    logits = (prototypes * coeff[:, None, None]).sum(dim=0)
    return (logits >= 0).cpu().numpy().astype(np.uint8)


def ctc_greedy_decode(seq) -> tuple[str, float]:
    """Best-path decode: argmax per step, collapse repeats, drop blanks.

    Ties at the argmax go to the lowest class index (numpy argmax
    convention). Returns (text, mean max-probability over the steps whose
    argmax is not blank; 0.0 if every step is blank).
    """
    probs = seq.detach().cpu().numpy() if isinstance(seq, torch.Tensor) else np.asarray(seq)
    best = probs.argmax(axis=1)
    confs = probs.max(axis=1)
    labels = []
    prev = -1
    for cls in best:
        if cls != prev and cls != BLANK:
            labels.append(int(cls))
        prev = cls
    non_blank = confs[best != BLANK]
    text_score = float(non_blank.mean()) if non_blank.size else 0.0
    return decode_labels(labels), text_score


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def lexicon_correct(text: str, lex: Lexicon | None) -> str:
    """Nearest lexicon word by edit distance; ties break lexicographically.

    Returns the raw text unchanged when the lexicon is disabled, the text
    is empty, or the best normalized distance exceeds 0.5.
    """
    if lex is None or lex.mode == "none" or not text:
        return text
    if not lex.words:
        raise ValueError("lexicon has no words")
    best_word = None
    best_dist = None
    for word in lex.words:  # sorted, so ties keep the lexicographic winner
        d = levenshtein(text, word)
        if best_dist is None or d < best_dist:
            best_word, best_dist = word, d
    if best_dist / max(len(text), len(best_word)) > 0.5:
        return text
    return best_word


def _clip_polygon_to_image(poly: Polygon, image_hw) -> Polygon:
    h, w = image_hw
    pts = poly.as_array()
    pts[:, 0] = np.clip(pts[:, 0], 0, w)
    pts[:, 1] = np.clip(pts[:, 1], 0, h)
    return Polygon([(x, y) for x, y in pts])


def spot(image: np.ndarray, model: SpotterModel,
         conf_thresh: float = DEFAULT_CONF_THRESH,
         nms_iou: float = DEFAULT_NMS_IOU,
         lexicon: Lexicon | None = None,
         debug: bool = False) -> SpotResult:
    """Full spotting pipeline for one (H, W, 3) uint8 image.

    Candidates from both levels are pooled before NMS. Each survivor gets
    a polygon (largest connected region of its assembled mask, falling
    back to its box when the mask is empty) and a transcription decoded
    from its gathered character sequence.
    """
    was_training = model.training
    model.eval()
    try:
        strides = [lv.stride for lv in model.config.levels]
        x = normalize_image(image).unsqueeze(0)
        with torch.no_grad():
            heads = model(x)
            cands = select_candidates(heads, strides, conf_thresh)
            survivors = nms(cands, nms_iou)
            ih, iw = heads.image_hw
            for cand in survivors:
                # detection branch: mask -> polygon
                mask = assemble_mask(heads.prototypes[0], cand.coefficients)
                mask = mask[:ih, :iw]
                polys = mask_to_polygons(mask)
                if polys:
                    cand.polygon = max(polys, key=lambda p: p.area)
                else:
                    cand.polygon = _clip_polygon_to_image(
                        cand.box.corners(), (ih, iw))
                # recognition branch: sample -> classify -> decode
                w, h = cand.cell
                anchors = torch.tensor([[0, h, w]])
                seq = gather_sequence(heads.char_logits[cand.level],
                                      heads.sampling[cand.level], anchors)[0]
                cand.text, cand.text_score = ctc_greedy_decode(seq)
                cand.text = lexicon_correct(cand.text, lexicon)
                if debug:
                    stride = strides[cand.level]
                    offsets = heads.sampling[cand.level][0, :, h, w].cpu().numpy()
                    ax, ay = cand.anchor_point.x, cand.anchor_point.y
                    cand.sample_points = [
                        Point(ax + offsets[2 * i] * stride,
                              ay + offsets[2 * i + 1] * stride)
                        for i in range(len(offsets) // 2)
                    ]
    finally:
        if was_training:
            model.train()

    entries = [SpotEntry(polygon=c.polygon, text=c.text, score=c.score)
               for c in survivors]
    return SpotResult(entries=entries, candidates=survivors if debug else [])


def result_to_record(image_name: str, result: SpotResult) -> dict:
    """Stable-order JSON-ready record for golden-file diffing."""
    return {
        "image": image_name,
        "results": [
            {
                "polygon": [[round(float(v.x), 2), round(float(v.y), 2)]
                            for v in e.polygon.vertices],
                "text": e.text,
                "score": round(float(e.score), 6),
            }
            for e in result.entries
        ],
    }


def write_results(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_results(path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
