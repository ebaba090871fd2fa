"""Scoring protocols: detection P/R/F, end-to-end and word-spotting
F-measure under None/Full lexicons, and the IoU-conditioned recognition
error rate.

Matching is greedy one-to-one by descending IoU (deterministic: ties break
by prediction index then ground-truth index). End-to-end counts a matched
pair as a true positive only when the transcription also matches exactly
(case-insensitive over the 36-symbol alphabet). When both the prediction
and ground-truth sets are empty, precision/recall/F are reported as 1 by
convention.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import Polygon, polygon_iou
from .inference import Lexicon, lexicon_correct

MATCH_IOU_THRESH = 0.5


@dataclass
class MatchReport:
    matches: list[tuple[int, int, float]]  # (pred idx, gt idx, IoU)
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        if self.tp + self.fp == 0:
            return 1.0 if self.fn == 0 else 0.0
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        if self.tp + self.fn == 0:
            return 1.0 if self.fp == 0 else 0.0
        return self.tp / (self.tp + self.fn)

    @property
    def fmeasure(self) -> float:
        p, r = self.precision, self.recall
        if p + r == 0:
            return 0.0
        return 2 * p * r / (p + r)


def fmeasure(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _greedy_match(preds: list[Polygon], gts: list[Polygon], iou_thresh):
    pairs = []
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            iou = polygon_iou(p, g)
            if iou >= iou_thresh:
                pairs.append((iou, i, j))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_p: set[int] = set()
    used_g: set[int] = set()
    matches = []
    for iou, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((i, j, iou))
    return matches


def match_detections(preds: list[Polygon], gts: list[Polygon],
                     iou_thresh: float = MATCH_IOU_THRESH) -> MatchReport:
    """Greedy one-to-one matching by descending IoU."""
    matches = _greedy_match(preds, gts, iou_thresh)
    tp = len(matches)
    return MatchReport(matches=matches, tp=tp,
                       fp=len(preds) - tp, fn=len(gts) - tp)


def e2e_score(preds: list[tuple[Polygon, str]],
              gts: list[tuple[Polygon, str]],
              lexicon: Lexicon | None = None,
              iou_thresh: float = MATCH_IOU_THRESH) -> MatchReport:
    """Detection matching first, then transcription check on matched pairs.

    A geometric match with the wrong text is both a false positive and a
    false negative. Lexicon correction (when enabled) is applied to the
    predicted texts before comparison.
    """
    texts = [lexicon_correct(t.lower(), lexicon) for _, t in preds]
    det = match_detections([p for p, _ in preds], [g for g, _ in gts], iou_thresh)
    matches = [(i, j, iou) for i, j, iou in det.matches
               if texts[i] == gts[j][1].lower()]
    tp = len(matches)
    return MatchReport(matches=matches, tp=tp,
                       fp=len(preds) - tp, fn=len(gts) - tp)


def word_spotting_score(preds: list[tuple[Polygon, str]],
                        gts: list[tuple[Polygon, str, bool]],
                        lexicon: Lexicon | None = None,
                        iou_thresh: float = MATCH_IOU_THRESH) -> MatchReport:
    """Like e2e_score, but gts flagged care=False are excluded from FN
    counting, and predictions matching them count neither way.
    """
    det = match_detections([p for p, _ in preds],
                           [g for g, _, _ in gts], iou_thresh)
    ignored_preds = {i for i, j, _ in det.matches if not gts[j][2]}
    texts = [lexicon_correct(t.lower(), lexicon) for _, t in preds]
    matches = [(i, j, iou) for i, j, iou in det.matches
               if gts[j][2] and texts[i] == gts[j][1].lower()]
    tp = len(matches)
    num_care_gts = sum(1 for g in gts if g[2])
    fp = len(preds) - tp - len(ignored_preds)
    return MatchReport(matches=matches, tp=tp, fp=fp, fn=num_care_gts - tp)


def recognition_error_rate(preds: list[tuple[Polygon, str]],
                           gts: list[tuple[Polygon, str]],
                           iou_thresh: float = MATCH_IOU_THRESH) -> float | None:
    """Among matched pairs with IoU strictly above the threshold, the
    fraction whose transcriptions differ. None when nothing matches.
    """
    det = match_detections([p for p, _ in preds], [g for g, _ in gts], iou_thresh)
    strict = [(i, j) for i, j, iou in det.matches if iou > iou_thresh]
    if not strict:
        return None
    wrong = sum(1 for i, j in strict
                if preds[i][1].lower() != gts[j][1].lower())
    return wrong / len(strict)


@dataclass
class ScoreAccumulator:
    """Micro-averaged counts across images for one protocol."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, report: MatchReport):
        self.tp += report.tp
        self.fp += report.fp
        self.fn += report.fn

    def report(self) -> MatchReport:
        return MatchReport(matches=[], tp=self.tp, fp=self.fp, fn=self.fn)


@dataclass
class EvaluationReport:
    """Dataset-level scores plus the text table written to disk."""

    detection: MatchReport
    e2e_none: MatchReport
    e2e_full: MatchReport
    word_spotting_none: MatchReport
    word_spotting_full: MatchReport
    error_rate: float | None
    num_images: int = 0

    def format_table(self) -> str:
        lines = ["# spotting report v1", f"images: {self.num_images}"]
        d = self.detection
        lines.append(f"detection: R={d.recall:.4f} P={d.precision:.4f} F={d.fmeasure:.4f}")
        lines.append(f"e2e: None={self.e2e_none.fmeasure:.4f} "
                     f"Full={self.e2e_full.fmeasure:.4f}")
        lines.append(f"word_spotting: None={self.word_spotting_none.fmeasure:.4f} "
                     f"Full={self.word_spotting_full.fmeasure:.4f}")
        if self.error_rate is None:
            lines.append("recognition_error_rate: n/a")
        else:
            lines.append(f"recognition_error_rate: {self.error_rate:.4f}")
        return "\n".join(lines) + "\n"
