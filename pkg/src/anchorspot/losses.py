"""Training objectives and their weighted combination.

All losses take torch tensors and stay differentiable. Detection and
sampling terms are computed on valid (non-weak) positive anchors only; the
recognition CTC term also covers weak anchors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import torch

DICE_EPS = 1e-6
IOU_FLOOR = 1e-6
CTC_INFEASIBLE_PENALTY = 50.0


class LossNaNError(RuntimeError):
    """A loss term became NaN; carries the offending term's name."""

    def __init__(self, part: str):
        super().__init__(f"loss term {part!r} is NaN")
        self.part = part


@dataclass
class LossWeights:
    """Joint-objective weights; sampling supervision is a pre-training-only
    term and is zeroed when the flag is off (fine-tuning stage).
    """

    lambda_confidence: float = 5.0
    lambda_iou: float = 5.0
    lambda_mask: float = 5.0
    lambda_sampling: float = 1.0
    lambda_ctc: float = 1.0
    sampling_supervision_enabled: bool = True
    ctc_reduction: str = "mean"  # or "sum"


@dataclass
class LossParts:
    confidence: torch.Tensor
    iou: torch.Tensor
    mask: torch.Tensor
    sampling: torch.Tensor
    ctc: torch.Tensor

    def named(self):
        return (("confidence", self.confidence), ("iou", self.iou),
                ("mask", self.mask), ("sampling", self.sampling),
                ("ctc", self.ctc))


def dice_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """1 - 2*sum(pred*gt) / (sum(pred) + sum(gt) + eps)."""
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(gt.shape)}")
    gt = gt.to(pred.dtype)
    inter = (pred * gt).sum()
    return 1.0 - 2.0 * inter / (pred.sum() + gt.sum() + DICE_EPS)


def iou_box_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """-ln(IoU) per anchor for boxes given as (top, right, bottom, left)
    distances from a shared anchor point. pred and gt are (N, 4).
    """
    inter_h = torch.minimum(pred[:, 0], gt[:, 0]) + torch.minimum(pred[:, 2], gt[:, 2])
    inter_w = torch.minimum(pred[:, 1], gt[:, 1]) + torch.minimum(pred[:, 3], gt[:, 3])
    inter = inter_h.clamp(min=0) * inter_w.clamp(min=0)
    area_p = (pred[:, 0] + pred[:, 2]) * (pred[:, 1] + pred[:, 3])
    area_g = (gt[:, 0] + gt[:, 2]) * (gt[:, 1] + gt[:, 3])
    union = area_p + area_g - inter
    iou = inter / union.clamp(min=IOU_FLOOR)
    return -torch.log(iou.clamp(min=IOU_FLOOR))


def mask_loss(assembled: torch.Tensor, mask_gt: torch.Tensor) -> torch.Tensor:
    """Mean per-anchor Dice of assembled instance masks, (N, H, W) each."""
    if assembled.shape != mask_gt.shape:
        raise ValueError(f"shape mismatch {tuple(assembled.shape)} vs {tuple(mask_gt.shape)}")
    if assembled.numel() == 0:
        return assembled.sum() * 0.0
    gt = mask_gt.to(assembled.dtype)
    inter = (assembled * gt).flatten(1).sum(dim=1)
    denom = assembled.flatten(1).sum(dim=1) + gt.flatten(1).sum(dim=1) + DICE_EPS
    return (1.0 - 2.0 * inter / denom).mean()


def sampling_l1_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean absolute offset error over the 2K channels of valid anchors."""
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(gt.shape)}")
    if pred.numel() == 0:
        return pred.sum() * 0.0
    return (pred - gt).abs().mean()


def ctc_required_length(target: list[int]) -> int:
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def ctc_loss(probs: torch.Tensor, target: list[int], blank: int = 0) -> torch.Tensor:
    """-log P(target | probs) by the CTC forward algorithm in log space.

    probs is (K, C) with rows summing to one. Targets too long to emit
    within K steps get a large finite penalty with no gradient.
    """
    if ctc_required_length(target) > probs.shape[0]:
        warnings.warn(f"CTC target of length {len(target)} infeasible for "
                      f"{probs.shape[0]} steps; penalized")
        return probs.new_tensor(CTC_INFEASIBLE_PENALTY)
    padded = torch.full((len(target),), blank, dtype=torch.long)
    if target:
        padded = torch.tensor(target, dtype=torch.long)
    nll = ctc_loss_batch(probs.unsqueeze(0), padded.unsqueeze(0),
                         torch.tensor([len(target)]), blank=blank)
    return nll[0]


def ctc_loss_batch(probs: torch.Tensor, targets: torch.Tensor,
                   target_lengths: torch.Tensor, blank: int = 0) -> torch.Tensor:
    """Vectorized CTC negative log likelihood.

    probs: (N, K, C) probability rows; targets: (N, T_max) padded label
    indices; target_lengths: (N,). Returns (N,) losses. Infeasible rows
    must be filtered by the caller (see ctc_required_length).
    """
    n, k, _ = probs.shape
    t_max = targets.shape[1]
    s_max = 2 * t_max + 1
    device = probs.device
    dtype = probs.dtype
    neg_inf = torch.finfo(dtype).min / 4

    # blank-augmented target row: [blank, t1, blank, t2, ..., blank]
    ext = torch.full((n, s_max), blank, dtype=torch.long, device=device)
    ext[:, 1::2] = targets
    s_len = 2 * target_lengths.to(device) + 1

    log_p = torch.log(probs.clamp(min=1e-30))           # (N, K, C)
    emit = torch.gather(
        log_p.unsqueeze(2).expand(n, k, s_max, -1),
        3, ext.unsqueeze(1).expand(n, k, s_max).unsqueeze(-1)).squeeze(-1)  # (N, K, S)

    # skip transition allowed into non-blank s when label differs from s-2
    can_skip = torch.zeros((n, s_max), dtype=torch.bool, device=device)
    if s_max >= 3:
        can_skip[:, 2::2] = False
        lab = ext[:, 1::2]
        if lab.shape[1] >= 2:
            can_skip[:, 3::2] = lab[:, 1:] != lab[:, :-1]

    alpha = torch.full((n, s_max), neg_inf, dtype=dtype, device=device)
    alpha[:, 0] = emit[:, 0, 0]
    if s_max > 1:
        has_label = s_len > 1
        alpha[has_label, 1] = emit[has_label, 0, 1]

    for step in range(1, k):
        prev = alpha
        shift1 = torch.cat([torch.full((n, 1), neg_inf, dtype=dtype, device=device),
                            prev], dim=1)[:, :s_max]
        shift2 = torch.cat([torch.full((n, 2), neg_inf, dtype=dtype, device=device),
                            prev], dim=1)[:, :s_max]
        shift2 = torch.where(can_skip, shift2, torch.full_like(shift2, neg_inf))
        alpha = torch.logsumexp(torch.stack([prev, shift1, shift2]), dim=0)
        alpha = alpha + emit[:, step]

    idx_last = (s_len - 1).clamp(min=0)
    idx_prev = (s_len - 2).clamp(min=0)
    final_last = alpha.gather(1, idx_last.unsqueeze(1)).squeeze(1)
    final_prev = alpha.gather(1, idx_prev.unsqueeze(1)).squeeze(1)
    final_prev = torch.where(s_len >= 2, final_prev,
                             torch.full_like(final_prev, neg_inf))
    total = torch.logsumexp(torch.stack([final_last, final_prev]), dim=0)
    return -total


def total_loss(parts: LossParts, weights: LossWeights) -> torch.Tensor:
    """Weighted joint objective; aborts loudly on any NaN term."""
    for name, value in parts.named():
        if torch.isnan(value).any():
            raise LossNaNError(name)
    total = (weights.lambda_confidence * parts.confidence
             + weights.lambda_iou * parts.iou
             + weights.lambda_mask * parts.mask
             + weights.lambda_ctc * parts.ctc)
    if weights.sampling_supervision_enabled:
        total = total + weights.lambda_sampling * parts.sampling
    return total
