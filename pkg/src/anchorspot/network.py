"""The differentiable model.

A reduced residual backbone feeds a two-level feature pyramid (strides 4
and 8). Five shared heads run on each level: anchor confidence, box
geometry, mask coefficients, point sampling and character classification;
a protonet on the finest level emits image-sized mask prototypes.
Predicted geometry distances and sampling offsets are in stride units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .labelgen import DEFAULT_LEVELS, NUM_CLASSES, LevelSpec

CHECKPOINT_FORMAT_VERSION = 1


def normalize_image(image_u8) -> torch.Tensor:
    """(H, W, 3) uint8 -> (3, H, W) float tensor in [-1, 1]."""
    t = torch.from_numpy(image_u8.copy()).float().permute(2, 0, 1)
    return t / 127.5 - 1.0


@dataclass(frozen=True)
class ModelConfig:
    backbone_channels: tuple[int, ...] = (32, 64, 128, 128)
    pyramid_channels: int = 64
    num_points: int = 25          # K sampled points per anchor
    num_prototypes: int = 4       # k mask coefficients / prototypes
    num_classes: int = NUM_CLASSES
    blocks_per_stage: int = 2
    levels: tuple[LevelSpec, ...] = tuple(DEFAULT_LEVELS)
    image_size: int = 320
    geometry_in_stride_units: bool = True

    def to_dict(self) -> dict:
        return {
            "backbone_channels": list(self.backbone_channels),
            "pyramid_channels": self.pyramid_channels,
            "num_points": self.num_points,
            "num_prototypes": self.num_prototypes,
            "num_classes": self.num_classes,
            "blocks_per_stage": self.blocks_per_stage,
            "levels": [
                {"level_index": lv.level_index, "stride": lv.stride,
                 "height_thresholds": [lv.height_thresholds[0],
                                       None if math.isinf(lv.height_thresholds[1])
                                       else lv.height_thresholds[1]]}
                for lv in self.levels
            ],
            "image_size": self.image_size,
            "geometry_in_stride_units": self.geometry_in_stride_units,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        levels = tuple(
            LevelSpec(
                level_index=lv["level_index"],
                stride=lv["stride"],
                height_thresholds=(
                    lv["height_thresholds"][0],
                    math.inf if lv["height_thresholds"][1] is None
                    else lv["height_thresholds"][1]),
            )
            for lv in d["levels"]
        )
        return ModelConfig(
            backbone_channels=tuple(d["backbone_channels"]),
            pyramid_channels=d["pyramid_channels"],
            num_points=d["num_points"],
            num_prototypes=d["num_prototypes"],
            num_classes=d["num_classes"],
            blocks_per_stage=d["blocks_per_stage"],
            levels=levels,
            image_size=d["image_size"],
            geometry_in_stride_units=d["geometry_in_stride_units"],
        )


@dataclass
class FeaturePyramid:
    p2: torch.Tensor  # (B, C, H/4, W/4)
    p3: torch.Tensor  # (B, C, H/8, W/8)
    image_hw: tuple[int, int]        # original (pre-pad) size
    padded_hw: tuple[int, int]

    @property
    def maps(self) -> list[torch.Tensor]:
        return [self.p2, self.p3]


@dataclass
class HeadOutputs:
    """Per-level dense predictions plus shared prototypes.

    Lists are ordered fine-to-coarse, matching config.levels. geometry and
    sampling are in stride units of their own level.
    """

    confidence: list[torch.Tensor]   # (B, 1, H, W) in (0, 1)
    geometry: list[torch.Tensor]     # (B, 4, H, W) > 0
    coefficients: list[torch.Tensor] # (B, k, H, W)
    sampling: list[torch.Tensor]     # (B, 2K, H, W)
    char_logits: list[torch.Tensor]  # (B, 37, H, W)
    prototypes: torch.Tensor         # (B, k, H_pad, W_pad)
    image_hw: tuple[int, int]
    padded_hw: tuple[int, int]


class ResidualBlock(nn.Module):
    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride=stride, bias=False),
                nn.BatchNorm2d(cout))
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class Backbone(nn.Module):
    """Stem + three residual stages at strides 4, 8 and 16."""

    def __init__(self, channels, blocks_per_stage):
        super().__init__()
        c0, c1, c2, c3 = channels
        self.stem = nn.Sequential(
            nn.Conv2d(3, c0, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(c0),
            nn.ReLU(inplace=True))
        self.stage1 = self._stage(c0, c1, blocks_per_stage)  # stride 4
        self.stage2 = self._stage(c1, c2, blocks_per_stage)  # stride 8
        self.stage3 = self._stage(c2, c3, blocks_per_stage)  # stride 16

    @staticmethod
    def _stage(cin, cout, blocks):
        layers = [ResidualBlock(cin, cout, stride=2)]
        layers += [ResidualBlock(cout, cout) for _ in range(blocks - 1)]
        return nn.Sequential(*layers)

    def forward(self, x):
        x = self.stem(x)
        c2 = self.stage1(x)
        c3 = self.stage2(c2)
        c4 = self.stage3(c3)
        return c2, c3, c4


class FeatureExtractor(nn.Module):
    """Backbone plus a top-down fusion pathway producing P2 and P3."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.backbone = Backbone(cfg.backbone_channels, cfg.blocks_per_stage)
        c = cfg.pyramid_channels
        _, c1, c2, c3 = cfg.backbone_channels
        self.lat2 = nn.Conv2d(c1, c, 1)
        self.lat3 = nn.Conv2d(c2, c, 1)
        self.lat4 = nn.Conv2d(c3, c, 1)
        self.smooth2 = nn.Conv2d(c, c, 3, padding=1)
        self.smooth3 = nn.Conv2d(c, c, 3, padding=1)

    def forward(self, x):
        c2, c3, c4 = self.backbone(x)
        p4 = self.lat4(c4)
        p3 = self.lat3(c3) + F.interpolate(p4, size=c3.shape[-2:], mode="nearest")
        p2 = self.lat2(c2) + F.interpolate(p3, size=c2.shape[-2:], mode="nearest")
        return self.smooth2(p2), self.smooth3(p3)


class AnchorHead(nn.Module):
    """3x3 conv, BN + ReLU, 1x1 conv to one channel, sigmoid."""

    def __init__(self, c):
        super().__init__()
        self.conv3 = nn.Conv2d(c, c, 3, padding=1)
        self.bn = nn.BatchNorm2d(c)
        self.conv1 = nn.Conv2d(c, 1, 1)

    def forward(self, p):
        return torch.sigmoid(self.conv1(F.relu(self.bn(self.conv3(p)))))


class GeometryHead(nn.Module):
    """Four box distances per cell, exp-activated so they stay positive."""

    MAX_LOG = 11.0  # caps distances at e^11 stride units

    def __init__(self, c):
        super().__init__()
        self.conv3 = nn.Conv2d(c, c, 3, padding=1)
        self.bn = nn.BatchNorm2d(c)
        self.conv1 = nn.Conv2d(c, 4, 1)

    def forward(self, p):
        raw = self.conv1(F.relu(self.bn(self.conv3(p))))
        return torch.exp(raw.clamp(max=self.MAX_LOG))


class CoefficientHead(nn.Module):
    def __init__(self, c, k):
        super().__init__()
        self.conv3 = nn.Conv2d(c, c, 3, padding=1)
        self.bn = nn.BatchNorm2d(c)
        self.conv1 = nn.Conv2d(c, k, 1)

    def forward(self, p):
        return self.conv1(F.relu(self.bn(self.conv3(p))))


class ProtoNet(nn.Module):
    """Stacked 3x3 convs on the finest level, resized to image size."""

    def __init__(self, c, k):
        super().__init__()
        self.convs = nn.Sequential(
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c, k, 1))

    def forward(self, p2, out_hw):
        x = self.convs(p2)
        return F.interpolate(x, size=out_hw, mode="bilinear", align_corners=False)


class SamplingHead(nn.Module):
    """Three 3x3 convs and a 1x1, BN + ReLU in between; 2K raw offsets."""

    def __init__(self, c, num_points):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(c, c, 3, padding=1), nn.BatchNorm2d(c), nn.ReLU(inplace=True),
            nn.Conv2d(c, c, 3, padding=1), nn.BatchNorm2d(c), nn.ReLU(inplace=True),
            nn.Conv2d(c, c, 3, padding=1), nn.BatchNorm2d(c), nn.ReLU(inplace=True),
            nn.Conv2d(c, 2 * num_points, 1))

    def forward(self, p):
        return self.body(p)


class ClassifierHead(nn.Module):
    """Four 3x3 convs with ReLU between, then a 1x1 to 37 logits."""

    def __init__(self, c, num_classes):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c, num_classes, 1))

    def forward(self, p):
        return self.body(p)


class SpotterModel(nn.Module):
    """Full spotter: extractor, anchor estimator, detector heads, protonet,
    sampling head and character classifier. Heads are shared across levels.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c = config.pyramid_channels
        self.extractor = FeatureExtractor(config)
        self.anchor_head = AnchorHead(c)
        self.geometry_head = GeometryHead(c)
        self.coefficient_head = CoefficientHead(c, config.num_prototypes)
        self.protonet = ProtoNet(c, config.num_prototypes)
        self.sampling_head = SamplingHead(c, config.num_points)
        self.classifier_head = ClassifierHead(c, config.num_classes)

    @property
    def pad_multiple(self) -> int:
        return 16  # deepest backbone stride

    def pad_input(self, images: torch.Tensor) -> tuple[torch.Tensor, tuple[int, int]]:
        """Zero-pad bottom/right so H and W divide the deepest stride."""
        h, w = images.shape[-2:]
        m = self.pad_multiple
        ph = (m - h % m) % m
        pw = (m - w % m) % m
        if ph or pw:
            images = F.pad(images, (0, pw, 0, ph))
        return images, (h, w)

    def extract_features(self, images: torch.Tensor) -> FeaturePyramid:
        padded, image_hw = self.pad_input(images)
        p2, p3 = self.extractor(padded)
        return FeaturePyramid(p2=p2, p3=p3, image_hw=image_hw,
                              padded_hw=tuple(padded.shape[-2:]))

    def forward(self, images: torch.Tensor) -> HeadOutputs:
        pyramid = self.extract_features(images)
        confidence, geometry, coefficients, sampling, char_logits = [], [], [], [], []
        for p in pyramid.maps:
            confidence.append(self.anchor_head(p))
            geometry.append(self.geometry_head(p))
            coefficients.append(self.coefficient_head(p))
            sampling.append(self.sampling_head(p))
            char_logits.append(self.classifier_head(p))
        prototypes = self.protonet(pyramid.p2, pyramid.padded_hw)
        return HeadOutputs(
            confidence=confidence,
            geometry=geometry,
            coefficients=coefficients,
            sampling=sampling,
            char_logits=char_logits,
            prototypes=prototypes,
            image_hw=pyramid.image_hw,
            padded_hw=pyramid.padded_hw,
        )

    def detector_parameters(self):
        """Parameters of the detection-only path (geometry, coefficients,
        protonet). Zeroing these must not change any decoded transcription.
        """
        for module in (self.geometry_head, self.coefficient_head, self.protonet):
            yield from module.parameters()


def gather_sequence(char_logits: torch.Tensor, sampling: torch.Tensor,
                    anchors: torch.Tensor) -> torch.Tensor:
    """Per-anchor character probability sequences.

    char_logits: (B, N_cls, H, W); sampling: (B, 2K, H, W) stride-unit
    offsets, interleaved (x, y); anchors: (N, 3) long tensor of
    (batch, row, col) cells. The anchor's offsets are decoded to absolute
    grid coordinates, logits are bilinearly interpolated there (clamped to
    the grid border) and softmaxed per point. Returns (N, K, N_cls).
    """
    if anchors.numel() == 0:
        k2 = sampling.shape[1]
        return char_logits.new_zeros((0, k2 // 2, char_logits.shape[1]))
    b, hh, ww = anchors[:, 0], anchors[:, 1], anchors[:, 2]
    offsets = sampling[b, :, hh, ww]                # (N, 2K)
    n, k2 = offsets.shape
    k = k2 // 2
    gx = ww[:, None].to(offsets.dtype) + offsets[:, 0::2]   # (N, K) grid coords
    gy = hh[:, None].to(offsets.dtype) + offsets[:, 1::2]

    _, n_cls, gh, gw = char_logits.shape
    # normalized coords for grid_sample with align_corners=True
    nx = 2.0 * gx / max(gw - 1, 1) - 1.0
    ny = 2.0 * gy / max(gh - 1, 1) - 1.0
    grid = torch.stack([nx, ny], dim=-1).unsqueeze(2)        # (N, K, 1, 2)
    planes = char_logits[b]                                  # (N, N_cls, H, W)
    sampled = F.grid_sample(planes, grid, mode="bilinear",
                            padding_mode="border", align_corners=True)
    logits = sampled.squeeze(-1).permute(0, 2, 1)            # (N, K, N_cls)
    return torch.softmax(logits, dim=-1)


def save_checkpoint(path, model: SpotterModel, extra: dict | None = None) -> None:
    """Versioned checkpoint: model config + named parameter tensors."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "state_dict": model.state_dict(),
    }
    if extra:
        payload.update(extra)
    torch.save(payload, path)


def load_checkpoint(path, map_location="cpu") -> tuple[SpotterModel, dict]:
    """Rebuild the model from a checkpoint; returns (model, full payload)."""
    payload = torch.load(path, map_location=map_location, weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version}")
    config = ModelConfig.from_dict(payload["config"])
    model = SpotterModel(config)
    model.load_state_dict(payload["state_dict"])
    return model, payload
