"""Backbone stage extraction.

The semantic vector is the spatially average-pooled final-stage map; local
stages feed the patch aggregation. Stage names are resolved through a small
registry so other torchvision ResNet-family backbones can be plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torchvision.models import resnet50, wide_resnet50_2
from torchvision.models.feature_extraction import create_feature_extractor


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    semantic_stage: str
    local_stages: tuple[str, ...]


REGISTRY = {
    "wide_resnet50_2": BackboneSpec(
        name="wide_resnet50_2",
        semantic_stage="layer4",
        local_stages=("layer2", "layer3"),
    ),
    "resnet50": BackboneSpec(
        name="resnet50",
        semantic_stage="layer4",
        local_stages=("layer2", "layer3"),
    ),
}

_BUILDERS = {"wide_resnet50_2": wide_resnet50_2, "resnet50": resnet50}

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class StageExtractor:
    """Frozen feature extractor returning the named stage maps per batch."""

    def __init__(self, backbone: str = "wide_resnet50_2", pretrained: bool = True):
        if backbone not in REGISTRY:
            raise ValueError(f"unknown backbone {backbone!r}; know {sorted(REGISTRY)}")
        self.spec = REGISTRY[backbone]
        weights = "IMAGENET1K_V1" if pretrained else None
        if not pretrained:
            torch.manual_seed(0)  # random-weight runs must still be reproducible
        try:
            model = _BUILDERS[backbone](weights=weights)
        except Exception as e:  # weight download can fail offline
            raise RuntimeError(
                f"could not load {backbone} weights ({e}); pass --no-pretrained "
                f"or pre-populate the torch hub cache"
            ) from e
        stages = list(self.spec.local_stages) + [self.spec.semantic_stage]
        self.model = create_feature_extractor(model, return_nodes={s: s for s in stages})
        self.model.eval()
        for p in self.model.parameters():
            p.requires_grad_(False)

    @torch.no_grad()
    def forward(self, batch: torch.Tensor) -> dict[str, torch.Tensor]:
        """batch: (N, 3, H, W) normalized; returns stage name -> (N, C, h, w)."""
        return self.model(batch)

    @torch.no_grad()
    def semantic(self, stage_maps: dict[str, torch.Tensor]) -> torch.Tensor:
        """Global average pooling of the semantic stage -> (N, C)."""
        final = stage_maps[self.spec.semantic_stage]
        return final.mean(dim=(2, 3))
