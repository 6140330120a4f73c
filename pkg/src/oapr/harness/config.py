"""Training configuration and its JSON echo."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from oapr.encoders.text_features import BACKGROUND_CLASSES, BODY_CLASSES
from oapr.losses import LossWeights

ENCODER_CHOICES = ("tiny", "pretrained-adapter")


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    epochs: int = 100
    batch_size: int = 32
    lr_prompts: float = 0.005
    lr_selection: float = 0.001
    schedule: str = "cosine"
    lr_floor: float = 0.0
    weights: LossWeights = field(default_factory=LossWeights)
    n_body_prompts: int = 4
    vv_blocks: int = 6
    context_len: int = 66
    selector_heads: int = 4
    encoder: str = "tiny"
    encoder_seed: int = 7
    encoder_path: str | None = None  # adapter archive when encoder="pretrained-adapter"
    body_classes: tuple[str, ...] = BODY_CLASSES
    background_classes: tuple[str, ...] = BACKGROUND_CLASSES

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0 (0 means initialize only)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.lr_prompts <= 0 or self.lr_selection <= 0:
            raise ValueError("learning rates must be positive")
        if self.schedule != "cosine":
            raise ValueError(f"unsupported schedule {self.schedule!r}")
        if self.n_body_prompts != len(self.body_classes):
            raise ValueError("n_body_prompts must equal the number of body classes")
        if self.vv_blocks < 0 or self.context_len < 1:
            raise ValueError("bad vv_blocks or context_len")
        if self.encoder not in ENCODER_CHOICES:
            raise ValueError(f"encoder must be one of {ENCODER_CHOICES}")
        if self.encoder == "pretrained-adapter" and not self.encoder_path:
            raise ValueError("pretrained-adapter needs encoder_path")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["body_classes"] = list(self.body_classes)
        d["background_classes"] = list(self.background_classes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["weights"] = LossWeights(**d["weights"])
        d["body_classes"] = tuple(d["body_classes"])
        d["background_classes"] = tuple(d["background_classes"])
        return cls(**d)


def cosine_lr_factor(step: int, total_steps: int, floor: float = 0.0) -> float:
    """Cosine decay from 1 at step 0 to ``floor`` at the final step."""
    import math

    if total_steps <= 1:
        return 1.0
    t = min(max(step, 0), total_steps - 1) / (total_steps - 1)
    return floor + (1.0 - floor) * 0.5 * (1.0 + math.cos(math.pi * t))
