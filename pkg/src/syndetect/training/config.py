"""Training hyperparameters and stage bookkeeping."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..core.errors import ConfigurationError

STAGES = ("stage1_egd", "stage1_aux", "stage1_finetune", "stage2_dis", "stage3_dmm")

# Each stage consumes its predecessor's checkpoint.
PREDECESSOR = {
    "stage1_egd": None,
    "stage1_aux": "stage1_egd",
    "stage1_finetune": "stage1_aux",
    "stage2_dis": "stage1_finetune",
    "stage3_dmm": "stage1_finetune",
}

DEFAULT_STAGE_EPOCHS = {
    "stage1_egd": 30,
    "stage1_aux": 5,
    "stage1_finetune": 10,
    "stage2_dis": 5,
    "stage3_dmm": 10,
}


@dataclass
class TrainHyperparams:
    """Defaults follow the reference recipe; every run logs the values used."""

    beta1: float = 0.9
    beta2: float = 0.99
    batch_size: int = 128
    initial_lr: float = 0.0005  # linear decay to 0 over each stage
    ema_decay: float = 0.9999
    stage_epochs: dict = field(default_factory=lambda: dict(DEFAULT_STAGE_EPOCHS))
    noise_amplitude: float = 1.0 / 255.0  # uniform noise fed to discriminators
    diffaugment: bool = True              # translation/cutout/color, D_phi inputs only

    # architecture widths (desk profiles shrink these)
    generator_channels: int = 256
    embed_dim: int = 32
    disc_width: int = 128
    metric_width: int = 32

    # stage-3 specifics
    triplet_margin: float = 0.2
    triplet_epochs: int = 3
    dmm_attack_steps: int = 10  # PGD steps for training-time AEs
    finetune_aux_weight: float = 1.0

    def validate_stage(self, stage: str) -> None:
        if stage not in STAGES:
            raise ConfigurationError(f"unknown stage {stage!r}; expected one of {STAGES}")

    def epochs_for(self, stage: str) -> int:
        self.validate_stage(stage)
        return int(self.stage_epochs.get(stage, DEFAULT_STAGE_EPOCHS[stage]))

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(payload: dict) -> "TrainHyperparams":
        hp = TrainHyperparams()
        for key, value in payload.items():
            if hasattr(hp, key):
                setattr(hp, key, value)
        return hp


def linear_lr_factor(step: int, total_steps: int) -> float:
    """lr(t) = initial_lr * (1 - t / T); exact at t in {0, T/2, T}."""
    if total_steps <= 0:
        return 1.0
    return max(0.0, 1.0 - step / total_steps)
