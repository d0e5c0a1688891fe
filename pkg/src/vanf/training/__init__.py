from .losses import (
    LossWeights,
    PerceptualNet,
    loss_adv_discriminator,
    loss_adv_generator,
    loss_perc,
    loss_rgb,
    loss_vis,
    make_perceptual,
)
from .optimizer import Adam, lr_at_step
from .checkpoint import (
    CHECKPOINT_MAGIC,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "LossWeights",
    "PerceptualNet",
    "loss_adv_discriminator",
    "loss_adv_generator",
    "loss_perc",
    "loss_rgb",
    "loss_vis",
    "make_perceptual",
    "Adam",
    "lr_at_step",
    "CHECKPOINT_MAGIC",
    "load_checkpoint",
    "save_checkpoint",
]
