from .discriminator import IN_CHANNELS, Discriminator, stack_discriminator_input
from .encoders import FeatureMaps, GeometryEncoder, TextureEncoder, box_downsample4, encode
from .fusion import (
    FusionInput,
    FusionMlp,
    FusionOutput,
    fuse,
    fused_width,
    fusion_in_width,
    pe_width,
    positional_encode,
)
from .heads import ColorHead, DeviationHead
from .layers import Conv, Linear, mlp, mlp_params, run_mlp, zero_params
from .model import Generator, create_discriminator

__all__ = [
    "IN_CHANNELS",
    "Discriminator",
    "stack_discriminator_input",
    "FeatureMaps",
    "GeometryEncoder",
    "TextureEncoder",
    "box_downsample4",
    "encode",
    "FusionInput",
    "FusionMlp",
    "FusionOutput",
    "fuse",
    "fused_width",
    "fusion_in_width",
    "pe_width",
    "positional_encode",
    "ColorHead",
    "DeviationHead",
    "Conv",
    "Linear",
    "mlp",
    "mlp_params",
    "run_mlp",
    "zero_params",
    "Generator",
    "create_discriminator",
]
