"""Modulated generation, multi-scale discrimination, objectives and the
toy training harness."""

from .losses import LossReport, gan_objective, l1_loss
from .nets import (
    DiscriminatorScale,
    DiscriminatorWeights,
    GeneratorWeights,
    SpadeResBlock,
    build_discriminator,
    build_generator,
    discriminate,
    generate,
)
from .spade import SpadeParams, spade_layer
from .train import Adam, ToyTrainConfig, ToyTrainReport, toy_train

__all__ = [
    "Adam",
    "DiscriminatorScale",
    "DiscriminatorWeights",
    "GeneratorWeights",
    "LossReport",
    "SpadeParams",
    "SpadeResBlock",
    "ToyTrainConfig",
    "ToyTrainReport",
    "build_discriminator",
    "build_generator",
    "discriminate",
    "gan_objective",
    "generate",
    "l1_loss",
    "spade_layer",
    "toy_train",
]
