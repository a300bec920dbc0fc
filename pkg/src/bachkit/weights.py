"""Parameter fixtures: named tensor collections on disk.

A fixture directory holds one tensor dump per weight plus a small
manifest listing the files and the architecture meta needed to rebuild
the parameter objects.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fusion import FusionParams
from .generator.nets import (
    DiscriminatorScale,
    DiscriminatorWeights,
    GeneratorWeights,
    SpadeResBlock,
)
from .generator.spade import SpadeParams
from .kernel import ConvParams, Tensor, load_tensor, save_tensor

MANIFEST_NAME = "params_manifest.json"


def save_weights(directory: str | Path, tensors: dict[str, Tensor],
                 meta: dict) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    listing = {}
    for name, tensor in tensors.items():
        filename = name.replace(".", "_") + ".bin"
        save_tensor(tensor, str(directory / filename))
        listing[name] = filename
    manifest = {"meta": meta, "tensors": listing}
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_weights(directory: str | Path) -> tuple[dict[str, Tensor], dict]:
    directory = Path(directory)
    path = directory / MANIFEST_NAME
    if not path.exists():
        raise ConfigError(f"no {MANIFEST_NAME} in {directory}")
    manifest = json.loads(path.read_text())
    tensors = {name: load_tensor(str(directory / filename))
               for name, filename in manifest["tensors"].items()}
    return tensors, manifest.get("meta", {})


def _conv(tensors: dict[str, Tensor], prefix: str) -> ConvParams:
    try:
        return ConvParams(tensors[f"{prefix}.kernel"], tensors[f"{prefix}.bias"])
    except KeyError as exc:
        raise ConfigError(f"fixture misses tensor {exc.args[0]!r}") from None


def fusion_from_tensors(tensors: dict[str, Tensor], meta: dict) -> FusionParams:
    return FusionParams(
        encoder=_conv(tensors, "fusion.encoder"),
        refiner=_conv(tensors, "fusion.refiner"),
        steps=int(meta.get("fusion_steps", 3)),
    )


def generator_from_tensors(tensors: dict[str, Tensor], meta: dict
                           ) -> GeneratorWeights:
    factors = meta.get("generator_upsample_factors", [1, 2])
    blocks = []
    for i, factor in enumerate(factors):
        base = f"generator.block{i}"
        skip = (_conv(tensors, f"{base}.skip")
                if f"{base}.skip.kernel" in tensors else None)
        blocks.append(SpadeResBlock(
            spade1=SpadeParams(_conv(tensors, f"{base}.spade1.gamma"),
                               _conv(tensors, f"{base}.spade1.beta")),
            conv1=_conv(tensors, f"{base}.conv1"),
            spade2=SpadeParams(_conv(tensors, f"{base}.spade2.gamma"),
                               _conv(tensors, f"{base}.spade2.beta")),
            conv2=_conv(tensors, f"{base}.conv2"),
            skip=skip,
            upsample=int(factor),
        ))
    return GeneratorWeights(
        stem=_conv(tensors, "generator.stem"),
        blocks=tuple(blocks),
        head=_conv(tensors, "generator.head"),
        epsilon=float(meta.get("epsilon", 1e-5)),
    )


def discriminator_from_tensors(tensors: dict[str, Tensor], meta: dict
                               ) -> DiscriminatorWeights:
    n_scales = int(meta.get("discriminator_scales", 2))
    n_layers = int(meta.get("discriminator_layers", 3))
    scales = []
    for s in range(n_scales):
        convs = tuple(_conv(tensors, f"discriminator.scale{s}.conv{i}")
                      for i in range(n_layers))
        scales.append(DiscriminatorScale(convs))
    return DiscriminatorWeights(tuple(scales),
                                epsilon=float(meta.get("epsilon", 1e-5)))


def save_pipeline_params(directory: str | Path, fusion: FusionParams,
                         generator: GeneratorWeights,
                         discriminator: DiscriminatorWeights | None = None,
                         extra_meta: dict | None = None) -> Path:
    tensors = {**fusion.tensors(), **generator.tensors()}
    meta = {
        "fusion_steps": fusion.steps,
        "fusion_channels": fusion.channels,
        "generator_upsample_factors": [b.upsample for b in generator.blocks],
        "epsilon": generator.epsilon,
    }
    if discriminator is not None:
        tensors.update(discriminator.tensors())
        meta["discriminator_scales"] = len(discriminator.scales)
        meta["discriminator_layers"] = len(discriminator.scales[0].convs)
    if extra_meta:
        meta.update(extra_meta)
    return save_weights(directory, tensors, meta)


def load_pipeline_params(directory: str | Path
                         ) -> tuple[FusionParams, GeneratorWeights,
                                    DiscriminatorWeights | None, dict]:
    tensors, meta = load_weights(directory)
    fusion = fusion_from_tensors(tensors, meta)
    generator = generator_from_tensors(tensors, meta)
    discriminator = (discriminator_from_tensors(tensors, meta)
                     if "discriminator_scales" in meta else None)
    return fusion, generator, discriminator, meta


def default_pipeline_params(channels: int, seed: int = 0,
                            feature_channels: int = 16,
                            fusion_steps: int = 3,
                            upsample_factors: tuple[int, ...] = (1, 2),
                            with_discriminator: bool = False):
    """Deterministic seeded parameters for a given composed channel count."""
    from .generator.nets import build_discriminator, build_generator

    rng = np.random.default_rng(seed)
    fusion = FusionParams.seeded(rng, channels, steps=fusion_steps)
    generator = build_generator(rng, channels,
                                feature_channels=feature_channels,
                                upsample_factors=upsample_factors)
    discriminator = (build_discriminator(rng, channels,
                                         feature_channels=feature_channels)
                     if with_discriminator else None)
    return fusion, generator, discriminator
