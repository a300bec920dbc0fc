"""Desk-scale training harness.

Two modes over one seeded synthetic (layout, target image) pair:
reconstruction (L1 overfit of the full fuse -> generate path) and
adversarial (alternating generator/discriminator steps on the two-term
conditional objective). The point is verifying gradient flow and loss
descent, not output quality; every run also gradient-checks a sampled
subnetwork against finite differences.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import NumericError, ParamError, TrainError
from ..fusion import ComposedLabelMap, FusionParams, fuse_background, pad_query
from ..kernel import GradTape, Tensor, conv2d, grad_check, kink_margin, relu, sum_all
from ..layout import LabelMap, rasterize_layout
from ..preview import default_palette, render_preview
from ..synthetic import random_index_map, random_layout, toy_taxonomy
from .losses import gan_objective, l1_loss
from .nets import build_discriminator, build_generator, discriminate, generate
from .spade import spade_layer

GRAD_CHECK_TOLERANCE = 1e-4


class Adam:
    """Standard bias-corrected Adam over a fixed list of parameter tensors."""

    def __init__(self, params: list[Tensor], lr: float = 2e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(p.shape, dtype=p.dtype) for p in params]
        self.v = [np.zeros(p.shape, dtype=p.dtype) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction = np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m += (1 - b1) * (g - m)
            v += (1 - b2) * (g * g - v)
            p.assign(p.data - self.lr * correction * m / (np.sqrt(v) + self.eps))


@dataclass
class ToyTrainConfig:
    mode: str = "recon"  # recon | adv
    steps: int = 500
    seed: int = 0
    lr: float | None = None  # mode default: 0.02 recon, 2e-4 adv
    canvas: tuple[int, int] = (16, 16)
    n_foreground: int = 2
    n_background: int = 2
    retrieved_maps: int = 2
    fusion_steps: int = 2
    feature_channels: int = 8
    upsample_factors: tuple[int, ...] = (1, 2)
    out_dir: str | None = None

    def __post_init__(self):
        if self.mode not in ("recon", "adv"):
            raise ParamError(f"unknown training mode {self.mode!r}")
        if max(self.canvas) > 32:
            raise ParamError(f"toy canvas capped at 32x32, got {self.canvas}")
        if self.lr is None:
            self.lr = 0.02 if self.mode == "recon" else 2e-4


@dataclass
class ToyTrainReport:
    mode: str
    seed: int
    steps: int
    losses: list[float]
    initial_loss: float
    final_loss: float
    reduction: float
    grad_check_error: float
    extra: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "mode": self.mode, "seed": self.seed, "steps": self.steps,
            "initial_loss": self.initial_loss, "final_loss": self.final_loss,
            "reduction": self.reduction,
            "grad_check_error": self.grad_check_error,
            "losses": self.losses, **self.extra,
        }


def _build_scenario(cfg: ToyTrainConfig):
    rng = np.random.default_rng(cfg.seed)
    taxonomy = toy_taxonomy(cfg.n_foreground, cfg.n_background)
    layout = random_layout(rng, taxonomy, cfg.canvas, min_boxes=1, max_boxes=3)
    fg_map = rasterize_layout(layout, taxonomy)
    query = pad_query(fg_map, taxonomy)

    retrieved = []
    for _ in range(cfg.retrieved_maps):
        index_map = random_index_map(rng, taxonomy, cfg.canvas, max_boxes=2)
        bg_only = np.where(np.isin(index_map, taxonomy.background_ids),
                           index_map,
                           taxonomy.background_ids[0]).astype(np.uint8)
        data = np.stack([bg_only == cid for cid in taxonomy.background_ids],
                        axis=2).astype(np.int32)
        background = LabelMap(data, taxonomy.background_ids)
        retrieved.append(ComposedLabelMap(
            data=np.concatenate([background.data, fg_map.data], axis=2),
            background_channels=taxonomy.background_ids,
            foreground_channels=taxonomy.foreground_ids,
        ))

    # piecewise-constant target: the palette render of the first composed
    # map, mapped linearly to [-1, 1]
    target_rgb = render_preview(retrieved[0], default_palette(taxonomy)).pixels
    target = Tensor(target_rgb.astype(np.float64) / 127.5 - 1.0)

    channels = taxonomy.n_foreground + taxonomy.n_background
    fusion = FusionParams.seeded(rng, channels, steps=cfg.fusion_steps)
    gen = build_generator(rng, channels,
                          feature_channels=cfg.feature_channels,
                          upsample_factors=cfg.upsample_factors)
    disc = build_discriminator(rng, channels,
                               feature_channels=cfg.feature_channels)
    return rng, taxonomy, query, retrieved, target, fusion, gen, disc


def _probe_grad_check(rng: np.random.Generator, fusion: FusionParams,
                      gen, channels: int) -> float:
    """Gradient-check a sampled subnetwork that exercises every backward
    toy training uses: conv, relu, add, normalize, modulate, reduce."""

    def probe(x: Tensor) -> Tensor:
        encoded = relu(conv2d(x, fusion.encoder))
        h = conv2d(encoded, gen.stem)
        return sum_all(spade_layer(h, encoded, gen.blocks[0].spade1))

    for _ in range(32):
        point = Tensor(rng.uniform(-1.0, 1.0, size=(4, 4, channels)))
        if kink_margin(probe, point) >= 1e-4:
            return grad_check(probe, point, eps=1e-5)
    raise TrainError("could not sample a gradient-check point away from kinks")


def _trainable(*objects) -> list[Tensor]:
    out = []
    for obj in objects:
        out.extend(obj.tensors().values())
    return out


def toy_train(cfg: ToyTrainConfig) -> ToyTrainReport:
    rng, taxonomy, query, retrieved, target, fusion, gen, disc = \
        _build_scenario(cfg)
    channels = taxonomy.n_foreground + taxonomy.n_background
    gc_error = _probe_grad_check(rng, fusion, gen, channels)
    if gc_error > GRAD_CHECK_TOLERANCE:
        raise TrainError(
            f"sampled subnetwork failed gradient check: {gc_error:.3e}"
        )

    if cfg.mode == "recon":
        report = _train_recon(cfg, query, retrieved, target, fusion, gen)
    else:
        report = _train_adv(cfg, query, retrieved, target, fusion, gen, disc)
    report.grad_check_error = gc_error

    if cfg.out_dir is not None:
        from ..weights import save_pipeline_params  # avoids an import cycle

        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(report.to_payload(), indent=2) + "\n")
        with open(out / "losses.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "loss"])
            writer.writerows(enumerate(report.losses))
        save_pipeline_params(out / "params", fusion, gen,
                             disc if cfg.mode == "adv" else None,
                             extra_meta={"trained_mode": cfg.mode,
                                         "seed": cfg.seed})
    return report


def _train_recon(cfg, query, retrieved, target, fusion, gen) -> ToyTrainReport:
    params = _trainable(fusion, gen)
    adam = Adam(params, lr=cfg.lr)
    losses: list[float] = []
    for step in range(cfg.steps):
        try:
            with GradTape() as tape:
                features = fuse_background(query, retrieved, fusion)
                image = generate(features, gen)
                loss = l1_loss(image, target)
            grads = tape.gradients(loss, params)
            adam.step(grads)
        except NumericError as exc:
            raise TrainError(f"diverged at step {step}: {exc}", step) from exc
        losses.append(loss.item())
    return _make_report(cfg, losses)


def _train_adv(cfg, query, retrieved, target, fusion, gen, disc
               ) -> ToyTrainReport:
    g_params = _trainable(fusion, gen)
    d_params = _trainable(disc)
    g_opt = Adam(g_params, lr=cfg.lr)
    d_opt = Adam(d_params, lr=cfg.lr)
    losses: list[float] = []
    d_values: list[float] = []
    for step in range(cfg.steps):
        try:
            with GradTape() as tape:
                features = fuse_background(query, retrieved, fusion)
                fake = generate(features, gen)
                d_real = discriminate(target, features, disc)
                d_fake = discriminate(fake, features, disc)
                report = gan_objective("bach", d_real, d_fake)
                d_loss = report.discriminator_term
            # ascend the discriminator term
            d_opt.step([-g for g in tape.gradients(d_loss, d_params)])

            with GradTape() as tape:
                features = fuse_background(query, retrieved, fusion)
                fake = generate(features, gen)
                d_fake = discriminate(fake, features, disc)
                d_real = discriminate(target, features, disc)
                report = gan_objective("bach", d_real, d_fake)
                g_loss = report.generator_term
            g_opt.step(tape.gradients(g_loss, g_params))
        except NumericError as exc:
            raise TrainError(f"diverged at step {step}: {exc}", step) from exc
        losses.append(g_loss.item())
        d_values.append(d_loss.item())
    report = _make_report(cfg, losses)
    report.extra["discriminator_values"] = d_values
    return report


def _make_report(cfg, losses: list[float]) -> ToyTrainReport:
    initial, final = losses[0], losses[-1]
    return ToyTrainReport(
        mode=cfg.mode, seed=cfg.seed, steps=cfg.steps, losses=losses,
        initial_loss=initial, final_loss=final,
        reduction=1.0 - final / initial if initial else 0.0,
        grad_check_error=float("nan"),
    )
