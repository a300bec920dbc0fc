"""Conditional-GAN objective values and the L1 reconstruction loss.

Three variants share the same minimax core and differ in the real-score
terms they pool:

  naive      log D(real)                        + log(1 - D(fake))
  retrieval  log D(real_r) + log D(real_q)      + log(1 - D(fake))
  bach       log D(real_q)                      + log(1 - D(fake))

Each expectation is realized as the mean over a score map's pixels,
averaged across discriminator scales. The discriminator ascends its
term; the generator descends the log(1 - D(fake)) term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..errors import NumericError, ParamError
from ..kernel import (
    Tensor,
    abs_,
    add,
    add_const,
    log,
    mean_all,
    neg,
    scale,
    sub,
)

VARIANTS = ("naive", "retrieval", "bach")


@dataclass(frozen=True)
class LossReport:
    """Differentiable objective terms for one objective evaluation."""

    variant: str
    generator_term: Tensor
    discriminator_term: Tensor
    terms: dict[str, Tensor]

    def values(self) -> dict[str, float]:
        out = {name: t.item() for name, t in self.terms.items()}
        out["generator"] = self.generator_term.item()
        out["discriminator"] = self.discriminator_term.item()
        return out

    def to_payload(self) -> dict:
        return {"variant": self.variant, **self.values()}


def _check_open_unit(score_maps: Sequence[Tensor], label: str) -> None:
    if len(score_maps) == 0:
        raise ParamError(f"{label} score maps missing")
    for t in score_maps:
        if (t.data <= 0).any() or (t.data >= 1).any():
            raise NumericError(
                f"{label} scores must lie strictly inside (0, 1)"
            )


def _mean_over_scales(terms: list[Tensor]) -> Tensor:
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return scale(total, 1.0 / len(terms))


def _log_term(score_maps: Sequence[Tensor]) -> Tensor:
    return _mean_over_scales([mean_all(log(t)) for t in score_maps])


def _log_one_minus_term(score_maps: Sequence[Tensor]) -> Tensor:
    return _mean_over_scales(
        [mean_all(log(add_const(neg(t), 1.0))) for t in score_maps]
    )


def gan_objective(variant: str,
                  real_scores: Sequence[Tensor],
                  fake_scores: Sequence[Tensor],
                  retrieved_scores: Sequence[Tensor] | None = None
                  ) -> LossReport:
    """Objective terms from per-scale discriminator score maps.

    `real_scores` are D's outputs on the ground-truth image,
    `fake_scores` on the generated image; the retrieval variant also
    pools D's outputs on the retrieved image (`retrieved_scores`).
    """
    if variant not in VARIANTS:
        raise ParamError(f"unknown objective variant {variant!r}")
    _check_open_unit(real_scores, "real")
    _check_open_unit(fake_scores, "fake")

    terms: dict[str, Tensor] = {
        "log_d_real": _log_term(real_scores),
        "log_one_minus_d_fake": _log_one_minus_term(fake_scores),
    }
    disc = add(terms["log_d_real"], terms["log_one_minus_d_fake"])

    if variant == "retrieval":
        if retrieved_scores is None:
            raise ParamError("retrieval variant needs retrieved-image scores")
        _check_open_unit(retrieved_scores, "retrieved")
        terms["log_d_retrieved"] = _log_term(retrieved_scores)
        disc = add(disc, terms["log_d_retrieved"])
    elif retrieved_scores is not None:
        raise ParamError(f"variant {variant!r} takes no retrieved-image scores")

    return LossReport(
        variant=variant,
        generator_term=terms["log_one_minus_d_fake"],
        discriminator_term=disc,
        terms=terms,
    )


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference."""
    return mean_all(abs_(sub(a, b)))
