"""
Wasserstein adversarial losses, identity loss and the combined objectives.

Critic scores are scalar tensors, one per batch element. For a batch of
fake (harmonized) and real scores:

    L_D = mean(fake) - mean(real)      critic loss, minimized by the critic
    L_G = -mean(fake)                  adversarial loss of the generator

The local pair (L_D_L, L_G_L) uses the local critic, the global pair
(L_D_G, L_G_G) the global critic. The identity loss is the mean absolute
deviation between the generator's output on a real pair and the real image.
"""

import logging
from typing import NamedTuple, Sequence, Tuple, Union

import numpy as np

from illumcomp.core.tensor import ArrayLike, Tensor, absolute, add, as_tensor, mean_all, mul, stack_mean, sub
from illumcomp.training.config import LossWeights
from illumcomp.utils.errors import NonFiniteLossError, ShapeMismatchError, ValidationError

logger = logging.getLogger(__name__)

Scores = Sequence[Union[Tensor, float]]


class LossParts(NamedTuple):
    """The five per-step loss terms, in history column order."""

    L_D_L: Tensor
    L_G_L: Tensor
    L_D_G: Tensor
    L_G_G: Tensor
    L_S_idt: Tensor

    def values(self) -> dict:
        return {name: float(t.item()) for name, t in zip(self._fields, self)}


def _wasserstein(fake: Scores, real: Scores, kind: str) -> Tuple[Tensor, Tensor]:
    if len(fake) == 0 or len(real) == 0:
        raise ValidationError(f"{kind} adversarial losses need non-empty batches",
                              details={"n_fake": len(fake), "n_real": len(real)})
    fake_mean = stack_mean([as_tensor(s) for s in fake])
    real_mean = stack_mean([as_tensor(s) for s in real])
    return sub(fake_mean, real_mean), mul(fake_mean, -1.0)


def local_adv_losses(dl_fake: Scores, dl_real: Scores) -> Tuple[Tensor, Tensor]:
    """
    Local critic and generator losses.

    Args:
        dl_fake: Local critic scores of harmonized images
        dl_real: Local critic scores of real images

    Returns:
        (L_D_L, L_G_L)

    Raises:
        ValidationError: When either batch is empty
    """
    return _wasserstein(dl_fake, dl_real, "local")


def global_adv_losses(dg_fake: Scores, dg_real: Scores) -> Tuple[Tensor, Tensor]:
    """Global critic and generator losses, (L_D_G, L_G_G)."""
    return _wasserstein(dg_fake, dg_real, "global")


def identity_loss(g_out_on_real: ArrayLike, y: ArrayLike) -> Tensor:
    """
    Mean absolute deviation between G(Y, y) and y.

    Raises:
        ShapeMismatchError: When the shapes differ
    """
    g_out_on_real, y = as_tensor(g_out_on_real), as_tensor(y)
    if g_out_on_real.shape != y.shape:
        raise ShapeMismatchError("identity loss inputs differ in shape",
                                 shapes={"output": g_out_on_real.shape, "target": y.shape})
    return mean_all(absolute(sub(g_out_on_real, y)))


def total_losses(parts: LossParts, weights: LossWeights, step: int = -1) -> Tuple[Tensor, Tensor]:
    """
    Combined objectives.

        L_G = L_G_L + lambda_G * L_G_G + lambda_G_idt * L_S_idt
        L_D = L_D_L + lambda_D_G * L_D_G

    Args:
        parts: Loss terms (tensors or floats)
        weights: Loss weights
        step: Training step, reported on failure

    Raises:
        NonFiniteLossError: When any part is NaN or infinite
    """
    parts = LossParts(*(as_tensor(p) for p in parts))
    bad = {name: float(np.ravel(t.data)[0]) for name, t in zip(parts._fields, parts)
           if not np.all(np.isfinite(t.data))}
    if bad:
        logger.error(f"step {step}: non-finite loss terms {bad}")
        raise NonFiniteLossError(f"non-finite loss terms {sorted(bad)} at step {step}", step=step,
                                 details={"losses": bad})

    loss_g = add(add(parts.L_G_L, mul(parts.L_G_G, weights.lambda_G)), mul(parts.L_S_idt, weights.lambda_G_idt))
    loss_d = add(parts.L_D_L, mul(parts.L_D_G, weights.lambda_D_G))
    return loss_g, loss_d
