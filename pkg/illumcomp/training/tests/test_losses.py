"""
Test Suite for the adversarial, identity and combined losses.

Test Coverage:
- Local and global Wasserstein losses: worked examples, equal scores, arithmetic oracle
- Identity loss: zero, constant offset, mean-absolute oracle, gradient, shape errors
- Combined objectives: worked example, degenerate weights, oracle, lambda linearity
- Non-finite parts raise NonFiniteLossError with the step

Usage:
python -m pytest illumcomp/training/tests/test_losses.py -v
"""

import numpy as np
import pytest

from illumcomp.core.gradcheck import grad_check
from illumcomp.core.tensor import Tensor
from illumcomp.training.config import LossWeights
from illumcomp.training.losses import (
    LossParts,
    global_adv_losses,
    identity_loss,
    local_adv_losses,
    total_losses,
)
from illumcomp.utils.errors import NonFiniteLossError, ShapeMismatchError, ValidationError


def scores(values):
    return [Tensor(np.array(v)) for v in values]


def parts(*values) -> LossParts:
    return LossParts(*(Tensor(np.array(float(v))) for v in values))


class TestAdversarialLosses:
    """local_adv_losses / global_adv_losses."""

    def test_local_example(self) -> None:
        loss_d, loss_g = local_adv_losses(scores([0.3] * 4), scores([0.8] * 4))
        assert loss_d.item() == pytest.approx(-0.5, abs=1e-15)
        assert loss_g.item() == pytest.approx(-0.3, abs=1e-15)

    def test_global_example(self) -> None:
        loss_d, loss_g = global_adv_losses(scores([-0.2] * 3), scores([0.1] * 3))
        assert loss_d.item() == pytest.approx(-0.3, abs=1e-15)
        assert loss_g.item() == pytest.approx(0.2, abs=1e-15)

    @pytest.mark.parametrize("loss_fn", [local_adv_losses, global_adv_losses])
    def test_equal_scores(self, loss_fn) -> None:
        batch = np.random.default_rng(0).normal(size=5)
        loss_d, _ = loss_fn(scores(batch), scores(batch))
        assert loss_d.item() == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_random_batches(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        fake, real = rng.normal(size=6), rng.normal(size=6)
        loss_d, loss_g = local_adv_losses(scores(fake), scores(real))
        assert loss_d.item() == pytest.approx(fake.mean() - real.mean(), abs=1e-12)
        assert loss_g.item() == pytest.approx(-fake.mean(), abs=1e-12)

    def test_plain_floats(self) -> None:
        loss_d, _ = global_adv_losses([0.5, 0.5], [0.25])
        assert loss_d.item() == 0.25

    def test_empty_batch(self) -> None:
        with pytest.raises(ValidationError):
            local_adv_losses([], scores([1.0]))
        with pytest.raises(ValidationError):
            global_adv_losses(scores([1.0]), [])


class TestIdentityLoss:
    """identity_loss."""

    def test_identical(self) -> None:
        y = np.random.default_rng(0).uniform(-1, 1, size=(3, 8, 8))
        assert identity_loss(y, y).item() == 0.0

    def test_constant_offset(self) -> None:
        y = np.random.default_rng(1).uniform(-1, 1, size=(3, 8, 8))
        assert identity_loss(y + 0.5, y).item() == pytest.approx(0.5)

    def test_random_pair(self) -> None:
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=(2, 3, 6, 6))
        assert identity_loss(a, b).item() == pytest.approx(np.mean(np.abs(a - b)), abs=1e-14)

    def test_gradient(self) -> None:
        rng = np.random.default_rng(3)
        y = rng.normal(size=(3, 4, 4))
        report = grad_check(lambda t: identity_loss(t, y), y + rng.uniform(0.1, 0.5, size=y.shape))
        assert report.passed, report.message

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ShapeMismatchError):
            identity_loss(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))


class TestTotalLosses:
    """total_losses."""

    def test_unit_weights(self) -> None:
        weights = LossWeights(lambda_G=1.0, lambda_G_idt=1.0, lambda_D_G=1.0)
        loss_g, loss_d = total_losses(parts(0.5, 1, 0.25, 2, 3), weights)
        assert loss_g.item() == 6.0
        assert loss_d.item() == 0.75

    def test_degenerate_weights(self) -> None:
        weights = LossWeights(lambda_G=0.0, lambda_G_idt=0.0, lambda_D_G=0.0)
        loss_g, loss_d = total_losses(parts(0.7, -1.3, 4.0, 2.5, 9.0), weights)
        assert loss_g.item() == -1.3
        assert loss_d.item() == 0.7

    @pytest.mark.parametrize("seed", range(5))
    def test_random(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        values = rng.normal(size=5)
        w = LossWeights(lambda_G=rng.uniform(0, 3), lambda_G_idt=rng.uniform(0, 10), lambda_D_G=rng.uniform(0, 3))
        loss_g, loss_d = total_losses(parts(*values), w)
        d_l, g_l, d_g, g_g, idt = values
        assert loss_g.item() == pytest.approx(g_l + w.lambda_G * g_g + w.lambda_G_idt * idt, abs=1e-12)
        assert loss_d.item() == pytest.approx(d_l + w.lambda_D_G * d_g, abs=1e-12)

    @pytest.mark.parametrize("field,term", [("lambda_G", 3), ("lambda_G_idt", 4), ("lambda_D_G", 2)])
    def test_lambda_linearity(self, field: str, term: int) -> None:
        values = np.random.default_rng(7).normal(size=5)
        base = LossWeights(lambda_G=1.3, lambda_G_idt=2.1, lambda_D_G=0.7)
        scaled = base.model_copy(update={field: getattr(base, field) * 3.0})
        index = 1 if field == "lambda_D_G" else 0
        before = total_losses(parts(*values), base)[index].item()
        after = total_losses(parts(*values), scaled)[index].item()
        assert after - before == pytest.approx(2.0 * getattr(base, field) * values[term], abs=1e-12)

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite(self, bad: float) -> None:
        with pytest.raises(NonFiniteLossError) as info:
            total_losses(parts(0.0, 1.0, bad, 0.0, 0.0), LossWeights(), step=17)
        assert info.value.step == 17
        assert info.value.exit_code == 3
