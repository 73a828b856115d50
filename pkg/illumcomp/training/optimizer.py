"""
Adadelta: per-parameter adaptive steps from decaying squared-gradient and
squared-update accumulators.

    acc_g <- rho * acc_g + (1 - rho) * g^2
    delta  = sqrt(acc_d + eps) / sqrt(acc_g + eps) * g
    acc_d <- rho * acc_d + (1 - rho) * delta^2
    p     <- p - lr * delta
"""

import logging
from typing import Dict, Mapping, Sequence

import numpy as np

from illumcomp.models.params import ParamSet
from illumcomp.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


class Adadelta:
    """
    Adadelta optimizer bound to one ParamSet.

    Attributes:
        params (ParamSet): Parameters updated in place
        lr (float): Step multiplier (0 freezes the parameters)
        rho (float): Accumulator decay
        eps (float): Conditioning constant
    """

    def __init__(self, params: ParamSet, lr: float = 1.0, rho: float = 0.95, eps: float = 1e-6) -> None:
        self.params = params
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.acc_grad: Dict[str, np.ndarray] = {k: np.zeros(t.shape) for k, t in params.items()}
        self.acc_delta: Dict[str, np.ndarray] = {k: np.zeros(t.shape) for k, t in params.items()}

    def step(self, grads: Sequence[np.ndarray]) -> None:
        """
        Apply one update.

        Args:
            grads: One gradient per parameter, in ParamSet order
        """
        if len(grads) != len(self.params):
            raise ShapeMismatchError(
                f"expected {len(self.params)} gradients for '{self.params.name}', got {len(grads)}"
            )
        for (key, tensor), g in zip(self.params.items(), grads):
            if g.shape != tensor.shape:
                raise ShapeMismatchError(f"gradient of '{self.params.name}.{key}' has the wrong shape",
                                         shapes={"param": tensor.shape, "grad": g.shape})
            acc_g = self.rho * self.acc_grad[key] + (1.0 - self.rho) * g * g
            delta = np.sqrt(self.acc_delta[key] + self.eps) / np.sqrt(acc_g + self.eps) * g
            self.acc_grad[key] = acc_g
            self.acc_delta[key] = self.rho * self.acc_delta[key] + (1.0 - self.rho) * delta * delta
            tensor.data = tensor.data - self.lr * delta

    def state_groups(self, prefix: str) -> Dict[str, Dict[str, np.ndarray]]:
        """Accumulators as checkpoint groups '<prefix>.acc_grad' and '<prefix>.acc_delta'."""
        return {
            f"{prefix}.acc_grad": {k: v.copy() for k, v in self.acc_grad.items()},
            f"{prefix}.acc_delta": {k: v.copy() for k, v in self.acc_delta.items()},
        }

    def load_state(self, acc_grad: Mapping[str, np.ndarray], acc_delta: Mapping[str, np.ndarray]) -> None:
        for name, source, target in (("acc_grad", acc_grad, self.acc_grad), ("acc_delta", acc_delta, self.acc_delta)):
            if set(source) != set(target):
                raise ShapeMismatchError(f"optimizer {name} names differ for '{self.params.name}'")
            for key, value in source.items():
                if np.shape(value) != target[key].shape:
                    raise ShapeMismatchError(f"optimizer {name} '{key}' has the wrong shape",
                                             shapes={"expected": target[key].shape, "got": np.shape(value)})
                target[key] = np.array(value, dtype=np.float64)
