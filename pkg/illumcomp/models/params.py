"""
Named parameter collections.

A ParamSet is an ordered name -> Tensor mapping for one network (generator,
local critic, global critic). Every tensor is a leaf with requires_grad set
so the tape can differentiate losses with respect to it.
"""

import logging
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from illumcomp.core.tensor import Tensor
from illumcomp.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


class ParamSet:
    """
    Ordered collection of trainable tensors.

    Attributes:
        name (str): Group name used in checkpoints ("generator", "critic_local", ...)
    """

    def __init__(self, name: str, arrays: Mapping[str, np.ndarray]) -> None:
        self.name = name
        self._tensors: Dict[str, Tensor] = {
            key: Tensor(np.array(value, dtype=np.float64), requires_grad=True)
            for key, value in arrays.items()
        }

    def __getitem__(self, key: str) -> Tensor:
        return self._tensors[key]

    def __contains__(self, key: str) -> bool:
        return key in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._tensors.items())

    def tensors(self) -> List[Tensor]:
        return list(self._tensors.values())

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self._tensors.values()))

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(t.data))) for t in self._tensors.values() if t.size), default=0.0)

    def all_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(t.data))) for t in self._tensors.values())

    def to_arrays(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter array."""
        return {key: t.data.copy() for key, t in self._tensors.items()}

    def copy(self) -> "ParamSet":
        return ParamSet(self.name, self.to_arrays())

    def replaced(self, key: str, tensor: Tensor) -> "ParamSet":
        """Shallow copy with one entry swapped for the given tensor."""
        if key not in self._tensors:
            raise KeyError(key)
        other = ParamSet(self.name, {})
        other._tensors = dict(self._tensors)
        other._tensors[key] = tensor
        return other

    def assign(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Overwrite values in place (shapes and names must match)."""
        if set(arrays) != set(self._tensors):
            raise ShapeMismatchError(
                f"parameter names differ for group '{self.name}'",
                details={"missing": sorted(set(self._tensors) - set(arrays)),
                         "unexpected": sorted(set(arrays) - set(self._tensors))}
            )
        for key, value in arrays.items():
            value = np.asarray(value, dtype=np.float64)
            if value.shape != self._tensors[key].shape:
                raise ShapeMismatchError(
                    f"parameter '{self.name}.{key}' has the wrong shape",
                    shapes={"expected": self._tensors[key].shape, "got": value.shape}
                )
            self._tensors[key].data = value.copy()

    def clip(self, bound: float) -> None:
        """Clamp every value to [-bound, bound] in place."""
        for t in self._tensors.values():
            np.clip(t.data, -bound, bound, out=t.data)

    def __repr__(self) -> str:
        return f"ParamSet(name={self.name!r}, tensors={len(self)}, values={self.num_parameters()})"
