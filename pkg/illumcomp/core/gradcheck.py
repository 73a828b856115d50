"""
Finite-difference gradient checker.

Compares the tape's reverse-mode gradient of a scalar function against
central differences, coordinate by coordinate. Failures (mismatch,
non-finite values, errors raised by f) are reported, never raised.

Usage:
    from illumcomp.core.gradcheck import grad_check

    report = grad_check(lambda t: (t * t).sum(), np.ones(4), step=1e-5, tol=1e-6)
    assert report.passed
"""

import logging
from typing import Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, Field

from illumcomp.core.tensor import Tape, Tensor
from illumcomp.utils.errors import IllumCompError

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-8


class GradCheckReport(BaseModel):
    """Outcome of one gradient check."""

    max_rel_err: float = Field(..., description="Largest per-coordinate relative error")
    passed: bool = Field(..., description="max_rel_err <= tol and everything finite")
    checked: int = Field(..., description="Number of coordinates compared")
    worst_index: Optional[int] = Field(default=None, description="Flat index of the worst coordinate")
    message: str = Field(default="", description="Failure reason, empty on success")


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Union[Tensor, np.ndarray],
    step: float = 1e-5,
    tol: float = 1e-4,
    n_coords: Optional[int] = None,
    seed: int = 0
) -> GradCheckReport:
    """
    Check the reverse-mode gradient of a scalar function at x.

    Args:
        f: Scalar-valued function built from tape ops
        x: Point of evaluation
        step: Central-difference step (> 0)
        tol: Pass threshold on the max relative error
        n_coords: Check a seeded random subset of this many coordinates (all if None)
        seed: Seed for the coordinate subset

    Returns:
        GradCheckReport with max relative error |a - n| / max(|a|, |n|, 1e-8)
    """
    if step <= 0:
        return GradCheckReport(max_rel_err=float("inf"), passed=False, checked=0,
                               message=f"step must be > 0, got {step}")

    x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)

    def evaluate(values: np.ndarray) -> float:
        return f(Tensor(values)).item()

    try:
        leaf = Tensor(x0.copy(), requires_grad=True)
        with Tape() as tape:
            out = f(leaf)
        analytic = tape.gradient(out, [leaf])[0].ravel()

        flat_x = x0.ravel()
        indices = np.arange(flat_x.size)
        if n_coords is not None and n_coords < flat_x.size:
            indices = np.sort(np.random.default_rng(seed).choice(flat_x.size, n_coords, replace=False))

        numeric = np.empty(indices.size)
        for k, idx in enumerate(indices):
            plus, minus = flat_x.copy(), flat_x.copy()
            plus[idx] += step
            minus[idx] -= step
            numeric[k] = (evaluate(plus.reshape(x0.shape)) - evaluate(minus.reshape(x0.shape))) / (2.0 * step)
    except (IllumCompError, FloatingPointError, ValueError) as e:
        logger.warning(f"grad_check aborted: {e}")
        return GradCheckReport(max_rel_err=float("inf"), passed=False, checked=0, message=str(e))

    selected = analytic[indices]
    if not (np.all(np.isfinite(selected)) and np.all(np.isfinite(numeric))):
        return GradCheckReport(max_rel_err=float("inf"), passed=False, checked=int(indices.size),
                               message="non-finite gradient")

    denom = np.maximum(np.maximum(np.abs(selected), np.abs(numeric)), DENOMINATOR_FLOOR)
    rel = np.abs(selected - numeric) / denom
    worst = int(np.argmax(rel)) if rel.size else 0
    max_rel = float(rel[worst]) if rel.size else 0.0
    passed = max_rel <= tol

    logger.debug(f"grad_check: {indices.size} coords, max_rel_err={max_rel:.3e}, passed={passed}")
    return GradCheckReport(
        max_rel_err=max_rel,
        passed=passed,
        checked=int(indices.size),
        worst_index=int(indices[worst]) if rel.size else None,
        message="" if passed else f"max relative error {max_rel:.3e} exceeds {tol:.1e}",
    )
