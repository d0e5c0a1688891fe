"""Central-difference verification of tape gradients.

Everything runs in float64 regardless of the configured training dtype; the
step and tolerance defaults (h = 1e-5, tol = 1e-4 relative) are what this
codebase treats as "gradients are correct".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import CheckFailure
from .tensor import Tape, Tensor


@dataclass
class GradCheckReport:
    ok: bool
    max_rel_err: float
    per_input: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "max_rel_err": self.max_rel_err, "per_input": dict(self.per_input)}


def _rel_err(a: np.ndarray, n: np.ndarray) -> float:
    denom = np.maximum(np.abs(a), np.abs(n)) + 1e-6
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def grad_check(
    f: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    h: float = 1e-5,
    tol: float = 1e-4,
    names: Sequence[str] | None = None,
    raise_on_fail: bool = False,
) -> GradCheckReport:
    """Compare tape gradients of scalar ``f(*inputs)`` against central differences.

    ``f`` receives one Tensor per input array and must return a scalar Tensor.
    The analytic pass runs under a fresh tape; numeric evaluations run with no
    tape active, so ``f`` must not depend on ambient tape state.
    """
    arrays = [np.asarray(x, dtype=np.float64) for x in inputs]
    leaves = [Tensor(x, requires_grad=True) for x in arrays]
    with Tape() as tape:
        y = f(*leaves)
    tape.backward(y)
    analytic = [
        np.zeros_like(x) if t.grad is None else t.grad.astype(np.float64)
        for t, x in zip(leaves, arrays)
    ]

    def value_at(arrs) -> float:
        return float(f(*[Tensor(a) for a in arrs]).data.reshape(()))

    per_input: dict[str, float] = {}
    worst = 0.0
    for idx, base in enumerate(arrays):
        numeric = np.zeros_like(base)
        flat = base.reshape(-1)
        num_flat = numeric.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = value_at(arrays)
            flat[k] = orig - h
            fm = value_at(arrays)
            flat[k] = orig
            num_flat[k] = (fp - fm) / (2.0 * h)
        err = _rel_err(analytic[idx], numeric)
        name = names[idx] if names else f"input{idx}"
        per_input[name] = err
        worst = max(worst, err)

    report = GradCheckReport(ok=worst < tol, max_rel_err=worst, per_input=per_input)
    if raise_on_fail and not report.ok:
        bad = {k: v for k, v in per_input.items() if v >= tol}
        raise CheckFailure(f"gradient check failed (tol={tol}): {bad}")
    return report
