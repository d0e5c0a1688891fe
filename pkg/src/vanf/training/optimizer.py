"""Adam with a halving schedule and non-finite-gradient step skipping."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor
from ..errors import ValidationError


def milestones_for(total_steps: int, fractions=(0.10, 0.25, 0.50, 0.75)) -> tuple[int, ...]:
    if total_steps <= 0:
        raise ValidationError("total_steps must be positive")
    # milestone 0 would just rescale the base rate; short runs skip it
    return tuple(sorted({int(f * total_steps) for f in fractions} - {0}))


def lr_at_step(base: float, step: int, milestones) -> float:
    """Base rate halved once per milestone already reached."""
    return base * 0.5 ** sum(step >= m for m in milestones)


class Adam:
    """Owns one component's parameters; applies updates in sorted-name order."""

    def __init__(self, params: dict[str, Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(sorted(params.items()))
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.t = 0
        self.skipped = 0

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float) -> bool:
        """One update; returns False (and touches nothing) on non-finite grads."""
        grads = {}
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.isfinite(g).all():
                self.skipped += 1
                return False
            grads[k] = g
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p.data = p.data - lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
        return True

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}.t": np.array([self.t], dtype=np.int64),
               f"{prefix}.skipped": np.array([self.skipped], dtype=np.int64)}
        for k in self.params:
            out[f"{prefix}.m.{k}"] = self.m[k]
            out[f"{prefix}.v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, prefix: str, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays[f"{prefix}.t"][0])
        self.skipped = int(arrays[f"{prefix}.skipped"][0])
        for k, p in self.params.items():
            m = arrays[f"{prefix}.m.{k}"]
            v = arrays[f"{prefix}.v.{k}"]
            if m.shape != p.data.shape or v.shape != p.data.shape:
                raise ValidationError(f"optimizer state shape mismatch for {k}")
            self.m[k] = m.copy()
            self.v[k] = v.copy()
