"""Parameter update rules."""

from __future__ import annotations
from typing import Optional

import numpy as np

from dagnn.exceptions import ConfigError


__all__ = ["Adam", "GradientDescent", "clip_by_norm", "make_optimizer"]


def clip_by_norm(grad: np.ndarray, max_norm: Optional[float]) -> np.ndarray:
    """Rescales the gradient if its norm exceeds max_norm."""

    if max_norm is None:
        return grad

    if (norm := float(np.linalg.norm(grad))) > max_norm:
        return grad * (max_norm / norm)

    return grad


class GradientDescent:
    """Plain gradient steps θ ← θ - εg."""

    name = "sgd"

    def step(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float
    ) -> dict[str, np.ndarray]:
        """Returns the updated parameters."""
        return {name: value - lr * grads[name] for name, value in params.items()}

    def to_json(self) -> dict:
        """Returns a JSON representation of the optimizer state."""
        return {"name": self.name}

    @classmethod
    def from_json(cls, _: dict) -> GradientDescent:
        """Creates the optimizer from its JSON representation."""
        return cls()


class Adam:
    """Adaptive moment estimation."""

    name = "adam"

    def __init__(
        self,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        steps: int = 0,
        first: Optional[dict[str, np.ndarray]] = None,
        second: Optional[dict[str, np.ndarray]] = None,
    ):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = steps
        self.first = first or {}
        self.second = second or {}

    def step(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float
    ) -> dict[str, np.ndarray]:
        """Returns the updated parameters."""
        self.steps += 1
        correction1 = 1 - self.beta1**self.steps
        correction2 = 1 - self.beta2**self.steps
        updated = {}

        for name, value in params.items():
            grad = grads[name]
            first = self.beta1 * self.first.get(name, 0.0) + (1 - self.beta1) * grad
            second = self.beta2 * self.second.get(name, 0.0) + (1 - self.beta2) * grad**2
            self.first[name], self.second[name] = first, second
            updated[name] = value - lr * (first / correction1) / (
                np.sqrt(second / correction2) + self.eps
            )

        return updated

    def to_json(self) -> dict:
        """Returns a JSON representation of the optimizer state."""
        return {
            "name": self.name,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "steps": self.steps,
            "first": {name: value.tolist() for name, value in self.first.items()},
            "second": {name: value.tolist() for name, value in self.second.items()},
        }

    @classmethod
    def from_json(cls, json: dict) -> Adam:
        """Creates the optimizer from its JSON representation."""
        return cls(
            beta1=json["beta1"],
            beta2=json["beta2"],
            eps=json["eps"],
            steps=json["steps"],
            first={k: np.array(v, dtype=np.float64) for k, v in json["first"].items()},
            second={k: np.array(v, dtype=np.float64) for k, v in json["second"].items()},
        )


OPTIMIZERS = {GradientDescent.name: GradientDescent, Adam.name: Adam}


def make_optimizer(name: str, json: Optional[dict] = None):
    """Returns a fresh or restored optimizer by name."""

    try:
        optimizer = OPTIMIZERS[name]
    except KeyError:
        raise ConfigError("training.optimizer", f"unknown optimizer {name!r}") from None

    return optimizer() if json is None else optimizer.from_json(json)
