"""Problem parameters shared by every formula in the package."""

from __future__ import annotations

import math
from dataclasses import dataclass


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the control problem.

    Attributes:
        lam: weight of the quadratic cost of the continuous control.
        gamma: weight of the absolute-value cost of the jump control.
        theta: intensity of the Poisson process (1/time).
        alpha: weight of the quadratic state cost.
    """

    lam: float
    gamma: float
    theta: float
    alpha: float = 0.0

    def __post_init__(self):
        for name in ("lam", "gamma", "theta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise DomainError(f"alpha must be nonnegative and finite, got {self.alpha!r}")

    @property
    def theta_tilde(self) -> float:
        return math.sqrt(self.theta**2 + 4.0 * self.alpha / self.lam)

    @property
    def risk_neutral(self) -> bool:
        return self.alpha == 0.0

    def replace(self, **changes) -> "ModelParams":
        fields = dict(lam=self.lam, gamma=self.gamma, theta=self.theta, alpha=self.alpha)
        fields.update(changes)
        return ModelParams(**fields)

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "gamma": self.gamma, "theta": self.theta, "alpha": self.alpha}


def require_positive_time(T, name="T"):
    if not T > 0:
        raise DomainError(f"{name} must be positive, got {T!r}")
