"""Model parameters for the directed linear preferential attachment graph."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ParameterError(ValueError):
    """Raised when a parameter lies outside its admissible domain."""


@dataclass(frozen=True)
class ModelParams:
    """Attachment parameters plus the derived growth exponents.

    ``alpha`` is the probability that the new node points to an existing
    node chosen by in-degree; with probability ``gamma = 1 - alpha`` an
    existing node, chosen by out-degree, points to the new node.
    """

    alpha: float
    delta_in: float
    delta_out: float
    gamma: float = field(init=False)
    c_in: float = field(init=False)
    c_out: float = field(init=False)
    iota_in: float = field(init=False)
    iota_out: float = field(init=False)

    def __post_init__(self):
        alpha, d_in, d_out = float(self.alpha), float(self.delta_in), float(self.delta_out)
        if not (0.0 < alpha < 1.0):
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (d_in > 0.0 and math.isfinite(d_in)):
            raise ParameterError(f"delta_in must be positive, got {self.delta_in!r}")
        if not (d_out > 0.0 and math.isfinite(d_out)):
            raise ParameterError(f"delta_out must be positive, got {self.delta_out!r}")
        gamma = 1.0 - alpha
        c_in = alpha / (1.0 + d_in)
        c_out = gamma / (1.0 + d_out)
        assert c_in + c_out <= 1.0
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta_in", d_in)
        object.__setattr__(self, "delta_out", d_out)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "c_in", c_in)
        object.__setattr__(self, "c_out", c_out)
        object.__setattr__(self, "iota_in", 1.0 / c_in)
        object.__setattr__(self, "iota_out", 1.0 / c_out)

    @property
    def c_sum(self) -> float:
        return self.c_in + self.c_out

    @property
    def a(self) -> float:
        """Ratio ``c_out / c_in`` linking the two scaling exponents."""
        return self.c_out / self.c_in

    def side(self, side: str) -> tuple[float, float, float, float]:
        """Return ``(c, delta, own_prob, other_prob)`` for ``side`` in {"in", "out"}.

        ``own_prob`` is the probability of the scheme that increments this
        side's degree of an existing node.
        """
        if side == "in":
            return self.c_in, self.delta_in, self.alpha, self.gamma
        if side == "out":
            return self.c_out, self.delta_out, self.gamma, self.alpha
        raise ValueError(f"side must be 'in' or 'out', got {side!r}")

    def swapped(self) -> "ModelParams":
        """Parameters of the mirror model (edge directions reversed)."""
        return ModelParams(alpha=self.gamma, delta_in=self.delta_out, delta_out=self.delta_in)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "delta_in": self.delta_in, "delta_out": self.delta_out}
