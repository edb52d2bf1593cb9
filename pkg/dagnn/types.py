"""Common types."""

from typing import Literal, NamedTuple


__all__ = [
    "Axis",
    "KKTResiduals",
    "LayerStat",
    "LogRow",
    "Phase",
    "Split",
]


Axis = Literal["n", "m", "r"]
Phase = Literal["primal", "dual"]
Split = Literal["train", "test"]


class KKTResiduals(NamedTuple):
    """Optimality residuals of a primal/dual pair."""

    stationarity: float
    primal_feasibility: float
    dual_feasibility: float
    complementary_slackness: float

    @property
    def worst(self) -> float:
        """Returns the largest residual."""
        return max(self)

    def to_json(self) -> dict[str, float]:
        """Returns a JSON representation of the residuals."""
        return {
            "stationarity": self.stationarity,
            "primalFeas": self.primal_feasibility,
            "dualFeas": self.dual_feasibility,
            "compSlack": self.complementary_slackness,
        }

    @classmethod
    def from_json(cls, json: dict) -> "KKTResiduals":
        """Creates residuals from a JSON-ish dict."""
        return cls(
            float(json["stationarity"]),
            float(json["primalFeas"]),
            float(json["dualFeas"]),
            float(json["compSlack"]),
        )


class LayerStat(NamedTuple):
    """Mean and standard error of a quantity at one unrolled layer."""

    layer: int
    mean: float
    stderr: float


class LogRow(NamedTuple):
    """A row of the training log."""

    round: int
    phase: Phase
    epoch: int
    step: int
    loss: float
    mean_slack: float
    mu_norm: float
    nu_norm: float
    wallclock_ms: float
