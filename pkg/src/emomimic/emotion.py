"""The 6-dimensional emotion vector shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DIMENSIONS = (
    "pleasantness",
    "arousal",
    "dominance",
    "credibility",
    "interest",
    "positivity",
)

N_DIMENSIONS = len(DIMENSIONS)

EMOTION_MIN = 1.0
EMOTION_MAX = 7.0


@dataclass(frozen=True)
class EmotionVector:
    """Six continuous emotion intensities, each on the 1..7 scale.

    The dimension order is fixed: pleasantness, arousal, dominance,
    credibility, interest, positivity.
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_DIMENSIONS,):
            raise ValueError(f"emotion vector must have {N_DIMENSIONS} components, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("emotion vector components must be finite")
        if np.any(v < EMOTION_MIN) or np.any(v > EMOTION_MAX):
            raise ValueError(
                f"emotion vector components must lie in [{EMOTION_MIN}, {EMOTION_MAX}], got {v.tolist()}"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def from_components(cls, pleasantness, arousal, dominance, credibility, interest, positivity) -> "EmotionVector":
        return cls(np.array([pleasantness, arousal, dominance, credibility, interest, positivity], dtype=np.float64))

    @classmethod
    def clamped(cls, raw) -> "EmotionVector":
        """Build a vector by clipping arbitrary reals into [1, 7]."""
        v = np.clip(np.asarray(raw, dtype=np.float64), EMOTION_MIN, EMOTION_MAX)
        return cls(v)

    def as_array(self) -> np.ndarray:
        return self.values.copy()

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])

    def component(self, name: str) -> float:
        return float(self.values[DIMENSIONS.index(name)])

    def format_csv(self, precision: int = 4) -> str:
        """Comma-separated decimals in the fixed dimension order."""
        return ",".join(f"{x:.{precision}f}" for x in self.values)

    @classmethod
    def parse_csv(cls, text: str) -> "EmotionVector":
        parts = text.split(",")
        if len(parts) != N_DIMENSIONS:
            raise ValueError(f"expected {N_DIMENSIONS} comma-separated values, got {len(parts)}: {text!r}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"non-numeric emotion component in {text!r}") from exc
        return cls(np.array(vals, dtype=np.float64))

    def __repr__(self):
        pairs = ", ".join(f"{n}={x:.3f}" for n, x in zip(DIMENSIONS, self.values))
        return f"EmotionVector({pairs})"
