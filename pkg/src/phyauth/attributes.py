"""Physical-layer attributes, two-phase differencing and range normalization."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, ParameterError, ProtocolError


class Phase(enum.Enum):
    PHASE_I = "I"
    PHASE_II = "II"


@dataclass(frozen=True)
class AttributeSpec:
    """One attribute and the nominal range ``[lo, hi]`` of its phase difference."""

    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise ParameterError(f"attribute {self.name!r}: need finite lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def widened(self, factor: float) -> "AttributeSpec":
        """Same center, range scaled by ``factor``."""
        c, hw = self.center, self.half_width * factor
        return AttributeSpec(self.name, c - hw, c + hw)

    def to_dict(self) -> dict:
        return {"name": self.name, "lo": self.lo, "hi": self.hi}


def check_attribute_set(specs: Sequence[AttributeSpec]) -> None:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ParameterError(f"attribute names must be unique, got {names}")
    if not names:
        raise ParameterError("attribute set is empty")


@dataclass(frozen=True)
class EstimateVector:
    values: np.ndarray
    phase: Phase
    time_index: int

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class NormalizedSample:
    """Training pair: features in [-1, 1]^N and label (1 = Alice, 0 = Eve)."""

    features: np.ndarray
    label: float


def diff(first: EstimateVector, second: EstimateVector) -> np.ndarray:
    """Phase-I minus Phase-II estimate, component-wise."""
    if first.phase is not Phase.PHASE_I or second.phase is not Phase.PHASE_II:
        raise ProtocolError(f"expected (Phase I, Phase II), got ({first.phase.value}, {second.phase.value})")
    a = np.asarray(first.values, dtype=float)
    b = np.asarray(second.values, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"estimate lengths differ: {a.shape} vs {b.shape}")
    return a - b


def _bounds(specs: Sequence[AttributeSpec]) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([s.lo for s in specs], dtype=float)
    hi = np.array([s.hi for s in specs], dtype=float)
    return lo, hi


def normalize_unclamped(h, specs: Sequence[AttributeSpec]) -> np.ndarray:
    """Affine map of ``[lo, hi]`` onto ``[-1, 1]``; works on (..., N) arrays."""
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != len(specs):
        raise DimensionError(f"got {h.shape[-1]} components for {len(specs)} attributes")
    lo, hi = _bounds(specs)
    return 2.0 / (hi - lo) * (h - 0.5 * (lo + hi))


def normalize(h, specs: Sequence[AttributeSpec], overflow: OverflowCounter | None = None) -> np.ndarray:
    """Normalize differences into [-1, 1]^N, clamping out-of-range components.

    Clamped components are tallied per attribute in ``overflow`` when given.
    """
    x = normalize_unclamped(h, specs)
    out = (x < -1.0) | (x > 1.0)
    if overflow is not None:
        overflow.add(out.reshape(-1, len(specs)))
    return np.clip(x, -1.0, 1.0)


def denormalize(x, specs: Sequence[AttributeSpec]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(specs):
        raise DimensionError(f"got {x.shape[-1]} components for {len(specs)} attributes")
    lo, hi = _bounds(specs)
    return x * (hi - lo) / 2.0 + 0.5 * (lo + hi)


class OverflowCounter:
    """Per-attribute count of clamped normalized components."""

    def __init__(self, names: Sequence[str]):
        self.names = list(names)
        self.counts = np.zeros(len(self.names), dtype=np.int64)
        self.total = 0

    def add(self, mask: np.ndarray) -> None:
        mask = np.atleast_2d(mask)
        self.counts += mask.sum(axis=0)
        self.total += mask.shape[0]

    def as_dict(self) -> dict[str, int]:
        return {n: int(c) for n, c in zip(self.names, self.counts)}
