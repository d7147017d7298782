"""Alice/Eve decisions from the learned score, plus FA/MD bookkeeping.

Operating rule: declare Alice iff ``|1 - score| <= nu``.  The learner is trained toward
1 for Alice sessions and 0 for Eve sessions, so a score near one is the legitimate case.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _csvio
from .errors import DataError, ParameterError


class Verdict(enum.Enum):
    ALICE = "Alice"
    EVE = "Eve"


class Hypothesis(enum.IntEnum):
    """Ground truth of a Phase-II transmission."""

    PHI0 = 0  # Alice
    PHI1 = 1  # Eve


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    score: float
    threshold: float


def _check_nu(nu: float) -> None:
    if not (0.0 <= nu < 1.0):
        raise ParameterError(f"threshold nu must lie in [0, 1), got {nu}")


def decide(score: float, nu: float) -> Decision:
    _check_nu(nu)
    if not math.isfinite(score):
        raise DataError(f"non-finite score {score}")
    verdict = Verdict.ALICE if abs(1.0 - score) <= nu else Verdict.EVE
    return Decision(verdict, float(score), float(nu))


@dataclass(frozen=True)
class ConfusionCounts:
    false_alarms: int = 0
    misdetections: int = 0
    alice_trials: int = 0
    eve_trials: int = 0

    def __post_init__(self):
        if self.false_alarms > self.alice_trials or self.misdetections > self.eve_trials:
            raise ParameterError("error counts exceed trial counts")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.false_alarms + other.false_alarms,
                               self.misdetections + other.misdetections,
                               self.alice_trials + other.alice_trials,
                               self.eve_trials + other.eve_trials)

    @property
    def fa_rate(self) -> float:
        """NaN when there were no Alice trials."""
        return self.false_alarms / self.alice_trials if self.alice_trials else math.nan

    @property
    def md_rate(self) -> float:
        return self.misdetections / self.eve_trials if self.eve_trials else math.nan


def tally(decisions: Iterable[tuple[Decision, Hypothesis]]) -> ConfusionCounts:
    fa = md = na = ne = 0
    for d, truth in decisions:
        if Hypothesis(truth) is Hypothesis.PHI0:
            na += 1
            fa += d.verdict is Verdict.EVE
        else:
            ne += 1
            md += d.verdict is Verdict.ALICE
    return ConfusionCounts(fa, md, na, ne)


def accept_mask(scores, nu: float) -> np.ndarray:
    """Vectorized ``decide``: True where the verdict is Alice."""
    return np.abs(1.0 - np.asarray(scores, dtype=float)) <= nu


@dataclass(frozen=True)
class SweepPoint:
    nu: float
    fa: float
    md: float
    alice_trials: int
    eve_trials: int


def sweep_threshold(scores_alice, scores_eve, grid: Sequence[float]) -> list[SweepPoint]:
    """Empirical FA and MD at each threshold of an ascending grid in [0, 1)."""
    g = np.asarray(grid, dtype=float)
    if np.any(np.diff(g) < 0):
        raise ParameterError("threshold grid must be sorted ascending")
    for nu in g:
        _check_nu(nu)
    da = np.sort(np.abs(1.0 - np.asarray(scores_alice, dtype=float)))
    de = np.sort(np.abs(1.0 - np.asarray(scores_eve, dtype=float)))
    na, ne = len(da), len(de)
    # accepted(nu) = #{d <= nu}
    acc_a = np.searchsorted(da, g, side="right")
    acc_e = np.searchsorted(de, g, side="right")
    fa = (na - acc_a) / na if na else np.full(len(g), np.nan)
    md = acc_e / ne if ne else np.full(len(g), np.nan)
    return [SweepPoint(float(v), float(f), float(m), na, ne) for v, f, m in zip(g, fa, md)]


def default_grid(points: int = 1001) -> np.ndarray:
    return np.linspace(0.0, 1.0, points, endpoint=False)


def tradeoff_area(points: Sequence[SweepPoint]) -> float:
    """Area under the MD-versus-FA trade-off curve traced by a threshold sweep.

    The curve is closed with the corner points (FA=1, MD=0) and (FA=0, MD=1); smaller
    is better.
    """
    fa = np.array([p.fa for p in points] + [1.0, 0.0])
    md = np.array([p.md for p in points] + [0.0, 1.0])
    order = np.lexsort((-md, fa))
    fa, md = fa[order], md[order]
    return float(np.sum(0.5 * (md[1:] + md[:-1]) * np.diff(fa)))


@dataclass(frozen=True)
class OperatingPoint:
    nu: float
    fa: float
    md: float
    fa_met: bool


def md_at_fa(scores_alice, scores_eve, fa_target: float, nu_max: float = 1.0 - 1e-12) -> OperatingPoint:
    """Misdetection at the smallest threshold whose empirical FA is within budget.

    When no threshold below one meets the budget, ``nu_max`` is used and ``fa_met`` is
    False.
    """
    da = np.sort(np.abs(1.0 - np.asarray(scores_alice, dtype=float)))
    de = np.abs(1.0 - np.asarray(scores_eve, dtype=float))
    n = len(da)
    allowed = int(math.floor(fa_target * n + 1e-9))  # rejections permitted
    nu = 0.0 if allowed >= n else float(da[n - 1 - allowed])
    fa_met = nu <= nu_max
    nu = min(max(nu, 0.0), nu_max)
    fa = float(np.mean(da > nu))
    md = float(np.mean(de <= nu))
    return OperatingPoint(nu, fa, md, fa_met)


def write_sweep_csv(path, points: Sequence[SweepPoint]):
    return _csvio.write_csv(path, ["nu", "fa_rate", "md_rate", "alice_trials", "eve_trials"],
                            ((p.nu, p.fa, p.md, p.alice_trials, p.eve_trials) for p in points))
