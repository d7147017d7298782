"""Analytic false-alarm and misdetection rates by numerical CDF convolution.

Every law is a :class:`DiscretizedDistribution`: a uniform grid of bins holding
probability mass, read as a piecewise-constant density (so the CDF is piecewise linear).
A zero-width grid with a single bin is an exact point mass.

The analytic rates treat a frozen model ``f(q) = sum_l alpha_l k(c_l, q)`` evaluated at a
random test feature.  The terms ``alpha_l k(c_l, q)`` are given their exact marginal laws
and then combined by convolution, i.e. as if independent.  They all depend on the same
test feature, so this is an approximation; :func:`monte_carlo_rates` reports the exact
simulated rates and an independent-terms simulation next to it so the two effects
(grid error versus dependence) can be told apart.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import signal, stats

from . import _csvio
from .attributes import AttributeSpec
from .errors import DataError, ParameterError
from .klms import ModelState
from .simulation import (DriftKind, DriftModel, ScenarioConfig, _distance, _pl, generate_stream)

DEFAULT_BINS = 4096
MIN_BINS = 64
TAIL_STD = 6.0
MASS_TOL = 1e-9
_DIRECT_CONV_LIMIT = 4_000_000  # n1 * n2 above which FFT convolution is used


@dataclass(frozen=True)
class DiscretizedDistribution:
    """Mass ``pmf[k]`` spread uniformly over ``[support_lo + k w, support_lo + (k+1) w]``."""

    support_lo: float
    bin_width: float
    pmf: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float).ravel()
        if p.size == 0 or not np.all(np.isfinite(p)):
            raise DataError("pmf must be a non-empty finite array")
        if np.any(p < 0):
            raise DataError("pmf entries must be non-negative")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise DataError(f"pmf sums to {p.sum()!r}, not 1")
        if not (math.isfinite(self.support_lo) and math.isfinite(self.bin_width) and self.bin_width >= 0):
            raise DataError("support and bin width must be finite, width >= 0")
        if self.bin_width == 0 and p.size != 1:
            raise DataError("a zero-width grid holds exactly one atom")
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)

    # -- construction ------------------------------------------------------------
    @classmethod
    def point(cls, value: float) -> "DiscretizedDistribution":
        return cls(float(value), 0.0, np.ones(1))

    @classmethod
    def from_masses(cls, lo: float, width: float, masses) -> "DiscretizedDistribution":
        """Renormalizes ``masses`` (tiny negative round-off is zeroed)."""
        m = np.clip(np.asarray(masses, dtype=float), 0.0, None)
        s = m.sum()
        if not s > 0:
            raise DataError("no probability mass")
        return cls(float(lo), float(width), m / s)

    @classmethod
    def from_cdf(cls, cdf: Callable, lo: float, hi: float, bins: int = DEFAULT_BINS) -> "DiscretizedDistribution":
        """Exact bin masses ``cdf(e[k+1]) - cdf(e[k])`` of a law supported on [lo, hi]."""
        if not hi > lo:
            return cls.point(lo)
        edges = np.linspace(lo, hi, bins + 1)
        c = np.asarray(cdf(edges), dtype=float)
        c[0], c[-1] = 0.0, 1.0  # mass outside [lo, hi] is folded into the edge bins
        c = np.maximum.accumulate(np.clip(c, 0.0, 1.0))
        return cls.from_masses(lo, (hi - lo) / bins, np.diff(c))

    @classmethod
    def gaussian(cls, mean: float, std: float, bins: int = DEFAULT_BINS,
                 tails: float = TAIL_STD) -> "DiscretizedDistribution":
        """Normal law truncated at ``mean +- tails * std``."""
        if std < 0:
            raise ParameterError("std must be >= 0")
        if std == 0:
            return cls.point(mean)
        lo, hi = mean - tails * std, mean + tails * std
        edges = np.linspace(lo, hi, bins + 1)
        return cls.from_masses(lo, (hi - lo) / bins, np.diff(stats.norm.cdf(edges, mean, std)))

    @classmethod
    def uniform(cls, lo: float, hi: float, bins: int = DEFAULT_BINS) -> "DiscretizedDistribution":
        if not hi > lo:
            return cls.point(lo)
        return cls(float(lo), (hi - lo) / bins, np.full(bins, 1.0 / bins))

    @classmethod
    def from_samples(cls, samples, bins: int = DEFAULT_BINS, lo: float | None = None,
                     hi: float | None = None) -> "DiscretizedDistribution":
        """Histogram law; samples outside ``[lo, hi]`` are folded into the edge bins."""
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            raise DataError("no samples")
        lo = float(x.min()) if lo is None else float(lo)
        hi = float(x.max()) if hi is None else float(hi)
        if not hi > lo:
            return cls.point(lo)
        w = (hi - lo) / bins
        idx = np.clip(np.floor((x - lo) / w).astype(np.int64), 0, bins - 1)
        return cls.from_masses(lo, w, np.bincount(idx, minlength=bins))

    # -- grid ----------------------------------------------------------------------
    @property
    def bins(self) -> int:
        return self.pmf.size

    @property
    def support_hi(self) -> float:
        return self.support_lo + self.bins * self.bin_width

    @property
    def is_point(self) -> bool:
        return self.bin_width == 0

    @property
    def edges(self) -> np.ndarray:
        return self.support_lo + self.bin_width * np.arange(self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.support_lo + self.bin_width * (np.arange(self.bins) + 0.5)

    # -- summaries -----------------------------------------------------------------
    def cdf(self, x) -> np.ndarray:
        """P(X <= x), linear inside each bin."""
        x = np.asarray(x, dtype=float)
        if self.is_point:
            return (x >= self.support_lo).astype(float)
        c = np.minimum(np.concatenate(([0.0], np.cumsum(self.pmf))), 1.0)
        c[-1] = 1.0
        return np.interp(x, self.edges, c, left=0.0, right=1.0)

    def interval_mass(self, a: float, b: float) -> float:
        """F(b) - F(a)."""
        return float(self.cdf(b) - self.cdf(a))

    def mean(self) -> float:
        return float(self.pmf @ self.centers) if not self.is_point else self.support_lo

    def var(self) -> float:
        """Variance of the piecewise-constant density (includes the in-bin w^2/12)."""
        if self.is_point:
            return 0.0
        m = self.mean()
        return float(self.pmf @ (self.centers - m) ** 2 + self.bin_width ** 2 / 12.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.is_point:
            return np.full(n, self.support_lo)
        k = rng.choice(self.bins, size=n, p=self.pmf)
        return self.support_lo + self.bin_width * (k + rng.random(n))

    # -- transforms ----------------------------------------------------------------
    def affine(self, scale: float, shift: float = 0.0) -> "DiscretizedDistribution":
        """Law of ``scale * X + shift``."""
        if scale == 0 or self.is_point:
            return DiscretizedDistribution.point(scale * self.support_lo + shift)
        if scale > 0:
            return DiscretizedDistribution(scale * self.support_lo + shift, scale * self.bin_width, self.pmf)
        return DiscretizedDistribution(scale * self.support_hi + shift, -scale * self.bin_width, self.pmf[::-1])

    def rebin(self, lo: float, hi: float, bins: int) -> "DiscretizedDistribution":
        """Masses of this law on a new uniform grid; outside mass goes to the edge bins."""
        if self.is_point:
            if not hi > lo:
                return self
            w = (hi - lo) / bins
            m = np.zeros(bins)
            m[int(np.clip(math.floor((self.support_lo - lo) / w), 0, bins - 1))] = 1.0
            return DiscretizedDistribution(lo, w, m)
        return DiscretizedDistribution.from_cdf(self.cdf, lo, hi, bins)

    def with_width(self, width: float) -> "DiscretizedDistribution":
        """Same law on a grid of the given bin width starting at ``support_lo``."""
        if self.is_point or width == self.bin_width:
            return self
        n = max(1, int(math.ceil((self.support_hi - self.support_lo) / width - 1e-9)))
        return self.rebin(self.support_lo, self.support_lo + n * width, n)

    def clamp(self, lo: float = -1.0, hi: float = 1.0) -> "DiscretizedDistribution":
        """Law of ``clip(X, lo, hi)`` with the clipped mass put in the edge bins."""
        if self.is_point:
            return DiscretizedDistribution.point(min(max(self.support_lo, lo), hi))
        if self.support_lo >= lo and self.support_hi <= hi:
            return self
        a, b = max(self.support_lo, lo), min(self.support_hi, hi)
        if not b > a:
            return DiscretizedDistribution.point(lo if self.support_hi <= lo else hi)
        n = max(1, int(round((b - a) / self.bin_width)))
        return self.rebin(a, b, n)

    # -- distances -----------------------------------------------------------------
    def total_variation(self, other: "DiscretizedDistribution", bins: int = MIN_BINS) -> float:
        """TV distance after both laws are put on one ``bins``-bin grid spanning their supports."""
        lo = min(self.support_lo, other.support_lo)
        hi = max(self.support_hi, other.support_hi)
        if not hi > lo:
            return 0.0
        a = self.rebin(lo, hi, bins).pmf
        b = other.rebin(lo, hi, bins).pmf
        return 0.5 * float(np.abs(a - b).sum())

    def tv_to_samples(self, samples, bins: int = MIN_BINS) -> float:
        """TV distance to the histogram of ``samples`` on a ``bins``-bin grid over this support.

        Samples outside the support count fully toward the distance.
        """
        x = np.asarray(samples, dtype=float).ravel()
        lo, hi = self.support_lo, self.support_hi
        if self.is_point:
            return float(np.mean(x != lo))
        w = (hi - lo) / bins
        inside = (x >= lo) & (x <= hi)
        idx = np.clip(np.floor((x[inside] - lo) / w).astype(np.int64), 0, bins - 1)
        emp = np.bincount(idx, minlength=bins) / x.size
        law = self.rebin(lo, hi, bins).pmf
        return 0.5 * float(np.abs(law - emp).sum() + np.mean(~inside))

    def kolmogorov(self, samples) -> float:
        """Sup distance between this CDF and the empirical CDF of ``samples``."""
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        n = x.size
        f = self.cdf(x)
        hi = np.arange(1, n + 1) / n
        lo = np.arange(0, n) / n
        return float(max(np.max(np.abs(hi - f)), np.max(np.abs(f - lo))))


# -- convolution -----------------------------------------------------------------------

def _convolve_pair(a: DiscretizedDistribution, b: DiscretizedDistribution) -> DiscretizedDistribution:
    """Exact bin masses of the sum of two piecewise-constant densities on a common width.

    The sum of two width-w boxes is a triangle over two bins, half its mass in each.
    """
    w = a.bin_width
    if a.bins * b.bins > _DIRECT_CONV_LIMIT:
        c = signal.fftconvolve(a.pmf, b.pmf)
    else:
        c = np.convolve(a.pmf, b.pmf)
    m = 0.5 * (np.concatenate((c, [0.0])) + np.concatenate(([0.0], c)))
    return DiscretizedDistribution.from_masses(a.support_lo + b.support_lo, w, m)


def convolve_sum(terms: Sequence[DiscretizedDistribution], max_bins: int | None = None) -> DiscretizedDistribution:
    """Law of the sum of independent terms.

    Point masses shift the result.  The others are brought to the finest bin width among
    them (coarser if ``max_bins`` would otherwise be exceeded by the summed support) and
    convolved in order.
    """
    terms = list(terms)
    if not terms:
        raise ParameterError("convolve_sum needs at least one term")
    shift = sum(t.support_lo for t in terms if t.is_point)
    spread = [t for t in terms if not t.is_point]
    if not spread:
        return DiscretizedDistribution.point(shift)
    w = min(t.bin_width for t in spread)
    if max_bins is not None:
        span = sum(t.support_hi - t.support_lo for t in spread)
        w = max(w, span / max_bins)
    acc = spread[0].with_width(w)
    for t in spread[1:]:
        acc = _convolve_pair(acc, t.with_width(w))
    return DiscretizedDistribution(acc.support_lo + shift, acc.bin_width, acc.pmf)


# -- attribute laws ----------------------------------------------------------------------

def _magnitude_difference_cdf(omega: float, carry: float, cond_std: float, nodes: int = 400):
    """CDF of ``|g1| - |g2|`` with ``g1 ~ CN(0, omega)`` and ``g2 | g1 ~ CN(carry g1, cond_std^2)``.

    Integrates the conditional Rician survival function of ``|g2|`` against the Rayleigh
    density of ``|g1|`` with Gauss-Legendre nodes.
    """
    r_max = math.sqrt(omega) * TAIL_STD
    t, wts = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * r_max * (t + 1.0)
    dens = 0.5 * r_max * wts * (2.0 * r / omega) * np.exp(-r * r / omega)
    s = cond_std / math.sqrt(2.0)

    def cdf(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        thr = r[None, :] - x[:, None]  # P(|g2| >= r - x)
        if s == 0:
            sf = (carry * r[None, :] >= thr).astype(float)
        else:
            sf = stats.rice.sf(np.maximum(thr, 0.0) / s, carry * r[None, :] / s)
            sf = np.where(thr <= 0, 1.0, sf)
        return sf @ dens / dens.sum()

    return cdf


def _cir_moments(drift: DriftModel) -> tuple[float, float]:
    rho, innov = drift.rho, drift.innovation
    stat_var = innov ** 2 / (1.0 - rho ** 2)
    return stat_var, rho


def _cir_law(drift: DriftModel, carry: float, cond_var: float, bins: int) -> DiscretizedDistribution:
    omega, _ = _cir_moments(drift)
    if omega == 0:
        return DiscretizedDistribution.point(0.0)
    cdf = _magnitude_difference_cdf(omega, carry, math.sqrt(max(cond_var, 0.0)))
    ext = math.sqrt(omega) * TAIL_STD
    # evaluate the quadrature on a coarse set of points, then interpolate (CDF is smooth)
    xs = np.linspace(-ext, ext, 1025)
    cs = np.maximum.accumulate(cdf(xs))
    return DiscretizedDistribution.from_cdf(lambda e: np.interp(e, xs, cs), -ext, ext, bins)


def drift_law(drift: DriftModel, tau: int, start_tick: int = 0, bins: int = DEFAULT_BINS) -> DiscretizedDistribution:
    """Law of Alice's true-value change ``H_I - H_II`` over ``tau`` ticks (natural units)."""
    kind = drift.kind
    if kind is DriftKind.GAUSSIAN_RANDOM_WALK:
        return DiscretizedDistribution.gaussian(0.0, drift.step_std * math.sqrt(tau), bins)
    if kind is DriftKind.STATIC:
        return DiscretizedDistribution.point(0.0)
    if kind is DriftKind.PATH_LOSS_MOTION:
        d0, d1 = _distance(drift, start_tick), _distance(drift, start_tick + tau)
        return DiscretizedDistribution.point(float(_pl(drift, d0) - _pl(drift, d1)))
    if kind is DriftKind.AR1_MULTI_TAP:
        omega, rho = _cir_moments(drift)
        carry = rho ** tau
        cond_var = omega * (1.0 - carry ** 2)
        return _cir_law(drift, carry, cond_var, bins)
    raise ParameterError(f"unsupported drift kind {kind}")


def eve_offset_law(drift: DriftModel, start_tick: int = 0, bins: int = DEFAULT_BINS) -> DiscretizedDistribution:
    """Law of Alice's Phase-I true value minus Eve's own true value (natural units)."""
    kind = drift.kind
    if kind in (DriftKind.GAUSSIAN_RANDOM_WALK, DriftKind.STATIC):
        return DiscretizedDistribution.gaussian(0.0, math.sqrt(2.0) * drift.spread, bins)
    if kind is DriftKind.AR1_MULTI_TAP:
        omega, _ = _cir_moments(drift)
        return _cir_law(drift, 0.0, omega, bins)
    if kind is DriftKind.PATH_LOSS_MOTION:
        alice = float(_pl(drift, _distance(drift, start_tick)))
        lo_d, hi_d = drift.eve_distance_lo, drift.eve_distance_hi
        if hi_d == lo_d:
            return DiscretizedDistribution.point(alice - float(_pl(drift, lo_d)))
        lo, hi = alice - float(_pl(drift, hi_d)), alice - float(_pl(drift, lo_d))

        def cdf(x):
            # P(alice - PL(D) <= x) = P(D >= PL^-1(alice - x))
            d = drift.ref_distance_m * 10.0 ** ((alice - np.asarray(x) - drift.pl_intercept_db) / drift.pl_slope_db)
            return np.clip((hi_d - d) / (hi_d - lo_d), 0.0, 1.0)

        return DiscretizedDistribution.from_cdf(cdf, lo, hi, bins)
    raise ParameterError(f"unsupported drift kind {kind}")


def _feature_law(spec: AttributeSpec, offset: DiscretizedDistribution, noise_std_I: float,
                 noise_std_II: float, bins: int) -> DiscretizedDistribution:
    if bins < MIN_BINS:
        raise ParameterError(f"bins must be >= {MIN_BINS}")
    noise = DiscretizedDistribution.gaussian(0.0, math.hypot(noise_std_I, noise_std_II), bins)
    raw = convolve_sum([offset, noise], max_bins=16 * bins)
    scale = 2.0 / (spec.hi - spec.lo)
    law = raw.affine(scale, -scale * spec.center).clamp(-1.0, 1.0)
    if law.is_point:
        return law
    return law.rebin(law.support_lo, law.support_hi, bins)


def distribution_of_phi0_feature(spec: AttributeSpec, drift: DriftModel, noise_std_I: float,
                                 noise_std_II: float, tau: int, bins: int = DEFAULT_BINS,
                                 start_tick: int = 0) -> DiscretizedDistribution:
    """Law of one normalized, clamped feature when Alice transmits in Phase II."""
    if bins < MIN_BINS:
        raise ParameterError(f"bins must be >= {MIN_BINS}")
    return _feature_law(spec, drift_law(drift, tau, start_tick, bins), noise_std_I, noise_std_II, bins)


def distribution_of_phi1_feature(spec: AttributeSpec, drift: DriftModel, noise_std_I: float,
                                 noise_std_II: float, tau: int, bins: int = DEFAULT_BINS,
                                 eve_offset: DiscretizedDistribution | None = None,
                                 start_tick: int = 0) -> DiscretizedDistribution:
    """Law of one normalized feature when Eve transmits in Phase II.

    ``eve_offset`` is the law of Alice's Phase-I truth minus Eve's truth; by default Eve
    draws her own value per :func:`eve_offset_law`.
    """
    if bins < MIN_BINS:
        raise ParameterError(f"bins must be >= {MIN_BINS}")
    off = eve_offset_law(drift, start_tick, bins) if eve_offset is None else eve_offset
    return _feature_law(spec, off, noise_std_I, noise_std_II, bins)


@dataclass(frozen=True)
class ScenarioLaws:
    """Per-attribute feature laws under each hypothesis."""

    phi0: tuple
    phi1: tuple
    bins: int

    @classmethod
    def from_config(cls, config: ScenarioConfig, bins: int = DEFAULT_BINS) -> "ScenarioLaws":
        p0, p1 = [], []
        for spec in config.attributes:
            drift = config.drift[spec.name]
            s1, s2 = config.noise_std[spec.name]
            law0 = distribution_of_phi0_feature(spec, drift, s1, s2, config.tau, bins, config.start_tick)
            if spec.name in config.eve_imitates:
                law1 = law0
            else:
                law1 = distribution_of_phi1_feature(spec, drift, s1, s2, config.tau, bins,
                                                    start_tick=config.start_tick)
            p0.append(law0)
            p1.append(law1)
        return cls(tuple(p0), tuple(p1), bins)


# -- kernel terms and rates ---------------------------------------------------------------

def _squared_distance_law(center: float, law: DiscretizedDistribution, bins: int) -> DiscretizedDistribution:
    """Law of ``(center - X)^2``."""
    if law.is_point:
        return DiscretizedDistribution.point((center - law.support_lo) ** 2)
    lo_d = max(law.support_lo - center, 0.0, center - law.support_hi)
    hi_d = max(center - law.support_lo, law.support_hi - center)
    lo, hi = lo_d ** 2, hi_d ** 2

    def cdf(s):
        r = np.sqrt(np.maximum(s, 0.0))
        return law.cdf(center + r) - law.cdf(center - r)

    return DiscretizedDistribution.from_cdf(cdf, lo, hi, bins)


def kernel_term_distribution(coefficient: float, center, feature_laws: Sequence[DiscretizedDistribution],
                             width: float, bins: int = DEFAULT_BINS) -> DiscretizedDistribution:
    """Law of ``coefficient * exp(-||center - X||^2 / (2 width^2))`` for independent components of X.

    The output grid spans the exact support of the term, so nothing falls off it.
    """
    c = np.asarray(center, dtype=float).ravel()
    if c.size != len(feature_laws):
        raise ParameterError(f"{c.size} center components for {len(feature_laws)} feature laws")
    if not width > 0:
        raise ParameterError("kernel width must be positive")
    if coefficient == 0:
        return DiscretizedDistribution.point(0.0)
    dist = convolve_sum([_squared_distance_law(ci, law, bins) for ci, law in zip(c, feature_laws)],
                        max_bins=4 * bins)
    k = 1.0 / (2.0 * width * width)
    if dist.is_point:
        return DiscretizedDistribution.point(coefficient * math.exp(-k * dist.support_lo))
    a = abs(coefficient)
    y_lo, y_hi = a * math.exp(-k * dist.support_hi), a * math.exp(-k * dist.support_lo)
    if not y_hi > y_lo:
        return DiscretizedDistribution.point(math.copysign(y_lo, coefficient))

    def cdf(y):
        # |coef| exp(-k S) <= y  <=>  S >= -log(y/|coef|)/k
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            s = -np.log(np.maximum(y, 1e-300) / a) / k
        return 1.0 - dist.cdf(s)

    term = DiscretizedDistribution.from_cdf(cdf, y_lo, y_hi, bins)
    return term if coefficient > 0 else term.affine(-1.0)


def score_distribution(model: ModelState, feature_laws: Sequence[DiscretizedDistribution],
                       bins: int = DEFAULT_BINS) -> DiscretizedDistribution:
    """Law of the frozen model's score with its terms combined as independent."""
    terms = [kernel_term_distribution(a, c, feature_laws, model.kernel.width, bins)
             for c, a in zip(model.dictionary, model.coefficients)]
    if not terms:
        return DiscretizedDistribution.point(0.0)
    return convolve_sum(terms, max_bins=8 * bins)


def _check_nu(nu: float) -> None:
    if not 0.0 <= nu < 1.0:
        raise ParameterError(f"threshold nu must lie in [0, 1), got {nu}")


def analytic_fa(model: ModelState, laws: ScenarioLaws, nu: float) -> float:
    """P(-nu < score <= nu) under Alice, from the convolved term laws."""
    _check_nu(nu)
    return score_distribution(model, laws.phi0, laws.bins).interval_mass(-nu, nu)


def analytic_md(model: ModelState, laws: ScenarioLaws, nu: float) -> float:
    """P(1 - nu < score <= 1 + nu) under Eve, from the convolved term laws."""
    _check_nu(nu)
    return score_distribution(model, laws.phi1, laws.bins).interval_mass(1.0 - nu, 1.0 + nu)


# -- Monte Carlo ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorRateReport:
    """Analytic and simulated rates for one frozen model and threshold.

    ``mc_fa``/``mc_md`` use the same events as the analytic rates: ``|score| <= nu`` under
    Alice and ``|1 - score| <= nu`` under Eve.  ``rule_fa``/``rule_md`` are the operating
    rule's error rates (reject Alice when ``|1 - score| > nu``; accept Eve when
    ``|1 - score| <= nu``).  ``indep_fa``/``indep_md`` re-simulate the literal events with
    every kernel term fed its own independent test feature.
    """

    analytic_fa: float
    analytic_md: float
    mc_fa: float
    mc_md: float
    nu: float
    L: int
    grid_bins: int
    mc_trials: int
    rule_fa: float = math.nan
    rule_md: float = math.nan
    indep_fa: float = math.nan
    indep_md: float = math.nan
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for k in ("analytic_fa", "analytic_md", "mc_fa", "mc_md", "rule_fa", "rule_md", "indep_fa", "indep_md"):
            v = getattr(self, k)
            if not (math.isnan(v) or -1e-12 <= v <= 1 + 1e-12):
                raise DataError(f"{k} = {v} is not a probability")

    _CSV_FIELDS = ("L", "nu", "grid_bins", "mc_trials", "seed", "analytic_fa", "mc_fa", "indep_fa",
                   "rule_fa", "analytic_md", "mc_md", "indep_md", "rule_md")

    def row(self) -> list:
        return [getattr(self, k) for k in self._CSV_FIELDS]

    def to_dict(self) -> dict:
        return asdict(self)


def write_reports_csv(path, reports: Sequence[ErrorRateReport]) -> Path:
    return _csvio.write_csv(path, list(ErrorRateReport._CSV_FIELDS), (r.row() for r in reports))


def write_reports_json(path, reports: Sequence[ErrorRateReport], metadata: dict | None = None) -> Path:
    doc = {"metadata": metadata or {}, "reports": [r.to_dict() for r in reports]}
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def _independent_term_scores(model: ModelState, features: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Score with each term evaluated at its own, independently permuted test feature."""
    n = features.shape[0]
    out = np.zeros(n)
    sigma2 = 2.0 * model.kernel.width ** 2
    for c, a in zip(model.dictionary, model.coefficients):
        # permute each attribute column separately: keeps every marginal, breaks the sharing
        q = np.column_stack([features[rng.permutation(n), j] for j in range(features.shape[1])])
        out += a * np.exp(-np.sum((q - c) ** 2, axis=1) / sigma2)
    return out


def monte_carlo_rates(model: ModelState, config: ScenarioConfig, nu: float, trials: int,
                      bins: int = DEFAULT_BINS, analytic: bool = True) -> ErrorRateReport:
    """Simulated rates for a frozen model, with the analytic rates alongside.

    Alice and Eve test sessions come from separate seed substreams of ``config``.
    """
    _check_nu(nu)
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    cfg = config.replace(trials=trials)
    alice = generate_stream(cfg.replace(stream_id=config.stream_id + 1001), hypotheses=0).features
    eve = generate_stream(cfg.replace(stream_id=config.stream_id + 1002), hypotheses=1).features
    fa_scores = model.predict_many(alice)
    md_scores = model.predict_many(eve)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, config.stream_id, 1003]))
    ind_a = _independent_term_scores(model, alice, rng)
    ind_e = _independent_term_scores(model, eve, rng)
    if analytic:
        laws = ScenarioLaws.from_config(config, bins)
        a_fa, a_md = analytic_fa(model, laws, nu), analytic_md(model, laws, nu)
    else:
        a_fa = a_md = math.nan
    return ErrorRateReport(
        analytic_fa=a_fa, analytic_md=a_md,
        mc_fa=float(np.mean(np.abs(fa_scores) <= nu)),
        mc_md=float(np.mean(np.abs(1.0 - md_scores) <= nu)),
        nu=float(nu), L=len(model) + 1, grid_bins=bins, mc_trials=trials,
        rule_fa=float(np.mean(np.abs(1.0 - fa_scores) > nu)),
        rule_md=float(np.mean(np.abs(1.0 - md_scores) <= nu)),
        indep_fa=float(np.mean(np.abs(ind_a) <= nu)),
        indep_md=float(np.mean(np.abs(1.0 - ind_e) <= nu)),
        seed=config.seed)
