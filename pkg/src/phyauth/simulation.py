"""Estimate-level simulator of the two-phase Alice/Eve protocol.

Attributes are simulated in natural units (CFO in kHz, CIR as a dimensionless
magnitude, RSSI as path loss in dB) and normalized afterwards.  Every trial is an
independent session: Phase I happens at ``start_tick`` and Phase II ``tau`` ticks later.

Randomness is drawn per block of ``BLOCK`` trials from
``SeedSequence([seed, stream_id, block])`` so results do not depend on how blocks are
scheduled.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from . import _csvio
from .attributes import (AttributeSpec, EstimateVector, NormalizedSample, OverflowCounter, Phase,
                         check_attribute_set, normalize)
from .authenticator import Hypothesis
from .errors import ParameterError, SchemaError

BLOCK = 4096

CFO_RANGE_KHZ = (-78.125, 78.125)
CFO_STEP_FRACTION = 2.35e-7  # per-tick CFO variation, as a fraction of the CFO range
TICK_S = 0.05
ALICE_SPEED_MPS = 20.0 / 3.6
ALICE_DISTANCE_M = 5.0
CIR_TAPS = 12
CIR_RHO = 0.99
CIR_PHASE = 4.99  # multiples of pi
DEFAULT_NOISE_FRACTION = 0.01


class DriftKind(str, enum.Enum):
    GAUSSIAN_RANDOM_WALK = "GaussianRandomWalk"
    AR1_MULTI_TAP = "AR1MultiTap"
    PATH_LOSS_MOTION = "PathLossMotion"
    STATIC = "Static"


_DRIFT_DEFAULTS = {
    DriftKind.GAUSSIAN_RANDOM_WALK: {"step_std": 0.0, "spread": 1.0},
    DriftKind.AR1_MULTI_TAP: {"rho": CIR_RHO, "taps": CIR_TAPS, "innovation_std": None,
                              "pdp_decay": 3.0, "phase": CIR_PHASE},
    DriftKind.PATH_LOSS_MOTION: {"speed_mps": ALICE_SPEED_MPS, "initial_distance_m": ALICE_DISTANCE_M,
                                 "tick_s": TICK_S, "pl_intercept_db": 75.0, "pl_slope_db": 36.1,
                                 "ref_distance_m": 10.0, "min_distance_m": 1.0, "max_distance_m": 100.0,
                                 "eve_distance_lo": 20.0, "eve_distance_hi": 100.0},
    DriftKind.STATIC: {"spread": 1.0},
}


@dataclass(frozen=True)
class DriftModel:
    """How an attribute's true value evolves, and how Eve's own value is drawn.

    ``params`` holds kind-specific values; missing keys take the defaults in
    ``_DRIFT_DEFAULTS``.
    """

    kind: DriftKind
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        kind = DriftKind(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.params) - set(_DRIFT_DEFAULTS[kind])
        if unknown:
            raise ParameterError(f"unknown {kind.value} parameters: {sorted(unknown)}")
        merged = dict(_DRIFT_DEFAULTS[kind])
        merged.update(self.params)
        object.__setattr__(self, "params", MappingProxyType(merged))
        self._validate()

    def __reduce__(self):
        return (DriftModel, (self.kind, dict(self.params)))

    def __getattr__(self, name):
        try:
            return self.__dict__["params"][name]
        except KeyError:
            raise AttributeError(name) from None

    def _validate(self):
        p = self.params
        for k, v in p.items():
            if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ParameterError(f"{self.kind.value}.{k} must be a finite number")
        if self.kind is DriftKind.AR1_MULTI_TAP:
            if not abs(p["rho"]) < 1:
                raise ParameterError("AR coefficient magnitude must be < 1")
            if int(p["taps"]) != p["taps"] or p["taps"] < 1:
                raise ParameterError("tap count must be a positive integer")
            if p["innovation_std"] is not None and p["innovation_std"] < 0:
                raise ParameterError("innovation std must be >= 0")
        if self.kind is DriftKind.PATH_LOSS_MOTION:
            if p["speed_mps"] < 0:
                raise ParameterError("speed must be >= 0")
            if not 0 < p["min_distance_m"] <= p["max_distance_m"]:
                raise ParameterError("need 0 < min_distance_m <= max_distance_m")
            if not p["eve_distance_lo"] <= p["eve_distance_hi"]:
                raise ParameterError("need eve_distance_lo <= eve_distance_hi")
        for k in ("step_std", "spread"):
            if k in p and p[k] < 0:
                raise ParameterError(f"{k} must be >= 0")

    @property
    def innovation(self) -> float:
        """AR-1 innovation std (stationary unit-power default)."""
        s = self.params["innovation_std"]
        return math.sqrt(1.0 - self.rho ** 2) if s is None else float(s)

    def tap_powers(self) -> np.ndarray:
        k = np.arange(int(self.taps))
        p = np.exp(-k / self.pdp_decay) if self.pdp_decay > 0 else np.ones(len(k))
        return p / p.sum()

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        d.update({k: v for k, v in self.params.items() if v is not None})
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "DriftModel":
        d = dict(d)
        kind = d.pop("kind")
        return cls(DriftKind(kind), d)


# -- single-attribute generators ---------------------------------------------------

def path_loss_db(distance_m, intercept_db: float = 75.0, slope_db: float = 36.1,
                 ref_distance_m: float = 10.0) -> np.ndarray | float:
    """Log-distance path loss, ``intercept + slope * log10(d / ref)``."""
    d = np.asarray(distance_m, dtype=float)
    out = intercept_db + slope_db * np.log10(d / ref_distance_m)
    return float(out) if out.ndim == 0 else out


def gen_rssi(distance_m: float) -> float:
    """Path loss in dB at ``distance_m`` in (0, 100]; distances below 1 m count as 1 m."""
    if not (distance_m > 0) or distance_m > 100.0:
        raise ParameterError(f"distance must lie in (0, 100] m, got {distance_m}")
    return path_loss_db(max(distance_m, 1.0))


def gen_cfo_trajectory(steps: int, rng: np.random.Generator, step_std: float | None = None,
                       initial: float | None = None, spread: float = 10.0) -> np.ndarray:
    """Gaussian random walk of a transmitter's CFO in kHz, clipped to the estimation range.

    The default per-tick std is the CFO variation fraction times the range width.
    """
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    if step_std is None:
        step_std = CFO_STEP_FRACTION * (CFO_RANGE_KHZ[1] - CFO_RANGE_KHZ[0])
    x0 = spread * rng.standard_normal() if initial is None else float(initial)
    inc = step_std * rng.standard_normal(steps - 1)
    traj = x0 + np.concatenate(([0.0], np.cumsum(inc)))
    return np.clip(traj, *CFO_RANGE_KHZ)


def cir_feature(amps: np.ndarray, phase: float = CIR_PHASE) -> np.ndarray:
    """``|sum_k amp_k exp(-j phase pi k)|`` with k counted from 1, over the last axis."""
    amps = np.asarray(amps)
    k = np.arange(1, amps.shape[-1] + 1)
    return np.abs(amps @ np.exp(-1j * phase * np.pi * k))


def _complex_normal(rng, shape, powers) -> np.ndarray:
    s = np.sqrt(np.asarray(powers) / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def gen_cir_trajectory(steps: int, rng: np.random.Generator, taps: int = CIR_TAPS, rho: float = CIR_RHO,
                       innovation_std: float | None = None, pdp_decay: float = 3.0,
                       initial: np.ndarray | None = None, return_taps: bool = False):
    """Scalar CIR magnitude of a multi-tap channel whose taps follow complex AR-1 processes.

    Tap k has power from an exponential delay profile; ``amp[t] = rho * amp[t-1] + innovation``.
    """
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    model = DriftModel(DriftKind.AR1_MULTI_TAP, {"rho": rho, "taps": taps, "innovation_std": innovation_std,
                                                 "pdp_decay": pdp_decay})
    p = model.tap_powers()
    amps = np.empty((steps, taps), dtype=complex)
    amps[0] = _complex_normal(rng, taps, p) if initial is None else np.asarray(initial, dtype=complex)
    innov = model.innovation
    for t in range(1, steps):
        amps[t] = rho * amps[t - 1] + innov * _complex_normal(rng, taps, p)
    feat = cir_feature(amps, model.phase)
    return (feat, amps) if return_taps else feat


def _distance(model: DriftModel, tick) -> np.ndarray:
    d = model.initial_distance_m + model.speed_mps * model.tick_s * np.asarray(tick, dtype=float)
    return np.clip(d, model.min_distance_m, model.max_distance_m)


def _pl(model: DriftModel, d):
    return path_loss_db(d, model.pl_intercept_db, model.pl_slope_db, model.ref_distance_m)


def _attribute_truth(model: DriftModel, n: int, t0: int, tau: int, rng: np.random.Generator):
    """True values (Alice Phase I, Alice Phase II, Eve Phase II) for ``n`` sessions.

    The draw order is fixed per kind so that outputs do not depend on the hypotheses.
    """
    kind = model.kind
    if kind is DriftKind.GAUSSIAN_RANDOM_WALK:
        a1 = model.spread * rng.standard_normal(n)
        a2 = a1 + model.step_std * math.sqrt(tau) * rng.standard_normal(n)
        e2 = model.spread * rng.standard_normal(n)
    elif kind is DriftKind.STATIC:
        a1 = model.spread * rng.standard_normal(n)
        a2 = a1.copy()
        e2 = model.spread * rng.standard_normal(n)
    elif kind is DriftKind.AR1_MULTI_TAP:
        taps = int(model.taps)
        p = model.tap_powers()
        rho, innov = model.rho, model.innovation
        stat_var = innov ** 2 / (1.0 - rho ** 2)
        c1 = math.sqrt(stat_var) * _complex_normal(rng, (n, taps), p)
        # tau AR-1 steps folded into one Gaussian draw (same law as stepping)
        carry = rho ** tau
        acc = innov * math.sqrt((1.0 - rho ** (2 * tau)) / (1.0 - rho ** 2)) if rho != 0 else (innov if tau else 0.0)
        c2 = carry * c1 + acc * _complex_normal(rng, (n, taps), p)
        ce = math.sqrt(stat_var) * _complex_normal(rng, (n, taps), p)
        a1, a2, e2 = cir_feature(c1, model.phase), cir_feature(c2, model.phase), cir_feature(ce, model.phase)
    elif kind is DriftKind.PATH_LOSS_MOTION:
        a1 = np.full(n, _pl(model, _distance(model, t0)))
        a2 = np.full(n, _pl(model, _distance(model, t0 + tau)))
        de = rng.uniform(model.eve_distance_lo, model.eve_distance_hi, n)
        e2 = _pl(model, de)
    else:  # pragma: no cover
        raise ParameterError(f"unsupported drift kind {kind}")
    return a1, a2, e2


# -- scenarios -----------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of an Alice/Eve session ensemble."""

    attributes: tuple
    drift: Mapping
    noise_std: Mapping
    eve_imitates: frozenset = frozenset()
    tau: int = 1
    eve_prior: float = 0.0
    trials: int = 300
    seed: int = 0
    start_tick: int = 0
    stream_id: int = 0

    def __post_init__(self):
        attrs = tuple(self.attributes)
        object.__setattr__(self, "attributes", attrs)
        check_attribute_set(attrs)
        names = [a.name for a in attrs]
        drift = {}
        noise = {}
        for a in attrs:
            if a.name not in self.drift:
                raise ParameterError(f"no drift model for attribute {a.name!r}")
            dm = self.drift[a.name]
            drift[a.name] = dm if isinstance(dm, DriftModel) else DriftModel.from_dict(dm)
            ns = self.noise_std.get(a.name, DEFAULT_NOISE_FRACTION * (a.hi - a.lo))
            ns = (float(ns), float(ns)) if np.isscalar(ns) else tuple(float(v) for v in ns)
            if len(ns) != 2 or min(ns) < 0 or not all(map(math.isfinite, ns)):
                raise ParameterError(f"noise_std for {a.name!r} must be one or two non-negative numbers")
            noise[a.name] = ns
        object.__setattr__(self, "drift", MappingProxyType(drift))
        object.__setattr__(self, "noise_std", MappingProxyType(noise))
        imit = frozenset(self.eve_imitates)
        object.__setattr__(self, "eve_imitates", imit)
        if not imit <= set(names):
            raise ParameterError(f"eve_imitates {sorted(imit - set(names))} not in attribute set")
        if not 0.0 <= self.eve_prior <= 1.0:
            raise ParameterError("eve_prior must lie in [0, 1]")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ParameterError("trials must be a positive integer")
        if int(self.tau) != self.tau or self.tau < 0:
            raise ParameterError("tau must be a non-negative integer")
        if int(self.start_tick) != self.start_tick or self.start_tick < 0:
            raise ParameterError("start_tick must be a non-negative integer")

    def __reduce__(self):
        return (ScenarioConfig, (self.attributes, dict(self.drift), dict(self.noise_std), self.eve_imitates,
                                 self.tau, self.eve_prior, self.trials, self.seed, self.start_tick,
                                 self.stream_id))

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def replace(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)

    def with_seed_offset(self, k: int) -> "ScenarioConfig":
        return replace(self, stream_id=self.stream_id + int(k))

    def subset(self, names: Sequence[str]) -> "ScenarioConfig":
        """Same scenario restricted to ``names`` (in the given order)."""
        by = {a.name: a for a in self.attributes}
        attrs = tuple(by[n] for n in names)
        return replace(self, attributes=attrs, drift={n: self.drift[n] for n in names},
                       noise_std={n: self.noise_std[n] for n in names},
                       eve_imitates=self.eve_imitates & set(names))

    def widened(self, factor: float) -> "ScenarioConfig":
        """Normalization ranges scaled by ``factor``; the physics is unchanged."""
        return replace(self, attributes=tuple(a.widened(factor) for a in self.attributes),
                       noise_std=dict(self.noise_std))

    def to_dict(self) -> dict:
        return {
            "attributes": [a.to_dict() for a in self.attributes],
            "drift": {n: self.drift[n].to_dict() for n in self.names},
            "noise_std": {n: list(self.noise_std[n]) for n in self.names},
            "eve_imitates": sorted(self.eve_imitates),
            "tau": self.tau,
            "eve_prior": self.eve_prior,
            "trials": self.trials,
            "seed": self.seed,
            "start_tick": self.start_tick,
            "stream_id": self.stream_id,
        }

    @classmethod
    def from_dict(cls, d: Mapping, prefix: str = "") -> "ScenarioConfig":
        """Parse the JSON scenario schema; errors carry the offending field path.

        Drift and noise entries may be omitted for the built-in attribute names
        (CFO, CIR, RSSI, ATTR<k>), which then take library defaults.
        """
        p = (prefix + ".") if prefix else ""
        if not isinstance(d, Mapping):
            raise SchemaError(prefix, "scenario must be an object")
        allowed = {"attributes", "drift", "noise_std", "eve_imitates", "tau", "eve_prior", "trials",
                   "seed", "start_tick", "stream_id"}
        for k in d:
            if k not in allowed:
                raise SchemaError(p + k, "unknown field")
        if "attributes" not in d:
            raise SchemaError(p + "attributes", "required")
        attrs = []
        for i, a in enumerate(d["attributes"]):
            ap = f"{p}attributes[{i}]"
            if isinstance(a, str):
                attrs.append(library_attribute(a)[0])
                continue
            try:
                attrs.append(AttributeSpec(str(a["name"]), float(a["lo"]), float(a["hi"])))
            except KeyError as e:
                raise SchemaError(f"{ap}.{e.args[0]}", "required") from None
            except (TypeError, ValueError, ParameterError) as e:
                raise SchemaError(ap, str(e)) from None
        drift = {}
        noise = {}
        for a in attrs:
            raw = d.get("drift", {}).get(a.name)
            if raw is None:
                try:
                    drift[a.name] = library_attribute(a.name)[1]
                except ParameterError:
                    raise SchemaError(f"{p}drift.{a.name}", "required for non-library attribute") from None
            else:
                try:
                    drift[a.name] = DriftModel.from_dict(raw)
                except (KeyError, ValueError, ParameterError) as e:
                    raise SchemaError(f"{p}drift.{a.name}", str(e)) from None
            if a.name in d.get("noise_std", {}):
                noise[a.name] = d["noise_std"][a.name]
        for k in d.get("drift", {}):
            if k not in drift:
                raise SchemaError(f"{p}drift.{k}", "not in attribute set")
        kw = {}
        for k, typ in (("tau", int), ("eve_prior", float), ("trials", int), ("seed", int),
                       ("start_tick", int), ("stream_id", int)):
            if k in d:
                v = d[k]
                if isinstance(v, bool) or not isinstance(v, (int, float)) or (typ is int and int(v) != v):
                    raise SchemaError(p + k, f"expected {typ.__name__}")
                kw[k] = typ(v)
        for k, ok, msg in (("tau", lambda v: v >= 0, "must be >= 0"),
                           ("start_tick", lambda v: v >= 0, "must be >= 0"),
                           ("trials", lambda v: v >= 1, "must be >= 1"),
                           ("eve_prior", lambda v: 0.0 <= v <= 1.0, "must lie in [0, 1]")):
            if k in kw and not ok(kw[k]):
                raise SchemaError(p + k, msg)
        names = {a.name for a in attrs}
        for i, n in enumerate(d.get("eve_imitates", ())):
            if n not in names:
                raise SchemaError(f"{p}eve_imitates[{i}]", f"{n!r} is not in the attribute set")
        try:
            return cls(tuple(attrs), drift, noise, frozenset(d.get("eve_imitates", ())), **kw)
        except ParameterError as e:
            raise SchemaError(prefix, str(e)) from None


def library_attribute(name: str) -> tuple[AttributeSpec, DriftModel]:
    """Built-in attribute definitions: CFO (kHz), CIR (magnitude), RSSI (dB), ATTR<k>."""
    if name == "CFO":
        lo, hi = CFO_RANGE_KHZ
        step = CFO_STEP_FRACTION * (hi - lo)
        return AttributeSpec("CFO", lo, hi), DriftModel(DriftKind.GAUSSIAN_RANDOM_WALK,
                                                        {"step_std": step, "spread": 10.0})
    if name == "CIR":
        return AttributeSpec("CIR", -2.5, 2.5), DriftModel(DriftKind.AR1_MULTI_TAP)
    if name == "RSSI":
        m = DriftModel(DriftKind.PATH_LOSS_MOTION)
        span = _pl(m, m.max_distance_m) - _pl(m, m.min_distance_m)
        return AttributeSpec("RSSI", -span, span), m
    if name.startswith("ATTR") and name[4:].isdigit():
        return AttributeSpec(name, -1.0, 1.0), DriftModel(DriftKind.GAUSSIAN_RANDOM_WALK,
                                                          {"step_std": 0.002, "spread": 0.25})
    raise ParameterError(f"no library attribute named {name!r}")


def default_scenario(names: Sequence[str] = ("CFO", "CIR", "RSSI"), **kw) -> ScenarioConfig:
    specs, drift = [], {}
    for n in names:
        s, m = library_attribute(n)
        specs.append(s)
        drift[n] = m
    noise = kw.pop("noise_std", {})
    return ScenarioConfig(tuple(specs), drift, noise, **kw)


# -- session generation --------------------------------------------------------------

@dataclass
class PhasePairs:
    """Raw estimates and ground truth for a batch of sessions."""

    est_I: np.ndarray
    est_II: np.ndarray
    true_I: np.ndarray
    true_II: np.ndarray
    hypotheses: np.ndarray

    def __len__(self):
        return len(self.hypotheses)


def simulate_pairs(config: ScenarioConfig, n: int, rng: np.random.Generator,
                   hypotheses: np.ndarray | None = None) -> PhasePairs:
    """Vectorized sessions.  ``hypotheses`` (0 = Alice, 1 = Eve) overrides ``eve_prior``."""
    u = rng.random(n)
    hyp = (u < config.eve_prior).astype(np.int8) if hypotheses is None else np.asarray(hypotheses, np.int8)
    N = len(config.attributes)
    est_I, est_II = np.empty((n, N)), np.empty((n, N))
    true_I, true_II = np.empty((n, N)), np.empty((n, N))
    t0, tau = config.start_tick, config.tau
    for j, a in enumerate(config.attributes):
        a1, a2, e2 = _attribute_truth(config.drift[a.name], n, t0, tau, rng)
        if a.name not in config.eve_imitates:
            a2 = np.where(hyp == 1, e2, a2)
        s1, s2 = config.noise_std[a.name]
        true_I[:, j], true_II[:, j] = a1, a2
        est_I[:, j] = a1 + s1 * rng.standard_normal(n)
        est_II[:, j] = a2 + s2 * rng.standard_normal(n)
    return PhasePairs(est_I, est_II, true_I, true_II, hyp)


@dataclass(frozen=True)
class PhasePair:
    first: EstimateVector
    second: EstimateVector
    hypothesis: Hypothesis
    true_I: np.ndarray
    true_II: np.ndarray


def run_phase_pair(config: ScenarioConfig, rng: np.random.Generator) -> PhasePair:
    p = simulate_pairs(config, 1, rng)
    t0 = config.start_tick
    return PhasePair(EstimateVector(p.est_I[0], Phase.PHASE_I, t0),
                     EstimateVector(p.est_II[0], Phase.PHASE_II, t0 + config.tau),
                     Hypothesis(int(p.hypotheses[0])), p.true_I[0], p.true_II[0])


def block_rng(config: ScenarioConfig, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed, config.stream_id, block]))


@dataclass
class Stream:
    """Labeled, normalized samples plus ground truth."""

    names: list
    features: np.ndarray
    labels: np.ndarray
    hypotheses: np.ndarray
    overflow: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    def samples(self) -> list[NormalizedSample]:
        return [NormalizedSample(f, float(y)) for f, y in zip(self.features, self.labels)]

    def to_csv(self, path):
        header = list(self.names) + ["label", "hypothesis"]
        rows = (list(f) + [int(y), int(h)] for f, y, h in zip(self.features, self.labels, self.hypotheses))
        return _csvio.write_csv(path, header, rows)

    @classmethod
    def from_csv(cls, path) -> "Stream":
        header, rows = _csvio.read_csv(path)
        if header[-2:] != ["label", "hypothesis"]:
            raise SchemaError("header", "last two columns must be label, hypothesis")
        arr = np.array([[float(v) for v in r] for r in rows]).reshape(len(rows), len(header))
        return cls(header[:-2], arr[:, :-2], arr[:, -2], arr[:, -1].astype(np.int8))


def generate_pairs(config: ScenarioConfig, hypotheses: int | None = None) -> PhasePairs:
    """``config.trials`` sessions generated block-wise from the seed substreams.

    ``hypotheses`` forces every session to Alice (0) or Eve (1).
    """
    parts = []
    for b, start in enumerate(range(0, config.trials, BLOCK)):
        n = min(BLOCK, config.trials - start)
        forced = None if hypotheses is None else np.full(n, hypotheses, dtype=np.int8)
        parts.append(simulate_pairs(config, n, block_rng(config, b), forced))
    return PhasePairs(*(np.concatenate([getattr(p, f) for p in parts])
                        for f in ("est_I", "est_II", "true_I", "true_II", "hypotheses")))


def generate_stream(config: ScenarioConfig, hypotheses: int | None = None) -> Stream:
    pairs = generate_pairs(config, hypotheses)
    counter = OverflowCounter(config.names)
    feats = normalize(pairs.est_I - pairs.est_II, config.attributes, counter)
    labels = (pairs.hypotheses == 0).astype(float)
    return Stream(config.names, feats, labels, pairs.hypotheses, counter.as_dict())
