"""Experiment drivers and the named preset suite.

A run is described by a resolved configuration: a preset name, a complete
:class:`~phyauth.simulation.ScenarioConfig` and a dict of experiment parameters.  Layers
merge in the order library defaults < preset < user file < command-line flags.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
import platform
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _csvio, _svg
from .analysis import monte_carlo_rates, write_reports_csv, write_reports_json
from .authenticator import default_grid, md_at_fa, sweep_threshold, tradeoff_area
from .errors import ParameterError, SchemaError
from .kernel import KernelParams, median_heuristic_width
from .klms import STEADY_TOL, STEADY_WINDOW, ModelState, mse_curve, steady_state_index, train_arrays
from .simulation import ScenarioConfig, default_scenario, generate_stream

log = logging.getLogger(__name__)

FA_TARGET = 0.015
CARRIER_HZ = 2.5e9
OUT_ENV = "PHYAUTH_OUT"
DEFAULT_OUT = "phyauth-out"

# stream ids of the separate random substreams used by the drivers
_TEST_ALICE, _TEST_EVE = 1, 2
_REFRESH, _STALE_ALICE, _STALE_EVE, _FRESH_ALICE, _FRESH_EVE = 10, 11, 12, 13, 14


def _label(names: Sequence[str]) -> str:
    return "+".join(names)


def _pmap(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Ordered map, optionally over worker processes; results do not depend on ``jobs``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def select_width(features, seed: int, sigma="median") -> KernelParams:
    """``sigma`` is a positive width or ``"median"`` for the median heuristic on ``features``."""
    if sigma == "median":
        return median_heuristic_width(features, seed=seed)
    return KernelParams(float(sigma))


def train_model(config: ScenarioConfig, mu: float, safety: bool = True, sigma="median") -> ModelState:
    """Train on ``config.trials`` sessions; see :func:`select_width` for ``sigma``."""
    stream = generate_stream(config)
    kp = select_width(stream.features, config.seed, sigma)
    model, _ = train_arrays(stream.features, stream.labels, mu, kp, safety=safety)
    return model


# -- ensemble learning curves -------------------------------------------------------------

def _curve_job(args) -> np.ndarray:
    cfg, mu, runs, sigma = args
    return mse_curve(cfg, runs=runs, mu=mu, kernel=sigma if sigma == "median" else KernelParams(float(sigma)))


def ensemble_curves(config: ScenarioConfig, jobs_spec: Sequence[tuple[str, Sequence[str], float]],
                    runs: int, jobs: int = 1, sigma="median") -> dict[str, np.ndarray]:
    """``{label: mse curve}`` for each ``(label, attribute names, step size)``."""
    args = [(config.subset(names), mu, runs, sigma) for _, names, mu in jobs_spec]
    curves = _pmap(_curve_job, args, jobs)
    return {label: c for (label, _, _), c in zip(jobs_spec, curves)}


# -- threshold sweeps -------------------------------------------------------------------------

@dataclass
class SetResult:
    label: str
    names: list
    points: list
    operating: object
    area: float
    width: float
    budgets: list = field(default_factory=list)

    @property
    def md_std(self) -> float:
        n = self.points[0].eve_trials
        p = self.operating.md
        return float(np.sqrt(p * (1 - p) / n))


def security_sweep(config: ScenarioConfig, attribute_sets: Sequence[Sequence[str]], mu: float = 0.1,
                   test_trials: int = 10_000, fa_target: float = FA_TARGET,
                   fa_budgets: Sequence[float] = (), grid=None, sigma="median") -> list[SetResult]:
    """Train on ``config`` and sweep the threshold on fresh Alice and Eve sessions.

    All sets see the same sessions: streams are generated once with every attribute and
    the columns of each set are selected from them.
    """
    grid = default_grid() if grid is None else grid
    train = generate_stream(config)
    test = config.replace(trials=test_trials)
    alice = generate_stream(test.replace(stream_id=config.stream_id + _TEST_ALICE), 0)
    eve = generate_stream(test.replace(stream_id=config.stream_id + _TEST_EVE), 1)
    out = []
    for names in attribute_sets:
        idx = [config.names.index(n) for n in names]
        kp = select_width(train.features[:, idx], config.seed, sigma)
        model, _ = train_arrays(train.features[:, idx], train.labels, mu, kp)
        sa, se = model.predict_many(alice.features[:, idx]), model.predict_many(eve.features[:, idx])
        pts = sweep_threshold(sa, se, grid)
        out.append(SetResult(_label(names), list(names), pts, md_at_fa(sa, se, fa_target),
                             tradeoff_area(pts), kp.width, [md_at_fa(sa, se, b) for b in fa_budgets]))
    return out


# -- staleness ----------------------------------------------------------------------------------

@dataclass(frozen=True)
class StalenessRow:
    staleness: int
    frozen_md: float
    frozen_fa: float
    frozen_nu: float
    frozen_fa_met: bool
    adaptive_md: float
    adaptive_fa: float
    adaptive_nu: float
    adaptive_fa_met: bool


def _staleness_job(args) -> StalenessRow:
    config, model, i, s, mu, test_trials, refresh_trials, fa_target = args
    sid = config.stream_id
    # frozen: the Phase-I reference and the model both date from training time
    stale = config.replace(tau=config.tau + s, trials=test_trials)
    a = generate_stream(stale.replace(stream_id=sid + 1000 * _STALE_ALICE + i), 0)
    e = generate_stream(stale.replace(stream_id=sid + 1000 * _STALE_EVE + i), 1)
    fz = md_at_fa(model.predict_many(a.features), model.predict_many(e.features), fa_target)
    # adaptive: keeps learning from fresh sessions and refreshes its reference
    ad = model.copy()
    fresh = config.replace(start_tick=config.start_tick + s)
    upd = generate_stream(fresh.replace(trials=refresh_trials, stream_id=sid + 1000 * _REFRESH + i))
    train_arrays(upd.features, upd.labels, mu, model.kernel, state=ad)
    cur = fresh.replace(trials=test_trials)
    a = generate_stream(cur.replace(stream_id=sid + 1000 * _FRESH_ALICE + i), 0)
    e = generate_stream(cur.replace(stream_id=sid + 1000 * _FRESH_EVE + i), 1)
    op = md_at_fa(ad.predict_many(a.features), ad.predict_many(e.features), fa_target)
    return StalenessRow(int(s), fz.md, fz.fa, fz.nu, fz.fa_met, op.md, op.fa, op.nu, op.fa_met)


def static_baseline_run(config: ScenarioConfig, staleness_ticks: Sequence[int], mu: float = 0.1,
                        test_trials: int = 10_000, refresh_trials: int | None = None,
                        fa_target: float = FA_TARGET, jobs: int = 1, sigma="median") -> list[StalenessRow]:
    """MD at the FA budget of a frozen model versus a continually updated one.

    The model is trained on ``config``.  At staleness ``s`` the frozen model is tested
    on sessions whose Phase-I reference is ``s`` ticks older than usual.  The adaptive
    copy first learns from ``refresh_trials`` fresh sessions starting ``s`` ticks later
    and is tested on fresh sessions there.
    """
    if any(s < 0 for s in staleness_ticks):
        raise ParameterError("staleness values must be >= 0")
    model = train_model(config, mu, sigma=sigma)
    refresh = config.trials if refresh_trials is None else refresh_trials
    args = [(config, model, i, int(s), mu, test_trials, refresh, fa_target)
            for i, s in enumerate(staleness_ticks)]
    return _pmap(_staleness_job, args, jobs)


# -- divergence -------------------------------------------------------------------------------

def alternating_stream(feature, iterations: int) -> tuple[np.ndarray, np.ndarray]:
    """The same input repeated with labels 1, 0, 1, 0, ..."""
    x = np.asarray(feature, dtype=float)
    feats = np.tile(x, (iterations, 1))
    labels = (np.arange(iterations) % 2 == 0).astype(float)
    return feats, labels


def divergence_traces(config: ScenarioConfig, mus: Sequence[float], iterations: int,
                      sigma="median") -> dict[float, np.ndarray]:
    """Error traces on an alternating-label stream built from one simulated Alice session."""
    x = generate_stream(config.replace(trials=1), 0).features[0]
    feats, labels = alternating_stream(x, iterations)
    kp = select_width(generate_stream(config).features, config.seed, sigma)
    out = {}
    for mu in mus:
        _, trace = train_arrays(feats, labels, mu, kp, safety=False)
        out[float(mu)] = trace
    return out


# -- analytic validation --------------------------------------------------------------------

def theorem_reports(config: ScenarioConfig, sizes: Sequence[int], nus: Sequence[float], mu: float,
                    mc_trials: int, bins: int, sigma="median"):
    """Analytic versus simulated rates for snapshots of one trained model.

    A model "at L" holds the first ``L - 1`` training inputs; session L is the test.
    """
    model = train_model(config, mu, sigma=sigma)
    reports = []
    for L in sizes:
        if not 2 <= L <= len(model) + 1:
            raise ParameterError(f"L={L} needs 1 <= L-1 <= {len(model)} training sessions")
        snap = model.snapshot(L - 1)
        for nu in nus:
            reports.append(monte_carlo_rates(snap, config, nu, mc_trials, bins))
    return reports, model.kernel.width


# -- presets ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    overrides: Mapping
    params: Mapping
    runner: Callable


@dataclass
class ResolvedConfig:
    preset: str
    scenario: ScenarioConfig
    params: dict

    def to_dict(self) -> dict:
        params = {k: v for k, v in self.params.items() if k != "sigma"}
        return {"preset": self.preset, "scenario": self.scenario.to_dict(), "params": params,
                "kernel": {"sigma": self.params["sigma"]}}


def _write_tables(out: Path, formats, tables: Mapping[str, tuple], plots: Sequence[tuple]) -> list[Path]:
    files = []
    if "csv" in formats:
        for name, (header, rows) in tables.items():
            files.append(_csvio.write_csv(out / f"{name}.csv", header, rows))
    if "svg" in formats:
        for name, series, kw in plots:
            files.append(_svg.line_plot(out / f"{name}.svg", series, **kw))
    return files


def _curve_tables(curves: Mapping[str, np.ndarray], mark: int = 50):
    rows = [(k, i + 1, v) for k, c in curves.items() for i, v in enumerate(c)]
    summ = []
    for k, c in curves.items():
        idx = steady_state_index(c)
        summ.append((k, c[0], c[min(mark, len(c)) - 1], "" if idx is None else idx, STEADY_WINDOW, STEADY_TOL))
    return {"mse_curves": (["series", "iteration", "mse"], rows),
            "steady_state": (["series", "mse_first", f"mse_at_{mark}", "steady_state_iteration",
                              "window", "tolerance"], summ)}


def _curve_plot(curves, title):
    series = [(k, np.arange(1, len(c) + 1), c) for k, c in curves.items()]
    return [("mse_curves", series, dict(title=title, xlabel="iteration", ylabel="mean squared error", logy=True))]


def _run_attr_curves(cfg, p, out, formats, jobs):
    spec = [(_label(s), s, p["mu"]) for s in p["attribute_sets"]]
    curves = ensemble_curves(cfg, spec, p["mc_trials"], jobs, p["sigma"])
    return _write_tables(out, formats, _curve_tables(curves), _curve_plot(curves, "Training MSE"))


def _run_stepsizes(cfg, p, out, formats, jobs):
    names = p["attribute_set"] or cfg.names
    spec = [(f"mu={mu:g}", names, mu) for mu in p["mus"]]
    curves = ensemble_curves(cfg, spec, p["mc_trials"], jobs, p["sigma"])
    return _write_tables(out, formats, _curve_tables(curves), _curve_plot(curves, "Training MSE by step size"))


def _run_attr_count(cfg, p, out, formats, jobs):
    spec = [(f"N={n}", cfg.names[:n], p["mu"]) for n in p["counts"]]
    curves = ensemble_curves(cfg, spec, p["mc_trials"], jobs, p["sigma"])
    return _write_tables(out, formats, _curve_tables(curves), _curve_plot(curves, "Training MSE by attribute count"))


def _sweep_tables(results: Sequence[SetResult], fa_target: float):
    sweep = [(r.label, pt.nu, pt.fa, pt.md, pt.alice_trials, pt.eve_trials) for r in results for pt in r.points]
    ops = [(r.label, fa_target, r.operating.nu, r.operating.fa, r.operating.md, r.md_std,
            r.operating.fa_met, r.area, r.width, r.points[0].alice_trials, r.points[0].eve_trials)
           for r in results]
    tables = {"sweep": (["series", "nu", "fa_rate", "md_rate", "alice_trials", "eve_trials"], sweep),
              "operating_points": (["series", "fa_target", "nu", "fa_rate", "md_rate", "md_std", "fa_met",
                                    "tradeoff_area", "kernel_width", "alice_trials", "eve_trials"], ops)}
    series = [(r.label, [pt.fa for pt in r.points], [pt.md for pt in r.points]) for r in results]
    plots = [("sweep", series, dict(title="MD versus FA", xlabel="false alarm rate", ylabel="misdetection rate"))]
    return tables, plots


def _run_security(cfg, p, out, formats, jobs):
    res = security_sweep(cfg, p["attribute_sets"], p["mu"], p["mc_trials"], p["fa_target"], sigma=p["sigma"])
    tables, plots = _sweep_tables(res, p["fa_target"])
    return _write_tables(out, formats, tables, plots)


def _run_count_roc(cfg, p, out, formats, jobs):
    sets = [cfg.names[:n] for n in p["counts"]]
    res = security_sweep(cfg, sets, p["mu"], p["mc_trials"], p["fa_target"], fa_budgets=p["fa_budgets"],
                         sigma=p["sigma"])
    for r, n in zip(res, p["counts"]):
        r.label = f"N={n}"
    tables, plots = _sweep_tables(res, p["fa_target"])
    tables["md_vs_fa_budget"] = (["series", "fa_budget", "nu", "fa_rate", "md_rate", "fa_met"],
                                 [(r.label, b, op.nu, op.fa, op.md, op.fa_met)
                                  for r in res for b, op in zip(p["fa_budgets"], r.budgets)])
    plots.append(("md_vs_fa_budget", [(r.label, p["fa_budgets"], [op.md for op in r.budgets]) for r in res],
                  dict(title="MD versus FA budget", xlabel="FA budget", ylabel="misdetection rate")))
    return _write_tables(out, formats, tables, plots)


def _run_range_mismatch(cfg, p, out, formats, jobs):
    names = p["attribute_set"] or cfg.names
    res = []
    for f in p["factors"]:
        r = security_sweep(cfg.widened(f), [names], p["mu"], p["mc_trials"], p["fa_target"], sigma=p["sigma"])[0]
        r.label = f"range x{f:g}"
        res.append(r)
    tables, plots = _sweep_tables(res, p["fa_target"])
    return _write_tables(out, formats, tables, plots)


def _run_divergence(cfg, p, out, formats, jobs):
    traces = divergence_traces(cfg, p["mus"], p["iterations"], p["sigma"])
    rows = []
    for mu, t in traces.items():
        rm = np.maximum.accumulate(np.abs(t))
        rows += [(f"mu={mu:g}", i + 1, e, e * e, m) for i, (e, m) in enumerate(zip(t, rm))]
    tables = {"traces": (["series", "iteration", "error", "squared_error", "running_max_abs_error"], rows)}
    series = [(f"mu={mu:g}", np.arange(1, len(t) + 1), t ** 2) for mu, t in traces.items()]
    plots = [("traces", series, dict(title="Squared error", xlabel="iteration", ylabel="squared error", logy=True))]
    return _write_tables(out, formats, tables, plots)


def _run_staleness(cfg, p, out, formats, jobs):
    rows = static_baseline_run(cfg, p["staleness"], p["mu"], p["mc_trials"], p["refresh_trials"],
                               p["fa_target"], jobs, p["sigma"])
    header = ["staleness", "frozen_md", "frozen_fa", "frozen_nu", "frozen_fa_met",
              "adaptive_md", "adaptive_fa", "adaptive_nu", "adaptive_fa_met"]
    tables = {"staleness": (header, [[getattr(r, h) for h in header] for r in rows])}
    st = [r.staleness for r in rows]
    floor = 1.0 / p["mc_trials"]
    series = [("frozen", st, [max(r.frozen_md, floor) for r in rows]),
              ("adaptive", st, [max(r.adaptive_md, floor) for r in rows])]
    plots = [("staleness", series, dict(title="MD at FA budget", xlabel="staleness (ticks)",
                                        ylabel="misdetection rate", logy=True))]
    return _write_tables(out, formats, tables, plots)


def _run_theorem(cfg, p, out, formats, jobs):
    reports, width = theorem_reports(cfg, p["sizes"], p["nus"], p["mu"], p["mc_trials"], p["bins"], p["sigma"])
    files = []
    if "csv" in formats:
        files.append(write_reports_csv(out / "reports.csv", reports))
        files.append(write_reports_json(out / "reports.json", reports,
                                        {"seed": cfg.seed, "kernel_width": width, "mu": p["mu"]}))
    if "svg" in formats:
        series = []
        for nu in p["nus"]:
            rs = [r for r in reports if r.nu == nu]
            series.append((f"analytic nu={nu:g}", [r.L for r in rs], [r.analytic_fa for r in rs]))
            series.append((f"simulated nu={nu:g}", [r.L for r in rs], [r.mc_fa for r in rs]))
        files.append(_svg.line_plot(out / "reports.svg", series, title="P(|score| <= nu) under Alice",
                                    xlabel="L", ylabel="probability"))
    return files


_SETS_IMITATE_CFO = [["CFO"], ["CFO", "CIR"], ["CFO", "RSSI"], ["CFO", "CIR", "RSSI"]]
_SECURITY = {"mu": 0.1, "mc_trials": 10_000, "fa_target": FA_TARGET}
# Eve may stand anywhere in the modeled distance band, so RSSI alone does not always expose her
_EVE_ANYWHERE = {"RSSI": {"kind": "PathLossMotion", "eve_distance_lo": 1.0}}
_CFO_CARRIER = {"CFO": {"kind": "GaussianRandomWalk", "step_std": 2.35e-7 * CARRIER_HZ / 1e3, "spread": 30.0}}

PRESETS: dict[str, ExperimentPreset] = {p.name: p for p in [
    ExperimentPreset("fig4_training", "training MSE per single attribute and for the triplet",
                     {"eve_prior": 0.0, "trials": 300},
                     {"mu": 0.1, "mc_trials": 100,
                      "attribute_sets": [["CFO"], ["CIR"], ["RSSI"], ["CFO", "CIR", "RSSI"]]},
                     _run_attr_curves),
    ExperimentPreset("fig5_attr_pairs", "training MSE for attribute pairs and the triplet",
                     {"eve_prior": 0.0, "trials": 300},
                     {"mu": 0.1, "mc_trials": 100,
                      "attribute_sets": [["CFO", "CIR"], ["CFO", "RSSI"], ["CIR", "RSSI"], ["CFO", "CIR", "RSSI"]]},
                     _run_attr_curves),
    ExperimentPreset("fig6_imitate_cfo", "MD/FA trade-off when Eve imitates the CFO",
                     {"eve_prior": 0.0, "trials": 300, "eve_imitates": ["CFO"], "drift": _EVE_ANYWHERE},
                     dict(_SECURITY, attribute_sets=_SETS_IMITATE_CFO), _run_security),
    ExperimentPreset("fig7_imitate_cfo_cir", "MD/FA trade-off when Eve imitates CFO and CIR",
                     {"eve_prior": 0.0, "trials": 300, "eve_imitates": ["CFO", "CIR"], "drift": _EVE_ANYWHERE},
                     dict(_SECURITY, attribute_sets=[["CFO", "CIR"], ["CFO", "CIR", "RSSI"]]), _run_security),
    ExperimentPreset("fig8_stepsizes", "training MSE for several step sizes",
                     {"eve_prior": 0.0, "trials": 300},
                     {"mus": [0.05, 0.1, 0.2, 0.3, 0.5], "mc_trials": 100, "attribute_set": []},
                     _run_stepsizes),
    ExperimentPreset("fig9_divergence", "error traces inside and outside the step-size bound",
                     {"eve_prior": 0.0, "trials": 300},
                     {"mus": [0.2, 2.0], "iterations": 200}, _run_divergence),
    ExperimentPreset("fig10_attr_count", "training MSE for 5, 10 and 15 attributes",
                     {"eve_prior": 0.0, "trials": 300,
                      "attributes": ["CFO", "CIR", "RSSI"] + [f"ATTR{k}" for k in range(1, 13)]},
                     {"mu": 0.1, "mc_trials": 100, "counts": [5, 10, 15]}, _run_attr_count),
    ExperimentPreset("fig11_attr_count_roc", "MD versus FA budget for 2 to 5 attributes",
                     {"eve_prior": 0.0, "trials": 300, "eve_imitates": ["CFO", "RSSI"],
                      "attributes": ["CFO", "RSSI", "CIR", "ATTR1", "ATTR2"]},
                     dict(_SECURITY, counts=[2, 3, 4, 5],
                          fa_budgets=[round(0.005 * k, 3) for k in range(11)]),
                     _run_count_roc),
    ExperimentPreset("fig12_range_mismatch", "MD/FA trade-off with normalization ranges widened",
                     {"eve_prior": 0.0, "trials": 300, "eve_imitates": ["CFO", "RSSI"]},
                     dict(_SECURITY, factors=[1.0, 2.0, 10.0], attribute_set=[]), _run_range_mismatch),
    ExperimentPreset("fig13_adaptive_vs_static", "MD of a frozen versus a continually updated model",
                     {"eve_prior": 0.0, "trials": 300, "eve_imitates": ["RSSI"], "drift": _CFO_CARRIER},
                     dict(_SECURITY, staleness=[0, 5, 10, 20, 30, 50], refresh_trials=300),
                     _run_staleness),
    ExperimentPreset("theorem45_validation", "analytic versus simulated FA/MD events for small models",
                     {"eve_prior": 0.0, "trials": 300},
                     {"mu": 0.1, "sizes": [3, 5, 8], "nus": [0.1, 0.2, 0.3], "mc_trials": 100_000, "bins": 4096},
                     _run_theorem),
]}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise SchemaError("preset", f"unknown preset {name!r}; valid names: {', '.join(PRESETS)}") from None


# -- configuration layering ---------------------------------------------------------------------

def _attr_name(a) -> str:
    return a if isinstance(a, str) else str(a.get("name")) if isinstance(a, Mapping) else ""


def merge_scenario(base: Mapping, over: Mapping, path: str = "scenario") -> dict:
    """Overlay a partial scenario dict.  ``drift``/``noise_std`` merge per attribute.

    A drift entry of the same kind is updated key by key; a different kind replaces it.
    Entries inherited for attributes that the overlay removed are dropped.
    """
    if not isinstance(over, Mapping):
        raise SchemaError(path, "scenario overrides must be an object")
    out = copy.deepcopy(dict(base))
    touched: dict[str, set] = {"drift": set(), "noise_std": set()}
    for k, v in over.items():
        if k in touched:
            if not isinstance(v, Mapping):
                raise SchemaError(f"{path}.{k}", "must be an object keyed by attribute name")
            dst = out.setdefault(k, {})
            for name, val in v.items():
                old = dst.get(name)
                if (k == "drift" and isinstance(val, Mapping) and isinstance(old, Mapping)
                        and val.get("kind", old.get("kind")) == old.get("kind")):
                    dst[name] = {**old, **val}
                else:
                    dst[name] = copy.deepcopy(val)
                touched[k].add(name)
        else:
            out[k] = copy.deepcopy(v)
    if isinstance(out.get("attributes"), list):
        names = {_attr_name(a) for a in out["attributes"]}
        for k in touched:
            out[k] = {n: v for n, v in out.get(k, {}).items() if n in names or n in touched[k]}
        if "eve_imitates" not in over and isinstance(out.get("eve_imitates"), list):
            out["eve_imitates"] = [n for n in out["eve_imitates"] if n in names]
    return out


def _coerce_param(key: str, value, default, path: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise SchemaError(path, "expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise SchemaError(path, "expected an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(path, "expected a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise SchemaError(path, "expected a list")
        return copy.deepcopy(value)
    return value


def merge_params(base: Mapping, over: Mapping, path: str = "params") -> dict:
    if not isinstance(over, Mapping):
        raise SchemaError(path, "params must be an object")
    out = copy.deepcopy(dict(base))
    for k, v in over.items():
        if k not in base:
            raise SchemaError(f"{path}.{k}", f"unknown parameter; expected one of {sorted(base)}")
        out[k] = _coerce_param(k, v, base[k], f"{path}.{k}")
    return out


def load_config_file(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError("", f"{path}: invalid JSON ({e})") from None
    if not isinstance(doc, Mapping):
        raise SchemaError("", "configuration must be a JSON object")
    return doc


def resolve_config(source, seed: int | None = None, trials: int | None = None) -> ResolvedConfig:
    """Build the complete configuration for a preset name, a JSON file path or a dict.

    A config document has the form ``{"preset": name, "scenario": {...}, "params": {...},
    "kernel": {"sigma": "median" | width}}`` where every part but ``preset`` is optional
    and ``scenario``/``params`` are partial.  ``seed`` and ``trials`` (the Monte
    Carlo count ``params.mc_trials``) override everything else.
    """
    if isinstance(source, Mapping):
        doc = dict(source)
    elif isinstance(source, str) and source in PRESETS:
        doc = {"preset": source}
    elif isinstance(source, (str, os.PathLike)) and Path(source).is_file():
        doc = load_config_file(source)
    elif isinstance(source, str) and not source.endswith(".json"):
        doc = {"preset": source}  # rejected below with the list of valid names
    else:
        raise SchemaError("", f"no such configuration file: {source}")
    for k in doc:
        if k not in ("preset", "scenario", "params", "kernel"):
            raise SchemaError(k, "unknown field; expected preset, scenario, params, kernel")
    if "preset" not in doc:
        raise SchemaError("preset", f"required; one of {', '.join(PRESETS)}")
    preset = get_preset(doc["preset"])
    scen = merge_scenario(default_scenario().to_dict(), preset.overrides)
    scen = merge_scenario(scen, doc.get("scenario", {}))
    params = merge_params(preset.params, doc.get("params", {}))
    params["sigma"] = _parse_sigma(doc.get("kernel", {}))
    if seed is not None:
        scen["seed"] = int(seed)
    if trials is not None:
        if "mc_trials" in params:
            params["mc_trials"] = int(trials)
        else:
            log.warning("preset %s has no Monte Carlo count; --trials ignored", preset.name)
    scenario = ScenarioConfig.from_dict(scen, prefix="scenario")
    _check_params(preset.name, scenario, params)
    return ResolvedConfig(preset.name, scenario, params)


def _parse_sigma(block) -> float | str:
    if not isinstance(block, Mapping):
        raise SchemaError("kernel", "must be an object")
    for k in block:
        if k != "sigma":
            raise SchemaError(f"kernel.{k}", "unknown field; expected sigma")
    sigma = block.get("sigma", "median")
    if sigma == "median":
        return sigma
    if isinstance(sigma, bool) or not isinstance(sigma, (int, float)) or not (0 < sigma < float("inf")):
        raise SchemaError("kernel.sigma", 'expected a positive number or "median"')
    return float(sigma)


def _check_params(name: str, scenario: ScenarioConfig, p: Mapping) -> None:
    names = set(scenario.names)
    for key in ("attribute_sets",):
        for i, s in enumerate(p.get(key, [])):
            if not s or not set(s) <= names:
                raise SchemaError(f"params.{key}[{i}]", f"attributes must be a non-empty subset of {sorted(names)}")
    if p.get("attribute_set") and not set(p["attribute_set"]) <= names:
        raise SchemaError("params.attribute_set", f"unknown attributes; have {sorted(names)}")
    for n in p.get("counts", []):
        if not 1 <= n <= len(names):
            raise SchemaError("params.counts", f"counts must lie in [1, {len(names)}]")
    if "mc_trials" in p and p["mc_trials"] < 1:
        raise SchemaError("params.mc_trials", "must be >= 1")
    if "fa_target" in p and not 0 <= p["fa_target"] < 1:
        raise SchemaError("params.fa_target", "must lie in [0, 1)")


# -- running ------------------------------------------------------------------------------------

def _git_describe() -> str:
    try:
        r = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                           text=True, timeout=10, cwd=Path(__file__).resolve().parent)
        return r.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def default_output_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


def run_experiment(source, output_dir=None, seed: int | None = None, trials: int | None = None,
                   jobs: int = 1, formats: Sequence[str] = ("csv", "svg")) -> dict:
    """Run a preset or config end to end; returns the manifest that was written.

    Files go to ``output_dir/<preset>/``.  The manifest lists every file with its SHA-256.
    """
    cfg = source if isinstance(source, ResolvedConfig) else resolve_config(source, seed, trials)
    fmts = set(formats)
    bad = fmts - {"csv", "svg"}
    if bad:
        raise SchemaError("format", f"unknown formats {sorted(bad)}; use csv and/or svg")
    out = Path(output_dir if output_dir is not None else default_output_dir()) / cfg.preset
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    files = PRESETS[cfg.preset].runner(cfg.scenario, cfg.params, out, fmts, jobs)
    wall = time.perf_counter() - t0
    manifest = {
        "preset": cfg.preset,
        "config": cfg.to_dict(),
        "seed": cfg.scenario.seed,
        "git_describe": _git_describe(),
        "wall_time_s": round(wall, 3),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "files": {p.name: _sha256(p) for p in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("%s finished in %.1f s, %d files in %s", cfg.preset, wall, len(files), out)
    return manifest
