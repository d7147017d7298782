import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from phyauth.analysis import (DiscretizedDistribution as DD, ErrorRateReport, ScenarioLaws, analytic_fa,
                              analytic_md, convolve_sum, distribution_of_phi0_feature,
                              distribution_of_phi1_feature, kernel_term_distribution, monte_carlo_rates,
                              score_distribution, write_reports_csv, write_reports_json)
from phyauth.attributes import AttributeSpec
from phyauth.errors import DataError, ParameterError
from phyauth.experiments import resolve_config, train_model
from phyauth.klms import ModelState
from phyauth.simulation import DriftKind, DriftModel, default_scenario, generate_stream

STATIC = DriftModel(DriftKind.STATIC)
MC = 100_000


@st.composite
def random_law(draw):
    n = draw(st.integers(1, 40))
    masses = draw(st.lists(st.floats(0, 1), min_size=n, max_size=n).filter(lambda m: sum(m) > 1e-3))
    lo = draw(st.floats(-5, 5))
    width = draw(st.floats(0.01, 1))
    return DD.from_masses(lo, width, masses)


# -- the distribution type -------------------------------------------------------------

def test_mass_invariant_enforced():
    with pytest.raises(DataError):
        DD(0.0, 1.0, np.array([0.5, 0.4]))
    with pytest.raises(DataError):
        DD(0.0, 1.0, np.array([1.5, -0.5]))
    with pytest.raises(DataError):
        DD(0.0, 0.0, np.array([0.5, 0.5]))


def test_bins_cover_support_exactly():
    d = DD.uniform(-2.0, 3.0, 64)
    assert d.edges[0] == d.support_lo == -2.0
    assert d.edges[-1] == pytest.approx(d.support_hi) and d.support_hi == pytest.approx(3.0)


@given(random_law(), st.floats(-3, 3), st.floats(-3, 3))
def test_transforms_preserve_mass(d, scale, shift):
    for out in (d.affine(scale, shift), d.rebin(-4.0, 4.0, 64), d.clamp(-1.0, 1.0), d.with_width(0.05),
                convolve_sum([d, d.affine(-1.0)])):
        assert abs(out.pmf.sum() - 1.0) <= 1e-9
        assert np.all(out.pmf >= 0)


@given(random_law())
def test_cdf_non_decreasing(d):
    x = np.linspace(d.support_lo - 1, d.support_hi + 1, 500)
    c = d.cdf(x)
    assert np.all(np.diff(c) >= 0) and c[0] == 0.0 and c[-1] == 1.0


def test_moments_of_uniform():
    d = DD.uniform(0.0, 2.0, 128)
    assert d.mean() == pytest.approx(1.0, abs=1e-12)
    assert d.var() == pytest.approx(4.0 / 12.0, rel=1e-12)


def test_clamp_moves_mass_to_edges():
    d = DD.uniform(-2.0, 2.0, 400).clamp(-1.0, 1.0)
    assert d.support_lo == -1.0 and d.support_hi == pytest.approx(1.0)
    assert d.pmf[0] == pytest.approx(0.25 + 1 / 400, abs=1e-9)
    assert d.cdf(-1.0) == 0.0  # the edge atom is smeared over its bin


# -- convolution -------------------------------------------------------------------------

def test_triangular_law_exact():
    h, n = 1.0, 256
    u = DD.uniform(-h, h, n)
    tri = convolve_sum([u, u])
    edges = tri.edges
    want = np.diff([oracles.triangular_cdf(e, h) for e in edges])
    assert tri.bin_width == u.bin_width
    assert np.max(np.abs(tri.pmf - want)) <= 1e-9


def test_point_masses_add():
    d = convolve_sum([DD.point(1.25), DD.point(-0.5)])
    assert d.is_point and d.support_lo == 0.75


def test_point_mass_shifts():
    u = DD.uniform(0.0, 1.0, 64)
    d = convolve_sum([u, DD.point(2.0)])
    assert d.support_lo == 2.0 and np.array_equal(d.pmf, u.pmf)


def test_convolve_needs_terms():
    with pytest.raises(ParameterError):
        convolve_sum([])


def test_five_random_laws_against_sampling(rng):
    laws = [DD.from_masses(rng.uniform(-1, 1), rng.uniform(0.01, 0.2), rng.random(rng.integers(3, 30)))
            for _ in range(5)]
    total = convolve_sum(laws)
    draws = sum(d.sample(rng, MC) for d in laws)
    assert total.kolmogorov(draws) < 0.02


@given(st.lists(random_law(), min_size=2, max_size=4), st.randoms())
def test_convolution_order_does_not_matter(laws, rnd):
    w = min(d.bin_width for d in laws)
    laws = [d.with_width(w) for d in laws]
    perm = laws[:]
    rnd.shuffle(perm)
    a, b = convolve_sum(laws), convolve_sum(perm)
    assert a.bins == b.bins
    assert a.support_lo == pytest.approx(b.support_lo, abs=1e-9)
    assert np.max(np.abs(a.pmf - b.pmf)) <= 1e-9


# -- feature laws ----------------------------------------------------------------------------

def test_phi0_degenerate_point_mass():
    spec = AttributeSpec("a", -1.0, 3.0)
    d = distribution_of_phi0_feature(spec, STATIC, 0.0, 0.0, tau=5)
    assert d.is_point
    assert d.support_lo == pytest.approx(-(spec.lo + spec.hi) / (spec.hi - spec.lo))


def test_phi0_gaussian_biases():
    spec = AttributeSpec("a", -10.0, 10.0)
    s1, s2 = 0.3, 0.4
    d = distribution_of_phi0_feature(spec, STATIC, s1, s2, tau=1)
    want_var = (s1 ** 2 + s2 ** 2) * (2 / (spec.hi - spec.lo)) ** 2
    assert d.var() == pytest.approx(want_var, rel=0.01)
    assert d.mean() == pytest.approx(0.0, abs=0.01 * math.sqrt(want_var))


def test_bins_floor():
    with pytest.raises(ParameterError):
        distribution_of_phi0_feature(AttributeSpec("a", -1, 1), STATIC, 0.1, 0.1, 1, bins=32)


def test_phi1_with_perfect_imitation_equals_static_phi0():
    spec = AttributeSpec("a", -5.0, 5.0)
    walk = DriftModel(DriftKind.GAUSSIAN_RANDOM_WALK, {"step_std": 0.2, "spread": 1.0})
    d1 = distribution_of_phi1_feature(spec, walk, 0.2, 0.2, 3, eve_offset=DD.point(0.0))
    d0 = distribution_of_phi0_feature(spec, STATIC, 0.2, 0.2, 3)
    assert d1.support_lo == d0.support_lo and np.array_equal(d1.pmf, d0.pmf)


def test_phi1_point_offset_is_shift():
    spec = AttributeSpec("a", -5.0, 5.0)
    delta = 0.7
    d1 = distribution_of_phi1_feature(spec, STATIC, 0.2, 0.3, 1, eve_offset=DD.point(delta))
    d0 = distribution_of_phi0_feature(spec, STATIC, 0.2, 0.3, 1)
    shift = 2 * delta / (spec.hi - spec.lo)
    assert d1.mean() - d0.mean() == pytest.approx(shift, abs=1e-9)
    x = np.linspace(-0.5, 0.5, 101)
    assert np.max(np.abs(d1.cdf(x + shift) - d0.cdf(x))) < 1e-9


def _single(cfg, name):
    return cfg.subset([name])


SCENARIOS = {
    "default": default_scenario(),
    "long_gap": default_scenario(tau=40, start_tick=30),
    "carrier_cfo": resolve_config("fig13_adaptive_vs_static").scenario.replace(tau=20),
    "eve_anywhere": resolve_config("fig6_imitate_cfo").scenario.replace(eve_imitates=frozenset()),
    "synthetic": default_scenario(["ATTR1", "ATTR2"]),
}
FEATURE_CASES = [(k, n) for k, cfg in SCENARIOS.items() for n in cfg.names]


@pytest.mark.parametrize("scenario,name", FEATURE_CASES)
def test_feature_laws_match_simulation(scenario, name):
    cfg = _single(SCENARIOS[scenario], name).replace(trials=MC)
    laws = ScenarioLaws.from_config(cfg)
    alice = generate_stream(cfg.replace(stream_id=11), 0).features[:, 0]
    eve = generate_stream(cfg.replace(stream_id=12), 1).features[:, 0]
    assert laws.phi0[0].tv_to_samples(alice) < 0.05
    assert laws.phi1[0].tv_to_samples(eve) < 0.05


def test_imitated_attribute_shares_alice_law():
    cfg = default_scenario(eve_imitates=frozenset({"CFO"}))
    laws = ScenarioLaws.from_config(cfg, bins=256)
    assert laws.phi1[0] is laws.phi0[0]
    assert laws.phi1[1] is not laws.phi0[1]


# -- kernel terms ----------------------------------------------------------------------------

def test_term_at_zero_distance():
    c = [0.2, -0.4]
    d = kernel_term_distribution(0.37, c, [DD.point(v) for v in c], width=0.5)
    assert d.is_point and d.support_lo == pytest.approx(0.37, abs=1e-15)


def test_term_with_zero_coefficient():
    d = kernel_term_distribution(0.0, [0.1], [DD.uniform(-1, 1, 64)], width=0.5)
    assert d.is_point and d.support_lo == 0.0


@pytest.mark.parametrize("coef,center,width", [(0.1, 0.3, 0.5), (-0.25, -0.8, 0.3), (0.9, 0.0, 2.0)])
def test_term_one_feature_against_sampling(coef, center, width, rng):
    law = DD.uniform(-1.0, 1.0, 4096)
    d = kernel_term_distribution(coef, [center], [law], width)
    x = rng.uniform(-1, 1, MC)
    draws = coef * np.exp(-(center - x) ** 2 / (2 * width * width))
    assert d.tv_to_samples(draws) < 0.05
    # bin masses are exact, so the CDFs agree at every grid edge
    emp = np.searchsorted(np.sort(draws), d.edges, side="right") / MC
    assert np.max(np.abs(d.cdf(d.edges) - emp)) < 0.01


def test_term_three_features_against_sampling(rng):
    laws = [DD.gaussian(0.1, 0.2), DD.uniform(-0.5, 0.5), DD.gaussian(-0.3, 0.05)]
    c = np.array([0.0, 0.2, -0.2])
    d = kernel_term_distribution(0.4, c, laws, 0.3)
    X = np.column_stack([law.sample(rng, MC) for law in laws])
    draws = 0.4 * np.exp(-np.sum((X - c) ** 2, axis=1) / (2 * 0.3 ** 2))
    assert d.tv_to_samples(draws) < 0.05


# -- analytic rates ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_model():
    cfg = default_scenario(trials=300)
    return train_model(cfg, 0.1).snapshot(4), cfg


@pytest.fixture(scope="module")
def laws(small_model):
    return ScenarioLaws.from_config(small_model[1], bins=1024)


def test_zero_threshold_has_no_mass(small_model, laws):
    model, _ = small_model
    assert analytic_fa(model, laws, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert analytic_md(model, laws, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_null_model_always_in_literal_event(laws):
    m = ModelState.from_arrays(np.zeros((3, 3)), [0.0, 0.0, 0.0], 0.1, 0.5)
    for nu in (0.05, 0.5):
        assert analytic_fa(m, laws, nu) == 1.0


def test_threshold_validated(small_model, laws):
    with pytest.raises(ParameterError):
        analytic_fa(small_model[0], laws, 1.0)


def test_md_equals_alice_side_when_laws_coincide(small_model):
    model, cfg = small_model
    cfg = cfg.replace(eve_imitates=frozenset(cfg.names))
    laws = ScenarioLaws.from_config(cfg, bins=1024)
    alice = score_distribution(model, laws.phi0, laws.bins)
    for nu in (0.1, 0.3, 0.6):
        assert analytic_md(model, laws, nu) == pytest.approx(alice.interval_mass(1 - nu, 1 + nu), abs=1e-12)


def test_analytic_matches_independent_term_simulation(small_model):
    # the convolution treats the terms as independent; so does indep_fa
    model, cfg = small_model
    for nu in (0.1, 0.2, 0.3):
        r = monte_carlo_rates(model, cfg, nu, MC)
        assert abs(r.analytic_fa - r.indep_fa) <= 0.02
        assert abs(r.analytic_md - r.indep_md) <= 0.02


def test_single_trial_rates_are_binary(small_model):
    r = monte_carlo_rates(*small_model, 0.2, 1, bins=256, analytic=False)
    for v in (r.mc_fa, r.mc_md, r.rule_fa, r.rule_md):
        assert v in (0.0, 1.0)
    assert math.isnan(r.analytic_fa)


def test_reports_deterministic(small_model):
    a = monte_carlo_rates(*small_model, 0.2, 2000, bins=256)
    b = monte_carlo_rates(*small_model, 0.2, 2000, bins=256)
    assert a == b
    assert a.L == len(small_model[0]) + 1


def test_rule_and_literal_events_differ(small_model):
    r = monte_carlo_rates(*small_model, 0.2, 5000, analytic=False)
    # literal FA: |score| <= nu under Alice; the rule rejects Alice when |1 - score| > nu
    assert r.rule_md == r.mc_md
    assert r.rule_fa != r.mc_fa


def test_report_validation_and_serialization(tmp_path):
    with pytest.raises(DataError):
        ErrorRateReport(1.2, 0, 0, 0, 0.1, 3, 64, 10)
    r = ErrorRateReport(0.1, 0.2, 0.15, 0.25, 0.1, 3, 4096, 1000, seed=7)
    csv = write_reports_csv(tmp_path / "r.csv", [r]).read_text().splitlines()
    assert csv[0].startswith("L,nu,grid_bins,mc_trials,seed,analytic_fa,mc_fa")
    doc = json.loads(write_reports_json(tmp_path / "r.json", [r], {"width": 0.5}).read_text())
    assert doc["reports"][0]["grid_bins"] == 4096 and doc["metadata"] == {"width": 0.5}
