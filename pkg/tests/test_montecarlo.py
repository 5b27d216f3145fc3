import csv

import numpy as np
import pytest

from mtjtrng import montecarlo as mc
from mtjtrng.magnetics import IntegrationError, MtjElectrical


@pytest.fixture(scope="module")
def short2(cfg2):
    # short Enable with a stronger drive: quick, and still p ~ 0.3
    return cfg2.replace(t_enable=3e-9).with_circuit(r_series=2000.0)


def test_single_trial_and_repeatability(short2):
    d = mc.run_trials(short2, 1, base_seed=4)
    assert d.total_trials == 1 and d.counts.max() == 1
    a = mc.run_trials(short2, 64, base_seed=4)
    b = mc.run_trials(short2, 64, base_seed=4)
    assert np.array_equal(a.counts, b.counts)


def test_thread_and_chunk_invariance(short2):
    ref = mc.run_words(short2, 100, base_seed=1, threads=1)
    assert len(set(ref)) > 1
    assert np.array_equal(ref, mc.run_words(short2, 100, base_seed=1, threads=4))
    assert np.array_equal(ref, mc.run_words(short2, 100, base_seed=1, threads=3, chunk=7))
    with pytest.raises(ValueError):
        mc.run_words(short2, 0)


def test_independent_reruns_agree(cfg2):
    n = 2000
    p1 = mc.run_trials(cfg2, n, base_seed=0).per_bit_switch_probability()
    p2 = mc.run_trials(cfg2, n, base_seed=1).per_bit_switch_probability()
    sigma = np.sqrt(2 * p1 * (1 - p1) / n)
    assert np.all(np.abs(p1 - p2) < 3 * sigma)
    assert np.all((p1 > 0.2) & (p1 < 0.8))


def test_trial_error_names_index(short2, monkeypatch):
    real = mc.generate_words

    def flaky(config, seed, indices, *prefix, backend=None):
        if 13 in indices:
            raise IntegrationError("boom")
        return real(config, seed, indices, *prefix, backend=backend)

    monkeypatch.setattr(mc, "generate_words", flaky)
    with pytest.raises(mc.TrialError) as info:
        mc.run_words(short2, 40, chunk=8)
    assert info.value.trial_index == 13


def test_variation_zero_sigma_is_nominal(cfg2):
    spec = mc.VariationSpec(0, 0, 0)
    inst = mc.sample_instance(cfg2, spec, 3)
    for d, d0 in zip(inst.devices, cfg2.devices):
        assert d.geometry == d0.geometry and d.electrical == d0.electrical
        assert d.demag == pytest.approx(d0.demag)
    assert inst.circuit.r_series == cfg2.circuit.r_series


def test_variation_area_scaling(device):
    class Fixed:
        # major axis doubled, everything else nominal
        def standard_normal(self, size=None):
            return np.array([1.0, 0, 0]) / 0.05 if size == 3 else 0.0

    d = mc.sample_variation(device, mc.VariationSpec(), Fixed())
    assert d.geometry.area == pytest.approx(2 * device.geometry.area)
    assert d.electrical.r_on == pytest.approx(device.electrical.r_on / 2)
    assert d.electrical.r_off == pytest.approx(device.electrical.r_off / 2)


def test_variation_statistics(cfg2):
    spec = mc.VariationSpec(seed=5)
    major = np.array([mc.sample_instance(cfg2, spec, k).devices[0].geometry.major_axis
                      for k in range(2000)])
    rel = major / cfg2.devices[0].geometry.major_axis - 1
    assert rel.mean() == pytest.approx(0, abs=0.004)
    assert rel.std() == pytest.approx(0.05, rel=0.06)
    a = mc.sample_instance(cfg2, spec, 7)
    assert a == mc.sample_instance(cfg2, spec, 7)
    assert a.devices[0] != a.devices[1]
    assert not a.identical_devices


def test_temperature_adjust_examples(electrical):
    assert mc.temperature_adjust(electrical, 300.0) == electrical
    assert mc.temperature_adjust(electrical, 400.0, 0.0) == electrical
    hot = mc.temperature_adjust(MtjElectrical(1000, 2500), 350.0, -0.4)
    assert hot.tmr == pytest.approx(1.2)
    assert hot.r_off == pytest.approx(2200.0)
    with pytest.raises(ValueError):
        mc.temperature_adjust(electrical, 600.0, -0.4)


def test_percentile_order_stat():
    assert mc.percentile_order_stat(np.arange(1, 1001)) == 100
    assert mc.percentile_order_stat([3.0]) == 3.0
    with pytest.raises(ValueError):
        mc.percentile_order_stat([])


def test_sweep_axes(cfg2):
    plan = mc.SweepPlan(cfg2, "field", [-2e3, 2e3])
    neg, pos = plan.config_at(-2e3).environment.field, plan.config_at(2e3).environment.field
    assert neg.magnitude == pos.magnitude == 2e3
    assert neg.direction == pytest.approx(-pos.direction)
    assert mc.SweepPlan(cfg2, "frequency", [1e8]).config_at(1e8).environment.field.kind == "alternating"
    t = mc.SweepPlan(cfg2, "temperature", [350.0]).config_at(350.0)
    assert t.environment.temperature == 350 and t.devices[0].electrical.r_off < cfg2.devices[0].electrical.r_off
    grid = mc.SweepPlan(cfg2, "theta", [0, 90], axis2="phi", values2=[0, 45, 90])
    assert len(grid.points()) == 6
    with pytest.raises(ValueError):
        mc.SweepPlan(cfg2, "colour", [1])
    with pytest.raises(ValueError):
        mc.SweepPlan(cfg2, "theta", [])


def test_sweep_csv_and_error_rows(short2, tmp_path):
    plan = mc.SweepPlan(short2, "v_init", [0.8, -1.0], trials=64, bootstrap=20)
    pts = mc.sweep(plan)
    assert pts[0].report is not None and not pts[0].error
    assert pts[1].report is None and "positive" in pts[1].error
    path = tmp_path / "s.csv"
    mc.write_sweep_csv(path, plan, pts)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 5 + 1
    assert {r["statistic"] for r in rows[:5]} >= {"shannon_per_word", "min_entropy_per_bit"}
    assert rows[-1]["error"]


def test_common_seed_policy_gives_identical_points(short2):
    plan = mc.SweepPlan(short2, "t_enable", [3e-9, 3e-9], trials=64, bootstrap=0)
    a, b = mc.sweep(plan)
    assert a.report.shannon_per_word == b.report.shannon_per_word
    # the independent policy keys point k by (SWEEP, k)
    from mtjtrng import seeding

    w0 = mc.run_words(short2, 64, 0, prefix=(seeding.SWEEP, 0))
    w1 = mc.run_words(short2, 64, 0, prefix=(seeding.SWEEP, 1))
    assert not np.array_equal(w0, w1)


def test_calibrate_single_and_ties(short2, monkeypatch):
    assert mc.calibrate_series_resistance(short2, [1234.0]) == 1234.0
    from mtjtrng.entropy import EntropyReport

    monkeypatch.setattr(mc, "series_resistance_scan",
                        lambda cfg, cands, *a, **k: [(r, EntropyReport(2, 1.5, 1.0)) for r in cands])
    assert mc.calibrate_series_resistance(short2, [100.0, 300.0, 200.0]) == 300.0


def test_calibrate_picks_balanced_candidate(cfg2):
    cands = [2000.0, 6000.0, 30000.0]
    best = mc.calibrate_series_resistance(cfg2, cands, trials=300, seed=0)
    assert best == 6000.0
    p = {r: mc.evaluate_point(cfg2.with_circuit(r_series=r), 300, 0, bootstrap=0)[1] for r in cands}
    assert abs(p[best] - 0.5) == min(abs(v - 0.5) for v in p.values())


def test_ensemble_summary(short2):
    res = mc.variation_ensemble(short2, 3, mc.VariationSpec(seed=1), trials_per_instance=32)
    assert len(res.rows) == 3
    s = res.summary()
    assert set(s) == {"mean", "std", "median", "p10"}
    assert s["p10"] == res.column("shannon_per_bit").min()
    zero = mc.variation_ensemble(short2, 2, mc.VariationSpec(0, 0, 0), trials_per_instance=32)
    assert zero.rows[0]["r_series"] == zero.rows[1]["r_series"] == short2.circuit.r_series


def test_assistance_field_zero_recovers_nominal(cfg2):
    out = mc.assistance_field_search(cfg2, 0.0, target="nominal", trials=200, seed=0)
    assert out["converged"]
    assert out["capacitance"] == pytest.approx(cfg2.circuit.capacitance, rel=0.02)
