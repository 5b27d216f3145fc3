import math

import numpy as np
import pytest

from mtjtrng import kernels
from mtjtrng.circuit import (
    CircuitState,
    EnableTrace,
    device_currents,
    equivalent_resistance,
    parallel_resistance,
    simulate_enable,
    step_circuit,
)
from mtjtrng.config import CircuitParams
from mtjtrng.magnetics import MtjElectrical, mtj_resistance

AP = np.array([-1.0, 0.0, 0.0])
P = np.array([1.0, 0.0, 0.0])


def test_parallel_resistance_examples():
    assert parallel_resistance([2500]) == pytest.approx(2500)
    assert parallel_resistance([2500, 2500]) == pytest.approx(1250)
    assert parallel_resistance([1000, 2500]) == pytest.approx(5000 / 7)
    with pytest.raises(ValueError):
        parallel_resistance([1000, 0])


def test_shared_divider_example():
    elec = [MtjElectrical(1000, 2500)] * 2
    circ = CircuitParams(r_series=4450, topology="shared")
    state = CircuitState(0.8, np.array([AP, AP]))
    cur = device_currents(state, elec, circ)
    v_node = 0.8 * 1250 / 5700
    assert v_node == pytest.approx(0.17544, abs=1e-5)
    assert cur == pytest.approx([v_node / 2500] * 2)
    assert cur[0] == pytest.approx(70.18e-6, abs=0.01e-6)
    assert cur.sum() == pytest.approx(0.8 / (4450 + 1250))


@pytest.mark.parametrize("topology", ["shared", "per_module"])
def test_current_examples(topology):
    elec = [MtjElectrical(1000, 2500)] * 2
    circ = CircuitParams(r_series=4450, topology=topology)
    assert device_currents(CircuitState(0.0, np.array([AP, AP])), elec, circ) == pytest.approx([0, 0])
    cur = device_currents(CircuitState(0.8, np.array([P, AP])), elec, circ)
    if topology == "shared":
        assert cur[0] / cur[1] == pytest.approx(2.5)
    else:
        assert cur == pytest.approx([0.8 / 5450, 0.8 / 6950])
    r = [1000, 2500]
    assert cur.sum() == pytest.approx(0.8 / equivalent_resistance(r, circ))


@pytest.mark.parametrize("topology", ["shared", "per_module"])
def test_switching_increases_total_current(topology):
    elec = [MtjElectrical(1000, 2500)] * 3
    circ = CircuitParams(r_series=2000, topology=topology)
    before = device_currents(CircuitState(0.5, np.array([AP, AP, AP])), elec, circ).sum()
    after = device_currents(CircuitState(0.5, np.array([P, AP, AP])), elec, circ).sum()
    assert after > before


@pytest.mark.parametrize("topology", ["shared", "per_module"])
def test_rc_decay_with_pinned_devices(cfg4, topology):
    cfg = cfg4.replace(stt_scale=0.0, reset_burn_in=0.0).with_environment(temperature=0.0)
    cfg = cfg.with_circuit(topology=topology)
    r_eq = equivalent_resistance([2500.0] * 4, cfg.circuit)
    tau = cfg.circuit.capacitance * r_eq
    cfg = cfg.replace(t_enable=round(tau / cfg.dt) * cfg.dt)
    final, _ = simulate_enable(cfg, np.random.default_rng(0))
    expected = cfg.circuit.v_init * math.exp(-cfg.t_enable / tau)
    assert final.v_cap == pytest.approx(expected, rel=1e-3)
    assert np.all(final.mx == -1.0)


def test_step_circuit_matches_backend_step(cfg2):
    rng = np.random.default_rng(5)
    state = CircuitState(0.8, np.array([[-0.99, 0.1, 0.0], [-0.98, 0.0, 0.2]]))
    state.devices /= np.linalg.norm(state.devices, axis=1, keepdims=True)
    noise = rng.standard_normal((2, 3))
    nxt = step_circuit(state, cfg2, noise)
    assert nxt.t == pytest.approx(cfg2.dt)
    assert nxt.v_cap < state.v_cap
    assert np.linalg.norm(nxt.devices, axis=1) == pytest.approx([1, 1], abs=1e-12)


def test_trace_invariants(cfg4, tmp_path):
    final, trace = simulate_enable(cfg4, np.random.default_rng(11), trace_every=1)
    assert np.all(np.diff(trace.v_cap) <= 0)
    assert trace.v_cap[-1] == pytest.approx(final.v_cap)
    circ = cfg4.circuit
    # Kirchhoff against resistances recomputed from mx is not possible (trace
    # holds only m.x); currents must sum to v / R_eq of the branch currents
    r_branch = trace.v_cap[:, None] / trace.currents - circ.r_series
    r_eq = np.array([equivalent_resistance(r, circ) for r in r_branch])
    total = trace.currents.sum(axis=1)
    assert np.allclose(total, trace.v_cap / r_eq, rtol=1e-12)
    # charge conservation, trapezoidal
    q = np.sum(0.5 * (total[1:] + total[:-1]) * np.diff(trace.t))
    assert q == pytest.approx(circ.capacitance * (circ.v_init - final.v_cap), rel=5e-3)
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    back = EnableTrace.from_csv(path)
    assert np.array_equal(back.v_cap, trace.v_cap)
    assert path.read_text().splitlines()[0] == "t,v_cap,I_0,I_1,I_2,I_3,mx_0,mx_1,mx_2,mx_3"


def test_trace_resistance_consistent_with_mx(cfg4):
    # branch resistance from the trace equals R(m) evaluated at m.x
    _, trace = simulate_enable(cfg4, np.random.default_rng(2), trace_every=100)
    r_branch = trace.v_cap[:, None] / trace.currents - cfg4.circuit.r_series
    elec = cfg4.devices[0].electrical
    perp = np.sqrt(np.clip(1 - trace.mx**2, 0, None))
    r_mx = mtj_resistance(np.stack([trace.mx, perp, np.zeros_like(perp)], -1), elec)
    assert np.allclose(r_branch, r_mx, rtol=1e-9)


def test_switched_device_current_rises(cfg4):
    # find a trial with both outcomes, then compare current shapes
    for seed in range(20):
        final, trace = simulate_enable(cfg4, np.random.default_rng(seed), trace_every=100)
        sw = final.mx > 0
        if sw.any() and (~sw).any():
            break
    else:
        pytest.skip("no mixed outcome in 20 trials")
    i_sw, i_st = trace.currents[:, sw][:, 0], trace.currents[:, ~sw][:, 0]
    k = int(np.argmax(trace.mx[:, sw][:, 0] > 0))
    assert i_sw[k + 1] > i_sw[k - 1]
    # thermal wobble modulates R, so only the overall decay is monotone
    assert i_st[-1] < i_st[0]
    assert np.all(np.diff(trace.v_cap) <= 0)


def test_higher_series_resistance_never_raises_first_step_current(cfg4):
    rng = np.random.default_rng(4)
    noise = rng.standard_normal((4, 3))
    state = CircuitState(0.8, np.tile(AP, (4, 1)))
    elec = [d.electrical for d in cfg4.devices]
    lo = device_currents(state, elec, cfg4.circuit)
    hi = device_currents(state, elec, cfg4.with_circuit(r_series=cfg4.circuit.r_series * 1.5).circuit)
    assert np.all(hi < lo)
    a = step_circuit(state, cfg4, noise)
    b = step_circuit(state, cfg4.with_circuit(r_series=cfg4.circuit.r_series * 1.5), noise)
    assert b.v_cap > a.v_cap


def test_zero_stt_zero_temperature_deterministic(cfg4):
    cfg = cfg4.replace(stt_scale=0.0).with_environment(temperature=0.0)
    a, _ = simulate_enable(cfg, np.random.default_rng(0))
    b, _ = simulate_enable(cfg, np.random.default_rng(99))
    assert np.array_equal(a.devices, b.devices)
    assert np.all(a.mx == -1.0)
    assert a.v_cap == b.v_cap


def test_backend_initial_state():
    m = kernels.initial_state(3, 2)
    assert m.shape == (2, 3, 3)
    assert np.all(m[..., 0] == -1)
