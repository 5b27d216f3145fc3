"""Capacitor discharge through N state-dependent MTJs during the Enable step."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels_numpy, kernels
from .config import CircuitParams, TrngConfig
from .magnetics import IntegrationError, external_field_at, mtj_resistance


@dataclass
class CircuitState:
    v_cap: float
    devices: np.ndarray  # (N, 3) unit magnetizations
    t: float = 0.0

    @property
    def mx(self) -> np.ndarray:
        return self.devices[:, 0]


@dataclass
class EnableTrace:
    t: np.ndarray
    v_cap: np.ndarray
    currents: np.ndarray  # (rows, N)
    mx: np.ndarray        # (rows, N)

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "EnableTrace":
        n = (rows.shape[1] - 2) // 2
        return cls(rows[:, 0], rows[:, 1], rows[:, 2:2 + n], rows[:, 2 + n:])

    def to_csv(self, path) -> None:
        n = self.currents.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "v_cap"] + [f"I_{i}" for i in range(n)] + [f"mx_{i}" for i in range(n)])
            for k in range(self.t.size):
                w.writerow([repr(float(x)) for x in
                            (self.t[k], self.v_cap[k], *self.currents[k], *self.mx[k])])

    @classmethod
    def from_csv(cls, path) -> "EnableTrace":
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls.from_rows(rows)


def parallel_resistance(resistances) -> float:
    r = np.asarray(resistances, dtype=float)
    if np.any(r <= 0):
        raise ValueError("resistances must be positive")
    return float(1.0 / np.sum(1.0 / r))


def equivalent_resistance(resistances, circuit: CircuitParams) -> float:
    """Resistance the capacitor sees for the given MTJ resistances."""
    if circuit.topology == "shared":
        return circuit.r_series + parallel_resistance(resistances)
    return parallel_resistance(np.asarray(resistances, dtype=float) + circuit.r_series)


def device_currents(state: CircuitState, electricals, circuit: CircuitParams) -> np.ndarray:
    """Branch currents for the present capacitor voltage; they sum to v_cap / R_eq."""
    r = np.array([mtj_resistance(m, e) for m, e in zip(state.devices, electricals)])
    if circuit.topology == "shared":
        r_par = parallel_resistance(r)
        v_node = state.v_cap * r_par / (circuit.r_series + r_par)
        return v_node / r
    return state.v_cap / (circuit.r_series + r)


def step_circuit(state: CircuitState, config: TrngConfig, noise, dt: float | None = None) -> CircuitState:
    """Advance capacitor and all magnetizations by one coupled midpoint step.

    ``noise`` is an ``(N, 3)`` array of standard normals, one vector per device.
    """
    dt = config.dt if dt is None else dt
    cfg = config if dt == config.dt else config.replace(dt=dt)
    dev = kernels.device_table(cfg)
    circ = cfg.circuit
    hth = np.asarray(noise, dtype=float)[None] * dev[:, _kernels_numpy.SIGMA, None]
    hext = external_field_at(cfg.environment.field, state.t + dt / 2)
    m1, v1, status = _kernels_numpy.coupled_step(
        state.devices[None], np.array([state.v_cap]), dev, hth, hext, dt,
        circ.r_series, circ.topology == "shared", circ.capacitance)
    if status != _kernels_numpy.OK:
        raise IntegrationError(f"midpoint iteration did not converge (dt={dt:g})")
    return CircuitState(float(v1[0]), m1[0], state.t + dt)


def simulate_enable(config: TrngConfig, rng: np.random.Generator, state: CircuitState | None = None,
                    trace_every: int = 0, backend: str | None = None):
    """Integrate the Enable step from ``state`` (exact AP at v_init if omitted).

    The state's own time is ignored: the Enable step always runs over [0, t_enable].

    Returns ``(final_state, trace)``; ``trace`` is None unless ``trace_every > 0``.
    """
    n = config.n_devices
    m0 = kernels.initial_state(n) if state is None else np.asarray(state.devices, dtype=float)[None]
    cfg = config.replace(reset_burn_in=0.0)
    v0 = None if state is None else state.v_cap
    res = kernels.simulate(cfg, [rng], m0=m0, trace_every=trace_every, backend=backend, v_init=v0)
    final = CircuitState(float(res.v_final[0]), res.m[0], config.t_enable)
    trace = EnableTrace.from_rows(res.trace[0]) if trace_every else None
    return final, trace
