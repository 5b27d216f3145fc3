"""Backend dispatch for the hot Enable-step integration.

``MTJTRNG_BACKEND=numpy`` forces the vectorized numpy path; the default is
numba when it imports, numpy otherwise. Both consume identical noise streams.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_numpy
from .config import TrngConfig
from .magnetics import IntegrationError, external_field_at, stt_field_per_amp, thermal_field_std

try:
    from . import _kernels_numba
except ImportError:  # pragma: no cover
    _kernels_numba = None

_FIELD_CODES = {"none": 0, "constant": 1, "alternating": 2}


def default_backend() -> str:
    name = os.environ.get("MTJTRNG_BACKEND", "numba").lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"MTJTRNG_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and _kernels_numba is None:
        return "numpy"
    return name


def device_table(config: TrngConfig) -> np.ndarray:
    """Per-device constants in the column layout the kernels expect."""
    env, dt = config.environment, config.dt
    rows = []
    for dev in config.devices:
        nx, ny, nz = dev.demag
        mat, vol = dev.material, dev.volume
        rows.append([
            mat.ms, mat.alpha, nx, ny, nz,
            config.stt_scale * stt_field_per_amp(mat, vol),
            thermal_field_std(mat, vol, env.temperature, dt),
            1.0 / dev.electrical.r_on, 1.0 / dev.electrical.r_off,
        ])
    return np.array(rows, dtype=float)


@dataclass
class TrialResult:
    m: np.ndarray         # (B, N, 3) final magnetizations
    v_final: np.ndarray   # (B,)
    trace: np.ndarray | None = None  # (B, rows, 2 + 2N)

    @property
    def mx(self) -> np.ndarray:
        return self.m[..., 0]


def initial_state(n_devices: int, batch: int = 1) -> np.ndarray:
    m = np.zeros((batch, n_devices, 3))
    m[..., 0] = -1.0
    return m


def simulate(config: TrngConfig, gens, m0=None, trace_every: int = 0,
             backend: str | None = None, enable: bool = True,
             v_init: float | None = None) -> TrialResult:
    """Burn-in plus Enable for one trial per generator in ``gens``.

    ``enable=False`` stops after the zero-current burn-in.
    """
    backend = backend or default_backend()
    n = config.n_devices
    dev = device_table(config)
    circ = config.circuit
    shared = circ.topology == "shared"
    fspec = config.environment.field
    m0 = initial_state(n, len(gens)) if m0 is None else np.array(m0, dtype=float, copy=True)
    n_steps = config.n_steps if enable else 0
    n_burn = config.n_burn
    v0 = circ.v_init if v_init is None else float(v_init)

    if backend == "numpy":
        m, v, status, trace = _kernels_numpy.simulate_batch(
            list(gens), m0, dev, v0, circ.capacitance, circ.r_series, shared,
            lambda t: external_field_at(fspec, t), n_burn, n_steps, config.dt, trace_every)
        if status != _kernels_numpy.OK:
            raise IntegrationError(f"midpoint iteration did not converge (dt={config.dt:g})")
        return TrialResult(m, v, trace)

    code = _FIELD_CODES[fspec.kind]
    amp = fspec.amplitude_vector
    rows = n_steps // trace_every + 1 if trace_every else 1
    mf = np.empty((len(gens), n, 3))
    vf = np.empty(len(gens))
    traces = np.zeros((len(gens), rows, 2 + 2 * n)) if trace_every else None
    scratch = np.zeros((1, 2 + 2 * n))
    for k, g in enumerate(gens):
        m = np.ascontiguousarray(m0[k])
        tr = traces[k] if trace_every else scratch
        v, status = _kernels_numba.simulate_trial(
            g, m, dev, v0, circ.capacitance, circ.r_series, shared, code, amp,
            fspec.frequency, n_burn, n_steps, config.dt, trace_every, tr)
        if status != _kernels_numba.OK:
            raise IntegrationError(f"midpoint iteration did not converge (dt={config.dt:g})")
        mf[k] = m
        vf[k] = v
    return TrialResult(mf, vf, traces)
