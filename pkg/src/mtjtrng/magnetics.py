"""Macrospin physics of a single in-plane STT-MTJ.

Coordinates: x is the easy axis and the fixed-layer magnetization, y the
in-plane hard axis, z the film normal. Fields are in A/m, times in s.

The dynamics are the stochastic Landau-Lifshitz-Gilbert equation with a
Slonczewski damping-like torque, written in explicit (Landau-Lifshitz) form::

    A      = -g0 m x (H + H_th) - g0 a_J m x (m x p)
    dm/dt  = (A + alpha m x A) / (1 + alpha^2)

with ``g0 = 2.2128e5 m/(A s)`` and ``a_J = hbar P I / (2 e mu0 Ms V)``. Every
term of ``dm/dt`` is ``m x (...)``, so ``m . dm/dt = 0`` even off the unit
sphere, which is what lets the implicit midpoint rule conserve ``|m|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import special

MU0 = 4e-7 * math.pi
KB = 1.380649e-23
HBAR = 1.054571817e-34
E_CHARGE = 1.602176634e-19
GAMMA0 = 2.2128e5  # m/(A s)

FIXED_LAYER = np.array([1.0, 0.0, 0.0])

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAXITER = 50


class IntegrationError(RuntimeError):
    """Fixed-point iteration of the midpoint rule did not converge (dt too large)."""


@dataclass(frozen=True)
class MtjGeometry:
    """Ellipse-cylinder free layer; axes are full lengths, not semi-axes."""

    major_axis: float
    minor_axis: float
    free_layer_thickness: float

    def __post_init__(self):
        if min(self.major_axis, self.minor_axis, self.free_layer_thickness) <= 0:
            raise ValueError(f"non-positive MTJ dimension in {self}")
        if self.major_axis < self.minor_axis:
            raise ValueError("major_axis must be >= minor_axis")

    @property
    def area(self) -> float:
        return math.pi * self.major_axis * self.minor_axis / 4

    @property
    def volume(self) -> float:
        return self.area * self.free_layer_thickness


@dataclass(frozen=True)
class MtjMaterial:
    ms: float
    alpha: float
    polarization: float
    # explicit factors override the geometric computation
    demag: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.ms < 0:
            raise ValueError("saturation magnetization must be >= 0")
        if self.alpha <= 0:
            raise ValueError("Gilbert damping must be positive")
        if not 0 < self.polarization < 1:
            raise ValueError("spin polarization must lie in (0, 1)")
        if self.demag is not None:
            _check_demag(self.demag)


@dataclass(frozen=True)
class MtjElectrical:
    r_on: float
    r_off: float

    def __post_init__(self):
        if not 0 < self.r_on < self.r_off:
            raise ValueError(f"need 0 < r_on < r_off, got {self.r_on}, {self.r_off}")

    @property
    def tmr(self) -> float:
        return (self.r_off - self.r_on) / self.r_on

    @classmethod
    def from_tmr(cls, r_on: float, tmr: float) -> "MtjElectrical":
        return cls(r_on, r_on * (1.0 + tmr))


@dataclass(frozen=True)
class FieldSpec:
    """External field: none, constant, or alternating (sinusoidal).

    ``theta`` is the in-plane angle from the fixed-layer direction and ``phi``
    the angle from the film normal, both in degrees.
    """

    kind: str = "none"
    magnitude: float = 0.0
    theta: float = 0.0
    phi: float = 90.0
    frequency: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "constant", "alternating"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.magnitude < 0:
            raise ValueError("field magnitude must be >= 0")
        if self.kind == "alternating" and self.frequency <= 0:
            raise ValueError("alternating field needs a positive frequency")

    @property
    def direction(self) -> np.ndarray:
        th, ph = math.radians(self.theta), math.radians(self.phi)
        return np.array([math.sin(ph) * math.cos(th), math.sin(ph) * math.sin(th), math.cos(ph)])

    @property
    def amplitude_vector(self) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(3)
        return self.magnitude * self.direction


def external_field_at(spec: FieldSpec, t: float) -> np.ndarray:
    if spec.kind == "alternating":
        return spec.amplitude_vector * math.sin(2 * math.pi * spec.frequency * t)
    return spec.amplitude_vector


@dataclass(frozen=True)
class Environment:
    temperature: float = 300.0
    field: FieldSpec = field(default_factory=FieldSpec)

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0 K")


@dataclass(frozen=True)
class DeviceInstance:
    geometry: MtjGeometry
    material: MtjMaterial
    electrical: MtjElectrical
    provenance: str = "nominal"

    @property
    def demag(self) -> tuple[float, float, float]:
        if self.material.demag is not None:
            return self.material.demag
        return demag_factors(self.geometry)

    @property
    def volume(self) -> float:
        return self.geometry.volume

    def with_electrical(self, electrical: MtjElectrical) -> "DeviceInstance":
        return replace(self, electrical=electrical)


def _check_demag(n):
    if abs(sum(n) - 1.0) > 1e-12 or min(n) < 0 or max(n) > 1:
        raise ValueError(f"demagnetization factors must lie in [0, 1] and sum to 1, got {n}")


# ---------------------------------------------------------------- demag

_Q_MAX = 2000.0
_Q_STEP = 0.02


@lru_cache(maxsize=1)
def _bessel_kernel():
    q = np.arange(0.0, _Q_MAX + _Q_STEP / 2, _Q_STEP)
    k = np.empty_like(q)
    k[0] = 0.25
    k[1:] = (special.j1(q[1:]) / q[1:]) ** 2
    # composite Simpson weights (even number of intervals)
    w = np.full(q.size, 2.0)
    w[1:-1:2] = 4.0
    w[0] = w[-1] = 1.0
    return q, k * w * (_Q_STEP / 3)


def _reduced_kernel(c: np.ndarray) -> np.ndarray:
    """h(c) = (1/c) * int_0^inf J1(q)^2 (1 - exp(-c q)) / q^2 dq."""
    q, kw = _bessel_kernel()
    c = np.atleast_1d(c)
    body = (-np.expm1(-np.outer(c, q))) @ kw
    # asymptotic tail with J1^2 ~ 1/(pi q)
    tail = (0.5 - special.expn(3, c * _Q_MAX)) / (math.pi * _Q_MAX**2)
    return (body + tail) / c


@lru_cache(maxsize=4096)
def demag_factors(geometry: MtjGeometry) -> tuple[float, float, float]:
    """Magnetometric demagnetization factors of a uniformly magnetized ellipse cylinder.

    Evaluated from the Fourier-space shape amplitude of the cylinder; the
    out-of-plane integral is done analytically and the in-plane angle with
    Gauss-Legendre quadrature, leaving one tabulated Bessel integral.
    """
    a = geometry.major_axis / 2
    b = geometry.minor_axis / 2
    t = geometry.free_layer_thickness
    nodes, weights = np.polynomial.legendre.leggauss(64)
    psi = (nodes + 1) * (math.pi / 4)  # quarter period; the integrand has 4-fold symmetry
    w = weights * (math.pi / 4) * 4
    s2 = np.cos(psi) ** 2 / a**2 + np.sin(psi) ** 2 / b**2
    h = _reduced_kernel(np.sqrt(s2) * t)
    nz = float(np.sum(w * h) / math.pi)
    nx = float(np.sum(w * (np.cos(psi) ** 2 / (a**2 * s2)) * (0.5 - h)) / math.pi)
    ny = 1.0 - nz - nx
    return (nx, ny, nz)


# ---------------------------------------------------------------- fields and torques

def mtj_resistance(m, electrical: MtjElectrical):
    """Angle-dependent resistance from the Slonczewski conductance interpolation."""
    m = np.asarray(m, dtype=float)
    cos_t = m[..., 0] / np.linalg.norm(m, axis=-1)
    g = 0.5 * ((1 + cos_t) / electrical.r_on + (1 - cos_t) / electrical.r_off)
    return 1.0 / g


def effective_field(m, material: MtjMaterial, demag, h_ext=0.0):
    """Shape-anisotropy (demagnetizing) field plus an applied field, in A/m."""
    m = np.asarray(m, dtype=float)
    return -material.ms * np.asarray(demag) * m + h_ext


def thermal_field_std(material: MtjMaterial, volume: float, temperature: float, dt: float) -> float:
    """Per-axis standard deviation of the discrete thermal field (A/m)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if temperature == 0 or material.ms == 0:
        return 0.0
    return math.sqrt(2 * material.alpha * KB * temperature / (MU0 * GAMMA0 * material.ms * volume * dt))


def stt_field_per_amp(material: MtjMaterial, volume: float) -> float:
    """a_J / I in A/m per ampere."""
    if material.ms == 0:
        return 0.0
    return HBAR * material.polarization / (2 * E_CHARGE * MU0 * material.ms * volume)


def slonczewski_torque(m, current, material: MtjMaterial, volume: float):
    """Damping-like STT rate term ``-g0 a_J m x (m x p)`` in rad/s units of dm/dt.

    Positive current (electrons from the fixed into the free layer) pulls m
    toward the parallel state +x.
    """
    m = np.asarray(m, dtype=float)
    a_j = stt_field_per_amp(material, volume) * np.asarray(current)[..., None]
    return -GAMMA0 * a_j * np.cross(m, np.cross(m, FIXED_LAYER))


def llg_rhs(m, h, a_j, alpha):
    """Explicit-form LLG(S) right-hand side; broadcasts over leading axes.

    ``h`` is the total field (deterministic + thermal), ``a_j`` the STT field
    amplitude (A/m), both already evaluated at ``m``.
    """
    a_j = np.asarray(a_j)[..., None]
    alpha = np.asarray(alpha)[..., None]
    mxp = np.cross(m, FIXED_LAYER)
    prec = -GAMMA0 * (np.cross(m, h) + a_j * np.cross(m, mxp))
    return (prec + alpha * np.cross(m, prec)) / (1 + alpha**2)


def magnetic_energy(m, material: MtjMaterial, demag, volume: float):
    """Shape-anisotropy energy in J, zero external field."""
    m = np.asarray(m, dtype=float)
    return 0.5 * MU0 * material.ms**2 * volume * np.sum(np.asarray(demag) * m * m, axis=-1)


def energy_barrier(material: MtjMaterial, demag, volume: float) -> float:
    """In-plane switching barrier (saddle along y minus the x minimum) in J."""
    return 0.5 * MU0 * material.ms**2 * volume * (demag[1] - demag[0])


def llg_step_midpoint(
    m,
    current,
    device: DeviceInstance,
    environment: Environment,
    dt: float,
    noise,
    t: float = 0.0,
    renormalize: bool = True,
):
    """One implicit-midpoint (Stratonovich) step for a single device.

    ``noise`` is a 3-vector of standard normals; it is scaled by
    :func:`thermal_field_std` and held fixed over the step.
    """
    mat = device.material
    demag = np.asarray(device.demag)
    m0 = np.asarray(m, dtype=float)
    h_th = thermal_field_std(mat, device.volume, environment.temperature, dt) * np.asarray(noise, dtype=float)
    h_ext = external_field_at(environment.field, t + dt / 2)
    a_j = stt_field_per_amp(mat, device.volume) * current

    def f(mm):
        return llg_rhs(mm, -mat.ms * demag * mm + h_ext + h_th, a_j, mat.alpha)

    converged = False
    with np.errstate(over="ignore", invalid="ignore"):
        m1 = m0 + dt * f(m0)
        for _ in range(FIXED_POINT_MAXITER):
            m_new = m0 + dt * f(0.5 * (m0 + m1))
            err = np.max(np.abs(m_new - m1))
            m1 = m_new
            if err < FIXED_POINT_TOL:
                converged = True
                break
            if not np.isfinite(err):
                break
    if not converged:
        raise IntegrationError(f"midpoint iteration did not converge (dt={dt:g})")
    return m1 / np.linalg.norm(m1) if renormalize else m1
