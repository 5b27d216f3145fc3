"""Trial ensembles, process variation, and parameter sweeps.

Trial ``i`` of an experiment with seed ``s`` always uses the stream keyed
``(s, *prefix, TRIALS, i)``; chunks run on a thread pool and are reassembled
by trial index, so results do not depend on the thread count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import seeding
from .config import TrngConfig
from .distribution import EmpiricalDistribution, estimate_distribution
from .entropy import EntropyReport, entropy_report
from .magnetics import (
    DeviceInstance,
    FieldSpec,
    IntegrationError,
    MtjElectrical,
    MtjGeometry,
)
from .protocol import generate_words

__all__ = [
    "TrialError", "run_words", "run_trials", "estimate_distribution", "VariationSpec",
    "sample_variation", "sample_instance", "temperature_adjust", "SweepPlan", "SweepPoint",
    "sweep", "write_sweep_csv", "calibrate_series_resistance", "series_resistance_scan",
    "variation_ensemble", "EnsembleResult", "percentile_order_stat", "assistance_field_search",
]

DEFAULT_CHUNK = 32


class TrialError(RuntimeError):
    def __init__(self, trial_index: int, cause: Exception):
        super().__init__(f"trial {trial_index} failed: {cause}")
        self.trial_index = trial_index
        self.cause = cause


def _run_chunk(config, base_seed, indices, prefix, backend):
    try:
        return generate_words(config, base_seed, indices, *prefix, backend=backend)
    except IntegrationError:
        # locate the failing trial
        for i in indices:
            try:
                generate_words(config, base_seed, [i], *prefix, backend=backend)
            except IntegrationError as exc:
                raise TrialError(i, exc) from exc
        raise


def run_words(config: TrngConfig, n_trials: int, base_seed: int = 0, threads: int = 1,
              prefix: tuple = (), backend: str | None = None,
              chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """Output words of ``n_trials`` independent cycles, in trial order."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    chunks = [range(a, min(a + chunk, n_trials)) for a in range(0, n_trials, chunk)]
    if threads <= 1 or len(chunks) == 1:
        parts = [_run_chunk(config, base_seed, c, prefix, backend) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _run_chunk(config, base_seed, c, prefix, backend), chunks))
    return np.concatenate(parts)


def run_trials(config: TrngConfig, n_trials: int, base_seed: int = 0, threads: int = 1,
               prefix: tuple = (), backend: str | None = None) -> EmpiricalDistribution:
    words = run_words(config, n_trials, base_seed, threads, prefix, backend)
    return EmpiricalDistribution.from_words(words, config.n_devices)


# ---------------------------------------------------------------- process variation

@dataclass(frozen=True)
class VariationSpec:
    """Relative Gaussian sigmas. ``sigma_series`` varies each instance's
    series (transistor) resistance; the resistance factor models oxide thickness."""

    sigma_geometry: float = 0.05
    sigma_resistance: float = 0.05
    sigma_series: float = 0.05
    seed: int = 0
    max_resample: int = 100

    def __post_init__(self):
        if min(self.sigma_geometry, self.sigma_resistance, self.sigma_series) < 0:
            raise ValueError("variation sigmas must be >= 0")


def sample_variation(nominal: DeviceInstance, spec: VariationSpec, rng: np.random.Generator,
                     provenance: str = "sampled") -> DeviceInstance:
    """One device drawn around ``nominal``; resamples non-physical draws."""
    g0, e0 = nominal.geometry, nominal.electrical
    for _ in range(spec.max_resample):
        dims = np.array([g0.major_axis, g0.minor_axis, g0.free_layer_thickness])
        dims = dims * (1.0 + spec.sigma_geometry * rng.standard_normal(3))
        extra = 1.0 + spec.sigma_resistance * rng.standard_normal()
        if np.any(dims <= 0) or extra <= 0:
            continue
        geo = MtjGeometry(*map(float, dims))
        scale = g0.area / geo.area * extra
        elec = MtjElectrical(e0.r_on * scale, e0.r_off * scale)
        if elec.r_on >= elec.r_off:
            continue
        # explicit demag overrides describe the nominal shape only
        mat = replace(nominal.material, demag=None)
        return DeviceInstance(geo, mat, elec, provenance)
    raise ValueError(f"no physical sample in {spec.max_resample} draws")


def sample_instance(config: TrngConfig, spec: VariationSpec, instance: int) -> TrngConfig:
    """TRNG instance ``instance``: N independently varied devices and a varied series resistance."""
    rng = seeding.generator(spec.seed, seeding.INSTANCES, instance)
    tag = f"sampled(seed={spec.seed},instance={instance})"
    devices = tuple(sample_variation(d, spec, rng, tag) for d in config.devices)
    r_series = config.circuit.r_series
    for _ in range(spec.max_resample):
        r = r_series * (1.0 + spec.sigma_series * rng.standard_normal())
        if r > 0:
            break
    else:
        raise ValueError("no positive series resistance sample")
    return config.replace(devices=devices).with_circuit(r_series=float(r))


def temperature_adjust(electrical: MtjElectrical, temperature: float,
                       tmr_rate_pct_per_k: float = -0.4) -> MtjElectrical:
    """Linear TMR drift around 300 K with R_on held fixed."""
    tmr = electrical.tmr * (1.0 + tmr_rate_pct_per_k / 100.0 * (temperature - 300.0))
    if tmr <= 0:
        raise ValueError(f"TMR {tmr:.3g} at {temperature} K is outside the model's validity")
    return MtjElectrical(electrical.r_on, electrical.r_on * (1.0 + tmr))


# ---------------------------------------------------------------- sweeps

def _set_field(cfg: TrngConfig, **changes) -> TrngConfig:
    f = cfg.environment.field
    if f.kind == "none" and "kind" not in changes:
        changes["kind"] = "constant"
    return cfg.with_environment(field=replace(f, **changes))


def _signed_magnitude(cfg, v):
    # negative magnitudes flip the direction (theta + 180)
    f = cfg.environment.field
    theta = f.theta if v >= 0 else (f.theta + 180.0) % 360.0
    return _set_field(cfg, magnitude=abs(v), theta=theta)


def _temperature(cfg, v, rate):
    devs = tuple(replace(d, electrical=temperature_adjust(d.electrical, v, rate)) for d in cfg.devices)
    return cfg.replace(devices=devs).with_environment(temperature=float(v))


AXES: dict[str, Callable] = {
    "t_enable": lambda c, v, p: c.replace(t_enable=float(v)),
    "v_init": lambda c, v, p: c.with_circuit(v_init=float(v)),
    "capacitance": lambda c, v, p: c.with_circuit(capacitance=float(v)),
    "r_series": lambda c, v, p: c.with_circuit(r_series=float(v)),
    "r_offset": lambda c, v, p: c.with_circuit(r_series=c.circuit.r_series + float(v)),
    "field": lambda c, v, p: _signed_magnitude(c, float(v)),
    "theta": lambda c, v, p: _set_field(c, theta=float(v)),
    "phi": lambda c, v, p: _set_field(c, phi=float(v)),
    "frequency": lambda c, v, p: _set_field(c, kind="alternating", frequency=float(v)),
    "temperature": lambda c, v, p: _temperature(c, float(v), p.tmr_rate_pct_per_k),
}


@dataclass
class SweepPlan:
    """One swept axis (or two for a grid) over ``base``.

    ``seed_policy="common"`` reuses the same trial streams at every point,
    which keeps point-to-point comparisons free of sampling noise in the
    thermal paths; ``"independent"`` keys each point separately.
    """

    base: TrngConfig
    axis: str
    values: Sequence[float]
    trials: int = 2000
    seed: int = 0
    axis2: str | None = None
    values2: Sequence[float] = ()
    symmetrize: bool | None = None
    bootstrap: int = 200
    seed_policy: str = "common"
    tmr_rate_pct_per_k: float = -0.4

    def __post_init__(self):
        for a in (self.axis, self.axis2):
            if a is not None and a not in AXES:
                raise ValueError(f"unknown sweep axis {a!r}; expected one of {sorted(AXES)}")
        if len(self.values) == 0 or (self.axis2 and len(self.values2) == 0):
            raise ValueError("sweep values must be non-empty")
        if self.seed_policy not in ("common", "independent"):
            raise ValueError("seed_policy must be 'common' or 'independent'")

    def points(self):
        if self.axis2 is None:
            return [(v, None) for v in self.values]
        return [(v, w) for v in self.values for w in self.values2]

    def config_at(self, v, w=None) -> TrngConfig:
        cfg = AXES[self.axis](self.base, v, self)
        return AXES[self.axis2](cfg, w, self) if self.axis2 else cfg


@dataclass
class SweepPoint:
    value: float
    value2: float | None
    report: EntropyReport | None
    switch_probability: float = float("nan")
    config_digest: str = ""
    error: str = ""

    def statistics(self) -> dict:
        r = self.report
        if r is None:
            return {}
        return {
            "shannon_per_word": (r.shannon_per_word, r.bootstrap_stderr),
            "shannon_per_bit": (r.shannon_per_bit, r.bootstrap_stderr / r.n_bits),
            "min_entropy_per_word": (r.min_entropy_per_word, r.min_bootstrap_stderr),
            "min_entropy_per_bit": (r.min_per_bit, r.min_bootstrap_stderr / r.n_bits),
            "switch_probability": (self.switch_probability, float("nan")),
        }


def evaluate_point(cfg: TrngConfig, trials: int, seed: int, threads: int = 1, prefix=(),
                   symmetrize: bool | None = None, bootstrap: int = 200,
                   backend: str | None = None):
    dist = run_trials(cfg, trials, seed, threads, prefix, backend)
    sym = cfg.identical_devices if symmetrize is None else symmetrize
    rep = entropy_report(dist, sym, bootstrap, seed)
    return rep, float(dist.per_bit_switch_probability().mean())


def sweep(plan: SweepPlan, threads: int = 1, backend: str | None = None,
          progress: Callable | None = None) -> list[SweepPoint]:
    """Evaluate every point; a failing point is recorded and the sweep continues."""
    out = []
    for k, (v, w) in enumerate(plan.points()):
        prefix = () if plan.seed_policy == "common" else (seeding.SWEEP, k)
        try:
            cfg = plan.config_at(v, w)
            rep, p = evaluate_point(cfg, plan.trials, plan.seed, threads, prefix,
                                    plan.symmetrize, plan.bootstrap, backend)
            pt = SweepPoint(v, w, rep, p, cfg.digest())
        except (ValueError, IntegrationError, TrialError) as exc:
            pt = SweepPoint(v, w, None, error=str(exc))
        out.append(pt)
        if progress:
            progress(pt)
    return out


def write_sweep_csv(path, plan: SweepPlan, points: list[SweepPoint]) -> None:
    """One row per (point, statistic)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "value", "axis2", "value2", "statistic", "estimate", "stderr",
                    "trials", "seed", "config_digest", "error"])
        for pt in points:
            common = [plan.axis, repr(float(pt.value)), plan.axis2 or "",
                      "" if pt.value2 is None else repr(float(pt.value2))]
            tail = [plan.trials, plan.seed, pt.config_digest]
            if pt.error:
                w.writerow(common + ["", "", ""] + tail + [pt.error])
                continue
            for name, (est, se) in pt.statistics().items():
                w.writerow(common + [name, repr(float(est)), repr(float(se))] + tail + [""])


# ---------------------------------------------------------------- calibration

def series_resistance_scan(config: TrngConfig, candidates, trials: int = 2000, seed: int = 0,
                           threads: int = 1, backend: str | None = None) -> list[tuple[float, EntropyReport]]:
    out = []
    for r in candidates:
        rep, _ = evaluate_point(config.with_circuit(r_series=float(r)), trials, seed, threads,
                                bootstrap=0, backend=backend)
        out.append((float(r), rep))
    return out


def calibrate_series_resistance(config: TrngConfig, candidates, trials: int = 2000, seed: int = 0,
                                threads: int = 1, backend: str | None = None) -> float:
    """Candidate with the highest Shannon entropy per word; ties go to the larger resistance."""
    candidates = sorted({float(c) for c in candidates}, reverse=True)
    if len(candidates) == 1:
        return candidates[0]
    scan = series_resistance_scan(config, candidates, trials, seed, threads, backend)
    best_r, best_h = scan[0][0], scan[0][1].shannon_per_word
    for r, rep in scan[1:]:
        if rep.shannon_per_word > best_h:
            best_r, best_h = r, rep.shannon_per_word
    return best_r


# ---------------------------------------------------------------- variation ensembles

def percentile_order_stat(values, q: float = 0.10) -> float:
    """The ceil(q*n)-th smallest value (P10 of 1000 values is the 100th)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("no values")
    return float(v[max(1, math.ceil(q * v.size)) - 1])


@dataclass
class EnsembleResult:
    n_devices: int
    rows: list = field(default_factory=list)  # one dict per instance

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows], dtype=float)

    def summary(self, key: str = "shannon_per_bit") -> dict:
        x = self.column(key)
        return {"mean": float(x.mean()), "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
                "median": float(np.median(x)), "p10": percentile_order_stat(x)}


def variation_ensemble(config: TrngConfig, n_instances: int, spec: VariationSpec | None = None,
                       trials_per_instance: int = 2000, seed: int = 0, threads: int = 1,
                       bootstrap: int = 0, backend: str | None = None,
                       progress: Callable | None = None) -> EnsembleResult:
    """Entropy of ``n_instances`` sampled TRNG instances, raw (unpooled) estimation."""
    if n_instances < 1:
        raise ValueError("n_instances must be >= 1")
    spec = spec or VariationSpec(seed=seed)
    res = EnsembleResult(config.n_devices)
    for k in range(n_instances):
        cfg = sample_instance(config, spec, k)
        rep, p = evaluate_point(cfg, trials_per_instance, seed, threads, (seeding.INSTANCES, k),
                                symmetrize=False, bootstrap=bootstrap, backend=backend)
        row = {"instance": k, "shannon_per_word": rep.shannon_per_word,
               "shannon_per_bit": rep.shannon_per_bit, "min_entropy_per_word": rep.min_entropy_per_word,
               "min_entropy_per_bit": rep.min_per_bit, "switch_probability": p,
               "r_series": cfg.circuit.r_series, "config_digest": cfg.digest()}
        res.rows.append(row)
        if progress:
            progress(row)
    return res


# ---------------------------------------------------------------- assistance field

def assistance_field_search(config: TrngConfig, field_magnitude: float, target: float | str = 0.95,
                            trials: int = 2000, seed: int = 0, c_low: float | None = None,
                            c_high: float | None = None, rel_tol: float = 0.02,
                            threads: int = 1, backend: str | None = None) -> dict:
    """Smallest capacitance whose per-bit Shannon entropy reaches ``target``.

    The field points along the fixed-layer magnetization (+x). Bisection is on
    log C with common trial streams; r_series is held, which keeps the initial
    per-device current v_init/(r_series + R) unchanged as C shrinks.
    ``target="nominal"`` uses the zero-field entropy at the base capacitance.
    """
    c0 = config.circuit.capacitance
    base = _set_field(config, kind="constant" if field_magnitude else "none",
                      magnitude=float(field_magnitude), theta=0.0, phi=90.0)

    def h(c):
        rep, _ = evaluate_point(base.with_circuit(capacitance=c), trials, seed, threads,
                                bootstrap=0, backend=backend)
        return rep.shannon_per_bit

    if target == "nominal":
        rep, _ = evaluate_point(config.with_environment(field=FieldSpec()), trials, seed, threads,
                                bootstrap=0, backend=backend)
        target = rep.shannon_per_bit
    lo, hi = (c_low or c0 / 20), (c_high or c0)
    h_hi = h(hi)
    if h_hi < target:
        return {"field": field_magnitude, "capacitance": float("nan"), "entropy_per_bit": h_hi,
                "target": target, "converged": False}
    if h(lo) >= target:
        return {"field": field_magnitude, "capacitance": lo, "entropy_per_bit": float("nan"),
                "target": target, "converged": False}
    while hi / lo > 1 + rel_tol:
        mid = math.sqrt(lo * hi)
        hm = h(mid)
        if hm >= target:
            hi, h_hi = mid, hm
        else:
            lo = mid
    return {"field": field_magnitude, "capacitance": hi, "entropy_per_bit": h_hi,
            "target": target, "converged": True}
