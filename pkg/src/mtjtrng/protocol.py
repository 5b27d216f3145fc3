"""Reset / Enable / Read cycle, word streams, and timing and energy accounting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, seeding
from .circuit import CircuitState, simulate_enable
from .config import TrngConfig


@dataclass(frozen=True)
class TrngWord:
    """``value`` has bit i set iff device i was read as parallel."""

    value: int
    n_bits: int

    def __post_init__(self):
        if self.n_bits < 1 or not 0 <= self.value < (1 << self.n_bits):
            raise ValueError(f"value {self.value} does not fit in {self.n_bits} bits")

    @classmethod
    def from_bits(cls, bits) -> "TrngWord":
        bits = [int(b) for b in bits]
        return cls(sum(b << i for i, b in enumerate(bits)), len(bits))

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> i) & 1 for i in range(self.n_bits))

    def __int__(self) -> int:
        return self.value

    def __str__(self) -> str:
        # most significant (device N-1) first
        return format(self.value, f"0{self.n_bits}b")


def _rng(trial_seed) -> np.random.Generator:
    if isinstance(trial_seed, np.random.Generator):
        return trial_seed
    return seeding.generator(trial_seed)


def reset_step(config: TrngConfig, rng, backend: str | None = None) -> CircuitState:
    """All devices to exact AP, thermalized by the zero-current burn-in; capacitor at v_init."""
    res = kernels.simulate(config, [_rng(rng)], enable=False, backend=backend)
    return CircuitState(config.circuit.v_init, res.m[0], 0.0)


def read_step(state, read_threshold: float = 0.0) -> TrngWord:
    """Strict comparison: m·x equal to the threshold reads as 0."""
    mx = np.asarray(getattr(state, "mx", state), dtype=float)
    return TrngWord.from_bits(mx > read_threshold)


def words_from_mx(mx: np.ndarray, read_threshold: float = 0.0) -> np.ndarray:
    """Vectorized read of a ``(B, N)`` array of m·x into integer words."""
    bits = (np.asarray(mx) > read_threshold).astype(np.int64)
    return bits @ (1 << np.arange(bits.shape[-1], dtype=np.int64))


def generate_word(config: TrngConfig, trial_seed, backend: str | None = None) -> TrngWord:
    """One full cycle; a pure function of (config, trial_seed).

    ``trial_seed`` is an int, a key tuple ``(seed, *counters)`` or a Generator.
    Runs the fused kernel, which draws the same noise as reset_step followed
    by simulate_enable on the same stream.
    """
    res = kernels.simulate(config, [_rng(trial_seed)], backend=backend)
    return read_step(res.mx[0], config.read_threshold)


def generate_word_stepwise(config: TrngConfig, trial_seed, backend: str | None = None):
    """reset_step, simulate_enable, read_step as separate calls. Returns (word, final_state)."""
    rng = _rng(trial_seed)
    state = reset_step(config, rng, backend)
    final, _ = simulate_enable(config, rng, state, backend=backend)
    return read_step(final, config.read_threshold), final


def generate_words(config: TrngConfig, base_seed: int, trial_indices, *prefix,
                   backend: str | None = None) -> np.ndarray:
    """Words for trials keyed ``(base_seed, *prefix, TRIALS, index)``."""
    gens = [seeding.generator(seeding.trial_key(base_seed, i, *prefix)) for i in trial_indices]
    if not gens:
        return np.zeros(0, dtype=np.int64)
    res = kernels.simulate(config, gens, backend=backend)
    return words_from_mx(res.mx, config.read_threshold)


# ---------------------------------------------------------------- timing / energy

@dataclass(frozen=True)
class TimingReport:
    t_reset: float
    t_enable: float
    t_read: float

    @property
    def t_cycle(self) -> float:
        return self.t_reset + self.t_enable + self.t_read


def charge_time(resistance: float, capacitance: float, v_init: float, v_target: float,
                v_start: float = 0.0) -> float:
    """RC time to charge from v_start to v_target towards v_init."""
    if not v_start <= v_target < v_init:
        raise ValueError(f"need v_start <= v_target < v_init, got {v_start}, {v_target}, {v_init}")
    return resistance * capacitance * math.log((v_init - v_start) / (v_init - v_target))


def timing_report(config: TrngConfig, v_target: float | None = None, v_start: float = 0.0,
                  t_enable: float | None = None) -> TimingReport:
    """Cycle timing. ``v_target`` defaults to v_init - 10 mV.

    The baseline recharges from 0 V; a shortened cycle passes the residual
    capacitor voltage as ``v_start`` and optionally a shorter ``t_enable``.
    """
    c = config.circuit
    v_target = c.v_init - 0.01 if v_target is None else v_target
    if v_target <= 0 or v_target >= c.v_init:
        raise ValueError(f"v_target must lie in (0, v_init={c.v_init}), got {v_target}")
    t_reset = charge_time(c.passgate_resistance, c.capacitance, c.v_init, v_target, v_start)
    return TimingReport(t_reset, config.t_enable if t_enable is None else t_enable,
                        config.costs.t_read)


@dataclass(frozen=True)
class TimingEnergyReport:
    t_reset: float
    t_enable: float
    t_read: float
    e_cap_stored: float
    e_passgate: float
    e_write_total: float
    e_read_total: float
    entropy_per_word: float
    label: str = "baseline"

    @property
    def t_cycle(self) -> float:
        return self.t_reset + self.t_enable + self.t_read

    @property
    def e_cycle(self) -> float:
        return self.e_cap_stored + self.e_passgate + self.e_write_total + self.e_read_total

    @property
    def entropy_rate(self) -> float:
        return self.entropy_per_word / self.t_cycle

    @property
    def energy_per_entropy_bit(self) -> float:
        """J per entropy bit; NaN (undefined) when the word carries no entropy."""
        return self.e_cycle / self.entropy_per_word if self.entropy_per_word > 0 else float("nan")

    @property
    def power(self) -> float:
        return self.e_cycle / self.t_cycle

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k in ("t_cycle", "e_cycle", "entropy_rate", "energy_per_entropy_bit", "power"):
            d[k] = getattr(self, k)
        d["energy_per_entropy_bit_defined"] = self.entropy_per_word > 0
        return d


def energy_report(config: TrngConfig, entropy_per_word: float, v_target: float | None = None,
                  v_start: float = 0.0, t_enable: float | None = None,
                  label: str = "baseline") -> TimingEnergyReport:
    """Per-cycle energy and entropy rate.

    The capacitor energy is charged as if recharging fully from 0 V (the
    passgate dissipates as much as is stored); write and read energies are
    charged per device.
    """
    if entropy_per_word < 0:
        raise ValueError("entropy_per_word must be >= 0")
    c, costs, n = config.circuit, config.costs, config.n_devices
    tim = timing_report(config, v_target, v_start, t_enable)
    e_cap = 0.5 * c.capacitance * c.v_init**2
    return TimingEnergyReport(tim.t_reset, tim.t_enable, tim.t_read, e_cap, e_cap,
                              n * costs.e_write_per_device, n * costs.e_read_per_device,
                              float(entropy_per_word), label)


def energy_reports(config: TrngConfig, entropy_per_word: float, v_residual: float | None = None,
                   t_enable_short: float | None = None) -> list[TimingEnergyReport]:
    """Baseline accounting plus a shortened cycle (recharge from ``v_residual``,
    Enable cut to ``t_enable_short``) when either is given."""
    out = [energy_report(config, entropy_per_word)]
    if v_residual is not None or t_enable_short is not None:
        out.append(energy_report(config, entropy_per_word, v_start=v_residual or 0.0,
                                 t_enable=t_enable_short, label="shortened"))
    return out


# ---------------------------------------------------------------- word streams

def write_word_stream(path, words, n_bits: int, config_digest: str, seed: int,
                      extra: dict | None = None) -> Path:
    """Packed big-endian bitstream plus a ``.json`` sidecar.

    Each word contributes ``n_bits`` bits, most significant first; the final
    byte is zero padded.
    """
    path = Path(path)
    w = np.asarray(words, dtype=np.int64)
    bits = ((w[:, None] >> np.arange(n_bits - 1, -1, -1)) & 1).astype(np.uint8).ravel()
    path.write_bytes(np.packbits(bits).tobytes())
    meta = {"config_digest": config_digest, "seed": int(seed), "trial_count": int(w.size),
            "n_bits": int(n_bits), "bit_order": "big-endian"}
    meta.update(extra or {})
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, indent=2))
    return sidecar


def read_word_stream(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    n, count = meta["n_bits"], meta["trial_count"]
    bits = np.unpackbits(np.frombuffer(path.read_bytes(), dtype=np.uint8))[: n * count]
    words = bits.reshape(count, n).astype(np.int64) @ (1 << np.arange(n - 1, -1, -1))
    return words, meta
