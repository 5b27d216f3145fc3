"""Entropy of word distributions, XOR-chain whitening and bitstream packing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import seeding
from .distribution import EmpiricalDistribution, estimate_distribution


def _probs(dist) -> np.ndarray:
    p = np.asarray(getattr(dist, "probabilities", dist), dtype=float)
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()}, not 1")
    return p


def shannon_entropy(dist) -> float:
    p = _probs(dist)
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def min_entropy(dist) -> float:
    return float(max(0.0, -np.log2(_probs(dist).max())))


@dataclass(frozen=True)
class EntropyReport:
    n_bits: int
    shannon_per_word: float
    min_entropy_per_word: float
    bootstrap_stderr: float = float("nan")
    min_bootstrap_stderr: float = float("nan")

    @property
    def shannon_per_bit(self) -> float:
        return self.shannon_per_word / self.n_bits

    @property
    def min_per_bit(self) -> float:
        return self.min_entropy_per_word / self.n_bits


def entropy_report(dist: EmpiricalDistribution, symmetrize: bool = False,
                   bootstrap: int = 200, seed: int = 0) -> EntropyReport:
    """Entropies of ``dist`` with nonparametric bootstrap standard errors.

    Resampling is over the trial words, re-estimating with the same mode.
    """
    est = estimate_distribution(dist, symmetrize)
    h, hmin = shannon_entropy(est), min_entropy(est)
    se = se_min = float("nan")
    if bootstrap:
        rng = seeding.generator(seed, seeding.BOOTSTRAP)
        total = dist.total_trials
        p_raw = dist.counts / total
        hs, hm = np.empty(bootstrap), np.empty(bootstrap)
        for k in range(bootstrap):
            c = rng.multinomial(total, p_raw)
            b = estimate_distribution(EmpiricalDistribution(dist.n_bits, c, c / total), symmetrize)
            hs[k], hm[k] = shannon_entropy(b), min_entropy(b)
        se, se_min = float(hs.std(ddof=1)), float(hm.std(ddof=1))
    return EntropyReport(dist.n_bits, h, hmin, se, se_min)


# ---------------------------------------------------------------- whitening

def xor_chain(words) -> np.ndarray:
    """z_1 = w_1, z_i = w_i ^ z_{i-1}: a running XOR (prefix scan)."""
    w = np.asarray(words, dtype=np.int64)
    return np.bitwise_xor.accumulate(w) if w.size else w.copy()


def xor_chain_inverse(words) -> np.ndarray:
    z = np.asarray(words, dtype=np.int64)
    w = z.copy()
    w[1:] ^= z[:-1]
    return w


@dataclass
class Bitstream:
    bits: np.ndarray  # uint8 0/1
    config_digest: str = ""
    post_processed: bool = False

    def __len__(self) -> int:
        return int(self.bits.size)

    def sequences(self, n_sequences: int, length: int) -> np.ndarray:
        need = n_sequences * length
        if need > self.bits.size:
            raise ValueError(f"need {need} bits, stream has {self.bits.size}")
        return self.bits[:need].reshape(n_sequences, length)


def pack_bitstream(words, width: int, **meta) -> Bitstream:
    """Concatenate words most-significant bit first."""
    if width < 1:
        raise ValueError("width must be >= 1")
    w = np.asarray(words, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    bits = ((w[:, None] >> shifts) & 1).astype(np.uint8).ravel()
    return Bitstream(bits, **meta)


def unpack_bitstream(stream, width: int) -> np.ndarray:
    bits = np.asarray(getattr(stream, "bits", stream), dtype=np.int64)
    if bits.size % width:
        raise ValueError("bitstream length is not a multiple of the word width")
    return bits.reshape(-1, width) @ (1 << np.arange(width - 1, -1, -1))
