"""Empirical distributions of N-bit output words."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np


def hamming_weights(n_bits: int) -> np.ndarray:
    return np.bitwise_count(np.arange(2**n_bits, dtype=np.uint64)).astype(np.int64)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Word counts and the probabilities estimated from them.

    ``counts`` and ``probabilities`` are dense arrays indexed by word value.
    """

    n_bits: int
    counts: np.ndarray
    probabilities: np.ndarray
    symmetrized: bool = False

    @property
    def total_trials(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_words(cls, words, n_bits: int) -> "EmpiricalDistribution":
        words = np.asarray(words, dtype=np.int64)
        if words.size == 0:
            raise ValueError("no words")
        if words.min() < 0 or words.max() >= 2**n_bits:
            raise ValueError(f"word out of range for {n_bits} bits")
        counts = np.bincount(words, minlength=2**n_bits)
        return cls(n_bits, counts, counts / counts.sum(), False)

    @classmethod
    def from_counts(cls, counts, n_bits: int | None = None) -> "EmpiricalDistribution":
        """``counts`` is a dense array or a {word: count} mapping."""
        if isinstance(counts, dict):
            if n_bits is None:
                raise ValueError("n_bits required with a mapping")
            dense = np.zeros(2**n_bits, dtype=np.int64)
            for w, c in counts.items():
                dense[int(w)] = c
            counts = dense
        counts = np.asarray(counts, dtype=np.int64)
        n_bits = int(np.log2(counts.size)) if n_bits is None else n_bits
        if counts.size != 2**n_bits:
            raise ValueError("counts length must be 2**n_bits")
        return cls(n_bits, counts, counts / counts.sum(), False)

    def per_bit_switch_probability(self) -> np.ndarray:
        """Marginal probability that bit i is 1."""
        words = np.arange(2**self.n_bits)
        bits = (words[:, None] >> np.arange(self.n_bits)) & 1
        return (self.counts[:, None] * bits).sum(0) / self.total_trials


def estimate_distribution(dist: EmpiricalDistribution, symmetrize: bool,
                          identical_devices: bool = True) -> EmpiricalDistribution:
    """Raw frequencies, or Hamming-weight pooling for exchangeable devices.

    With pooling, every word of weight k gets freq(weight k) / C(N, k).
    """
    counts = dist.counts
    total = counts.sum()
    if not symmetrize:
        return EmpiricalDistribution(dist.n_bits, counts, counts / total, False)
    if not identical_devices:
        raise ValueError("Hamming-weight symmetrization requires identical devices")
    hw = hamming_weights(dist.n_bits)
    per_weight = np.bincount(hw, weights=counts, minlength=dist.n_bits + 1)
    sizes = np.array([comb(dist.n_bits, k) for k in range(dist.n_bits + 1)], dtype=float)
    probs = per_weight[hw] / sizes[hw] / total
    return EmpiricalDistribution(dist.n_bits, counts, probs, True)
