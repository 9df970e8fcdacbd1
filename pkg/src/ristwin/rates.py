"""Cascaded channels, per-codeword achievable rates, exhaustive search.

With reflection vector v and per-subcarrier channels h_R (panel to receiver)
and h_T (transmitter to panel), the received signal coefficient at
subcarrier k is h_R_k^T diag(v) h_T_k, which equals psi_k^T v for the
effective channel psi_k = h_R_k * h_T_k (elementwise).  Everything here
works on the psi form; the diagonal form exists in the tests as an
independent check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import Codebook


@dataclass(frozen=True)
class RateTable:
    """Per-codeword rates plus the ranking the oracle labels carry.

    rank is all codeword indices sorted by descending rate; equal rates
    order by lower index, so opt_index == rank[0] always.
    """

    rates: np.ndarray  # (n_codewords,) bits/s/Hz
    opt_index: int
    rank: np.ndarray  # (n_codewords,) int

    def top(self, k: int) -> np.ndarray:
        return self.rank[:k]


def effective_channel(h_r: np.ndarray, h_t: np.ndarray) -> np.ndarray:
    """psi = h_r * h_t elementwise, shape (K, N)."""
    if h_r.shape != h_t.shape:
        raise ValueError(f"channel shapes differ: {h_r.shape} vs {h_t.shape}")
    return h_r * h_t


def achievable_rate(
    psi: np.ndarray, v: np.ndarray, snr_budget: float, k_sub: int | None = None
) -> float:
    """Average spectral efficiency of reflection vector v, bits/s/Hz.

    R = (1/K) * sum_k log2(1 + (snr_budget / K) * |psi_k^T v|^2), taken over
    the first k_sub subcarriers (all of them when k_sub is None).
    """
    if not snr_budget > 0:
        raise ValueError("snr_budget must be positive")
    k = psi.shape[0] if k_sub is None else k_sub
    if not 1 <= k <= psi.shape[0]:
        raise ValueError("k_sub out of range")
    y = psi[:k] @ v
    return float(np.mean(np.log2(1.0 + (snr_budget / k) * np.abs(y) ** 2)))


def rate_table_rates(
    psi: np.ndarray, cb: Codebook, snr_budget: float, k_sub: int | None = None
) -> np.ndarray:
    """Rates of every codeword at once; one GEMM instead of N vector products."""
    if not snr_budget > 0:
        raise ValueError("snr_budget must be positive")
    k = psi.shape[0] if k_sub is None else k_sub
    if not 1 <= k <= psi.shape[0]:
        raise ValueError("k_sub out of range")
    y = psi[:k] @ cb.matrix.T  # (k, n_codewords)
    return np.log2(1.0 + (snr_budget / k) * np.abs(y) ** 2).mean(axis=0)


def rank_codewords(rates: np.ndarray) -> np.ndarray:
    # descending rate, ties broken by lower codeword index
    return np.lexsort((np.arange(rates.shape[0]), -rates))


def exhaustive_search(
    psi: np.ndarray, cb: Codebook, snr_budget: float, k_sub: int | None = None
) -> RateTable:
    """Evaluate the whole codebook and rank it; rank[0] is the oracle optimum."""
    if cb.n_codewords == 0:
        raise ValueError("codebook is empty")
    if cb.n_elements != psi.shape[1]:
        raise ValueError("codebook element count does not match channel")
    rates = rate_table_rates(psi, cb, snr_budget, k_sub)
    rank = rank_codewords(rates)
    return RateTable(rates=rates, opt_index=int(rank[0]), rank=rank)
