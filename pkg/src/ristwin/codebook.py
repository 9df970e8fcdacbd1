"""Reflection beamforming codebook: Kronecker DFT beams plus optional
phase quantization.

Codeword (a, b) is kron(f_a over n1, f_b over n2) with f_a[p] =
exp(-2j*pi*a*p/n), flat codeword index a * n2 + b.  This matches the panel's
element ordering, so codeword entry n applies to element n.  Entries are
unit modulus; there is no 1/sqrt(N) normalization, hence V^H V = N * I.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artifacts import sha256_bytes


@dataclass(frozen=True)
class Codebook:
    matrix: np.ndarray  # (n_codewords, N) complex128, rows are codewords
    n1: int
    n2: int
    quant_bits: int | None = None

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape != (self.n1 * self.n2, self.n1 * self.n2):
            raise ValueError("codebook must be square (one codeword per element count)")
        if np.max(np.abs(np.abs(m) - 1.0)) > 1e-12:
            raise ValueError("codebook entries must be unit modulus")

    @property
    def n_codewords(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_elements(self) -> int:
        return self.matrix.shape[1]

    def codeword(self, p: int) -> np.ndarray:
        return self.matrix[p]

    def hash(self) -> str:
        meta = f"{self.n1},{self.n2},{self.quant_bits}".encode()
        return sha256_bytes(meta + np.ascontiguousarray(self.matrix).tobytes())

    def export_csv(self, path) -> None:
        """(codeword index, element index, re, im) rows for external checks."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["codeword", "element", "re", "im"])
            for p in range(self.n_codewords):
                for n in range(self.n_elements):
                    z = self.matrix[p, n]
                    # plain-float repr round-trips exactly and stays parseable
                    w.writerow([p, n, repr(float(z.real)), repr(float(z.imag))])


def _dft_phase_matrix(n: int) -> np.ndarray:
    a = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(a, a) / n)


def dft_codebook(n1: int, n2: int) -> Codebook:
    """Separable DFT codebook for an n1 x n2 panel."""
    if n1 < 1 or n2 < 1:
        raise ValueError("n1 and n2 must be >= 1")
    v = np.kron(_dft_phase_matrix(n1), _dft_phase_matrix(n2))
    return Codebook(matrix=v, n1=n1, n2=n2, quant_bits=None)


def quantize_phases(cb: Codebook, bits: int) -> Codebook:
    """Snap every entry's phase to the nearest multiple of 2*pi/2**bits.

    Magnitudes stay exactly 1.  Half-grid ties round toward zero phase, so
    the map is idempotent and sign-symmetric.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    step = 2 * np.pi / (1 << bits)
    phase = np.angle(cb.matrix)
    # nearest multiple with ties toward 0: k = ceil(|x|/step - 0.5) * sign(x)
    k = np.ceil(np.abs(phase) / step - 0.5) * np.sign(phase)
    return Codebook(
        matrix=np.exp(1j * step * k), n1=cb.n1, n2=cb.n2, quant_bits=bits
    )
