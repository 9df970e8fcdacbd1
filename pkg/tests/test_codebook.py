"""DFT codebook construction and phase quantization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ristwin import dft_codebook, quantize_phases
from ristwin.codebook import Codebook


class TestDftCodebook:
    def test_degenerate_single_codeword(self):
        cb = dft_codebook(1, 1)
        np.testing.assert_array_equal(cb.matrix, [[1.0 + 0j]])

    def test_two_point_dft_hand_case(self):
        cb = dft_codebook(2, 1)
        np.testing.assert_allclose(cb.matrix[0], [1, 1], atol=1e-15)
        np.testing.assert_allclose(cb.matrix[1], [1, -1], atol=1e-15)

    def test_codeword_zero_is_all_ones(self):
        for n1, n2 in [(2, 2), (4, 4), (8, 8), (16, 16)]:
            cb = dft_codebook(n1, n2)
            np.testing.assert_array_equal(cb.matrix[0], np.ones(n1 * n2))

    @pytest.mark.parametrize("n1,n2", [(2, 2), (4, 4), (8, 8), (16, 16), (32, 32)])
    def test_orthogonality_scaled_identity(self, n1, n2):
        n = n1 * n2
        v = dft_codebook(n1, n2).matrix
        gram = v.conj() @ v.T
        assert np.max(np.abs(gram - n * np.eye(n))) < 1e-9

    def test_kron_row_ordering(self):
        # codeword (a, b) lives at flat index a * n2 + b and factors per axis
        n1, n2 = 3, 4
        cb = dft_codebook(n1, n2)
        f1 = np.exp(-2j * np.pi * np.outer(np.arange(n1), np.arange(n1)) / n1)
        f2 = np.exp(-2j * np.pi * np.outer(np.arange(n2), np.arange(n2)) / n2)
        for a in range(n1):
            for b in range(n2):
                np.testing.assert_allclose(
                    cb.matrix[a * n2 + b], np.kron(f1[a], f2[b]), atol=1e-14
                )

    def test_unit_modulus_everywhere(self):
        v = dft_codebook(8, 8).matrix
        np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-12)

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            dft_codebook(0, 4)


class TestQuantizePhases:
    def test_exactly_representable_grid_is_identity(self):
        # 16-point DFT phases are multiples of 2*pi/16, so 4 bits lose nothing
        cb = dft_codebook(4, 4)
        q = quantize_phases(cb, bits=4)
        np.testing.assert_allclose(q.matrix, cb.matrix, atol=1e-12)
        assert q.quant_bits == 4

    def test_tie_rounds_toward_zero(self):
        cb = Codebook(
            matrix=np.exp(1j * 0.3) * np.ones((1, 1)), n1=1, n2=1
        )
        q = quantize_phases(cb, bits=1)  # grid {0, pi}
        np.testing.assert_allclose(q.matrix, [[1.0 + 0j]], atol=1e-15)

    def test_idempotent(self):
        cb = dft_codebook(4, 2)
        once = quantize_phases(cb, bits=1)
        twice = quantize_phases(once, bits=1)
        np.testing.assert_array_equal(once.matrix, twice.matrix)

    @given(bits=st.integers(1, 6), n1=st.integers(1, 4), n2=st.integers(1, 4))
    @settings(max_examples=30)
    def test_magnitude_preserved_and_phase_error_bounded(self, bits, n1, n2):
        cb = dft_codebook(n1, n2)
        q = quantize_phases(cb, bits)
        np.testing.assert_allclose(np.abs(q.matrix), 1.0, atol=1e-12)
        # worst-case snap distance is half the grid step
        dphase = np.angle(q.matrix * np.conj(cb.matrix))
        assert np.max(np.abs(dphase)) <= np.pi / (1 << bits) + 1e-12

    def test_rejects_bad_bits(self):
        with pytest.raises(ValueError):
            quantize_phases(dft_codebook(2, 2), bits=0)


class TestCodebookType:
    def test_rejects_nonunit_entries(self):
        m = np.ones((4, 4), dtype=complex)
        m[0, 0] = 2.0
        with pytest.raises(ValueError, match="unit modulus"):
            Codebook(matrix=m, n1=2, n2=2)

    def test_hash_distinguishes_quantization(self):
        cb = dft_codebook(4, 4)
        assert cb.hash() != quantize_phases(cb, 2).hash()

    def test_csv_export_round_trips_values(self, tmp_path):
        cb = dft_codebook(2, 2)
        path = tmp_path / "cb.csv"
        cb.export_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "codeword,element,re,im"
        assert len(rows) == 1 + 16
        # exact float round trip through repr
        cells = rows[1 + 2 * 4 + 3].split(",")  # codeword 2, element 3
        z = complex(float(cells[2]), float(cells[3]))
        assert z == cb.matrix[2, 3]
