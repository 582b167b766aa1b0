import math

import numpy as np
import pytest

from gibbs_ineq import (
    GibbsEnsemble,
    HermitianOperator,
    decompose,
    duhamel_kernel,
    gibbs_weights,
    to_eigenbasis,
    xcothx,
)
from gibbs_ineq.spectral import xcothx_grid

from conftest import SX, SZ, random_hermitian, rng_for


class TestHermitianOperator:
    def test_accepts_hermitian(self):
        op = HermitianOperator([[1.0, 1j], [-1j, 2.0]])
        assert op.dim == 2
        assert np.allclose(op.entries, op.entries.conj().T)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="not Hermitian"):
            HermitianOperator([[0.0, 1.0], [0.0, 0.0]])

    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            HermitianOperator(np.zeros((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            HermitianOperator([[np.inf, 0.0], [0.0, 0.0]])

    def test_tolerates_roundoff_asymmetry(self):
        mat = random_hermitian(rng_for(0), 5)
        mat[0, 1] += 1e-14
        HermitianOperator(mat)  # within 1e-12 * max|entries|


class TestDecompose:
    def test_identity_is_degenerate_uniform(self):
        ens = decompose(HermitianOperator(np.eye(2)), beta=1.0)
        assert np.allclose(ens.eigenvalues, [1.0, 1.0])
        assert np.allclose(ens.weights, [0.5, 0.5])

    def test_pauli_x_spectrum(self):
        ens = decompose(HermitianOperator(SX), beta=1.0)
        assert np.allclose(ens.eigenvalues, [-1.0, 1.0])

    def test_reconstruction_oracle(self):
        h = random_hermitian(rng_for(1), 8)
        ens = decompose(HermitianOperator(h), beta=2.0)
        recon = (ens.eigenvectors * ens.eigenvalues) @ ens.eigenvectors.conj().T
        assert np.max(np.abs(recon - h)) <= 1e-10 * np.linalg.norm(h, 2)

    def test_invalid_beta(self):
        for beta in (0.0, -1.0, np.inf, np.nan):
            with pytest.raises(ValueError, match="beta"):
                decompose(HermitianOperator(np.eye(2)), beta)

    def test_ensemble_invariants(self):
        ens = decompose(HermitianOperator(random_hermitian(rng_for(2), 7)), beta=3.0)
        assert np.all(np.diff(ens.eigenvalues) >= 0)
        gram = ens.eigenvectors.conj().T @ ens.eigenvectors
        assert np.max(np.abs(gram - np.eye(7))) <= 1e-10
        assert np.all(ens.weights >= 0)
        assert abs(ens.weights.sum() - 1.0) <= 1e-12
        assert np.all(np.diff(ens.weights) <= 1e-15)  # non-increasing in energy

    def test_ensemble_rejects_bad_unitary(self):
        with pytest.raises(ValueError, match="unitary"):
            GibbsEnsemble([0.0, 1.0], np.ones((2, 2)), 1.0)


class TestGibbsWeights:
    def test_two_equal_levels(self):
        assert np.allclose(gibbs_weights([0.0, 0.0], 5.0), [0.5, 0.5])

    def test_infinite_temperature_limit(self):
        w = gibbs_weights(np.linspace(-3, 2, 6), beta=1e-12)
        assert np.allclose(w, np.full(6, 1 / 6), atol=1e-11)

    def test_two_level_analytic(self):
        # (-d/2, d/2) with x = beta*d/2 -> (e^x, e^-x) / (2 cosh x)
        beta, delta = 1.7, 2.3
        x = beta * delta / 2
        w = gibbs_weights([-delta / 2, delta / 2], beta)
        expected = np.array([math.exp(x), math.exp(-x)]) / (2 * math.cosh(x))
        assert np.allclose(w, expected, rtol=1e-14)

    def test_shift_invariance(self):
        evals = np.array([0.0, 0.5, 1.25, 3.0])
        w0 = gibbs_weights(evals, 2.0)
        # dyadic shift keeps the subtraction exact -> bitwise identical
        assert np.array_equal(w0, gibbs_weights(evals + 2.0, 2.0))
        assert np.allclose(w0, gibbs_weights(evals + 0.137, 2.0), rtol=1e-14)

    def test_large_beta_no_overflow(self):
        w = gibbs_weights([-50.0, 50.0], beta=1e3)
        assert w[0] == 1.0 and w[1] == 0.0


class TestDuhamelKernel:
    def test_degenerate_limit(self):
        assert duhamel_kernel(0.7, 0.7, 2.0) == pytest.approx(math.exp(-1.4), rel=1e-14)

    def test_direct_formula_point(self):
        # beta=1, e_m=0, e_n=ln 2 -> (1 - 1/2)/ln 2
        expected = 0.5 / math.log(2.0)
        assert duhamel_kernel(0.0, math.log(2.0), 1.0) == pytest.approx(expected, rel=1e-14)

    def test_symmetry_and_positivity(self):
        rng = rng_for(3)
        for _ in range(50):
            a, b = rng.normal(size=2) * 3
            beta = float(rng.uniform(0.05, 20))
            k1 = duhamel_kernel(a, b, beta)
            k2 = duhamel_kernel(b, a, beta)
            assert k1 == pytest.approx(k2, rel=1e-13)
            assert k1 > 0

    def test_continuity_into_degenerate_limit(self):
        e, beta = 0.3, 2.0
        limit = math.exp(-beta * e)
        gaps = [abs(duhamel_kernel(e, e + d, beta) - limit) for d in (1e-3, 1e-5, 1e-7)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-6


class TestXcothx:
    def test_limit_at_zero(self):
        assert xcothx(0.0) == 1.0

    def test_asymptote(self):
        assert xcothx(50.0) == pytest.approx(50.0, rel=1e-14)
        assert xcothx(-50.0) == pytest.approx(50.0, rel=1e-14)

    def test_series_point(self):
        assert xcothx(1e-5) == pytest.approx(1.0 + 1e-10 / 3.0, rel=1e-12)

    def test_elementary_bounds(self):
        # the three bounds behind the Harris / Ginibre chains
        x = np.concatenate([np.linspace(-30, 30, 3001), [1e-6, -1e-9, 1e-3]])
        vals = xcothx_grid(x)
        assert np.all(vals >= 1.0)
        assert np.all(vals <= 1.0 + x * x / 3.0 + 1e-15)
        assert np.all(vals <= 1.0 + np.abs(x) + 1e-15)

    def test_grid_matches_scalar(self):
        xs = np.array([-2.0, -1e-5, 0.0, 3e-5, 0.5, 12.0])
        assert np.allclose(xcothx_grid(xs), [xcothx(v) for v in xs], rtol=1e-15)


class TestToEigenbasis:
    def test_identity_fixed_point(self):
        ens = decompose(HermitianOperator(random_hermitian(rng_for(4), 5)), 1.0)
        out = to_eigenbasis(np.eye(5), ens).matrix_elements
        assert np.allclose(out, np.eye(5), atol=1e-14)

    def test_hamiltonian_diagonalizes(self):
        h = random_hermitian(rng_for(5), 6)
        ens = decompose(HermitianOperator(h), 1.0)
        out = to_eigenbasis(h, ens).matrix_elements
        assert np.allclose(out, np.diag(ens.eigenvalues), atol=1e-12)

    def test_frobenius_norm_preserved(self):
        rng = rng_for(6)
        h = random_hermitian(rng, 6)
        a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        ens = decompose(HermitianOperator(h), 1.0)
        out = to_eigenbasis(a, ens).matrix_elements
        assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(a), rel=1e-12)

    def test_dimension_mismatch(self):
        ens = decompose(HermitianOperator(SZ), 1.0)
        with pytest.raises(ValueError, match="dim"):
            to_eigenbasis(np.eye(3), ens)

    def test_hermitian_stays_hermitian(self):
        rng = rng_for(7)
        h = random_hermitian(rng, 6)
        a = random_hermitian(rng, 6)
        out = to_eigenbasis(a, decompose(HermitianOperator(h), 1.0)).matrix_elements
        dev = np.max(np.abs(out - out.conj().T))
        assert dev <= 1e-12 * np.max(np.abs(out))
