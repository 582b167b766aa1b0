import math

import numpy as np
import pytest

from gibbs_ineq import (
    AdjointUnsolvable,
    HermitianOperator,
    ObservableInBasis,
    SpectralWeight,
    bd_inner,
    bd_inner_quadrature,
    commutator_chain,
    decompose,
    duhamel_kernel,
    fluctuation,
    free_energy,
    functional_even,
    functional_odd,
    solve_adjoint,
    spectral_sum,
    susceptibility_fd,
    to_eigenbasis,
)
from gibbs_ineq.spectral import xcothx

from conftest import SX, SY, SZ, random_complex, random_hermitian, rel, rng_for

BETA = 1.0
DELTA = 2.0
X = BETA * DELTA / 2  # = 1
TANH1 = math.tanh(1.0)


def two_level(beta=BETA, delta=DELTA):
    ens = decompose(HermitianOperator(0.5 * delta * SZ), beta)
    return ens, to_eigenbasis(SX, ens)


def naive_weighted_sum(j_mat, evals, beta, weight_fn):
    """Reference double loop: Z^-1 sum |J_ml|^2 w(E_m, E_l) with scalar calls."""
    z = sum(math.exp(-beta * (e - evals.min())) for e in evals)
    total = 0.0
    shifted = evals - evals.min()
    for m in range(len(evals)):
        for l in range(len(evals)):
            total += abs(j_mat[m, l]) ** 2 * weight_fn(shifted[m], shifted[l])
    return total / z


class TestSpectralSum:
    def test_zero_observable(self):
        ens, _ = two_level()
        assert spectral_sum(np.zeros((2, 2)), ens, SpectralWeight("duhamel")) == 0.0

    def test_identity_normalization(self):
        ens, _ = two_level()
        assert spectral_sum(np.eye(2), ens, SpectralWeight("duhamel")) == pytest.approx(
            1.0, rel=1e-14
        )

    @pytest.mark.parametrize(
        "weight",
        [
            SpectralWeight("duhamel"),
            SpectralWeight("duhamel", 3.5),
            SpectralWeight("abs_difference", 1),
            SpectralWeight("abs_difference", 2),
            SpectralWeight("symmetric_sum", 0),
            SpectralWeight("symmetric_sum", 4),
        ],
    )
    def test_against_naive_loop(self, weight):
        rng = rng_for(10)
        h = random_hermitian(rng, 6)
        j = random_complex(rng, 6)
        beta = 1.3
        ens = decompose(HermitianOperator(h), beta)
        jb = to_eigenbasis(j, ens).matrix_elements

        def weight_fn(em, el):
            gap = abs(beta * (em - el)) ** weight.gap_power
            if weight.base == "duhamel":
                return duhamel_kernel(em, el, beta) * gap
            if weight.base == "symmetric_sum":
                return (math.exp(-beta * em) + math.exp(-beta * el)) * gap
            return abs(math.exp(-beta * el) - math.exp(-beta * em)) * gap

        expected = naive_weighted_sum(jb, ens.eigenvalues, beta, weight_fn)
        assert spectral_sum(jb, ens, weight) == pytest.approx(expected, rel=1e-12)

    def test_rejects_unknown_base(self):
        with pytest.raises(ValueError, match="weight base"):
            SpectralWeight("bogus")

    def test_rejects_negative_power(self):
        with pytest.raises(ValueError, match="gap_power"):
            SpectralWeight("duhamel", -1.0)


class TestBdInner:
    def test_identity_normalization(self):
        ens, _ = two_level()
        assert bd_inner(np.eye(2), np.eye(2), ens) == pytest.approx(1.0, rel=1e-14)

    def test_commuting_reduces_to_average(self):
        # diagonal A in the eigenbasis: (A;A) = <A^dag A>
        rng = rng_for(11)
        ens = decompose(HermitianOperator(random_hermitian(rng, 5)), 2.0)
        a = np.diag(rng.standard_normal(5) + 1j * rng.standard_normal(5))
        expected = np.sum(ens.weights * np.abs(np.diagonal(a)) ** 2)
        assert bd_inner(a, a, ens).real == pytest.approx(expected, rel=1e-13)

    def test_two_level_tanh_over_x(self):
        ens, sx = two_level()
        assert bd_inner(sx, sx, ens).real == pytest.approx(TANH1 / X, rel=1e-13)

    def test_inner_product_axioms(self):
        rng = rng_for(12)
        ens = decompose(HermitianOperator(random_hermitian(rng, 6)), 0.7)
        a = to_eigenbasis(random_complex(rng, 6), ens)
        b = to_eigenbasis(random_complex(rng, 6), ens)
        ab = bd_inner(a, b, ens)
        ba = bd_inner(b, a, ens)
        assert ab == pytest.approx(np.conj(ba), rel=1e-12)
        aa = bd_inner(a, a, ens)
        assert abs(aa.imag) <= 1e-14 * abs(aa.real)
        assert aa.real >= 0


class TestBdInnerQuadrature:
    def test_identity_any_node_count(self):
        t = HermitianOperator(0.5 * DELTA * SZ)
        for nodes in (8, 16, 64):
            val = bd_inner_quadrature(np.eye(2), np.eye(2), t, BETA, nodes)
            assert val == pytest.approx(1.0, rel=1e-14)

    def test_commuting_integrand_is_constant(self):
        # diagonal A, B: the tau integrand is constant, so 8 nodes are exact
        rng = rng_for(13)
        levels = rng.standard_normal(5)
        a = np.diag(rng.standard_normal(5))
        b = np.diag(rng.standard_normal(5))
        boltz = np.exp(-1.1 * (levels - levels.min()))
        expected = np.sum(boltz * np.diagonal(a) * np.diagonal(b)) / boltz.sum()
        val = bd_inner_quadrature(a, b, HermitianOperator(np.diag(levels)), 1.1, 8)
        assert val.real == pytest.approx(expected, rel=1e-13)

    def test_matches_spectral_route(self):
        rng = rng_for(14)
        h = HermitianOperator(random_hermitian(rng, 6))
        a = random_complex(rng, 6)
        b = random_complex(rng, 6)
        for beta in (0.1, 1.0, 10.0):
            ens = decompose(h, beta)
            spec = bd_inner(to_eigenbasis(a, ens), to_eigenbasis(b, ens), ens)
            quad = bd_inner_quadrature(a, b, h, beta, 64)
            assert abs(spec - quad) <= 1e-10 * abs(spec)

    def test_rejects_few_nodes(self):
        with pytest.raises(ValueError, match="nodes"):
            bd_inner_quadrature(np.eye(2), np.eye(2), HermitianOperator(SZ), 1.0, 4)


class TestFluctuation:
    def test_constant_does_not_fluctuate(self):
        ens, _ = two_level()
        triple = fluctuation(np.eye(2), ens)
        assert triple.raw == pytest.approx(0.0, abs=1e-14)
        assert triple.symmetrized == pytest.approx(0.0, abs=1e-14)
        assert triple.duhamel == pytest.approx(0.0, abs=1e-14)

    def test_two_level_pauli_values(self):
        # <sx> = 0, sx^2 = 1: raw = symmetrized = 1, duhamel = tanh(x)/x
        ens, sx = two_level()
        triple = fluctuation(sx, ens)
        assert triple.raw == pytest.approx(1.0, rel=1e-14)
        assert triple.symmetrized == pytest.approx(1.0, rel=1e-14)
        assert triple.duhamel == pytest.approx(TANH1 / X, rel=1e-13)

    def test_commutative_collapse(self):
        rng = rng_for(15)
        ens = decompose(HermitianOperator(random_hermitian(rng, 6)), 1.4)
        a = np.diag(rng.standard_normal(6))
        triple = fluctuation(a, ens)
        assert rel(triple.raw, triple.symmetrized) <= 1e-12
        assert rel(triple.raw, triple.duhamel) <= 1e-12

    def test_left_harris_ordering(self):
        rng = rng_for(16)
        for i in range(10):
            ens = decompose(HermitianOperator(random_hermitian(rng, 6)), 0.5 + i)
            triple = fluctuation(random_complex(rng, 6), ens)
            assert triple.symmetrized >= triple.duhamel >= -1e-14


class TestCommutatorChain:
    def test_order_zero_is_identity_map(self):
        j = random_complex(rng_for(17), 4)
        assert np.array_equal(commutator_chain(j, np.eye(4), 0), j)

    def test_commuting_collapses(self):
        h = np.diag([1.0, 2.0, 3.0])
        j = np.diag([5.0, -1.0, 0.5])
        for k in (1, 2, 3):
            assert np.allclose(commutator_chain(j, h, k), 0.0)

    def test_pauli_commutator(self):
        # [T, sx] = (delta/2)[sz, sx] = i delta sy
        t = 0.5 * DELTA * SZ
        r1 = commutator_chain(SX, t, 1)
        assert np.allclose(r1, 1j * DELTA * SY, atol=1e-14)

    def test_eigenbasis_identity(self):
        # (R_k)_mn = (E_m - E_n)^k J_mn
        rng = rng_for(18)
        ens = decompose(HermitianOperator(random_hermitian(rng, 6)), 1.0)
        jb = to_eigenbasis(random_complex(rng, 6), ens).matrix_elements
        gap = ens.eigenvalues[:, None] - ens.eigenvalues[None, :]
        h_diag = np.diag(ens.eigenvalues).astype(complex)
        for k in (1, 2, 4):
            chained = commutator_chain(jb, h_diag, k)
            assert np.allclose(chained, gap**k * jb, atol=1e-10)

    def test_order_cap(self):
        with pytest.raises(ValueError, match="chain order"):
            commutator_chain(SX, SZ, 9)


class TestSolveAdjoint:
    def test_zero_maps_to_zero(self):
        ens, _ = two_level()
        x = solve_adjoint(np.zeros((2, 2)), ens).matrix_elements
        assert np.array_equal(x, np.zeros((2, 2)))

    def test_nonzero_diagonal_rejected(self):
        ens, _ = two_level()
        with pytest.raises(AdjointUnsolvable, match="diagonal"):
            solve_adjoint(np.eye(2), ens)

    def test_two_level_reconstruction(self):
        ens, sx = two_level()
        x = solve_adjoint(sx, ens).matrix_elements
        gap = ens.eigenvalues[0] - ens.eigenvalues[1]
        assert x[0, 1] == pytest.approx(sx.matrix_elements[0, 1] / gap, rel=1e-14)
        h_diag = np.diag(ens.eigenvalues)
        recon = h_diag @ x - x @ h_diag  # [H, X] = J
        assert np.max(np.abs(recon - sx.matrix_elements)) <= 1e-12

    def test_random_reconstruction(self):
        rng = rng_for(19)
        ens = decompose(HermitianOperator(random_hermitian(rng, 7)), 1.0)
        j = random_complex(rng, 7)
        np.fill_diagonal(j, 0.0)
        x = solve_adjoint(j, ens).matrix_elements
        h_diag = np.diag(ens.eigenvalues)
        assert np.max(np.abs(h_diag @ x - x @ h_diag - j)) <= 1e-10 * np.max(np.abs(j))

    def test_degenerate_pair_with_weight_rejected(self):
        ens = decompose(HermitianOperator(np.diag([1.0, 1.0, 2.0])), 1.0)
        j = np.zeros((3, 3), dtype=complex)
        j[0, 1] = 1.0
        j[1, 0] = 1.0
        with pytest.raises(AdjointUnsolvable, match="degenerate"):
            solve_adjoint(j, ens)


class TestFunctionals:
    def test_f0_equals_inner_product(self):
        # F_0(J;J) = (J;J)
        rng = rng_for(20)
        ens = decompose(HermitianOperator(random_hermitian(rng, 6)), 1.2)
        jb = to_eigenbasis(random_complex(rng, 6), ens)
        f0 = functional_even(jb, ens, 0)
        assert f0.value_direct == pytest.approx(bd_inner(jb, jb, ens).real, rel=1e-13)

    def test_f1_equals_anticommutator_average(self):
        # F_1(J;J) = <J J^dag + J^dag J>
        rng = rng_for(21)
        ens = decompose(HermitianOperator(random_hermitian(rng, 6)), 0.8)
        jm = to_eigenbasis(random_complex(rng, 6), ens).matrix_elements
        f1 = functional_odd(jm, ens, 0)
        expected = np.sum(
            ens.weights * np.diagonal(jm @ jm.conj().T + jm.conj().T @ jm)
        ).real
        assert f1.value_direct == pytest.approx(expected, rel=1e-13)

    def test_two_level_closed_forms(self):
        ens, sx = two_level()
        assert functional_odd(sx, ens, 0).value_direct == pytest.approx(2.0, rel=1e-14)
        f2 = functional_even(sx, ens, 1)
        assert f2.value_direct == pytest.approx(2 * BETA * DELTA * TANH1, rel=1e-13)
        f3 = functional_odd(sx, ens, 1)
        assert f3.value_direct == pytest.approx(2 * (BETA * DELTA) ** 2, rel=1e-13)

    def test_commuting_higher_functionals_vanish(self):
        rng = rng_for(22)
        ens = decompose(HermitianOperator(random_hermitian(rng, 5)), 1.0)
        j = np.diag(rng.standard_normal(5)).astype(complex)
        assert functional_even(j, ens, 1).value_direct == pytest.approx(0.0, abs=1e-14)
        assert functional_odd(j, ens, 2).value_direct == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
    def test_route_agreement(self, beta):
        rng = rng_for(23)
        ens = decompose(HermitianOperator(random_hermitian(rng, 6)), beta)
        j = random_complex(rng, 6)
        jb = to_eigenbasis(j, ens)
        for n in range(4):
            fe = functional_even(jb, ens, n)
            assert rel(fe.value_rk, fe.value_direct) <= 1e-8
            if fe.value_commutator is not None:
                assert rel(fe.value_commutator, fe.value_direct) <= 1e-8
            fo = functional_odd(jb, ens, n)
            assert rel(fo.value_commutator, fo.value_direct) <= 1e-8

    def test_n0_commutator_route_needs_diag_free(self):
        rng = rng_for(24)
        ens = decompose(HermitianOperator(random_hermitian(rng, 6)), 1.0)
        j = random_complex(rng, 6)
        jb = to_eigenbasis(j, ens).matrix_elements
        assert functional_even(jb, ens, 0).value_commutator is None
        diag_free = jb.copy()
        np.fill_diagonal(diag_free, 0.0)
        f0 = functional_even(diag_free, ens, 0)
        assert f0.value_commutator is not None
        assert rel(f0.value_commutator, f0.value_direct) <= 1e-10

    def test_ordering_asymmetry_is_noise(self):
        rng = rng_for(25)
        ens = decompose(HermitianOperator(random_hermitian(rng, 6)), 1.0)
        jb = to_eigenbasis(random_complex(rng, 6), ens)
        for n in (1, 2):
            fe = functional_even(jb, ens, n)
            assert fe.ordering_asymmetry <= 1e-10 * max(1.0, abs(fe.value_direct))

    def test_order_cap(self):
        ens, sx = two_level()
        with pytest.raises(ValueError, match="functional order"):
            functional_even(sx, ens, 5)


class TestCothIdentity:
    def test_symmetrized_difference_identity(self):
        # (1/2) F_1 - F_0 = Z^-1 sum' |J_mn|^2 k(E_m,E_n) (X coth X - 1)
        rng = rng_for(26)
        for trial in range(5):
            dim = 5 + trial
            ens = decompose(HermitianOperator(random_hermitian(rng, dim)), 0.4 + trial)
            jb = to_eigenbasis(random_complex(rng, dim), ens).matrix_elements
            lhs = 0.5 * functional_odd(jb, ens, 0).value_direct - functional_even(
                jb, ens, 0
            ).value_direct
            rhs = 0.0
            e = ens.shifted_eigenvalues
            for m in range(dim):
                for n in range(dim):
                    if m == n:
                        continue
                    x_mn = 0.5 * ens.beta * (e[m] - e[n])
                    rhs += (
                        abs(jb[m, n]) ** 2
                        * duhamel_kernel(e[m], e[n], ens.beta)
                        * (xcothx(x_mn) - 1.0)
                    )
            rhs /= ens.z_shifted
            assert lhs == pytest.approx(rhs, rel=1e-10)


class TestFreeEnergy:
    def test_zero_hamiltonian(self):
        for dim, beta in ((2, 1.0), (5, 3.0)):
            f = free_energy(HermitianOperator(np.zeros((dim, dim))), beta)
            assert f == pytest.approx(-math.log(dim) / beta, rel=1e-14)

    def test_two_level_closed_form(self):
        f = free_energy(HermitianOperator(0.5 * DELTA * SZ), BETA)
        assert f == pytest.approx(-math.log(2 * math.cosh(X)) / BETA, rel=1e-14)

    def test_shift_identity(self):
        h = random_hermitian(rng_for(27), 6)
        c = 0.731
        f0 = free_energy(HermitianOperator(h), 2.0)
        f1 = free_energy(HermitianOperator(h + c * np.eye(6)), 2.0)
        assert f1 - f0 == pytest.approx(c, abs=1e-12)

    def test_large_beta_stable(self):
        f = free_energy(HermitianOperator(np.diag([-5.0, 5.0])), 1e3)
        assert f == pytest.approx(-5.0, rel=1e-12)


class TestSusceptibilityFd:
    def test_identity_perturbation_is_linear(self):
        t = HermitianOperator(random_hermitian(rng_for(28), 5))
        assert abs(susceptibility_fd(t, HermitianOperator(np.eye(5)), 2.0)) <= 1e-8

    def test_two_level_value(self):
        t = HermitianOperator(0.5 * DELTA * SZ)
        s = HermitianOperator(SX)
        assert susceptibility_fd(t, s, BETA) == pytest.approx(
            BETA * TANH1 / X, rel=1e-5
        )

    @pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
    def test_matches_duhamel_fluctuation(self, beta):
        rng = rng_for(29)
        t = HermitianOperator(random_hermitian(rng, 6))
        s = HermitianOperator(random_hermitian(rng, 6))
        ens = decompose(t, beta)
        target = beta * fluctuation(to_eigenbasis(s, ens), ens).duhamel
        assert susceptibility_fd(t, s, beta) == pytest.approx(target, rel=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            susceptibility_fd(
                HermitianOperator(np.eye(2)), HermitianOperator(np.eye(3)), 1.0
            )
