"""Hermitian-operator infrastructure shared by every other module.

Provides the validated operator types, the Gibbs eigendecomposition with
overflow-safe (min-shifted) Boltzmann weights, and the two scalar kernels
that appear in all spectral sums: the Duhamel difference quotient and
x*coth(x).
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

__all__ = [
    "HermitianOperator",
    "GibbsEnsemble",
    "ObservableInBasis",
    "decompose",
    "gibbs_weights",
    "duhamel_kernel",
    "xcothx",
    "to_eigenbasis",
    "as_matrix",
]

# Hermiticity tolerance, relative to max|entries|.
HERMITICITY_RTOL = 1e-12

# Coincident-eigenvalue threshold, scaled by max(1, |e_m|, |e_n|).
DEGENERACY_RTOL = 1e-12

# Reconstruction tolerance for U diag(E) U^dag = H.
RECONSTRUCTION_RTOL = 1e-10


def as_matrix(op) -> np.ndarray:
    """Coerce an operator-like object to a complex square ndarray."""
    if isinstance(op, HermitianOperator):
        return op.entries
    if isinstance(op, ObservableInBasis):
        return op.matrix_elements
    mat = np.asarray(op, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    return mat


class HermitianOperator:
    """Dense complex square matrix validated to be Hermitian.

    Hermiticity is enforced within ``HERMITICITY_RTOL * max|entries|``; the
    stored matrix is exactly symmetrized so downstream eigensolvers always
    see H == H^dag.
    """

    __slots__ = ("entries", "dim")

    def __init__(self, entries):
        mat = np.array(entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        if mat.shape[0] < 1:
            raise ValueError("operator dimension must be at least 1")
        if not np.all(np.isfinite(mat)):
            raise ValueError("operator entries must be finite")
        scale = float(np.max(np.abs(mat)))
        deviation = float(np.max(np.abs(mat - mat.conj().T)))
        if deviation > HERMITICITY_RTOL * scale:
            raise ValueError(
                "matrix is not Hermitian: max|M - M^dag| = "
                f"{deviation:.3e} > {HERMITICITY_RTOL:.0e} * max|M| = "
                f"{HERMITICITY_RTOL * scale:.3e}"
            )
        self.entries = 0.5 * (mat + mat.conj().T)
        self.dim = int(mat.shape[0])

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


class ObservableInBasis:
    """Matrix elements A_mn = <m|A|n> of an observable in an ensemble eigenbasis."""

    __slots__ = ("matrix_elements", "dim")

    def __init__(self, matrix_elements):
        mat = np.array(matrix_elements, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("matrix elements must be finite")
        self.matrix_elements = mat
        self.dim = int(mat.shape[0])

    def __repr__(self):
        return f"ObservableInBasis(dim={self.dim})"


class GibbsEnsemble:
    """Eigendecomposition of a Hamiltonian plus its Gibbs weights.

    eigenvalues are ascending, eigenvectors are the unitary matrix whose
    columns are |n>, weights are exp(-beta (E_n - E_min)) / Z_shifted and
    logZ_shifted = ln sum_n exp(-beta (E_n - E_min)).  All Boltzmann
    factors are taken after the min-eigenvalue shift so beta up to ~1e3
    cannot overflow.  Instances are immutable; the cached grids below are
    pure functions of the constructor arguments.
    """

    def __init__(self, eigenvalues, eigenvectors, beta):
        evals = np.array(eigenvalues, dtype=float)
        vecs = np.array(eigenvectors, dtype=complex)
        beta = float(beta)
        if not (np.isfinite(beta) and beta > 0):
            raise ValueError(f"beta must be positive and finite, got {beta}")
        if evals.ndim != 1 or not np.all(np.isfinite(evals)):
            raise ValueError("eigenvalues must be a finite 1-d array")
        if np.any(np.diff(evals) < 0):
            raise ValueError("eigenvalues must be sorted ascending")
        dim = evals.shape[0]
        if vecs.shape != (dim, dim):
            raise ValueError(
                f"eigenvector matrix shape {vecs.shape} does not match dim {dim}"
            )
        gram_dev = np.max(np.abs(vecs.conj().T @ vecs - np.eye(dim)))
        if gram_dev > 1e-10:
            raise ValueError(
                f"eigenvectors are not unitary: max|U^dag U - I| = {gram_dev:.3e}"
            )
        self.eigenvalues = evals
        self.eigenvectors = vecs
        self.beta = beta
        self.dim = dim
        shifted = evals - evals[0]
        boltzmann = np.exp(-beta * shifted)
        z = float(np.sum(boltzmann))
        self.weights = boltzmann / z
        self.logZ_shifted = float(np.log(z))

    def average(self, matrix_in_eigenbasis) -> complex:
        """Gibbs average sum_n rho_n M_nn of an eigenbasis matrix."""
        mat = as_matrix(matrix_in_eigenbasis)
        return complex(np.sum(self.weights * np.diagonal(mat)))

    @cached_property
    def shifted_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues - self.eigenvalues[0]

    @cached_property
    def boltzmann_shifted(self) -> np.ndarray:
        """exp(-beta (E_n - E_min)); equals weights * z_shifted."""
        return np.exp(-self.beta * self.shifted_eigenvalues)

    @cached_property
    def z_shifted(self) -> float:
        return float(np.sum(self.boltzmann_shifted))

    @cached_property
    def gap_matrix(self) -> np.ndarray:
        """E_m - E_n, rows indexed by m."""
        return self.eigenvalues[:, None] - self.eigenvalues[None, :]

    @cached_property
    def kernel_matrix(self) -> np.ndarray:
        """Duhamel kernel on shifted energies: K[m, n] = k(E_m - E0, E_n - E0).

        Evaluated as exp(-beta*(e_m+e_n)/2) * sinh(u)/u for small gaps
        (u = beta (e_n - e_m)/2), which is cancellation-free and supplies the
        coincident-eigenvalue limit exp(-beta*e) automatically, and as the
        plain difference quotient otherwise (overflow-free since the shifted
        exponentials never exceed 1).
        """
        e = self.shifted_eigenvalues
        em = e[:, None]
        en = e[None, :]
        u = 0.5 * self.beta * (en - em)
        absu = np.abs(u)
        small = absu <= 0.5
        tiny = absu <= 1e-30
        u_div = np.where(tiny, 1.0, u)
        sinhc = np.where(
            tiny, 1.0 + u * u / 6.0, np.sinh(np.where(small, u, 0.0)) / u_div
        )
        k_small = np.exp(-0.5 * self.beta * (em + en)) * sinhc
        bm = np.exp(-self.beta * em)
        bn = np.exp(-self.beta * en)
        k_big = (bm - bn) / np.where(small, 1.0, 2.0 * u)
        return np.where(small, k_small, k_big)

    def __repr__(self):
        return f"GibbsEnsemble(dim={self.dim}, beta={self.beta})"


def gibbs_weights(eigenvalues, beta) -> np.ndarray:
    """Normalized Boltzmann weights exp(-beta E_n)/Z via the min-shift."""
    evals = np.asarray(eigenvalues, dtype=float)
    beta = float(beta)
    if not (np.isfinite(beta) and beta > 0):
        raise ValueError(f"beta must be positive and finite, got {beta}")
    if not np.all(np.isfinite(evals)):
        raise ValueError("eigenvalues must be finite")
    shifted = evals - np.min(evals)
    w = np.exp(-beta * shifted)
    return w / np.sum(w)


def decompose(H, beta) -> GibbsEnsemble:
    """Eigendecompose H and attach Gibbs weights at inverse temperature beta.

    Raises ValueError for non-Hermitian input; eigensolver failures surface
    as numpy.linalg.LinAlgError, and a failed reconstruction
    U diag(E) U^dag = H (rtol 1e-10) raises ArithmeticError.
    """
    op = H if isinstance(H, HermitianOperator) else HermitianOperator(as_matrix(H))
    evals, vecs = np.linalg.eigh(op.entries)
    order = np.argsort(evals, kind="stable")
    evals = evals[order]
    vecs = vecs[:, order]
    scale = max(float(np.max(np.abs(op.entries))), 1e-300)
    recon_dev = float(np.max(np.abs((vecs * evals) @ vecs.conj().T - op.entries)))
    if recon_dev > RECONSTRUCTION_RTOL * scale:
        raise ArithmeticError(
            f"eigendecomposition failed to reconstruct H: dev {recon_dev:.3e}"
        )
    return GibbsEnsemble(evals, vecs, beta)


def duhamel_kernel(e_m: float, e_n: float, beta: float) -> float:
    """(exp(-beta e_m) - exp(-beta e_n)) / (beta (e_n - e_m)).

    Symmetric in (e_m, e_n) and strictly positive; at coincident arguments
    (|e_m - e_n| <= 1e-12 * max(1, |e_m|, |e_n|)) it returns the limit
    exp(-beta e).  The value is unnormalized: callers divide by Z.
    """
    beta = float(beta)
    e_m = float(e_m)
    e_n = float(e_n)
    scale = max(1.0, abs(e_m), abs(e_n))
    if abs(e_m - e_n) <= DEGENERACY_RTOL * scale:
        return float(np.exp(-0.5 * beta * (e_m + e_n)))
    u = 0.5 * beta * (e_n - e_m)
    if abs(u) <= 0.5:
        return float(np.exp(-0.5 * beta * (e_m + e_n)) * np.sinh(u) / u)
    return float((np.exp(-beta * e_m) - np.exp(-beta * e_n)) / (2.0 * u))


def xcothx(x: float) -> float:
    """x*coth(x), extended by its limit 1 at x = 0.

    Even, >= 1 everywhere, and asymptotically |x|; a series branch handles
    |x| < 1e-4 where the ratio would lose accuracy.
    """
    ax = abs(float(x))
    if ax < 1e-4:
        x2 = ax * ax
        return 1.0 + x2 / 3.0 - x2 * x2 / 45.0
    return ax / np.tanh(ax)


def xcothx_grid(x: np.ndarray) -> np.ndarray:
    """Vectorized x*coth(x) with the same series branch as ``xcothx``."""
    ax = np.abs(np.asarray(x, dtype=float))
    small = ax < 1e-4
    x2 = ax * ax
    series = 1.0 + x2 / 3.0 - x2 * x2 / 45.0
    ratio = ax / np.tanh(np.where(small, 1.0, ax))
    return np.where(small, series, ratio)


def to_eigenbasis(A, ens: GibbsEnsemble) -> ObservableInBasis:
    """Matrix elements U^dag A U of A in the ensemble eigenbasis."""
    mat = as_matrix(A)
    if mat.shape != (ens.dim, ens.dim):
        raise ValueError(
            f"operator shape {mat.shape} does not match ensemble dim {ens.dim}"
        )
    u = ens.eigenvectors
    return ObservableInBasis(u.conj().T @ mat @ u)
