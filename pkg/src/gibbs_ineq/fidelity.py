"""Uhlmann fidelity and fidelity susceptibility on Gibbs families.

For the one-parameter family rho(h) = Z(h)^-1 exp[-beta(T - hS)] the
susceptibility at h = x is computed by four routes:

* spectral form 1:  (1/2) sum_mn |<m|rho'(x)|n>|^2 / (rho_m + rho_n)
* spectral form 2:  (beta^2/8) sum_{m != n} [(rho_n - rho_m)/X_mn]
                    |S_nm|^2 / (X_mn coth X_mn)
                    + (beta^2/4) <(dS^d)^2>,  X_mn = beta(E_m - E_n)/2
* one-sided finite difference of -2 ln F(rho(0), rho(h)) / h^2
* symmetric two-sided finite difference around x.

Forms 1 and 2 are the same sum term by term (the coth identity converts
one into the other), so their agreement checks the spectral algebra, while
the finite differences check the derivation against the raw definition.
The quadratic-expansion operators of the two-sided route (X with vanishing
diagonal, Tr Y) and the sandwich bounds

    upper = (beta^2/4)(dS; dS)_0,
    lower = upper - (beta^3/48) <[[S, T], S]>_0

complete the verification surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .duhamel import bd_inner, fluctuation
from .spectral import (
    GibbsEnsemble,
    HermitianOperator,
    as_matrix,
    decompose,
    to_eigenbasis,
    xcothx_grid,
)

__all__ = [
    "DensityMatrix",
    "FidelityReport",
    "ExpansionCheck",
    "ChiBounds",
    "ConditioningError",
    "psd_sqrt",
    "uhlmann_fidelity",
    "gibbs_state",
    "rho_prime",
    "chi_f_spectral",
    "chi_f_fd_one_sided",
    "chi_f_fd_two_sided",
    "expansion_check",
    "chi_f_bounds",
    "full_report",
]

STATE_ATOL = 1e-12
PSD_FLOOR = -1e-8  # eigenvalues below this are a hard not-a-state error

# Below this smallest weight, the (rho_m + rho_n)-denominator route is
# flagged and form 2 (energy-ratio denominators only) is authoritative.
UNDERFLOW_FLOOR = 1e-300


class ConditioningError(ArithmeticError):
    """A finite-difference fidelity evaluation lost all significant digits
    (fidelity underflowed or came back non-finite)."""


class DensityMatrix:
    """Trace-one, PSD-up-to-noise Hermitian matrix."""

    __slots__ = ("entries", "dim")

    def __init__(self, entries):
        mat = np.array(entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("density matrix entries must be finite")
        herm_dev = float(np.max(np.abs(mat - mat.conj().T)))
        if herm_dev > STATE_ATOL * max(1.0, float(np.max(np.abs(mat)))):
            raise ValueError(f"density matrix is not Hermitian: dev {herm_dev:.3e}")
        mat = 0.5 * (mat + mat.conj().T)
        trace = complex(np.trace(mat))
        if abs(trace - 1.0) > STATE_ATOL:
            raise ValueError(f"density matrix trace {trace} is not 1")
        min_eig = float(np.linalg.eigvalsh(mat)[0])
        if min_eig < -STATE_ATOL:
            raise ValueError(f"density matrix has eigenvalue {min_eig:.3e} < -1e-12")
        self.entries = mat
        self.dim = int(mat.shape[0])

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def _as_state_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return as_matrix(rho)


def psd_sqrt(rho) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-1e-8, 0) are clamped to 0 (rounding noise); anything
    below -1e-8 is rejected as not a state.
    """
    mat = _as_state_matrix(rho)
    evals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    if float(evals[0]) < PSD_FLOOR:
        raise ValueError(f"not a state: eigenvalue {evals[0]:.3e} < {PSD_FLOOR}")
    clamped = np.maximum(evals, 0.0)
    return (vecs * np.sqrt(clamped)) @ vecs.conj().T


def uhlmann_fidelity(rho1, rho2) -> float:
    """F(rho1, rho2) = Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)).

    Evaluated as the nuclear norm ||sqrt(rho2) sqrt(rho1)||_1: the singular
    values of B = sqrt(rho2) sqrt(rho1) are exactly the eigenvalues of
    sqrt(B^dag B) = sqrt(sqrt(rho1) rho2 sqrt(rho1)), and an SVD delivers
    them with O(eps) absolute error.  Forming the triple product and taking
    clamped square roots of its eigenvalues instead loses half the mantissa
    on every near-null mode, which the finite-difference susceptibility
    oracles (signal 1 - F ~ chi h^2 / 2) cannot afford at low temperature.
    """
    m1 = _as_state_matrix(rho1)
    m2 = _as_state_matrix(rho2)
    if m1.shape != m2.shape:
        raise ValueError(f"dimension mismatch: {m1.shape} vs {m2.shape}")
    b = psd_sqrt(m2) @ psd_sqrt(m1)
    return float(np.sum(np.linalg.svd(b, compute_uv=False)))


def gibbs_state(T, S, h: float, beta: float) -> DensityMatrix:
    """rho(h) = Z(h)^-1 exp[-beta(T - hS)] by eigendecomposition with min-shift."""
    t_mat = as_matrix(T)
    s_mat = as_matrix(S)
    if t_mat.shape != s_mat.shape:
        raise ValueError(f"dimension mismatch: T {t_mat.shape} vs S {s_mat.shape}")
    ens = decompose(HermitianOperator(t_mat - float(h) * s_mat), beta)
    rho = (ens.eigenvectors * ens.weights) @ ens.eigenvectors.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def _rho_prime_elements(s_basis: np.ndarray, ens: GibbsEnsemble) -> np.ndarray:
    """Matrix elements of d rho/dh in the instantaneous eigenbasis.

    Off-diagonal: S_mn (rho_n - rho_m)/(E_m - E_n) = beta S_mn K_mn / Z
    with the Duhamel kernel K, so the coincident-eigenvalue limit
    beta rho S_mn is built in; diagonal: beta rho_n (S_nn - <S>).
    """
    beta = ens.beta
    out = beta * s_basis * ens.kernel_matrix / ens.z_shifted
    s_diag = np.real(np.diagonal(s_basis))
    s_mean = float(np.sum(ens.weights * s_diag))
    np.fill_diagonal(out, beta * ens.weights * (s_diag - s_mean))
    return out


def rho_prime(T, S, beta: float, x: float = 0.0) -> np.ndarray:
    """d rho(h)/dh at h = x, in the eigenbasis of H(x) = T - xS.

    The trace vanishes by construction (normalization of rho(h)).
    """
    t_mat = as_matrix(T)
    s_mat = as_matrix(S)
    ens = decompose(HermitianOperator(t_mat - float(x) * s_mat), beta)
    s_basis = to_eigenbasis(s_mat, ens).matrix_elements
    return _rho_prime_elements(s_basis, ens)


@dataclass(frozen=True)
class FidelityReport:
    """chi_F by every route plus the sandwich bounds.

    chi_spectral_form2 == chi_quantum_term + chi_classical_term by
    construction; fields not computed by the producing call are None.
    """

    beta: float
    chi_spectral_form1: float
    chi_spectral_form2: float
    chi_quantum_term: float
    chi_classical_term: float
    chi_fd_one_sided: float | None = None
    chi_fd_two_sided: float | None = None
    bound_lower: float | None = None
    bound_upper: float | None = None
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "chi_spectral_form1": self.chi_spectral_form1,
            "chi_spectral_form2": self.chi_spectral_form2,
            "chi_quantum_term": self.chi_quantum_term,
            "chi_classical_term": self.chi_classical_term,
            "chi_fd_one_sided": self.chi_fd_one_sided,
            "chi_fd_two_sided": self.chi_fd_two_sided,
            "bound_lower": self.bound_lower,
            "bound_upper": self.bound_upper,
            "flags": list(self.flags),
        }


def chi_f_spectral(T, S, beta: float, x: float = 0.0) -> FidelityReport:
    """Both spectral forms of chi_F at the point h = x.

    Everything is evaluated in the instantaneous eigenbasis of H(x).
    Degenerate off-diagonal pairs enter form 2 through the X -> 0 limit
    (x coth x -> 1), merging into the classical-like contribution; deep
    low-temperature underflow of the (rho_m + rho_n) denominators flags
    form 2 as authoritative.
    """
    t_mat = as_matrix(T)
    s_mat = as_matrix(S)
    ens = decompose(HermitianOperator(t_mat - float(x) * s_mat), beta)
    s_basis = to_eigenbasis(s_mat, ens).matrix_elements
    beta = ens.beta
    w = ens.weights
    flags: list[str] = []

    rp = _rho_prime_elements(s_basis, ens)
    denom = w[:, None] + w[None, :]
    live = denom > 0.0
    if float(np.min(w)) < UNDERFLOW_FLOOR:
        flags.append("low-temperature-underflow: form2 authoritative")
    rp2 = rp.real * rp.real + rp.imag * rp.imag
    form1 = 0.5 * float(np.sum(rp2[live] / denom[live]))

    off_diag = ~np.eye(ens.dim, dtype=bool)
    e_scale = max(1.0, float(np.max(np.abs(ens.eigenvalues))))
    degenerate_pairs = off_diag & (np.abs(ens.gap_matrix) <= 1e-12 * e_scale)
    if np.any(degenerate_pairs):
        flags.append("degenerate-limit applied")
    # (rho_n - rho_m)/X_mn = 2 K_mn / Z exactly, limits included.
    ratio = 2.0 * ens.kernel_matrix / ens.z_shifted
    xgrid = 0.5 * beta * ens.gap_matrix
    s2 = s_basis.real * s_basis.real + s_basis.imag * s_basis.imag
    quantum = (beta * beta / 8.0) * float(
        np.sum((ratio * s2 / xcothx_grid(xgrid))[off_diag])
    )
    s_diag = np.real(np.diagonal(s_basis))
    s_mean = float(np.sum(w * s_diag))
    classical = (beta * beta / 4.0) * float(np.sum(w * (s_diag - s_mean) ** 2))
    return FidelityReport(
        beta=beta,
        chi_spectral_form1=form1,
        chi_spectral_form2=quantum + classical,
        chi_quantum_term=quantum,
        chi_classical_term=classical,
        flags=tuple(flags),
    )


def _default_fd_step(S, beta: float) -> float:
    return 1e-3 / (1.0 + float(beta) * float(np.linalg.norm(as_matrix(S), 2)))


def _log_fidelity_rate(f: float, h: float) -> float:
    if not np.isfinite(f) or f <= 0.0:
        raise ConditioningError(f"fidelity {f} leaves -2 ln F / h^2 undefined")
    return -2.0 * float(np.log(f)) / (h * h)


def chi_f_fd_one_sided(T, S, beta: float, h: float | None = None) -> float:
    """chi_F as the h -> 0 limit of -2 ln F(rho(0), rho(h)) / h^2.

    One Richardson step (leading error is O(h) for the one-sided quotient)
    over h and h/2; the log form is used instead of the bare second
    difference of F for noise robustness, the two agree in the limit.
    """
    if h is None:
        h = _default_fd_step(S, beta)
    h = float(h)
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"step h must be positive and finite, got {h}")
    rho0 = gibbs_state(T, S, 0.0, beta)

    def rate(step: float) -> float:
        f = uhlmann_fidelity(rho0, gibbs_state(T, S, step, beta))
        return _log_fidelity_rate(f, step)

    return 2.0 * rate(0.5 * h) - rate(h)


def chi_f_fd_two_sided(
    T, S, beta: float, h: float | None = None, x: float = 0.0
) -> float:
    """chi_F^(2) as the h -> 0 limit of -2 ln F(rho(x-h/2), rho(x+h/2)) / h^2.

    The quotient is even in h, so one Richardson step removes the O(h^2)
    term and leaves O(h^4).
    """
    if h is None:
        h = _default_fd_step(S, beta)
    h = float(h)
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"step h must be positive and finite, got {h}")
    x = float(x)

    def rate(step: float) -> float:
        f = uhlmann_fidelity(
            gibbs_state(T, S, x - 0.5 * step, beta),
            gibbs_state(T, S, x + 0.5 * step, beta),
        )
        return _log_fidelity_rate(f, step)

    return (4.0 * rate(0.5 * h) - rate(h)) / 3.0


def _expansion_operators(rp: np.ndarray, w: np.ndarray, y: float):
    """First- and second-order expansion pieces of the fidelity square root.

    A_mn = y rho'_mn / (sqrt(rho_m) + sqrt(rho_n))          (order y)
    X_mn = -y rho'_mn (sqrt(rho_m) - sqrt(rho_n))^2 / (rho_m + rho_n)
    Tr Y = -y^2 sum_mn |rho'_nm|^2 / (rho_m + rho_n)        (order y^2)

    X has an exactly vanishing diagonal, hence Tr X = 0.
    """
    sq = np.sqrt(w)
    sq_sum = sq[:, None] + sq[None, :]
    a_op = y * rp / sq_sum
    denom = w[:, None] + w[None, :]
    x_op = -y * rp * (sq[:, None] - sq[None, :]) ** 2 / denom
    rp2 = rp.real * rp.real + rp.imag * rp.imag
    trace_y = -y * y * float(np.sum(rp2 / denom))
    return a_op, x_op, trace_y


@dataclass(frozen=True)
class ExpansionCheck:
    """Quadratic-expansion verification record at one (x, y)."""

    trace_x: float
    trace_y: float
    fidelity_direct: float
    fidelity_expansion: float
    residual_order: float


def expansion_check(
    T, S, beta: float, x: float = 0.0, y: float = 1e-2
) -> ExpansionCheck:
    """Compare F(rho(x-y), rho(x+y)) against its expansion 1 + Tr X + Tr Y.

    Tr X vanishes identically; the residual order p in
    |F_direct - F_expansion| ~ y^p is estimated from y and y/2 and should be
    >= 3 (the expansion is even in y, so p ~ 4 in practice).
    """
    t_mat = as_matrix(T)
    s_mat = as_matrix(S)
    y = float(y)
    if not (np.isfinite(y) and y > 0):
        raise ValueError(f"y must be positive and finite, got {y}")
    ens = decompose(HermitianOperator(t_mat - float(x) * s_mat), beta)
    s_basis = to_eigenbasis(s_mat, ens).matrix_elements
    rp = _rho_prime_elements(s_basis, ens)
    _, x_op, trace_y = _expansion_operators(rp, ens.weights, y)
    trace_x = float(np.trace(x_op).real)

    def direct(step: float) -> float:
        return uhlmann_fidelity(
            gibbs_state(t_mat, s_mat, x - step, beta),
            gibbs_state(t_mat, s_mat, x + step, beta),
        )

    f_direct = direct(y)
    f_expansion = 1.0 + trace_y
    res_coarse = abs(f_direct - f_expansion)
    # Tr Y scales exactly as y^2: reuse it at y/2.
    res_fine = abs(direct(0.5 * y) - (1.0 + 0.25 * trace_y))
    if res_fine == 0.0 or res_coarse == 0.0:
        order = float("inf")
    else:
        order = float(np.log2(res_coarse / res_fine))
    return ExpansionCheck(
        trace_x=trace_x,
        trace_y=trace_y,
        fidelity_direct=f_direct,
        fidelity_expansion=f_expansion,
        residual_order=order,
    )


@dataclass(frozen=True)
class ChiBounds:
    lower: float
    upper: float


def chi_f_bounds(T, S, beta: float) -> ChiBounds:
    """Sandwich bounds on chi_F in the h = 0 ensemble.

    upper = (beta^2/4)(dS; dS)_0 and lower = upper - (beta^3/48)<[[S,T],S]>_0,
    the double commutator taken by explicit matrix products so the route is
    independent of the spectral susceptibility formulas.  lower == upper ==
    chi_F exactly when [T, S] = 0.
    """
    t_mat = as_matrix(T)
    s_mat = as_matrix(S)
    if t_mat.shape != s_mat.shape:
        raise ValueError(f"dimension mismatch: T {t_mat.shape} vs S {s_mat.shape}")
    ens = decompose(HermitianOperator(t_mat), beta)
    s_basis = to_eigenbasis(s_mat, ens)
    beta = ens.beta
    upper = 0.25 * beta * beta * fluctuation(s_basis, ens).duhamel
    c1 = s_mat @ t_mat - t_mat @ s_mat
    c2 = c1 @ s_mat - s_mat @ c1
    ddc = ens.average(to_eigenbasis(c2, ens)).real
    lower = upper - beta**3 / 48.0 * ddc
    return ChiBounds(lower=float(lower), upper=float(upper))


def full_report(T, S, beta: float, x: float = 0.0) -> FidelityReport:
    """Assemble every chi_F route and the bounds into one report.

    For x != 0 the bounds are evaluated in the H(x) ensemble (the
    derivation is pointwise in the base Hamiltonian) and the one-sided
    finite difference, defined only at h = 0, is left as None.
    """
    spectral = chi_f_spectral(T, S, beta, x)
    two_sided = chi_f_fd_two_sided(T, S, beta, x=x)
    if x == 0.0:
        one_sided = chi_f_fd_one_sided(T, S, beta)
        bounds = chi_f_bounds(T, S, beta)
    else:
        one_sided = None
        t_shift = as_matrix(T) - float(x) * as_matrix(S)
        bounds = chi_f_bounds(HermitianOperator(t_shift), S, beta)
    return FidelityReport(
        beta=spectral.beta,
        chi_spectral_form1=spectral.chi_spectral_form1,
        chi_spectral_form2=spectral.chi_spectral_form2,
        chi_quantum_term=spectral.chi_quantum_term,
        chi_classical_term=spectral.chi_classical_term,
        chi_fd_one_sided=one_sided,
        chi_fd_two_sided=two_sided,
        bound_lower=bounds.lower,
        bound_upper=bounds.upper,
        flags=spectral.flags,
    )
