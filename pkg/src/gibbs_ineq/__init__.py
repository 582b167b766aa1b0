"""Exact-diagonalization checks of Duhamel-inner-product inequality chains
and fidelity-susceptibility bounds on finite quantum systems."""

from .spectral import (
    GibbsEnsemble,
    HermitianOperator,
    ObservableInBasis,
    decompose,
    duhamel_kernel,
    gibbs_weights,
    to_eigenbasis,
    xcothx,
)
from .duhamel import (
    AdjointUnsolvable,
    FluctuationTriple,
    FunctionalValue,
    SpectralWeight,
    bd_inner,
    bd_inner_quadrature,
    commutator_chain,
    fluctuation,
    free_energy,
    functional_direct,
    functional_even,
    functional_odd,
    solve_adjoint,
    spectral_sum,
    susceptibility_fd,
)
from .inequalities import (
    FAMILY_NAMES,
    InequalityReport,
    SuiteResult,
    check_bogoliubov_jr,
    check_bpr,
    check_bpr_gen,
    check_ginibre,
    check_ginibre_gen,
    check_harris,
    check_harris_gen,
    check_plechko,
    check_plechko_gen,
    run_suite,
)
from .fidelity import (
    ChiBounds,
    ConditioningError,
    DensityMatrix,
    ExpansionCheck,
    FidelityReport,
    chi_f_bounds,
    chi_f_fd_one_sided,
    chi_f_fd_two_sided,
    chi_f_spectral,
    expansion_check,
    full_report,
    gibbs_state,
    psd_sqrt,
    rho_prime,
    uhlmann_fidelity,
)
from .models import (
    ModelSpec,
    build_pair,
    dicke_truncated,
    ising_chain,
    make_spec,
    model_catalog,
    random_pair,
    single_spin,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
