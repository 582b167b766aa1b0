"""Two-sided inequality chains on quadratic fluctuations.

Classical checks (harris, ginibre, bogoliubov_jr, plechko, bpr) evaluate
their commutator sides through explicit operator products and Gibbs
averages; the generalized families (gen_*) evaluate everything through the
spectral functionals F_n.  The two code paths are deliberately disjoint so
that the specialization checks gen_*(n=0, k=1) == classical are a real
cross-validation.

Every check returns an InequalityReport with the chain values, the slacks,
and a pass verdict under the rule

    pass  <=>  every slack >= -tol * scale,   scale = max(1, |lhs|, |rhs|),

since the inequalities are exact in real arithmetic and only floating-point
noise can drive a slack negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .duhamel import (
    SpectralWeight,
    bd_inner,
    commutator_chain,
    functional_direct,
    functional_even,
    spectral_sum,
)
from .spectral import GibbsEnsemble, decompose, to_eigenbasis

__all__ = [
    "InequalityReport",
    "FamilyAggregate",
    "SuiteResult",
    "DEFAULT_TOL",
    "FAMILY_NAMES",
    "check_harris",
    "check_ginibre",
    "check_bogoliubov_jr",
    "check_plechko",
    "check_bpr",
    "check_harris_gen",
    "check_plechko_gen",
    "check_ginibre_gen",
    "check_bpr_gen",
    "evaluate_families",
    "run_suite",
    "SuiteAggregator",
]

DEFAULT_TOL = 1e-10

MAX_GEN_ORDER = 3  # n cap; F-indices grow as 2(2nk+n+k)+1 and overflow beyond
MAX_GEN_K = 3

FAMILY_NAMES = (
    "harris",
    "ginibre",
    "bogoliubov_jr",
    "plechko",
    "bpr",
    "gen_harris",
    "gen_plechko",
    "gen_ginibre",
    "gen_bpr",
)

DEFAULT_NS = (0, 1, 2)
DEFAULT_KS = (1, 2, 3)
DEFAULT_PS = (1.25, 1.5, 2.0, 3.0)


@dataclass(frozen=True)
class InequalityReport:
    """Evaluated chain lhs <= mid <= rhs (mid is None for two-part chains)."""

    name: str
    params: dict
    lhs: float
    mid: float | None
    rhs: float
    slack_left: float | None
    slack_right: float
    passed: bool
    tol: float

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.lhs), abs(self.rhs))

    @property
    def normalized_slack(self) -> float:
        """Most negative slack divided by scale; >= 0 means clean pass."""
        slacks = [self.slack_right]
        if self.slack_left is not None:
            slacks.append(self.slack_left)
        return min(slacks) / self.scale

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "lhs": self.lhs,
            "mid": self.mid,
            "rhs": self.rhs,
            "slack_left": self.slack_left,
            "slack_right": self.slack_right,
            "pass": self.passed,
            "tol": self.tol,
        }


def _report(name, params, lhs, rhs, mid=None, tol=DEFAULT_TOL) -> InequalityReport:
    lhs = float(lhs)
    rhs = float(rhs)
    scale = max(1.0, abs(lhs), abs(rhs))
    if mid is None:
        slack_left = None
        slack_right = rhs - lhs
        passed = slack_right >= -tol * scale
    else:
        mid = float(mid)
        slack_left = mid - lhs
        slack_right = rhs - mid
        passed = slack_left >= -tol * scale and slack_right >= -tol * scale
    return InequalityReport(
        name=name,
        params=dict(params),
        lhs=lhs,
        mid=mid,
        rhs=rhs,
        slack_left=slack_left,
        slack_right=slack_right,
        passed=passed,
        tol=tol,
    )


def _operator_parts(J, ens: GibbsEnsemble):
    """Shared operator-route pieces: (J;J), (1/2)<JJ^dag + J^dag J>, J, diag(E)."""
    jm = J.matrix_elements if hasattr(J, "matrix_elements") else np.asarray(J, complex)
    jj = bd_inner(jm, jm, ens).real
    h_diag = np.diag(ens.eigenvalues).astype(complex)
    sym = 0.5 * ens.average(jm @ jm.conj().T + jm.conj().T @ jm).real
    return jj, sym, jm, h_diag


def _double_commutator_average(jm, h_diag, ens) -> float:
    """<[[J^dag, H], J]> by matrix products (= F_2 / beta)."""
    c1 = jm.conj().T @ h_diag - h_diag @ jm.conj().T
    c2 = c1 @ jm - jm @ c1
    return ens.average(c2).real


def check_harris(J, ens: GibbsEnsemble, tol: float = DEFAULT_TOL) -> InequalityReport:
    """(J;J) <= (1/2)<JJ^dag + J^dag J> <= (J;J) + (beta/12) <[[J^dag,H],J]>."""
    jj, sym, jm, h_diag = _operator_parts(J, ens)
    rhs = jj + ens.beta / 12.0 * _double_commutator_average(jm, h_diag, ens)
    return _report("harris", {"beta": ens.beta}, jj, rhs, mid=sym, tol=tol)


def check_ginibre(J, ens: GibbsEnsemble, tol: float = DEFAULT_TOL) -> InequalityReport:
    """Harris chain with rhs (J;J) + (1/2){(J;J) beta <[[J^dag,H],J]>}^(1/2)."""
    jj, sym, jm, h_diag = _operator_parts(J, ens)
    ddc = _double_commutator_average(jm, h_diag, ens)
    rhs = jj + 0.5 * np.sqrt(max(jj * ens.beta * ddc, 0.0))
    return _report("ginibre", {"beta": ens.beta}, jj, rhs, mid=sym, tol=tol)


def check_bogoliubov_jr(
    J, ens: GibbsEnsemble, tol: float = DEFAULT_TOL
) -> InequalityReport:
    """(1/2)<JJ^dag + J^dag J> <= (J;J)
    + (1/2)[(J;J) beta]^(2/3) <[J^dag,H][H,J] + [H,J][J^dag,H]>^(1/3)."""
    jj, sym, jm, h_diag = _operator_parts(J, ens)
    g1 = jm.conj().T @ h_diag - h_diag @ jm.conj().T  # [J^dag, H]
    g2 = h_diag @ jm - jm @ h_diag  # [H, J]
    anticomm = ens.average(g1 @ g2 + g2 @ g1).real
    rhs = jj + 0.5 * np.cbrt(max(jj * ens.beta, 0.0) ** 2 * max(anticomm, 0.0))
    return _report("bogoliubov_jr", {"beta": ens.beta}, sym, rhs, tol=tol)


def _check_k(k: int) -> int:
    k = int(k)
    if not 1 <= k <= MAX_GEN_K:
        raise ValueError(f"k must lie in [1, {MAX_GEN_K}], got {k}")
    return k


def _check_n(n: int) -> int:
    n = int(n)
    if not 0 <= n <= MAX_GEN_ORDER:
        raise ValueError(f"n must lie in [0, {MAX_GEN_ORDER}], got {n}")
    return n


def check_plechko(
    J, ens: GibbsEnsemble, k: int = 1, tol: float = DEFAULT_TOL
) -> InequalityReport:
    """(J;J) <= (1/2)<JJ^dag+J^dag J> <= (J;J)
    + (1/2)(J;J)^((2k-1)/2k) [beta^2k (R_k;R_k)]^(1/2k)."""
    k = _check_k(k)
    jj, sym, jm, h_diag = _operator_parts(J, ens)
    r_k = commutator_chain(jm, h_diag, k)
    rkk = max(bd_inner(r_k, r_k, ens).real, 0.0)
    rhs = jj + 0.5 * max(jj, 0.0) ** ((2 * k - 1) / (2 * k)) * (
        ens.beta ** (2 * k) * rkk
    ) ** (1.0 / (2 * k))
    return _report("plechko", {"k": k, "beta": ens.beta}, jj, rhs, mid=sym, tol=tol)


def check_bpr(
    J, ens: GibbsEnsemble, k: int = 1, tol: float = DEFAULT_TOL
) -> InequalityReport:
    """(1/2)<JJ^dag+J^dag J> <= (J;J)
    + (1/2)(J;J)^(2k/(2k+1)) [beta^2k <R_k R_k^dag + R_k^dag R_k>]^(1/(2k+1))."""
    k = _check_k(k)
    jj, sym, jm, h_diag = _operator_parts(J, ens)
    r_k = commutator_chain(jm, h_diag, k)
    anticomm = max(ens.average(r_k @ r_k.conj().T + r_k.conj().T @ r_k).real, 0.0)
    rhs = jj + 0.5 * max(jj, 0.0) ** (2 * k / (2 * k + 1)) * (
        ens.beta ** (2 * k) * anticomm
    ) ** (1.0 / (2 * k + 1))
    return _report("bpr", {"k": k, "beta": ens.beta}, sym, rhs, tol=tol)


def check_harris_gen(
    J, ens: GibbsEnsemble, n: int = 0, tol: float = DEFAULT_TOL
) -> InequalityReport:
    """F_2n <= (1/2) F_2n+1 <= F_2n + (1/12) F_2n+2."""
    n = _check_n(n)
    f_2n = functional_direct(J, ens, 2 * n)
    f_odd = functional_direct(J, ens, 2 * n + 1)
    f_next = functional_direct(J, ens, 2 * n + 2)
    return _report(
        "gen_harris",
        {"n": n, "beta": ens.beta},
        f_2n,
        f_2n + f_next / 12.0,
        mid=0.5 * f_odd,
        tol=tol,
    )


def check_plechko_gen(
    J, ens: GibbsEnsemble, n: int = 0, p: float = 2.0, tol: float = DEFAULT_TOL
) -> InequalityReport:
    """Hoelder-parameterized bound, q = p/(p-1):

    (2Z)^-1 sum |J_ml|^2 |e^-bEl - e^-bEm| [b(E_m-E_l)]^2n
        <= (1/2) (J;J)^(1/p) {Z^-1 sum |J_ml|^2 k(E_m,E_l) [b|E_m-E_l|]^((2n+1)q)}^(1/q).
    """
    n = _check_n(n)
    p = float(p)
    if not (np.isfinite(p) and p > 1):
        raise ValueError(f"Hoelder parameter p must exceed 1, got {p}")
    q = p / (p - 1.0)
    lhs = 0.5 * spectral_sum(J, ens, SpectralWeight("abs_difference", 2 * n))
    inner = spectral_sum(J, ens, SpectralWeight("duhamel", (2 * n + 1) * q))
    jj = functional_direct(J, ens, 0)
    rhs = 0.5 * max(jj, 0.0) ** (1.0 / p) * max(inner, 0.0) ** (1.0 / q)
    return _report(
        "gen_plechko", {"n": n, "p": p, "q": q, "beta": ens.beta}, lhs, rhs, tol=tol
    )


def check_ginibre_gen(
    J, ens: GibbsEnsemble, n: int = 0, k: int = 1, tol: float = DEFAULT_TOL
) -> InequalityReport:
    """F_2n <= (1/2) F_2n+1 <= F_2n + (1/2)(J;J)^((2k-1)/2k) [F_2k(2n+1)]^(1/2k)."""
    n = _check_n(n)
    k = _check_k(k)
    f_2n = functional_direct(J, ens, 2 * n)
    f_odd = functional_direct(J, ens, 2 * n + 1)
    jj = functional_direct(J, ens, 0)
    f_high = functional_direct(J, ens, 2 * k * (2 * n + 1))
    rhs = f_2n + 0.5 * max(jj, 0.0) ** ((2 * k - 1) / (2 * k)) * max(f_high, 0.0) ** (
        1.0 / (2 * k)
    )
    return _report(
        "gen_ginibre",
        {"n": n, "k": k, "beta": ens.beta},
        f_2n,
        rhs,
        mid=0.5 * f_odd,
        tol=tol,
    )


def check_bpr_gen(
    J, ens: GibbsEnsemble, n: int = 0, k: int = 1, tol: float = DEFAULT_TOL
) -> InequalityReport:
    """(1/2) F_2n+1 <= F_2n + (1/2)(J;J)^(2k/(2k+1)) [F_2(2nk+n+k)+1]^(1/(2k+1))."""
    n = _check_n(n)
    k = _check_k(k)
    f_2n = functional_direct(J, ens, 2 * n)
    f_odd = functional_direct(J, ens, 2 * n + 1)
    jj = functional_direct(J, ens, 0)
    f_high = functional_direct(J, ens, 2 * (2 * n * k + n + k) + 1)
    rhs = f_2n + 0.5 * max(jj, 0.0) ** (2 * k / (2 * k + 1)) * max(f_high, 0.0) ** (
        1.0 / (2 * k + 1)
    )
    return _report(
        "gen_bpr", {"n": n, "k": k, "beta": ens.beta}, 0.5 * f_odd, rhs, tol=tol
    )


def evaluate_families(
    J,
    ens: GibbsEnsemble,
    families=FAMILY_NAMES,
    ns=DEFAULT_NS,
    ks=DEFAULT_KS,
    ps=DEFAULT_PS,
    tol: float = DEFAULT_TOL,
) -> list[InequalityReport]:
    """All requested checks for one (J, ensemble) instance, in a fixed order."""
    unknown = set(families) - set(FAMILY_NAMES)
    if unknown:
        raise ValueError(f"unknown inequality families: {sorted(unknown)}")
    reports: list[InequalityReport] = []
    for family in FAMILY_NAMES:  # canonical order, not caller order
        if family not in families:
            continue
        if family == "harris":
            reports.append(check_harris(J, ens, tol))
        elif family == "ginibre":
            reports.append(check_ginibre(J, ens, tol))
        elif family == "bogoliubov_jr":
            reports.append(check_bogoliubov_jr(J, ens, tol))
        elif family == "plechko":
            reports.extend(check_plechko(J, ens, k, tol) for k in ks)
        elif family == "bpr":
            reports.extend(check_bpr(J, ens, k, tol) for k in ks)
        elif family == "gen_harris":
            reports.extend(check_harris_gen(J, ens, n, tol) for n in ns)
        elif family == "gen_plechko":
            reports.extend(
                check_plechko_gen(J, ens, n, p, tol) for n in ns for p in ps
            )
        elif family == "gen_ginibre":
            reports.extend(
                check_ginibre_gen(J, ens, n, k, tol) for n in ns for k in ks
            )
        elif family == "gen_bpr":
            reports.extend(check_bpr_gen(J, ens, n, k, tol) for n in ns for k in ks)
    return reports


@dataclass
class FamilyAggregate:
    count: int = 0
    pass_count: int = 0
    worst_slack: float | None = None  # most negative normalized slack
    worst_instance: int | None = None
    worst_check: InequalityReport | None = None

    def add(self, instance_index: int, report: InequalityReport):
        self.count += 1
        self.pass_count += report.passed
        slack = report.normalized_slack
        if self.worst_slack is None or slack < self.worst_slack:
            self.worst_slack = slack
            self.worst_instance = instance_index
            self.worst_check = report

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "pass_count": self.pass_count,
            "worst_slack": self.worst_slack,
            "worst_instance": self.worst_instance,
            "worst_check": None if self.worst_check is None else self.worst_check.to_dict(),
        }


@dataclass
class SuiteResult:
    """Aggregated outcome of an inequality campaign."""

    families: dict
    failures: list = field(default_factory=list)
    instance_count: int = 0
    max_ordering_asymmetry: float = 0.0
    instance_reports: list | None = None

    @property
    def all_passed(self) -> bool:
        return all(agg.pass_count == agg.count for agg in self.families.values())

    @property
    def count(self) -> int:
        return sum(agg.count for agg in self.families.values())

    @property
    def pass_count(self) -> int:
        return sum(agg.pass_count for agg in self.families.values())


#: Cap on serialized failing reports kept for triage.
MAX_FAILURES_KEPT = 50


class SuiteAggregator:
    """Order-independent reducer: feed (index, reports) in any order, results
    are keyed by instance index so the reduction is scheduler-independent."""

    def __init__(self, keep_reports: bool = False):
        self._families: dict[str, FamilyAggregate] = {}
        self._failures: list[dict] = []
        self._asymmetry = 0.0
        self._indices: set[int] = set()
        self._reports: list | None = [] if keep_reports else None

    def add(self, instance_index: int, reports, ordering_asymmetry: float = 0.0):
        self._indices.add(instance_index)
        self._asymmetry = max(self._asymmetry, ordering_asymmetry)
        for report in reports:
            agg = self._families.setdefault(report.name, FamilyAggregate())
            agg.add(instance_index, report)
            if not report.passed and len(self._failures) < MAX_FAILURES_KEPT:
                entry = report.to_dict()
                entry["instance"] = instance_index
                self._failures.append(entry)
        if self._reports is not None:
            self._reports.append((instance_index, list(reports)))

    def result(self) -> SuiteResult:
        reports = None
        if self._reports is not None:
            reports = sorted(self._reports, key=lambda pair: pair[0])
        return SuiteResult(
            families=dict(sorted(self._families.items())),
            failures=sorted(self._failures, key=lambda e: (e["instance"], e["name"])),
            instance_count=len(self._indices),
            max_ordering_asymmetry=self._asymmetry,
            instance_reports=reports,
        )


def _ordering_asymmetry(J, ens: GibbsEnsemble) -> float:
    """Largest even-commutator ordering gap over n = 1, 2 (open-question flag)."""
    gaps = [functional_even(J, ens, n).ordering_asymmetry for n in (1, 2)]
    return float(max(gaps))


def run_suite(
    instances,
    families=FAMILY_NAMES,
    ns=DEFAULT_NS,
    ks=DEFAULT_KS,
    ps=DEFAULT_PS,
    tol: float = DEFAULT_TOL,
    keep_reports: bool = False,
) -> SuiteResult:
    """Evaluate every requested family on a list of (T, J, beta) instances.

    Individual check failures are recorded in the result, never raised; an
    empty family list yields an empty, trivially passing report.
    """
    aggregator = SuiteAggregator(keep_reports=keep_reports)
    for index, (t_op, j_op, beta) in enumerate(instances):
        ens = decompose(t_op, beta)
        j_basis = to_eigenbasis(j_op, ens)
        reports = evaluate_families(j_basis, ens, families, ns, ks, ps, tol)
        asym = _ordering_asymmetry(j_basis, ens) if reports else 0.0
        aggregator.add(index, reports, asym)
    return aggregator.result()
