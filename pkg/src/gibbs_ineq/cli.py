"""Batch front-end: run inequality and fidelity campaigns from the shell.

Subcommands: ``suite`` (inequality families), ``fidelity`` (chi_F routes and
bounds), ``expansion`` (quadratic-expansion checks), ``models`` (list the
built-in specs).  Reports are JSON (sorted keys, shortest round-trip
floats) plus an optional flat CSV; the exit status is 0 iff every check
passed, 1 on a numeric failure, 2 on bad flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .duhamel import susceptibility_fd
from .fidelity import expansion_check, full_report
from .inequalities import (
    DEFAULT_KS,
    DEFAULT_NS,
    DEFAULT_PS,
    DEFAULT_TOL,
    FAMILY_NAMES,
    SuiteAggregator,
    evaluate_families,
    _ordering_asymmetry,
)
from .models import ModelSpec, build_pair, make_spec, model_catalog
from .spectral import decompose, to_eigenbasis

SCHEMA_VERSION = 1

# Route-agreement tolerances fixed by the verification contract.
FORM_RTOL = 1e-9  # spectral form 1 vs form 2
FD_RTOL = 1e-4  # finite-difference chi vs spectral chi
LINK_RTOL = 1e-5  # upper bound vs (beta/4) * susceptibility
DEFAULT_MIN_ORDER = 2.8  # expansion residual order

JOBS_ENV_VAR = "GIBBS_INEQ_JOBS"


@dataclass
class CampaignConfig:
    """Parsed campaign: models x trials x betas define the instance grid."""

    models: list
    betas: list
    trials: int = 1
    seed: int = 0
    tol: float = DEFAULT_TOL
    families: list = field(default_factory=lambda: list(FAMILY_NAMES))
    output_path: str | None = None

    def __post_init__(self):
        if not self.models or not self.betas:
            raise ValueError("campaign needs at least one model and one beta")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")

    def instance_grid(self) -> list:
        """(index, spec, trial, beta) in deterministic enumeration order."""
        grid = []
        index = 0
        for spec in self.models:
            for trial in range(self.trials):
                for beta in self.betas:
                    grid.append((index, spec, trial, beta))
                    index += 1
        return grid

    def to_dict(self) -> dict:
        return {
            "models": [spec.to_dict() for spec in self.models],
            "betas": list(self.betas),
            "trials": self.trials,
            "seed": self.seed,
            "tol": self.tol,
            "families": list(self.families),
            "output_path": self.output_path,
        }


def _instance_descriptor(spec: ModelSpec, trial: int, beta: float) -> dict:
    return {"model": spec.name, "trial": trial, "beta": beta}


# ---------------------------------------------------------------------------
# Workers (top level so ProcessPoolExecutor can pickle them)


def _suite_worker(payload):
    index, spec, trial, beta, families, tol = payload
    t_op, s_op = build_pair(spec, instance=trial)
    ens = decompose(t_op, beta)
    j_basis = to_eigenbasis(s_op.entries, ens)
    reports = evaluate_families(
        j_basis, ens, families, DEFAULT_NS, DEFAULT_KS, DEFAULT_PS, tol
    )
    asym = _ordering_asymmetry(j_basis, ens) if reports else 0.0
    return index, reports, asym


def _relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(1e-300, abs(a), abs(b))


def _fidelity_worker(payload):
    index, spec, trial, beta, tol = payload
    t_op, s_op = build_pair(spec, instance=trial)
    report = full_report(t_op, s_op, beta)
    chi = report.chi_spectral_form2
    link = 0.25 * beta * susceptibility_fd(t_op, s_op, beta)
    scale = max(1.0, abs(chi), abs(report.bound_lower), abs(report.bound_upper))
    checks = {
        "form_agreement": _relative_gap(
            report.chi_spectral_form1, report.chi_spectral_form2
        )
        <= FORM_RTOL,
        "fd_one_sided_agreement": _relative_gap(report.chi_fd_one_sided, chi)
        <= FD_RTOL,
        "fd_two_sided_agreement": _relative_gap(report.chi_fd_two_sided, chi)
        <= FD_RTOL,
        "sandwich_lower": chi - report.bound_lower >= -tol * scale,
        "sandwich_upper": report.bound_upper - chi >= -tol * scale,
        "susceptibility_link": _relative_gap(report.bound_upper, link) <= LINK_RTOL,
    }
    record = report.to_dict()
    record["upper_vs_susceptibility"] = link
    record["checks"] = checks
    record["pass"] = all(checks.values())
    return index, record


def _expansion_worker(payload):
    index, spec, trial, beta, y, min_order = payload
    t_op, s_op = build_pair(spec, instance=trial)
    result = expansion_check(t_op, s_op, beta, x=0.0, y=y)
    checks = {
        "trace_x_zero": abs(result.trace_x) <= 1e-12,
        "trace_y_nonpositive": result.trace_y <= 0.0,
        "residual_order": result.residual_order >= min_order,
    }
    record = {
        "beta": beta,
        "y": y,
        "trace_x": result.trace_x,
        "trace_y": result.trace_y,
        "fidelity_direct": result.fidelity_direct,
        "fidelity_expansion": result.fidelity_expansion,
        "residual_order": result.residual_order,
        "checks": checks,
        "pass": all(checks.values()),
    }
    return index, record


def _parallel_map(worker, payloads, jobs: int):
    """Run worker over payloads; results come back in payload order."""
    if jobs <= 1 or len(payloads) <= 1:
        return [worker(p) for p in payloads]
    workers = min(jobs, len(payloads))
    chunk = max(1, len(payloads) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, payloads, chunksize=chunk))


# ---------------------------------------------------------------------------
# Report assembly and emission


def _versions() -> dict:
    return {
        "gibbs_ineq": __version__,
        "numpy": np.__version__,
        "python": sys.version.split()[0],
    }


def _base_report(command: str, config: CampaignConfig, started: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config.to_dict(),
        "versions": _versions(),
        "timing": {
            "seconds": time.time() - started,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        },
    }


def emit_report(report: dict, path: str | None, csv_rows=None, csv_path=None):
    """Write the JSON report (sorted keys, UTF-8) and optionally a flat CSV."""
    text = json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    if csv_rows is not None and csv_path is not None:
        fieldnames = sorted({key for row in csv_rows for key in row})
        with open(csv_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(csv_rows)


def _csv_path(out_path: str | None) -> str | None:
    if out_path is None:
        return None
    root, _ = os.path.splitext(out_path)
    return root + ".csv"


def _flatten_params(params: dict) -> dict:
    return {f"param_{key}": value for key, value in params.items()}


# ---------------------------------------------------------------------------
# Subcommand drivers


def _run_suite(config: CampaignConfig, jobs: int, want_csv: bool, verbose: bool):
    started = time.time()
    grid = config.instance_grid()
    payloads = [
        (index, spec, trial, beta, tuple(config.families), config.tol)
        for index, spec, trial, beta in grid
    ]
    aggregator = SuiteAggregator(keep_reports=want_csv or verbose)
    for index, reports, asym in _parallel_map(_suite_worker, payloads, jobs):
        aggregator.add(index, reports, asym)
    result = aggregator.result()

    descriptors = {
        index: _instance_descriptor(spec, trial, beta)
        for index, spec, trial, beta in grid
    }
    families = {}
    for name, agg in result.families.items():
        entry = agg.to_dict()
        worst = entry.pop("worst_instance")
        entry["worst_instance"] = None if worst is None else descriptors[worst]
        families[name] = entry
    report = _base_report("suite", config, started)
    report.update(
        {
            "families": families,
            "failures": [
                {**entry, "instance": descriptors[entry["instance"]]}
                for entry in result.failures
            ],
            "max_ordering_asymmetry": result.max_ordering_asymmetry,
            "checks_total": result.count,
            "checks_passed": result.pass_count,
            "all_passed": result.all_passed,
        }
    )
    csv_rows = None
    if want_csv or verbose:
        rows = []
        for index, reports in result.instance_reports:
            for rep in reports:
                row = {"instance": index, **descriptors[index], **rep.to_dict()}
                row.update(_flatten_params(row.pop("params")))
                rows.append(row)
        if verbose:
            report["instances"] = rows
        if want_csv:
            csv_rows = rows
    return report, csv_rows, result.all_passed


def _run_records(command, config, jobs, want_csv, worker, payloads, started):
    grid = config.instance_grid()
    descriptors = {
        index: _instance_descriptor(spec, trial, beta)
        for index, spec, trial, beta in grid
    }
    records = []
    for index, record in _parallel_map(worker, payloads, jobs):
        records.append({"instance": index, **descriptors[index], **record})
    count = len(records)
    passed = sum(1 for record in records if record["pass"])
    report = _base_report(command, config, started)
    report.update(
        {
            "count": count,
            "pass_count": passed,
            "all_passed": passed == count,
            "failures": [r for r in records if not r["pass"]],
            "instances": records,
        }
    )
    csv_rows = None
    if want_csv:
        csv_rows = [
            {
                key: (json.dumps(value) if isinstance(value, (dict, list)) else value)
                for key, value in record.items()
            }
            for record in records
        ]
    return report, csv_rows, passed == count


def _run_fidelity(config: CampaignConfig, jobs: int, want_csv: bool):
    started = time.time()
    payloads = [
        (index, spec, trial, beta, config.tol)
        for index, spec, trial, beta in config.instance_grid()
    ]
    return _run_records(
        "fidelity", config, jobs, want_csv, _fidelity_worker, payloads, started
    )


def _run_expansion(config: CampaignConfig, jobs: int, want_csv: bool, y, min_order):
    started = time.time()
    payloads = [
        (index, spec, trial, beta, y, min_order)
        for index, spec, trial, beta in config.instance_grid()
    ]
    return _run_records(
        "expansion", config, jobs, want_csv, _expansion_worker, payloads, started
    )


# ---------------------------------------------------------------------------
# Argument parsing


def _beta_list(text: str) -> list:
    try:
        betas = [float(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad beta list {text!r}") from exc
    if not betas or any(not (np.isfinite(b) and b > 0) for b in betas):
        raise argparse.ArgumentTypeError("betas must be positive finite reals")
    return betas


def _family_list(text: str) -> list:
    names = [part.strip().replace("-", "_") for part in text.split(",") if part]
    unknown = set(names) - set(FAMILY_NAMES)
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown families {sorted(unknown)}; choose from {FAMILY_NAMES}"
        )
    return names


def _default_jobs() -> int:
    env = os.environ.get(JOBS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_common_flags(sub: argparse.ArgumentParser):
    sub.add_argument(
        "--model",
        required=True,
        choices=["single-spin", "ising-chain", "dicke", "random"],
        help="built-in model supplying the (T, S) pair",
    )
    sub.add_argument("--delta", type=float, help="single-spin level splitting")
    sub.add_argument("--sites", type=int, help="ising chain length (2..10)")
    sub.add_argument("--coupling", type=float, help="ising zz coupling")
    sub.add_argument("--field", type=float, help="ising transverse field")
    sub.add_argument("--nmax", type=int, help="dicke boson cutoff (1..30)")
    sub.add_argument("--nspins", type=int, help="dicke spin count (1..4)")
    sub.add_argument("--omega", type=float, help="dicke boson frequency")
    sub.add_argument("--omega0", type=float, help="dicke spin splitting")
    sub.add_argument("--lam", type=float, help="dicke coupling strength (scales S)")
    sub.add_argument("--dim", type=int, help="random-model dimension (2..64)")
    sub.add_argument(
        "--beta", type=_beta_list, default=[1.0], help="comma-separated beta list"
    )
    sub.add_argument("--trials", type=int, default=1, help="instances per model")
    sub.add_argument("--seed", type=int, default=0, help="random-model base seed")
    sub.add_argument(
        "--tol", type=float, default=DEFAULT_TOL, help="slack tolerance (relative)"
    )
    sub.add_argument("--out", help="JSON report path (default: stdout)")
    sub.add_argument(
        "--csv", action="store_true", help="also write a flat per-check CSV next to --out"
    )
    sub.add_argument(
        "--jobs",
        type=int,
        default=None,
        help=f"worker processes (default: {JOBS_ENV_VAR} or available parallelism)",
    )
    sub.add_argument(
        "--verbose", action="store_true", help="include per-instance records in the JSON"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gibbs-ineq",
        description="Numerical checks of Duhamel-inner-product inequality "
        "chains and fidelity-susceptibility bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    suite = sub.add_parser("suite", help="run the inequality families")
    _add_common_flags(suite)
    suite.add_argument(
        "--families",
        type=_family_list,
        default=list(FAMILY_NAMES),
        help="comma-separated subset of " + ",".join(FAMILY_NAMES),
    )

    fid = sub.add_parser("fidelity", help="run the chi_F routes and bounds")
    _add_common_flags(fid)

    exp = sub.add_parser("expansion", help="run the quadratic-expansion checks")
    _add_common_flags(exp)
    exp.add_argument("--y", type=float, default=1e-2, help="expansion displacement")
    exp.add_argument(
        "--min-order",
        type=float,
        default=DEFAULT_MIN_ORDER,
        help="required residual order in y",
    )

    sub.add_parser("models", help="list the built-in model specs")
    return parser


def _spec_from_args(args) -> ModelSpec:
    name = args.model.replace("-", "_")
    if name == "single_spin":
        return make_spec("single_spin", delta=args.delta)
    if name == "ising_chain":
        return make_spec(
            "ising_chain", n_sites=args.sites, coupling=args.coupling, field=args.field
        )
    if name == "dicke":
        return make_spec(
            "dicke",
            n_max=args.nmax,
            n_spins=args.nspins,
            omega=args.omega,
            omega0=args.omega0,
            lam=args.lam,
        )
    return make_spec("random", dim=args.dim, seed=args.seed)


def _config_from_args(args, families=None) -> CampaignConfig:
    spec = _spec_from_args(args)
    return CampaignConfig(
        models=[spec],
        betas=args.beta,
        trials=args.trials,
        seed=args.seed,
        tol=args.tol,
        families=list(families) if families is not None else list(FAMILY_NAMES),
        output_path=args.out,
    )


def run(argv=None) -> int:
    """Parse argv, execute the subcommand, write reports, return exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "models":
        print(json.dumps(model_catalog(), sort_keys=True, indent=2))
        return 0

    jobs = args.jobs if args.jobs is not None else _default_jobs()
    try:
        if args.command == "suite":
            config = _config_from_args(args, families=args.families)
        else:
            config = _config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))  # exits 2
    try:
        if args.command == "suite":
            report, csv_rows, passed = _run_suite(config, jobs, args.csv, args.verbose)
        elif args.command == "fidelity":
            report, csv_rows, passed = _run_fidelity(config, jobs, args.csv)
        else:
            report, csv_rows, passed = _run_expansion(
                config, jobs, args.csv, args.y, args.min_order
            )
    except (ValueError, ArithmeticError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    emit_report(report, args.out, csv_rows, _csv_path(args.out) if args.csv else None)
    return 0 if passed else 1


def entry():
    sys.exit(run())


if __name__ == "__main__":
    entry()
