"""Built-in (T, S) Hamiltonian pairs used as test instances.

Four factories: the analytic two-level spin, a small open transverse-field
Ising chain, a truncated single-mode Dicke testbed, and seeded random
Hermitian draws.  Every factory output passes HermitianOperator validation
and is bit-reproducible from its parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import HermitianOperator

__all__ = [
    "ModelSpec",
    "single_spin",
    "ising_chain",
    "dicke_truncated",
    "random_pair",
    "make_spec",
    "build_pair",
    "model_catalog",
]

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

MODEL_NAMES = ("single_spin", "ising_chain", "dicke", "random")

DICKE_COUPLING_CONVENTION = "S = lam*(a+a^dag) (x) (1/2 sum_j sigma_x^j) / sqrt(n_spins)"


def single_spin(delta: float) -> tuple[HermitianOperator, HermitianOperator]:
    """T = (delta/2) sigma_z, S = sigma_x."""
    delta = float(delta)
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be positive, got {delta}")
    return HermitianOperator(0.5 * delta * SIGMA_Z), HermitianOperator(SIGMA_X)


def _site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for j in range(n_sites):
        out = np.kron(out, op if j == site else ID2)
    return out


def ising_chain(
    n_sites: int, coupling: float, field: float
) -> tuple[HermitianOperator, HermitianOperator]:
    """Open chain T = -coupling sum sz_i sz_i+1 - field sum sx_i; S = (1/n) sum sx_i."""
    n_sites = int(n_sites)
    if not 2 <= n_sites <= 10:
        raise ValueError(f"n_sites must lie in [2, 10], got {n_sites}")
    dim = 2**n_sites
    t = np.zeros((dim, dim), dtype=complex)
    sx_total = np.zeros((dim, dim), dtype=complex)
    for i in range(n_sites):
        sx_total += _site_operator(SIGMA_X, i, n_sites)
    for i in range(n_sites - 1):
        zi = _site_operator(SIGMA_Z, i, n_sites)
        zj = _site_operator(SIGMA_Z, i + 1, n_sites)
        t -= float(coupling) * (zi @ zj)
    t -= float(field) * sx_total
    s = sx_total / n_sites
    return HermitianOperator(t), HermitianOperator(s)


def dicke_truncated(
    n_max: int, n_spins: int, omega: float, omega0: float, lam: float
) -> tuple[HermitianOperator, HermitianOperator]:
    """Single boson mode (hard cutoff n_max) coupled to n_spins qubits.

    T = omega a^dag a (x) 1 + 1 (x) (omega0/2) sum_j sigma_z^j; the coupling
    strength lam multiplies the perturbation only, so T is lam-independent:
    S = lam (a + a^dag) (x) (1/2 sum_j sigma_x^j) / sqrt(n_spins).
    """
    n_max = int(n_max)
    n_spins = int(n_spins)
    if not 1 <= n_max <= 30:
        raise ValueError(f"n_max must lie in [1, 30], got {n_max}")
    if not 1 <= n_spins <= 4:
        raise ValueError(f"n_spins must lie in [1, 4], got {n_spins}")
    nb = n_max + 1
    a = np.diag(np.sqrt(np.arange(1, nb, dtype=float)), k=1).astype(complex)
    number = a.conj().T @ a
    dim_spin = 2**n_spins
    jz = np.zeros((dim_spin, dim_spin), dtype=complex)
    jx = np.zeros((dim_spin, dim_spin), dtype=complex)
    for j in range(n_spins):
        jz += 0.5 * _site_operator(SIGMA_Z, j, n_spins)
        jx += 0.5 * _site_operator(SIGMA_X, j, n_spins)
    t = float(omega) * np.kron(number, np.eye(dim_spin)) + float(omega0) * np.kron(
        np.eye(nb), jz
    )
    s = float(lam) * np.kron(a + a.conj().T, jx) / np.sqrt(n_spins)
    return HermitianOperator(t), HermitianOperator(s)


def random_pair(
    dim: int, seed: int, index: int = 0
) -> tuple[HermitianOperator, HermitianOperator]:
    """Independent Hermitian draws T, S with entries (G + G^dag)/2.

    G has standard complex normal entries from a counter-based Philox
    stream keyed on (seed, index), so identical arguments reproduce the
    matrices bit for bit and campaigns can split per instance index.
    """
    dim = int(dim)
    if not 2 <= dim <= 64:
        raise ValueError(f"dim must lie in [2, 64], got {dim}")
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    rng = np.random.Generator(np.random.Philox(seq))

    def draw() -> HermitianOperator:
        g = (
            rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        ) / np.sqrt(2.0)
        return HermitianOperator(0.5 * (g + g.conj().T))

    return draw(), draw()


@dataclass(frozen=True)
class ModelSpec:
    """Parsed model selection: name, parameter map, derived dimension."""

    name: str
    params: dict
    dim: int

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params), "dim": self.dim}


_DEFAULTS = {
    "single_spin": {"delta": 2.0},
    "ising_chain": {"n_sites": 4, "coupling": 1.0, "field": 1.0},
    "dicke": {"n_max": 6, "n_spins": 2, "omega": 1.0, "omega0": 1.0, "lam": 0.5},
    "random": {"dim": 8, "seed": 0},
}


def make_spec(name: str, **params) -> ModelSpec:
    """Build a validated ModelSpec, filling unspecified parameters with defaults."""
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; choose from {MODEL_NAMES}")
    merged = dict(_DEFAULTS[name])
    unknown = set(params) - set(merged)
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    merged.update({k: v for k, v in params.items() if v is not None})
    if name == "single_spin":
        if not merged["delta"] > 0:
            raise ValueError(f"delta must be positive, got {merged['delta']}")
        dim = 2
    elif name == "ising_chain":
        if not 2 <= int(merged["n_sites"]) <= 10:
            raise ValueError(f"n_sites must lie in [2, 10], got {merged['n_sites']}")
        dim = 2 ** int(merged["n_sites"])
    elif name == "dicke":
        if not 1 <= int(merged["n_max"]) <= 30:
            raise ValueError(f"n_max must lie in [1, 30], got {merged['n_max']}")
        if not 1 <= int(merged["n_spins"]) <= 4:
            raise ValueError(f"n_spins must lie in [1, 4], got {merged['n_spins']}")
        dim = (int(merged["n_max"]) + 1) * 2 ** int(merged["n_spins"])
        merged["coupling_convention"] = DICKE_COUPLING_CONVENTION
    else:
        if not 2 <= int(merged["dim"]) <= 64:
            raise ValueError(f"dim must lie in [2, 64], got {merged['dim']}")
        dim = int(merged["dim"])
    return ModelSpec(name=name, params=merged, dim=dim)


def build_pair(
    spec: ModelSpec, instance: int = 0
) -> tuple[HermitianOperator, HermitianOperator]:
    """Materialize (T, S) for a spec; `instance` splits the random stream."""
    p = spec.params
    if spec.name == "single_spin":
        return single_spin(p["delta"])
    if spec.name == "ising_chain":
        return ising_chain(p["n_sites"], p["coupling"], p["field"])
    if spec.name == "dicke":
        return dicke_truncated(p["n_max"], p["n_spins"], p["omega"], p["omega0"], p["lam"])
    if spec.name == "random":
        return random_pair(p["dim"], p["seed"], index=instance)
    raise ValueError(f"unknown model {spec.name!r}")


def model_catalog() -> list[dict]:
    """Name, defaults and dimension rule for every built-in model."""
    rules = {
        "single_spin": "dim = 2",
        "ising_chain": "dim = 2^n_sites",
        "dicke": "dim = (n_max + 1) * 2^n_spins",
        "random": "dim = dim",
    }
    return [
        {"name": name, "defaults": dict(_DEFAULTS[name]), "dim_rule": rules[name]}
        for name in MODEL_NAMES
    ]
