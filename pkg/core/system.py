"""
Physical parameter records, unit conversions, Hamiltonian assembly and the
Drude-Lorentz spectral density.

Working units inside the engine: angular frequency in rad/ps, time in ps, hbar = 1.
Everything the user writes (site energies, couplings, reorganization energies,
cut-offs) is in cm^-1 and is converted once, here.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InvalidSpecError

log = logging.getLogger(__name__)

# hbar*gamma/(kB*T) at or above this flags the single-exponential HEOM as unreliable
HIGH_TEMPERATURE_THRESHOLD = 0.5


# ── Units ─────────────────────────────────────────────────────────────────────

class UnitSystem(BaseModel):
    """Conversion constants between spectroscopic and engine units."""
    model_config = ConfigDict(frozen=True)

    cm1_to_radps: float = 2.0 * math.pi * 0.0299792458   # rad/ps per cm^-1
    kB_cm1_per_K: float = 0.695034800                    # cm^-1 per K

    def to_radps(self, value_cm1):
        return value_cm1 * self.cm1_to_radps

    def thermal_energy_cm1(self, temperature_K: float) -> float:
        return self.kB_cm1_per_K * temperature_K


UNITS = UnitSystem()


# ── Specs ─────────────────────────────────────────────────────────────────────

class SystemSpec(BaseModel):
    """Site energies and inter-site couplings (cm^-1) defining H_S."""
    model_config = ConfigDict(frozen=True)

    n_sites: int = Field(..., ge=1)
    site_energies: Tuple[float, ...]
    couplings: Tuple[Tuple[float, ...], ...]

    @model_validator(mode="after")
    def _check_shape(self) -> "SystemSpec":
        n = self.n_sites
        if len(self.site_energies) != n:
            raise ValueError(f"expected {n} site energies, got {len(self.site_energies)}")
        if len(self.couplings) != n or any(len(row) != n for row in self.couplings):
            raise ValueError(f"couplings must be a {n}x{n} matrix")
        J = np.asarray(self.couplings, dtype=float)
        if np.any(np.diag(J) != 0.0):
            raise ValueError("couplings must have a zero diagonal")
        if not np.array_equal(J, J.T):
            raise ValueError("couplings must be symmetric")
        return self

    @classmethod
    def chain(cls, site_energies: Sequence[float], chain_values: Sequence[float]) -> "SystemSpec":
        """Linear chain: only nearest neighbours |j-k| = 1 are coupled."""
        n = len(site_energies)
        return _validated(cls, n_sites=n, site_energies=tuple(float(e) for e in site_energies),
                          couplings=_as_tuples(chain_couplings(chain_values, n)))

    @classmethod
    def from_matrix(cls, site_energies: Sequence[float], couplings) -> "SystemSpec":
        return _validated(cls, n_sites=len(site_energies),
                          site_energies=tuple(float(e) for e in site_energies),
                          couplings=_as_tuples(np.asarray(couplings, dtype=float)))

    @property
    def coupling_matrix(self) -> np.ndarray:
        return np.asarray(self.couplings, dtype=float)

    @property
    def is_chain(self) -> bool:
        J = self.coupling_matrix
        j, k = np.indices(J.shape)
        return bool(np.all(J[np.abs(j - k) != 1] == 0.0))


class BathSpec(BaseModel):
    """One Drude-Lorentz bath per site: reorganization energy and cut-off (cm^-1), temperature (K)."""
    model_config = ConfigDict(frozen=True)

    lambdas: Tuple[float, ...]
    gammas: Tuple[float, ...]
    temperature: float = Field(..., gt=0.0)

    @model_validator(mode="after")
    def _check_entries(self) -> "BathSpec":
        if len(self.lambdas) != len(self.gammas):
            raise ValueError("one lambda and one gamma per site required")
        if not self.lambdas:
            raise ValueError("bath needs at least one site")
        if any(v <= 0.0 for v in self.lambdas + self.gammas):
            raise ValueError("reorganization energies and cut-offs must be strictly positive")
        return self

    @classmethod
    def uniform(cls, n_sites: int, lam: float, gamma: float, temperature: float) -> "BathSpec":
        return _validated(cls, lambdas=(float(lam),) * n_sites, gammas=(float(gamma),) * n_sites,
                          temperature=float(temperature))

    @property
    def n_sites(self) -> int:
        return len(self.lambdas)


class SystemConfig(NamedTuple):
    system: SystemSpec
    bath: BathSpec
    rho0_site: int = 0     # 0-based


def _validated(cls, **kwargs):
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise InvalidSpecError(f"invalid {cls.__name__}: {exc.errors()[0]['msg']}") from exc


def _as_tuples(matrix: np.ndarray) -> Tuple[Tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in matrix)


def chain_couplings(chain_values: Sequence[float], n_sites: int = None) -> np.ndarray:
    """Symmetric nearest-neighbour coupling matrix from N-1 chain values."""
    values = [float(v) for v in chain_values]
    n = n_sites if n_sites is not None else len(values) + 1
    if len(values) != n - 1:
        raise InvalidSpecError(f"a {n}-site chain needs {n - 1} couplings, got {len(values)}")
    J = np.zeros((n, n))
    for j, v in enumerate(values):
        J[j, j + 1] = J[j + 1, j] = v
    return J


# ── Operations ────────────────────────────────────────────────────────────────

def build_hamiltonian(spec: SystemSpec, units: UnitSystem = UNITS) -> np.ndarray:
    """H_S in rad/ps: site energies on the diagonal, couplings off it."""
    n = spec.n_sites
    J = np.asarray(spec.couplings, dtype=float)
    if len(spec.site_energies) != n or J.shape != (n, n):
        raise InvalidSpecError(f"system spec dimensions disagree with n_sites={n}")
    H = J.copy()
    np.fill_diagonal(H, spec.site_energies)
    return (units.to_radps(H)).astype(np.complex128)


def spectral_density(omega, lambda_j: float, gamma_j: float, units: UnitSystem = UNITS):
    """
    Drude-Lorentz spectral density 2*lambda*gamma*omega / (omega^2 + gamma^2).

    omega is in rad/ps, lambda_j and gamma_j in cm^-1; the result is in rad/ps.
    Accepts scalars or numpy arrays for omega.
    """
    lam = units.to_radps(lambda_j)
    gam = units.to_radps(gamma_j)
    omega = np.asarray(omega, dtype=float)
    value = 2.0 * lam * gam * omega / (omega ** 2 + gam ** 2)
    return float(value) if value.ndim == 0 else value


class HighTemperatureCheck(NamedTuple):
    ratios: List[float]
    warning: bool


def check_high_temperature(bath: BathSpec, units: UnitSystem = UNITS) -> HighTemperatureCheck:
    """hbar*gamma_j/(kB*T) per site, with a warning flag once any ratio reaches 0.5."""
    kT = units.thermal_energy_cm1(bath.temperature)
    ratios = [g / kT for g in bath.gammas]
    warn = any(r >= HIGH_TEMPERATURE_THRESHOLD for r in ratios)
    if warn:
        log.warning("High-temperature condition weak: hbar*gamma/kT = %s (T=%.1f K)",
                    ", ".join(f"{r:.3f}" for r in ratios), bath.temperature)
    return HighTemperatureCheck(ratios, warn)


# ── Config files ──────────────────────────────────────────────────────────────

def per_site(value: Union[float, Sequence[float]], n: int, key: str) -> Tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * n
    values = tuple(float(v) for v in value)
    if len(values) != n:
        raise InvalidSpecError(f"'{key}' needs 1 or {n} values, got {len(values)}")
    return values


def system_from_mapping(data: Dict[str, Any]) -> SystemConfig:
    """
    Build specs from the key-value config layout:
    sites, epsilon, J (full matrix or chain list), lambda, gamma, temperature_K,
    and optionally rho0_site (1-based).
    """
    try:
        n = int(data["sites"])
        epsilon = per_site(data["epsilon"], n, "epsilon")
        J_raw = data.get("J", [0.0] * (n - 1))
        if isinstance(J_raw, (int, float)):
            J_raw = [float(J_raw)] * (n - 1)
        if J_raw and isinstance(J_raw[0], (list, tuple)):
            system = SystemSpec.from_matrix(epsilon, J_raw)
        else:
            system = SystemSpec.chain(epsilon, J_raw)
        bath = _validated(BathSpec,
                          lambdas=per_site(data["lambda"], n, "lambda"),
                          gammas=per_site(data.get("gamma", 53.0), n, "gamma"),
                          temperature=float(data.get("temperature_K", 300.0)))
    except KeyError as exc:
        raise InvalidSpecError(f"config is missing required key {exc}") from exc
    rho0_site = int(data.get("rho0_site", 1)) - 1
    if not 0 <= rho0_site < n:
        raise InvalidSpecError(f"rho0_site must be within 1..{n}")
    return SystemConfig(system, bath, rho0_site)


def system_to_mapping(system: SystemSpec, bath: BathSpec, rho0_site: int = 0) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "sites": system.n_sites,
        "epsilon": list(system.site_energies),
        "J": [list(row) for row in system.couplings],
        "lambda": list(bath.lambdas),
        "gamma": list(bath.gammas),
        "temperature_K": bath.temperature,
        "rho0_site": rho0_site + 1,
    }
    if system.is_chain:
        J = system.coupling_matrix
        data["J"] = [float(J[j, j + 1]) for j in range(system.n_sites - 1)]
    return data


def load_system_config(path: Union[str, Path]) -> SystemConfig:
    """Read a JSON system/bath configuration file."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidSpecError(f"cannot read system config {path}: {exc}") from exc
    return system_from_mapping(data)
