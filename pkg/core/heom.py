"""
Hierarchical equations of motion for N-site exciton systems with one
high-temperature Drude-Lorentz bath per site.

For every multi-index n:

    d sigma(n)/dt = -(i L_e + sum_j n_j gamma_j) sigma(n)
                    + sum_j [ Phi_j sigma(n + e_j) + n_j Theta_j sigma(n - e_j) ]

    L_e X     = [H, X]
    Phi_j X   = i [V_j, X]
    Theta_j X = i ( 2 lambda_j kT [V_j, X] - i lambda_j gamma_j {V_j, X} )

with V_j = |j><j|. Neighbours beyond the truncation depth K are treated as zero.
All ADOs live in one contiguous (M, N, N) pool in hierarchy order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

import config
from .errors import DivergenceError, InvalidSpecError, LayoutMismatchError
from .hierarchy import HierarchyLayout, enumerate_hierarchy
from .system import UNITS, BathSpec, SystemSpec, UnitSystem, build_hamiltonian, check_high_temperature
from .trajectory import Trajectory

log = logging.getLogger(__name__)

TRACE_TOL = 1e-6
HERMITIAN_TOL = 1e-8
PSD_TOL = -1e-8

# |rho_ab| can never exceed 1 for a density matrix; anything past this is a blow-up
RHO_BOUND = 10.0


# ── Superoperators ────────────────────────────────────────────────────────────

def _check_square(*matrices: np.ndarray) -> int:
    n = matrices[0].shape[0]
    for m in matrices:
        if m.ndim != 2 or m.shape != (n, n):
            raise InvalidSpecError(f"dimension mismatch: expected {n}x{n}, got {m.shape}")
    return n


def _check_site(j: int, n: int) -> None:
    if not 0 <= j < n:
        raise InvalidSpecError(f"site {j} out of range for {n} sites")


def _projector(j: int, n: int) -> np.ndarray:
    V = np.zeros((n, n), dtype=np.complex128)
    V[j, j] = 1.0
    return V


def liouvillian_apply(H: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """[H, sigma]."""
    H, sigma = np.asarray(H), np.asarray(sigma)
    _check_square(H, sigma)
    return H @ sigma - sigma @ H


def phi_apply(j: int, sigma: np.ndarray) -> np.ndarray:
    """i [V_j, sigma]."""
    sigma = np.asarray(sigma, dtype=np.complex128)
    n = _check_square(sigma)
    _check_site(j, n)
    V = _projector(j, n)
    return 1j * (V @ sigma - sigma @ V)


def theta_apply(j: int, sigma: np.ndarray, bath: BathSpec, units: UnitSystem = UNITS) -> np.ndarray:
    """i (2 lambda_j kT [V_j, sigma] - i lambda_j gamma_j {V_j, sigma}), engine units."""
    sigma = np.asarray(sigma, dtype=np.complex128)
    n = _check_square(sigma)
    _check_site(j, n)
    if j >= len(bath.lambdas):
        raise InvalidSpecError(f"site {j} has no bath")
    c, d = _theta_coefficients(bath, units)
    V = _projector(j, n)
    comm = V @ sigma - sigma @ V
    anti = V @ sigma + sigma @ V
    return 1j * (c[j] * comm - 1j * d[j] * anti)


def _theta_coefficients(bath: BathSpec, units: UnitSystem):
    lam = units.to_radps(np.asarray(bath.lambdas, dtype=float))
    gam = units.to_radps(np.asarray(bath.gammas, dtype=float))
    kT = units.to_radps(units.thermal_energy_cm1(bath.temperature))
    return 2.0 * lam * kT, lam * gam


def terminator_ratio(H: np.ndarray, bath: BathSpec, units: UnitSystem = UNITS) -> float:
    """omega_e / min(gamma_j), omega_e = spectral spread of H_S."""
    eig = np.linalg.eigvalsh(H)
    omega_e = float(eig[-1] - eig[0])
    return omega_e / float(units.to_radps(min(bath.gammas)))


# ── Hierarchy state and derivative ────────────────────────────────────────────

@dataclass
class HierarchyState:
    ados: np.ndarray        # (M, N, N) complex, ados[0] = rho
    time: float = 0.0

    @property
    def rho(self) -> np.ndarray:
        return self.ados[0]

    @classmethod
    def initial(cls, rho0: np.ndarray, layout: HierarchyLayout) -> "HierarchyState":
        n = layout.n_sites
        ados = np.zeros((len(layout), n, n), dtype=np.complex128)
        ados[0] = rho0
        return cls(ados=ados, time=0.0)


class HeomSolver:
    """Precomputed coefficient tables for one (H, bath, layout); evaluates the hierarchy RHS."""

    def __init__(self, H: np.ndarray, bath: BathSpec, layout: HierarchyLayout,
                 units: UnitSystem = UNITS, workers: int = 1):
        n = layout.n_sites
        if H.shape != (n, n) or bath.n_sites != n:
            raise LayoutMismatchError(
                f"H is {H.shape}, bath has {bath.n_sites} sites, layout has {n} sites")
        self.H = np.asarray(H, dtype=np.complex128)
        self.layout = layout
        self.n_sites = n
        gam = units.to_radps(np.asarray(bath.gammas, dtype=float))
        self.damping = layout.occupations @ gam
        self.c, self.d = _theta_coefficients(bath, units)
        self.occupations = layout.occupations.astype(float)
        self.workers = max(1, int(workers))
        self._executor: Optional[ThreadPoolExecutor] = None
        self._blocks = [slice(int(b[0]), int(b[-1]) + 1)
                        for b in np.array_split(np.arange(len(layout)), min(self.workers, len(layout)))]

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def derivative(self, ados: np.ndarray) -> np.ndarray:
        if ados.shape != (len(self.layout), self.n_sites, self.n_sites):
            raise LayoutMismatchError(
                f"state shape {ados.shape} does not match layout "
                f"({len(self.layout)}, {self.n_sites}, {self.n_sites})")
        # trailing zero slot: table entry -1 (absent neighbour) reads zeros
        padded = np.concatenate([ados, np.zeros((1,) + ados.shape[1:], dtype=ados.dtype)])
        out = np.empty_like(ados)
        if self.workers == 1:
            self._evaluate_block(padded, out, self._blocks[0])
        else:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=self.workers)
            list(self._executor.map(lambda rows: self._evaluate_block(padded, out, rows), self._blocks))
        return out

    def _evaluate_block(self, padded: np.ndarray, out: np.ndarray, rows: slice) -> None:
        H = self.H
        S = padded[rows]
        block = -1j * (H @ S - S @ H) - self.damping[rows, None, None] * S
        raise_rows = self.layout.raise_table[rows]
        lower_rows = self.layout.lower_table[rows]
        for j in range(self.n_sites):
            up = padded[raise_rows[:, j]]
            block[:, j, :] += 1j * up[:, j, :]
            block[:, :, j] -= 1j * up[:, :, j]

            down = padded[lower_rows[:, j]] * self.occupations[rows, j, None, None]
            c, d = self.c[j], self.d[j]
            block[:, j, :] += (1j * c + d) * down[:, j, :]
            block[:, :, j] += (-1j * c + d) * down[:, :, j]
        out[rows] = block


def heom_derivative(state: HierarchyState, H: np.ndarray, bath: BathSpec,
                    layout: HierarchyLayout, units: UnitSystem = UNITS) -> HierarchyState:
    """Time derivative of every ADO at `state`."""
    if state.ados.shape[0] != len(layout):
        raise LayoutMismatchError(f"state has {state.ados.shape[0]} ADOs, layout has {len(layout)}")
    solver = HeomSolver(np.asarray(H), bath, layout, units)
    return HierarchyState(ados=solver.derivative(state.ados), time=state.time)


# ── Integrator ────────────────────────────────────────────────────────────────

def rk4_step(state: HierarchyState, dt: float,
             derivative: Callable[[np.ndarray], np.ndarray]) -> HierarchyState:
    """Classical fourth-order Runge-Kutta on the whole pool."""
    if dt <= 0:
        raise InvalidSpecError(f"dt must be positive, got {dt}")
    y = state.ados
    k1 = derivative(y)
    k2 = derivative(y + 0.5 * dt * k1)
    k3 = derivative(y + 0.5 * dt * k2)
    k4 = derivative(y + dt * k3)
    new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    t = state.time + dt
    if not np.all(np.isfinite(new)):
        finite = np.abs(new[np.isfinite(new)])
        raise DivergenceError(t, float(finite.max()) if finite.size else float("inf"),
                              "non-finite ADO entries")
    return HierarchyState(ados=new, time=t)


# ── Propagation ───────────────────────────────────────────────────────────────

def site_density_matrix(site: int, n_sites: int) -> np.ndarray:
    """|site><site| (0-based)."""
    _check_site(site, n_sites)
    return _projector(site, n_sites)


def _validate_rho0(rho0: np.ndarray, n: int) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=np.complex128)
    if rho0.shape != (n, n):
        raise InvalidSpecError(f"rho0 must be {n}x{n}, got {rho0.shape}")
    report = check_density_properties(rho0)
    if report.hermiticity_deviation > 1e-10:
        raise InvalidSpecError("rho0 is not Hermitian")
    if report.trace_deviation > 1e-8:
        raise InvalidSpecError(f"rho0 trace deviates from 1 by {report.trace_deviation:.2e}")
    if not report.psd_ok:
        raise InvalidSpecError(f"rho0 is not positive semidefinite (min eigenvalue {report.min_eigenvalue:.2e})")
    return rho0


def propagate(system: SystemSpec, bath: BathSpec, rho0: np.ndarray,
              t_total: float = None, dt: float = None, depth: int = None,
              store_full: bool = False, units: UnitSystem = UNITS,
              budget_bytes: Optional[int] = None, workers: int = 1) -> Trajectory:
    """Propagate rho0 from 0 to t_total on a fixed dt grid, recording site populations."""
    t_total = config.T_TOTAL_PS if t_total is None else t_total
    dt = config.DT_PS if dt is None else dt
    depth = config.DEPTH if depth is None else depth
    if dt <= 0 or t_total < 0:
        raise InvalidSpecError(f"need dt > 0 and t_total >= 0 (dt={dt}, t_total={t_total})")
    n = system.n_sites
    if bath.n_sites != n:
        raise InvalidSpecError(f"bath has {bath.n_sites} sites, system has {n}")
    rho0 = _validate_rho0(rho0, n)

    H = build_hamiltonian(system, units)
    layout = enumerate_hierarchy(n, depth, budget_bytes)
    check_high_temperature(bath, units)
    ratio = terminator_ratio(H, bath, units)
    log.debug("Propagating N=%d K=%d (%d ADOs), dt=%g ps, t_total=%g ps, omega_e/min(gamma)=%.3f",
              n, depth, len(layout), dt, t_total, ratio)

    n_steps = int(round(t_total / dt))
    times = np.arange(n_steps + 1) * dt
    populations = np.empty((n_steps + 1, n))
    density = np.empty((n_steps + 1, n, n), dtype=np.complex128) if store_full else None
    max_trace_error = 0.0
    max_herm_error = 0.0

    solver = HeomSolver(H, bath, layout, units, workers)
    state = HierarchyState.initial(rho0, layout)
    try:
        for step in range(n_steps + 1):
            rho = state.rho
            populations[step] = rho.diagonal().real
            max_trace_error = max(max_trace_error, abs(np.trace(rho) - 1.0))
            max_herm_error = max(max_herm_error, float(np.max(np.abs(rho - rho.conj().T))))
            if density is not None:
                density[step] = rho
            if step == n_steps:
                break
            state = rk4_step(state, dt, solver.derivative)
            peak = float(np.max(np.abs(state.rho)))
            if peak > RHO_BOUND:
                raise DivergenceError(state.time, peak, "reduced density matrix left the physical range")
    finally:
        solver.close()

    if max_trace_error > TRACE_TOL:
        log.warning("Trace drift %.2e exceeds %.0e", max_trace_error, TRACE_TOL)

    meta = {
        "sites": n,
        "dt_ps": dt,
        "K": depth,
        "epsilon": list(system.site_energies),
        "J": [list(row) for row in system.couplings],
        "lambda": list(bath.lambdas),
        "gamma": list(bath.gammas),
        "T": bath.temperature,
        "terminator_ratio": ratio,
        "max_trace_error": float(max_trace_error),
        "max_hermiticity_error": max_herm_error,
    }
    return Trajectory(times=times, populations=populations, density_matrices=density, meta=meta)


# ── Density-matrix audit ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class DensityReport:
    trace_deviation: float
    hermiticity_deviation: float
    min_eigenvalue: float

    @property
    def trace_ok(self) -> bool:
        return self.trace_deviation <= TRACE_TOL

    @property
    def hermitian_ok(self) -> bool:
        return self.hermiticity_deviation <= HERMITIAN_TOL

    @property
    def psd_ok(self) -> bool:
        return self.min_eigenvalue >= PSD_TOL

    @property
    def passed(self) -> bool:
        return self.trace_ok and self.hermitian_ok and self.psd_ok


def check_density_properties(rho: np.ndarray) -> DensityReport:
    """Trace, Hermiticity and positivity of a density matrix."""
    rho = np.asarray(rho, dtype=np.complex128)
    _check_square(rho)
    hermitian_part = 0.5 * (rho + rho.conj().T)
    return DensityReport(
        trace_deviation=float(abs(np.trace(rho) - 1.0)),
        hermiticity_deviation=float(np.max(np.abs(rho - rho.conj().T))),
        min_eigenvalue=float(np.linalg.eigvalsh(hermitian_part)[0]),
    )
