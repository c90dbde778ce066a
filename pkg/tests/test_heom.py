import numpy as np
import pytest
from scipy.linalg import expm

from core.errors import DivergenceError, InvalidSpecError, LayoutMismatchError
from core.heom import (HeomSolver, HierarchyState, check_density_properties, heom_derivative,
                       liouvillian_apply, phi_apply, propagate, rk4_step, site_density_matrix,
                       terminator_ratio, theta_apply)
from core.hierarchy import enumerate_hierarchy
from core.system import UNITS, BathSpec, SystemSpec, build_hamiltonian


# Restated, not imported from core.system
CM1_TO_RADPS = 2.0 * np.pi * 0.0299792458
KB_CM1_PER_K = 0.695034800


def _random_ados(rng, count, n):
    return rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))


def _elementwise_derivative(ados, H_cm1, lambdas, gammas, temperature, layout):
    """
    Hierarchy equation written out entry by entry with scalar arithmetic.

    For V_j = |j><j|, [V_j, X]_ab = (d_aj - d_bj) X_ab and {V_j, X}_ab = (d_aj + d_bj) X_ab,
    so Theta_j X reduces to (i 2 lambda_j kT (d_aj - d_bj) + lambda_j gamma_j (d_aj + d_bj)) X_ab.
    """
    H = np.asarray(H_cm1, dtype=float) * CM1_TO_RADPS
    lam = np.asarray(lambdas, dtype=float) * CM1_TO_RADPS
    gam = np.asarray(gammas, dtype=float) * CM1_TO_RADPS
    kT = KB_CM1_PER_K * temperature * CM1_TO_RADPS
    commutator_coeff = 2.0 * lam * kT
    anticommutator_coeff = lam * gam
    n_sites = H.shape[0]
    where = {tuple(idx.n): i for i, idx in enumerate(layout.indices)}

    out = np.zeros_like(ados)
    for i, idx in enumerate(layout.indices):
        n = tuple(idx.n)
        damping = sum(n[j] * gam[j] for j in range(n_sites))
        for a in range(n_sites):
            for b in range(n_sites):
                value = -damping * ados[i, a, b]
                for c in range(n_sites):
                    value += -1j * (H[a, c] * ados[i, c, b] - ados[i, a, c] * H[c, b])
                for j in range(n_sites):
                    comm = float(a == j) - float(b == j)
                    anti = float(a == j) + float(b == j)
                    up = where.get(n[:j] + (n[j] + 1,) + n[j + 1:])
                    if up is not None:
                        value += 1j * comm * ados[up, a, b]
                    if n[j] > 0:
                        down = where[n[:j] + (n[j] - 1,) + n[j + 1:]]
                        value += n[j] * (1j * commutator_coeff[j] * comm + anticommutator_coeff[j] * anti) \
                            * ados[down, a, b]
                out[i, a, b] = value
    return out


def _generator_matrix(solver, n_ados, n):
    """Dense matrix of the (linear) derivative, built column by column."""
    size = n_ados * n * n
    columns = []
    for k in range(size):
        unit = np.zeros(size, dtype=complex)
        unit[k] = 1.0
        columns.append(solver.derivative(unit.reshape(n_ados, n, n)).ravel())
    return np.column_stack(columns)


# ── Superoperators ────────────────────────────────────────────────────────────

def test_liouvillian_of_commuting_matrices_is_zero():
    H = np.diag([1.0, 2.0]).astype(complex)
    assert np.allclose(liouvillian_apply(H, np.diag([3.0, 4.0])), 0.0)


def test_phi_on_coherence():
    sigma = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    # V_0 sigma - sigma V_0 = sigma for |0><1|
    np.testing.assert_allclose(phi_apply(0, sigma), 1j * sigma)
    np.testing.assert_allclose(phi_apply(1, sigma), -1j * sigma)


def test_theta_on_population(dimer_bath):
    sigma = site_density_matrix(0, 2)
    lam = UNITS.to_radps(35.0)
    gam = UNITS.to_radps(53.0)
    # commutator vanishes, anticommutator is 2 sigma
    np.testing.assert_allclose(theta_apply(0, sigma, dimer_bath), 2.0 * lam * gam * sigma)
    np.testing.assert_allclose(theta_apply(1, sigma, dimer_bath), 0.0)


def test_superoperator_dimension_checks(dimer_bath):
    with pytest.raises(InvalidSpecError):
        liouvillian_apply(np.eye(2), np.eye(3))
    with pytest.raises(InvalidSpecError):
        phi_apply(2, np.eye(2))
    with pytest.raises(InvalidSpecError):
        theta_apply(0, np.eye(3), dimer_bath)


# ── Derivative ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("depth", [1, 3])
def test_dimer_derivative_matches_elementwise_equation(dimer, dimer_bath, rng, depth):
    layout = enumerate_hierarchy(2, depth)
    H = build_hamiltonian(dimer)
    for _ in range(20):
        ados = _random_ados(rng, len(layout), 2)
        got = heom_derivative(HierarchyState(ados), H, dimer_bath, layout).ados
        expected = _elementwise_derivative(ados, [[100.0, 100.0], [100.0, 0.0]], (35.0, 35.0), (53.0, 53.0),
                                           300.0, layout)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-9)


def test_dimer_derivative_with_unequal_baths(rng):
    system = SystemSpec.chain([-49.0, 0.0], [-11.0])
    bath = BathSpec(lambdas=(51.0, 7.0), gammas=(53.0, 40.0), temperature=300.0)
    layout = enumerate_hierarchy(2, 4)
    H = build_hamiltonian(system)
    for _ in range(20):
        ados = _random_ados(rng, len(layout), 2)
        got = heom_derivative(HierarchyState(ados), H, bath, layout).ados
        expected = _elementwise_derivative(ados, [[-49.0, -11.0], [-11.0, 0.0]], (51.0, 7.0), (53.0, 40.0),
                                           300.0, layout)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-9)


def test_theta_commutator_coefficient_on_a_coherence(dimer_bath):
    sigma = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    lam, gam = 35.0 * CM1_TO_RADPS, 53.0 * CM1_TO_RADPS
    kT = KB_CM1_PER_K * 300.0 * CM1_TO_RADPS
    # [V_0, |0><1|] = |0><1| and {V_0, |0><1|} = |0><1|
    np.testing.assert_allclose(theta_apply(0, sigma, dimer_bath), (2j * lam * kT + lam * gam) * sigma, rtol=1e-13)
    np.testing.assert_allclose(theta_apply(1, sigma, dimer_bath), (-2j * lam * kT + lam * gam) * sigma, rtol=1e-13)


def test_derivative_for_trimer_with_distinct_baths(rng):
    system = SystemSpec.chain([120.0, 40.0, -30.0], [80.0, -60.0])
    bath = BathSpec(lambdas=(10.0, 50.0, 90.0), gammas=(40.0, 53.0, 70.0), temperature=250.0)
    layout = enumerate_hierarchy(3, 2)
    H = build_hamiltonian(system)
    ados = _random_ados(rng, len(layout), 3)
    got = heom_derivative(HierarchyState(ados), H, bath, layout).ados
    H_cm1 = [[120.0, 80.0, 0.0], [80.0, 40.0, -60.0], [0.0, -60.0, -30.0]]
    expected = _elementwise_derivative(ados, H_cm1, bath.lambdas, bath.gammas, 250.0, layout)
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-9)


def test_zero_bath_reduces_to_von_neumann(dimer, rng):
    bath = BathSpec.model_construct(lambdas=(0.0, 0.0), gammas=(53.0, 53.0), temperature=300.0)
    layout = enumerate_hierarchy(2, 0)
    H = build_hamiltonian(dimer)
    rho = _random_ados(rng, 1, 2)
    got = heom_derivative(HierarchyState(rho), H, bath, layout).ados[0]
    np.testing.assert_allclose(got, -1j * (H @ rho[0] - rho[0] @ H))


def test_threaded_blocks_agree_with_single_block(dimer, dimer_bath, rng):
    layout = enumerate_hierarchy(2, 6)
    H = build_hamiltonian(dimer)
    ados = _random_ados(rng, len(layout), 2)
    single = HeomSolver(H, dimer_bath, layout).derivative(ados)
    solver = HeomSolver(H, dimer_bath, layout, workers=3)
    try:
        threaded = solver.derivative(ados)
    finally:
        solver.close()
    np.testing.assert_allclose(threaded, single, rtol=1e-14, atol=1e-14)


def test_derivative_rejects_wrong_layout(dimer, dimer_bath):
    layout = enumerate_hierarchy(2, 3)
    state = HierarchyState(np.zeros((4, 2, 2), dtype=complex))
    with pytest.raises(LayoutMismatchError):
        heom_derivative(state, build_hamiltonian(dimer), dimer_bath, layout)
    with pytest.raises(LayoutMismatchError):
        HeomSolver(np.eye(3), dimer_bath, layout)


# ── Integrator ────────────────────────────────────────────────────────────────

def test_rk4_step_on_exponential_decay():
    state = HierarchyState(np.ones((1, 1, 1), dtype=complex))
    new = rk4_step(state, 0.1, lambda y: -y)
    assert new.ados[0, 0, 0].real == pytest.approx(0.9048375, abs=1e-7)
    assert new.time == pytest.approx(0.1)


def test_rk4_step_rejects_non_positive_dt():
    with pytest.raises(InvalidSpecError):
        rk4_step(HierarchyState(np.ones((1, 1, 1), dtype=complex)), 0.0, lambda y: -y)


def test_rk4_step_reports_non_finite_state():
    state = HierarchyState(np.ones((1, 1, 1), dtype=complex))
    with pytest.raises(DivergenceError):
        rk4_step(state, 0.1, lambda y: y * np.inf)


def test_rk4_one_step_error_is_fifth_order(dimer, dimer_bath, rng):
    layout = enumerate_hierarchy(2, 2)
    solver = HeomSolver(build_hamiltonian(dimer), dimer_bath, layout)
    generator = _generator_matrix(solver, len(layout), 2)
    y0 = _random_ados(rng, len(layout), 2)

    def one_step_error(dt):
        stepped = rk4_step(HierarchyState(y0), dt, solver.derivative).ados.ravel()
        return np.linalg.norm(stepped - expm(generator * dt) @ y0.ravel())

    ratio = one_step_error(0.0005) / one_step_error(0.00025)
    assert ratio == pytest.approx(32.0, rel=0.1)


# ── Propagation ───────────────────────────────────────────────────────────────

def test_closed_dimer_shows_rabi_oscillation():
    system = SystemSpec.chain([0.0, 0.0], [100.0])
    bath = BathSpec.uniform(2, 1e-6, 53.0, 300.0)
    traj = propagate(system, bath, site_density_matrix(0, 2), t_total=1.0, dt=0.0002, depth=0)
    J = 100.0 * CM1_TO_RADPS
    assert np.pi / J == pytest.approx(0.16678, abs=1e-5)
    assert len(traj) == 5001
    np.testing.assert_allclose(traj.series(0), np.cos(J * traj.times) ** 2, atol=1e-6)
    np.testing.assert_allclose(traj.populations.sum(axis=1), 1.0, atol=1e-10)
    # back on site 0 after each full period
    for k in range(1, 6):
        step = int(round(k * np.pi / J / 0.0002))
        assert traj.series(0)[step] > 0.99


@pytest.mark.slow
def test_populations_converged_in_time_step(dimer, dimer_bath):
    rho0 = site_density_matrix(0, 2)
    coarse = propagate(dimer, dimer_bath, rho0, t_total=0.2, dt=0.0002, depth=6)
    fine = propagate(dimer, dimer_bath, rho0, t_total=0.2, dt=0.00002, depth=6)
    assert len(fine) == 10001
    assert np.max(np.abs(coarse.populations - fine.populations[::10])) < 1e-5


def test_uncoupled_sites_keep_their_population():
    system = SystemSpec.chain([100.0, 0.0, -50.0], [0.0, 0.0])
    bath = BathSpec.uniform(3, 35.0, 53.0, 300.0)
    traj = propagate(system, bath, site_density_matrix(1, 3), t_total=0.05, depth=3)
    np.testing.assert_allclose(traj.series(1), 1.0, atol=1e-12)
    np.testing.assert_allclose(traj.series(0), 0.0, atol=1e-12)


def test_propagation_preserves_trace_and_hermiticity(rng):
    system = SystemSpec.chain(list(rng.uniform(-100, 100, 2)) + [0.0], rng.uniform(-100, 100, 2))
    bath = BathSpec.uniform(3, float(rng.uniform(1, 100)), 53.0, 300.0)
    traj = propagate(system, bath, site_density_matrix(0, 3), t_total=0.05, depth=3, store_full=True)
    assert traj.meta["max_trace_error"] < 1e-6
    assert traj.meta["max_hermiticity_error"] < 1e-8
    assert traj.density_matrices.shape == (251, 3, 3)
    np.testing.assert_allclose(traj.density_matrices[:, 0, 0].real, traj.series(0))
    assert traj.audit().ok


def test_symmetric_dimer_relaxes_to_equal_populations():
    system = SystemSpec.chain([0.0, 0.0], [100.0])
    bath = BathSpec.uniform(2, 100.0, 53.0, 300.0)
    traj = propagate(system, bath, site_density_matrix(0, 2), t_total=0.5, depth=6)
    assert traj.series(0)[-1] == pytest.approx(0.5, abs=0.02)


def test_meta_describes_the_run(dimer, dimer_bath):
    traj = propagate(dimer, dimer_bath, site_density_matrix(0, 2), t_total=0.002, depth=2)
    assert traj.meta["sites"] == 2
    assert traj.meta["K"] == 2
    assert traj.meta["dt_ps"] == 0.0002
    assert traj.meta["lambda"] == [35.0, 35.0]
    assert traj.meta["terminator_ratio"] == pytest.approx(
        terminator_ratio(build_hamiltonian(dimer), dimer_bath))
    assert len(traj) == 11


def test_default_grid_has_5001_points():
    system = SystemSpec.chain([0.0, 0.0], [0.0])
    bath = BathSpec.uniform(2, 35.0, 53.0, 300.0)
    traj = propagate(system, bath, site_density_matrix(0, 2), depth=0)
    assert len(traj) == 5001
    assert traj.times[-1] == pytest.approx(1.0)


def test_oversized_step_diverges(dimer, dimer_bath):
    with pytest.raises(DivergenceError):
        propagate(dimer, dimer_bath, site_density_matrix(0, 2), t_total=1.0, dt=0.05, depth=20)


def test_invalid_initial_state(dimer, dimer_bath):
    with pytest.raises(InvalidSpecError):
        propagate(dimer, dimer_bath, 2.0 * site_density_matrix(0, 2), t_total=0.01)
    with pytest.raises(InvalidSpecError):
        propagate(dimer, dimer_bath, np.eye(3) / 3.0, t_total=0.01)


@pytest.mark.slow
def test_populations_converged_in_depth():
    system = SystemSpec.chain([60.0, 0.0], [50.0])
    bath = BathSpec.uniform(2, 35.0, 53.0, 300.0)
    rho0 = site_density_matrix(0, 2)
    shallow = propagate(system, bath, rho0, t_total=0.2, depth=12)
    deep = propagate(system, bath, rho0, t_total=0.2, depth=20)
    assert np.max(np.abs(shallow.populations - deep.populations)) < 1e-4


# ── Density checks ────────────────────────────────────────────────────────────

def test_density_properties_of_mixed_state():
    report = check_density_properties(np.eye(2) / 2.0)
    assert report.passed
    assert report.min_eigenvalue == pytest.approx(0.5)


def test_density_properties_flag_violations():
    assert not check_density_properties(np.array([[1.0, 0.5], [0.0, 0.0]])).hermitian_ok
    assert not check_density_properties(np.diag([1.2, -0.2])).psd_ok
    assert not check_density_properties(np.diag([0.6, 0.6])).trace_ok
