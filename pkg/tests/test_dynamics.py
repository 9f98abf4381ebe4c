import numpy as np
import pytest

from genqm.dynamics import (
    CrankNicolsonStepper,
    EvolutionState,
    SolverBreakdownError,
    crank_nicolson_step,
    evolve,
    initial_state_eigenstate,
    initial_state_gaussian,
)
from genqm.model import Field, PhysicalConstants, pt_reflect
from genqm.operators import TridiagonalOperator
from genqm.spectra import solve_spectrum

from helpers import make_problem


def test_evolve_rejects_bad_arguments():
    spec, prof, op = make_problem("1", "0", -5.0, 5.0, 51)
    init = initial_state_gaussian(spec, prof, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        evolve(spec, prof, op, init, dt=0.01, steps=0)
    with pytest.raises(ValueError):
        evolve(spec, prof, op, init, dt=-0.01, steps=10)
    with pytest.raises(ValueError):
        evolve(spec, prof, op, init, dt=0.01, steps=10, cadence=3)


def test_norm_conserved_over_many_steps():
    spec, prof, op = make_problem("1", "0", -15.0, 15.0, 401)
    init = initial_state_gaussian(spec, prof, 0.0, 1.0, 0.5)
    reports, _ = evolve(spec, prof, op, init, dt=0.01, steps=400, cadence=40)
    drift = max(abs(r.total_probability - 1.0) for r in reports)
    assert drift < 1e-12


def _phase_error(dt):
    spec, prof, op = make_problem("1", "x^2/2", -10.0, 10.0, 401)
    pairs = solve_spectrum(op, 1, "hermitian", prof, prof.grid)
    e0, psi0 = pairs[0].energy.real, pairs[0].state
    state = EvolutionState(0.0, psi0, None, 0)
    out = crank_nicolson_step(op, state, dt, spec.constants)
    exact = np.exp(-1j * e0 * dt) * psi0.values
    return float(np.max(np.abs(out.psi.values - exact)))


def test_eigenstate_single_step_third_order_phase():
    # one step against exp(-i E dt) on a discrete eigenstate isolates the
    # time discretization: local error O(dt^3), i.e. 8x per halving
    e_coarse = _phase_error(0.08)
    e_fine = _phase_error(0.04)
    assert e_coarse / e_fine == pytest.approx(8.0, rel=0.25)


def test_global_second_order_in_dt():
    spec, prof, op = make_problem("1", "x^2/2", -10.0, 10.0, 301)
    init = initial_state_gaussian(spec, prof, 1.0, 0.8, 0.0)

    def final(dt, steps):
        _, state = evolve(spec, prof, op, init, dt=dt, steps=steps, cadence=steps)
        return state.psi.values

    f1 = final(0.04, 25)
    f2 = final(0.01, 100)
    f3 = final(0.0025, 400)
    e1 = np.max(np.abs(f1 - f2))
    e2 = np.max(np.abs(f2 - f3))
    assert 10 <= e1 / e2 <= 24


def test_time_reversal_consistency():
    spec, prof, op = make_problem("1", "x^2/2", -10.0, 10.0, 201)
    init = initial_state_gaussian(spec, prof, 0.5, 1.0, 0.3)
    forward = crank_nicolson_step(op, init, 0.05, spec.constants)
    back = crank_nicolson_step(op, forward, -0.05, spec.constants)
    assert np.max(np.abs(back.psi.values - init.psi.values)) < 1e-10


def test_free_gaussian_spreading_law():
    # position variance of |psi|^2 grows as sigma0^2 + (hbar t / 2 m sigma0)^2;
    # for sigma0 = 1, hbar = m = 1, t = 2 that is exactly 2
    spec, prof, op = make_problem("1", "0", -20.0, 20.0, 801)
    init = initial_state_gaussian(spec, prof, 0.0, 1.0, 0.0)
    _, state = evolve(spec, prof, op, init, dt=0.002, steps=1000, cadence=1000)
    x = prof.grid.nodes
    h = prof.grid.spacing
    rho = np.abs(state.psi.values) ** 2
    mass = np.trapezoid(rho, dx=h)
    mean = np.trapezoid(x * rho, dx=h) / mass
    var = np.trapezoid((x - mean) ** 2 * rho, dx=h) / mass
    assert var == pytest.approx(2.0, abs=5e-3)


def test_pt_pair_is_co_evolved_and_conserved():
    spec, prof, op = make_problem(
        "1", "x^2 + i*x", -12.0, 12.0, 401, mass=0.5, mode="pt"
    )
    init = initial_state_gaussian(spec, prof, 1.0, 1.0, 0.0)
    assert init.psi_sharp is not None
    reports, final = evolve(spec, prof, op, init, dt=0.002, steps=500, cadence=100)
    drift = max(abs(r.total_probability - 1.0) for r in reports)
    assert drift < 1e-10
    mismatch = np.max(
        np.abs(final.psi_sharp.values - pt_reflect(final.psi, prof.grid).values)
    )
    # co-evolution reproduces the parity-conjugation image of the evolved
    # field; discretely the two recursions coincide, so this sits at the
    # rounding floor, far below the dt^2 * t analytic bound
    assert mismatch <= (0.002**2) * final.t
    assert mismatch < 1e-10


def test_pt_eigenstate_evolution_conserves_total_probability():
    spec, prof, op = make_problem(
        "1", "x^2 + i*x", -12.0, 12.0, 301, mass=0.5, mode="pt"
    )
    init = initial_state_eigenstate(spec, prof, op, 0)
    reports, _ = evolve(spec, prof, op, init, dt=0.001, steps=1000, cadence=200)
    drift = max(abs(r.total_probability - 1.0) for r in reports)
    assert drift <= 1e-8


def test_pt_phi_representation_pair_evolution():
    spec, prof, op = make_problem(
        "1+x^2", "x^2/2", -6.0, 6.0, 201, mode="pt", representation="phi"
    )
    init = initial_state_gaussian(spec, prof, 0.5, 0.8, 0.0)
    assert init.psi.representation == "phi"
    reports, final = evolve(spec, prof, op, init, dt=0.005, steps=200, cadence=50)
    drift = max(abs(r.total_probability - 1.0) for r in reports)
    assert drift <= 1e-10
    mismatch = np.max(
        np.abs(final.psi_sharp.values - pt_reflect(final.psi, prof.grid).values)
    )
    assert mismatch < 1e-10


def test_pt_eigenstate_initial_bilinear_exactly_one():
    spec, prof, op = make_problem(
        "1", "x^2 + i*x", -12.0, 12.0, 301, mass=0.5, mode="pt"
    )
    init = initial_state_eigenstate(spec, prof, op, 1)
    rho = init.psi.values * init.psi_sharp.values
    total = np.trapezoid(rho, dx=prof.grid.spacing)
    assert abs(total - 1.0) < 1e-12


def test_hermitian_mode_has_no_sharp_field():
    spec, prof, op = make_problem("1", "x^2/2", -8.0, 8.0, 101)
    init = initial_state_gaussian(spec, prof, 0.0, 1.0, 0.0)
    assert init.psi_sharp is None
    out = crank_nicolson_step(op, init, 0.01, spec.constants)
    assert out.psi_sharp is None
    assert out.step_index == 1
    assert out.t == pytest.approx(0.01)


def test_stepper_reuse_matches_single_steps():
    spec, prof, op = make_problem("1", "x^2/2", -8.0, 8.0, 101)
    init = initial_state_gaussian(spec, prof, 0.0, 1.0, 0.4)
    stepper = CrankNicolsonStepper(op, 0.01, spec.constants)
    a = stepper.step(stepper.step(init))
    b = crank_nicolson_step(
        op, crank_nicolson_step(op, init, 0.01, spec.constants), 0.01, spec.constants
    )
    assert np.array_equal(a.psi.values, b.psi.values)


def test_zero_pivot_reported_with_step_index():
    # with dt=2, hbar=1 the factor kappa = dt/2hbar = 1, so a diagonal
    # entry of 1j makes the first pivot 1 + 1j*1j = 0 exactly
    n = 6
    diag = np.zeros(n, dtype=complex)
    diag[1] = 1j
    op = TridiagonalOperator(
        sub=np.zeros(n - 1, dtype=complex),
        diag=diag,
        sup=np.zeros(n - 1, dtype=complex),
        representation="psi",
        symmetric=True,
        spacing=1.0,
    )
    state = EvolutionState(0.0, Field(np.zeros(n)), None, step_index=7)
    with pytest.raises(SolverBreakdownError) as err:
        crank_nicolson_step(op, state, 2.0, PhysicalConstants(1.0, 1.0))
    assert err.value.row == 0
    assert err.value.step_index == 7


def test_step_rejects_representation_mismatch():
    spec, prof, op = make_problem("1+x^2", "0", -4.0, 4.0, 41)
    bad = EvolutionState(0.0, Field(np.ones(41), "phi"), None, 0)
    with pytest.raises(ValueError, match="representation"):
        crank_nicolson_step(op, bad, 0.01, spec.constants)


def test_evolve_report_cadence():
    spec, prof, op = make_problem("1", "0", -10.0, 10.0, 101)
    init = initial_state_gaussian(spec, prof, 0.0, 1.0, 0.0)
    reports, final = evolve(spec, prof, op, init, dt=0.01, steps=60, cadence=20)
    assert [r.step_index for r in reports] == [0, 20, 40, 60]
    assert final.step_index == 60
    assert np.isnan(reports[0].continuity_residual_max)
    assert np.isfinite(reports[1].continuity_residual_max)
