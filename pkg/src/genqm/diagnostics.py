"""Densities, currents and conserved-quantity bookkeeping.

Probability density lives on nodes, current density on half-nodes in
flux form, so the discrete continuity residual inherits the accuracy of
the time integrator.  Quadrature is the trapezoid rule throughout,
consistent with the second-order stencils.

In pt mode the density psi * psi_sharp is generally complex; it is
reported as a complex array and never coerced real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenqmError
from .model import Field, Grid, PhysicalConstants, SampledProfiles
from .operators import (
    TridiagonalOperator,
    central_derivative,
    transform_representation,
)
from .spectra import density_for_mode

__all__ = [
    "UnnormalizedStateError",
    "DiagnosticsReport",
    "probability_density",
    "current_density",
    "continuity_residual",
    "energy_report",
    "total_probability",
]

NORM_TOL = 1e-6


class UnnormalizedStateError(GenqmError):
    pass


@dataclass(frozen=True)
class DiagnosticsReport:
    """Snapshot of every reported quantity for one state."""

    t: float
    step_index: int
    rho: np.ndarray                 # nodes
    current: np.ndarray             # half-nodes
    continuity_residual_max: float  # vs the previous report; nan for the first
    continuity_residual_l2: float
    total_probability: complex
    energy_functional: complex
    expectation_H: complex
    lagrangian_integral: complex | None


def probability_density(
    psi: Field,
    mode: str,
    profiles: SampledProfiles,
    psi_sharp: Field | None = None,
) -> np.ndarray:
    """Density on nodes: conj-pairing in hermitian mode, the
    parity-conjugate field in pt mode, divided by A in phi representation."""
    if mode == "pt" and psi_sharp is None:
        raise ValueError("pt mode requires the conjugate field psi_sharp")
    return density_for_mode(psi, mode, profiles, psi_sharp)


def _partner(psi: Field, mode: str, psi_sharp: Field | None) -> np.ndarray:
    if mode == "hermitian":
        return np.conj(psi.values)
    if mode == "pt":
        if psi_sharp is None:
            raise ValueError("pt mode requires the conjugate field psi_sharp")
        if psi_sharp.representation != psi.representation:
            raise ValueError("state and conjugate field are in different representations")
        return psi_sharp.values
    raise ValueError(f"unknown mode {mode!r}")


def current_density(
    psi: Field,
    mode: str,
    profiles: SampledProfiles,
    constants: PhysicalConstants,
    grid: Grid,
    psi_sharp: Field | None = None,
) -> np.ndarray:
    """Half-node flux-form current density.

    J_{i+1/2} = (hbar/2im) k_{i+1/2} (pbar_dag * dpsi - pbar * dpsi_dag) / h
    with two-node averages pbar and differences dpsi, where the coupling
    k is A^2 at half-nodes (psi representation) or A (phi representation)
    and the dagger is the mode-appropriate conjugate.
    """
    v = psi.values
    vd = _partner(psi, mode, psi_sharp)
    h = grid.spacing
    vbar = 0.5 * (v[:-1] + v[1:])
    vdbar = 0.5 * (vd[:-1] + vd[1:])
    dv = np.diff(v)
    dvd = np.diff(vd)
    coupling = profiles.a_half if psi.representation == "psi" else profiles.A_half
    pref = constants.hbar / (2j * constants.mass)
    return pref * coupling * (vdbar * dv - vbar * dvd) / h


def continuity_residual(
    report_a: DiagnosticsReport,
    report_b: DiagnosticsReport,
    dt: float,
    grid: Grid,
) -> tuple[float, float]:
    """Discrete continuity defect between two consecutive reports.

    r_i = (rho_b - rho_a)/dt + (Jbar_{i+1/2} - Jbar_{i-1/2})/h at interior
    nodes, with Jbar the average of the two time levels.  Returns
    (max |r_i|, discrete L2 norm).
    """
    if len(report_a.rho) != grid.points or len(report_b.rho) != grid.points:
        raise ValueError("reports do not match the grid")
    h = grid.spacing
    drho = (report_b.rho - report_a.rho) / dt
    jbar = 0.5 * (report_a.current + report_b.current)
    r = drho[1:-1] + np.diff(jbar) / h
    mags = np.abs(r)
    return float(np.max(mags)), float(np.sqrt(np.sum(mags**2) * h))


def total_probability(rho: np.ndarray, grid: Grid) -> complex:
    """Trapezoid integral of a node density."""
    if len(rho) != grid.points:
        raise ValueError(f"density length {len(rho)} != grid points {grid.points}")
    return complex(np.trapezoid(rho, dx=grid.spacing))


def _to_psi(f: Field, profiles: SampledProfiles) -> Field:
    if f.representation == "psi":
        return f
    return transform_representation(f, profiles, "phi_to_psi")


def energy_report(
    state: Field,
    H: TridiagonalOperator,
    profiles: SampledProfiles,
    constants: PhysicalConstants,
    mode: str,
    psi_sharp: Field | None = None,
    dpsi_dt: Field | None = None,
) -> tuple[complex, complex, complex | None]:
    """(energy functional, expectation of H, action-density integral).

    The energy functional integrates the Hamiltonian density
        c a psi_dag' psi' - (hbar^2/4m) A A'' psi_dag psi
        - (hbar^2/8m) A'^2 psi_dag psi + V psi_dag psi
    with central-difference derivatives; the expectation applies the
    assembled operator (with the 1/A weight in phi representation).
    Those two agree only up to a discrete integration-by-parts defect,
    which is exactly what makes comparing them a useful check.

    The action-density integral  i hbar (dpsi/dt) psi_dag - (energy
    density) is only computed when dpsi_dt is supplied.
    """
    if mode == "pt" and psi_sharp is None:
        raise ValueError("pt mode requires the conjugate field psi_sharp")
    grid = profiles.grid
    h = grid.spacing
    rho = density_for_mode(state, mode, profiles, psi_sharp)
    total = total_probability(rho, grid)
    if abs(total - 1.0) > NORM_TOL:
        raise UnnormalizedStateError(
            f"state norm integral {total!r} deviates from 1 by more than {NORM_TOL:g}"
        )

    if H.representation != state.representation:
        raise ValueError("operator and state are in different representations")

    # expectation of H in the state's own representation
    hv = H.apply(state.values)
    partner = _partner(state, mode, psi_sharp)
    integrand = partner * hv
    if state.representation == "phi":
        integrand = integrand / profiles.A
    expectation = complex(np.trapezoid(integrand, dx=h))

    # energy functional evaluated on psi-representation fields
    psi = _to_psi(state, profiles)
    psi_dag = (
        np.conj(psi.values)
        if mode == "hermitian"
        else _to_psi(psi_sharp, profiles).values
    )
    c = constants.hbar**2 / (2.0 * constants.mass)
    hb2m = constants.hbar**2 / constants.mass
    dpsi = central_derivative(psi.values, h)
    dpsi_dag = central_derivative(psi_dag, h)
    pair = psi_dag * psi.values
    density = (
        c * profiles.a * dpsi_dag * dpsi
        - (hb2m / 4.0) * profiles.A * profiles.d2A * pair
        - (hb2m / 8.0) * profiles.dA**2 * pair
        + profiles.V * pair
    )
    functional = complex(np.trapezoid(density, dx=h))

    action = None
    if dpsi_dt is not None:
        if dpsi_dt.representation != state.representation:
            raise ValueError("dpsi_dt representation does not match the state")
        ddt_psi = _to_psi(dpsi_dt, profiles)
        term = 1j * constants.hbar * ddt_psi.values * psi_dag
        action = complex(np.trapezoid(term, dx=h)) - functional
    return functional, expectation, action
