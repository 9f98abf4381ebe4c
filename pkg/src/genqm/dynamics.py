"""Time propagation with the Crank-Nicolson scheme.

One field advances by (I + i dt H / 2hbar) psi1 = (I - i dt H / 2hbar) psi0.
In pt mode the conjugate field is co-evolved as an independent unknown
with the sign-reversed equation; that it keeps coinciding with the
parity-conjugation image of the evolved field is then something the
tests can check rather than something the code assumes.
"""

from __future__ import annotations

import cmath
import dataclasses
from dataclasses import dataclass

import numpy as np

from . import diagnostics
from .errors import GenqmError
from .model import Field, PhysicalConstants, ProblemSpec, SampledProfiles, pt_reflect
from .operators import TridiagonalOperator, transform_representation
from .spectra import DegenerateNormError, density_for_mode, solve_spectrum

__all__ = [
    "SolverBreakdownError",
    "EvolutionState",
    "CrankNicolsonStepper",
    "crank_nicolson_step",
    "evolve",
    "gaussian_packet",
    "initial_state_gaussian",
    "initial_state_eigenstate",
]


class SolverBreakdownError(GenqmError):
    def __init__(self, row: int, step_index: int):
        super().__init__(
            f"tridiagonal solve broke down with a zero pivot at interior row "
            f"{row} while advancing step {step_index}"
        )
        self.row = row
        self.step_index = step_index


@dataclass(frozen=True)
class EvolutionState:
    t: float
    psi: Field
    psi_sharp: Field | None
    step_index: int

    def __post_init__(self):
        if self.psi_sharp is not None and len(self.psi_sharp) != len(self.psi):
            raise ValueError("psi and psi_sharp differ in length")


class _ZeroPivot(Exception):
    def __init__(self, row: int):
        self.row = row


class _ThomasFactor:
    """Prefactored tridiagonal solve; the matrix is fixed, only the
    right-hand side changes between steps.  No pivoting: a vanishing
    pivot is reported, never regularized."""

    def __init__(self, sub: np.ndarray, diag: np.ndarray, sup: np.ndarray):
        m = len(diag)
        cprime = np.empty(max(m - 1, 0), dtype=np.complex128)
        denom = np.empty(m, dtype=np.complex128)
        if diag[0] == 0:
            raise _ZeroPivot(0)
        denom[0] = diag[0]
        for i in range(1, m):
            cprime[i - 1] = sup[i - 1] / denom[i - 1]
            d = diag[i] - sub[i - 1] * cprime[i - 1]
            if d == 0:
                raise _ZeroPivot(i)
            denom[i] = d
        self.sub = sub
        self.cprime = cprime
        self.denom = denom

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        m = len(self.denom)
        sub, denom, cprime = self.sub, self.denom, self.cprime
        y = np.empty(m, dtype=np.complex128)
        y[0] = rhs[0] / denom[0]
        for i in range(1, m):
            y[i] = (rhs[i] - sub[i - 1] * y[i - 1]) / denom[i]
        for i in range(m - 2, -1, -1):
            y[i] -= cprime[i] * y[i + 1]
        return y


class CrankNicolsonStepper:
    """Reusable stepper for a fixed operator and time step."""

    def __init__(
        self,
        H: TridiagonalOperator,
        dt: float,
        constants: PhysicalConstants,
        pt: bool = False,
    ):
        if dt == 0:
            raise ValueError("time step must be nonzero")
        self.H = H
        self.dt = dt
        self.pt = pt
        kappa = 1j * dt / (2.0 * constants.hbar)
        sub_i, diag_i, sup_i = H.interior()
        self._plus = (kappa * sub_i, 1.0 + kappa * diag_i, kappa * sup_i)
        self._minus = (-kappa * sub_i, 1.0 - kappa * diag_i, -kappa * sup_i)
        self._fwd: _ThomasFactor | None = None
        self._bwd: _ThomasFactor | None = None

    @staticmethod
    def _apply_bands(bands, v: np.ndarray) -> np.ndarray:
        sub, diag, sup = bands
        out = diag * v
        out[:-1] += sup * v[1:]
        out[1:] += sub * v[:-1]
        return out

    def _factor(self, bands, step_index: int) -> _ThomasFactor:
        try:
            return _ThomasFactor(*bands)
        except _ZeroPivot as exc:
            raise SolverBreakdownError(exc.row, step_index) from None

    def step(self, state: EvolutionState) -> EvolutionState:
        n = self.H.n
        if len(state.psi) != n:
            raise ValueError("state does not match the operator size")
        if state.psi.representation != self.H.representation:
            raise ValueError(
                f"operator is in {self.H.representation!r} representation but "
                f"the state is {state.psi.representation!r}"
            )
        if self.pt and state.psi_sharp is None:
            raise ValueError("pt stepping requires psi_sharp in the state")
        if self._fwd is None:
            self._fwd = self._factor(self._plus, state.step_index)
        v = state.psi.values[1:-1]
        rhs = self._apply_bands(self._minus, v)
        out = np.zeros(n, dtype=np.complex128)
        out[1:-1] = self._fwd.solve(rhs)
        psi1 = Field(out, state.psi.representation)

        sharp1 = None
        if self.pt:
            if self._bwd is None:
                self._bwd = self._factor(self._minus, state.step_index)
            vs = state.psi_sharp.values[1:-1]
            rhs_s = self._apply_bands(self._plus, vs)
            outs = np.zeros(n, dtype=np.complex128)
            outs[1:-1] = self._bwd.solve(rhs_s)
            sharp1 = Field(outs, state.psi_sharp.representation)
        elif state.psi_sharp is not None:
            sharp1 = state.psi_sharp

        return EvolutionState(
            t=state.t + self.dt,
            psi=psi1,
            psi_sharp=sharp1,
            step_index=state.step_index + 1,
        )


def crank_nicolson_step(
    H: TridiagonalOperator,
    state: EvolutionState,
    dt: float,
    constants: PhysicalConstants,
) -> EvolutionState:
    """Advance one step; co-evolves the conjugate field when present."""
    stepper = CrankNicolsonStepper(H, dt, constants, pt=state.psi_sharp is not None)
    return stepper.step(state)


# ---------------------------------------------------------------------------
# Initial-condition catalog


def gaussian_packet(
    grid, x0: float, sigma: float, k0: float, representation: str = "psi"
) -> Field:
    """Unnormalized packet exp(-(x-x0)^2/(4 sigma^2) + i k0 x), endpoints
    pinned to zero.  Position variance of |psi|^2 is sigma^2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = grid.nodes
    vals = np.exp(-((x - x0) ** 2) / (4.0 * sigma**2) + 1j * k0 * x)
    vals[0] = vals[-1] = 0.0
    return Field(vals, representation)


def _pair_normalize(
    psi: Field,
    psi_sharp: Field | None,
    mode: str,
    profiles: SampledProfiles,
) -> tuple[Field, Field | None]:
    """Scale the field (and its partner by the same factor) so the mode
    density integrates to exactly 1."""
    rho = density_for_mode(psi, mode, profiles, psi_sharp)
    c = complex(np.trapezoid(rho, dx=profiles.grid.spacing))
    if abs(c) < 1e-10:
        raise DegenerateNormError(
            f"initial state is self-orthogonal under the mode density: {c!r}"
        )
    s = cmath.sqrt(c)
    out = Field(psi.values / s, psi.representation)
    out_sharp = None
    if psi_sharp is not None:
        out_sharp = Field(psi_sharp.values / s, psi_sharp.representation)
    return out, out_sharp


def initial_state_gaussian(
    spec: ProblemSpec,
    profiles: SampledProfiles,
    x0: float,
    sigma: float,
    k0: float,
) -> EvolutionState:
    """Normalized Gaussian packet in the problem's mode and representation."""
    psi = gaussian_packet(profiles.grid, x0, sigma, k0, "psi")
    if spec.representation == "phi":
        psi = transform_representation(psi, profiles, "psi_to_phi")
    sharp = pt_reflect(psi, profiles.grid) if spec.mode == "pt" else None
    psi, sharp = _pair_normalize(psi, sharp, spec.mode, profiles)
    return EvolutionState(t=0.0, psi=psi, psi_sharp=sharp, step_index=0)


def initial_state_eigenstate(
    spec: ProblemSpec,
    profiles: SampledProfiles,
    H: TridiagonalOperator,
    index: int,
) -> EvolutionState:
    """Eigenstate-by-index initial data in the operator's representation."""
    if index < 0:
        raise ValueError("eigenstate index must be nonnegative")
    pairs = solve_spectrum(H, index + 1, spec.mode, profiles, profiles.grid)
    psi = pairs[index].state
    sharp = pt_reflect(psi, profiles.grid) if spec.mode == "pt" else None
    psi, sharp = _pair_normalize(psi, sharp, spec.mode, profiles)
    return EvolutionState(t=0.0, psi=psi, psi_sharp=sharp, step_index=0)


# ---------------------------------------------------------------------------
# Driver


def _report_for(
    state: EvolutionState,
    spec: ProblemSpec,
    profiles: SampledProfiles,
    H: TridiagonalOperator,
    previous: diagnostics.DiagnosticsReport | None,
    dt_between: float,
) -> diagnostics.DiagnosticsReport:
    rho = diagnostics.probability_density(
        state.psi, spec.mode, profiles, state.psi_sharp
    )
    current = diagnostics.current_density(
        state.psi, spec.mode, profiles, spec.constants, profiles.grid,
        state.psi_sharp,
    )
    dpsi_dt = Field(
        -1j * H.apply(state.psi.values) / spec.constants.hbar,
        state.psi.representation,
    )
    functional, expectation, action = diagnostics.energy_report(
        state.psi, H, profiles, spec.constants, spec.mode,
        psi_sharp=state.psi_sharp, dpsi_dt=dpsi_dt,
    )
    report = diagnostics.DiagnosticsReport(
        t=state.t,
        step_index=state.step_index,
        rho=rho,
        current=current,
        continuity_residual_max=float("nan"),
        continuity_residual_l2=float("nan"),
        total_probability=diagnostics.total_probability(rho, profiles.grid),
        energy_functional=functional,
        expectation_H=expectation,
        lagrangian_integral=action,
    )
    if previous is not None:
        rmax, rl2 = diagnostics.continuity_residual(
            previous, report, dt_between, profiles.grid
        )
        report = dataclasses.replace(
            report, continuity_residual_max=rmax, continuity_residual_l2=rl2
        )
    return report


def evolve(
    problem: ProblemSpec,
    profiles: SampledProfiles,
    H: TridiagonalOperator,
    initial: EvolutionState,
    dt: float,
    steps: int,
    cadence: int = 1,
) -> tuple[list[diagnostics.DiagnosticsReport], EvolutionState]:
    """Run the propagation loop, reporting diagnostics every `cadence`
    steps (plus the initial state).  Deterministic for fixed inputs.

    The initial state must be normalized under the mode density (the
    initial-condition constructors guarantee this); the energy report
    rejects anything else."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if cadence < 1 or steps % cadence != 0:
        raise ValueError(
            f"cadence must divide the run into report points, got "
            f"cadence={cadence} for steps={steps}"
        )
    pt = problem.mode == "pt"
    if pt and initial.psi_sharp is None:
        raise ValueError("pt evolution requires an initial psi_sharp")
    stepper = CrankNicolsonStepper(H, dt, problem.constants, pt=pt)
    dt_between = cadence * dt

    reports = [_report_for(initial, problem, profiles, H, None, dt_between)]
    state = initial
    for k in range(1, steps + 1):
        state = stepper.step(state)
        if k % cadence == 0:
            reports.append(
                _report_for(state, problem, profiles, H, reports[-1], dt_between)
            )
    return reports, state
