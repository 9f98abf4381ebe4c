"""Eigenproblem solvers and mode-aware state normalization.

Real symmetric operators go through the LAPACK tridiagonal path
(bisection + inverse iteration); everything else goes through the dense
general solver (Hessenberg reduction + shifted QR).  The complex path
never discards imaginary parts: spectral reality in the unbroken
regime is observed by tests, not assumed here.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import GenqmError
from .model import Field, Grid, SampledProfiles, pt_reflect
from .operators import TridiagonalOperator

__all__ = [
    "ConvergenceError",
    "DegenerateNormError",
    "EigenPair",
    "solve_spectrum",
    "normalize_state",
    "density_for_mode",
    "RESIDUAL_RTOL",
    "MAX_DENSE_SIZE",
]

# residual contract: ||H v - E v||_2 / ||v||_2 <= RESIDUAL_RTOL * scale(H)
RESIDUAL_RTOL = 1e-8
# dense general eigensolver is kept at desk scale on purpose
MAX_DENSE_SIZE = 4000
# |integral of the mode density| below this is a degenerate norm
DEGENERATE_NORM_TOL = 1e-10


class ConvergenceError(GenqmError):
    pass


class DegenerateNormError(GenqmError):
    pass


@dataclass(frozen=True)
class EigenPair:
    index: int
    energy: complex
    state: Field
    real: bool
    # set when the pt bilinear of this state was numerically zero (broken
    # pt phase / exceptional point) and the state fell back to L2 scaling
    pt_norm_degenerate: bool = False


def density_for_mode(
    psi: Field,
    mode: str,
    profiles: SampledProfiles,
    psi_sharp: Field | None = None,
) -> np.ndarray:
    """Mode/representation density used for normalization and reporting.

    hermitian psi: psi conj(psi); pt psi: psi psi_sharp;
    phi representation divides by A.  When psi_sharp is not given in pt
    mode it is derived as the parity-conjugation image of the state.
    """
    values = psi.values
    if mode == "hermitian":
        # real arithmetic keeps the density exactly real and nonnegative
        rho = (values.real**2 + values.imag**2).astype(np.complex128)
    elif mode == "pt":
        if psi_sharp is None:
            psi_sharp = pt_reflect(psi, profiles.grid)
        if psi_sharp.representation != psi.representation:
            raise ValueError("state and conjugate field are in different representations")
        rho = values * psi_sharp.values
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if psi.representation == "phi":
        rho = rho / profiles.A
    return rho


def _trapezoid(values: np.ndarray, h: float) -> complex:
    return complex(np.trapezoid(values, dx=h))


def normalize_state(
    state: Field,
    mode: str,
    representation: str,
    profiles: SampledProfiles,
    grid: Grid,
) -> Field:
    """Rescale so the trapezoid integral of the mode density is 1.

    The complex rescale factor is 1/sqrt(c) with c the raw integral;
    scaling a co-evolved conjugate partner by the same factor makes the
    pair integral exactly 1 for any nonzero complex c.
    """
    if state.representation != representation:
        raise ValueError(
            f"state is {state.representation!r} but {representation!r} was requested"
        )
    rho = density_for_mode(state, mode, profiles)
    c = _trapezoid(rho, grid.spacing)
    if abs(c) < DEGENERATE_NORM_TOL:
        raise DegenerateNormError(
            f"state is self-orthogonal under the mode density: integral = {c!r}"
        )
    return Field(state.values / cmath.sqrt(c), state.representation)


def _phase_fix(values: np.ndarray) -> np.ndarray:
    """Deterministic global phase: largest-magnitude entry real positive."""
    j = int(np.argmax(np.abs(values)))
    pivot = values[j]
    if pivot == 0:
        return values
    return values * (abs(pivot) / pivot)


def _rayleigh_polish(
    d: np.ndarray, e: np.ndarray, vectors: np.ndarray
) -> np.ndarray:
    """Extended-precision Rayleigh quotients for a symmetric tridiagonal.

    Uses the algebraically exact rewrite
        v' M v = sum_i (-e_i) (v_{i+1}-v_i)^2 + sum_i (d_i + e_{i-1} + e_i) v_i^2
    which avoids the cancellation of the naive bilinear form when the
    off-diagonal entries dominate (stiff kinetic coefficients).
    """
    dl = np.asarray(d, dtype=np.longdouble)
    el = np.asarray(e, dtype=np.longdouble)
    epad = np.concatenate(([np.longdouble(0)], el, [np.longdouble(0)]))
    w = dl + epad[:-1] + epad[1:]
    out = np.empty(vectors.shape[1])
    for j in range(vectors.shape[1]):
        v = np.asarray(vectors[:, j], dtype=np.longdouble)
        dv = np.diff(v)
        num = np.sum(-el * dv * dv) + np.sum(w * v * v)
        out[j] = float(num / np.sum(v * v))
    return out


def _check_residual(
    op: TridiagonalOperator, energy: complex, full_state: np.ndarray, index: int
) -> None:
    r = op.apply(full_state) - energy * full_state
    # Dirichlet rows are pinned, not part of the eigenproblem
    rel = float(np.linalg.norm(r[1:-1]) / np.linalg.norm(full_state))
    tol = RESIDUAL_RTOL * op.scale()
    if rel > tol:
        raise ConvergenceError(
            f"eigenpair {index} residual {rel:.3e} exceeds {tol:.3e}"
        )


def solve_spectrum(
    op: TridiagonalOperator,
    count: int,
    mode: str,
    profiles: SampledProfiles,
    grid: Grid,
) -> list[EigenPair]:
    """Lowest eigenpairs of the Dirichlet-interior block of op.

    Hermitian (real symmetric) operators use the tridiagonal solver and
    come back in ascending order; general operators use the dense solver
    and are sorted by real part, ties by imaginary part.  Every returned
    pair satisfies the residual contract and the normalization contract,
    with the deterministic largest-entry-real-positive phase.
    """
    n = op.n
    m = n - 2
    if not 1 <= count <= m:
        raise ValueError(f"count must be in [1, {m}], got {count}")

    sub_i, diag_i, sup_i = op.interior()
    if op.symmetric and op.is_real:
        d = diag_i.real.astype(np.float64)
        e = sup_i.real.astype(np.float64)
        try:
            w, vecs = scipy.linalg.eigh_tridiagonal(
                d, e, select="i", select_range=(0, count - 1)
            )
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}") from exc
        energies = _rayleigh_polish(d, e, vecs).astype(np.complex128)
        vectors = vecs.astype(np.complex128)
    else:
        if m > MAX_DENSE_SIZE:
            raise ValueError(
                f"dense eigensolver capped at {MAX_DENSE_SIZE} interior nodes, "
                f"got {m}; refine on a smaller grid"
            )
        if op.is_real:
            diag_i, sub_i, sup_i = diag_i.real, sub_i.real, sup_i.real
        dense = np.zeros((m, m), dtype=diag_i.dtype)
        dense[np.arange(m), np.arange(m)] = diag_i
        dense[np.arange(1, m), np.arange(m - 1)] = sub_i
        dense[np.arange(m - 1), np.arange(1, m)] = sup_i
        w, vr = scipy.linalg.eig(dense)
        order = np.lexsort((w.imag, w.real))
        w = w[order][:count]
        vectors = vr[:, order][:, :count].astype(np.complex128)
        energies = w.astype(np.complex128)

    scale = op.scale()
    pairs = []
    for j in range(count):
        full = np.zeros(n, dtype=np.complex128)
        full[1:-1] = vectors[:, j]
        energy = complex(energies[j])
        _check_residual(op, energy, full, j)
        state = Field(full, op.representation)
        degenerate = False
        try:
            state = normalize_state(state, mode, op.representation, profiles, grid)
        except DegenerateNormError:
            if mode != "pt":
                raise
            # broken-pt eigenstates are self-orthogonal under the bilinear;
            # keep the pair available and fall back to plain L2 scaling
            degenerate = True
            l2 = np.sqrt(np.trapezoid(np.abs(state.values) ** 2, dx=grid.spacing))
            state = Field(state.values / l2, op.representation)
        state = Field(_phase_fix(state.values), op.representation)
        pairs.append(
            EigenPair(
                index=j,
                energy=energy,
                state=state,
                real=abs(energy.imag) <= RESIDUAL_RTOL * scale,
                pt_norm_degenerate=degenerate,
            )
        )
    return pairs
