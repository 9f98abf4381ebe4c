"""Discrete operators for both field representations.

The kinetic term is discretized in conservative flux form with
half-node coefficients, which keeps the psi-representation matrix
exactly symmetric and pairs with a discrete continuity identity.  The
phi-representation matrix is deliberately left non-symmetric (it is
self-adjoint under the 1/A weight); its spectrum is validated against
the psi form instead of being symmetrized away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprlang import EvaluationError, SQRT_BRANCH_TOL
from .model import Field, PhysicalConstants, SampledProfiles

__all__ = [
    "TridiagonalOperator",
    "EffectivePotential",
    "effective_potential",
    "assemble_hamiltonian",
    "apply_momentum",
    "central_derivative",
    "transform_representation",
]


@dataclass(frozen=True)
class TridiagonalOperator:
    """Tridiagonal matrix over all grid nodes.

    sub[i] couples row i+1 to column i, sup[i] row i to column i+1.
    Boundary rows use mirrored ghost half-node coefficients; under the
    Dirichlet convention they only ever multiply pinned-zero values.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    representation: str
    symmetric: bool
    spacing: float

    def __post_init__(self):
        n = len(self.diag)
        if len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise ValueError("inconsistent tridiagonal band lengths")

    @property
    def n(self) -> int:
        return len(self.diag)

    @property
    def is_real(self) -> bool:
        return (
            not np.any(self.diag.imag)
            and not np.any(self.sub.imag)
            and not np.any(self.sup.imag)
        )

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Matrix-vector product over all nodes."""
        v = np.asarray(values, dtype=np.complex128)
        out = self.diag * v
        out[:-1] += self.sup * v[1:]
        out[1:] += self.sub * v[:-1]
        return out

    def interior(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bands of the block acting on nodes 1..n-2 (Dirichlet interior)."""
        return self.sub[1:-1], self.diag[1:-1], self.sup[1:-1]

    def inf_norm(self) -> float:
        row = np.abs(self.diag).astype(float)
        row[:-1] += np.abs(self.sup)
        row[1:] += np.abs(self.sub)
        return float(np.max(row))

    def scale(self) -> float:
        return max(1.0, self.inf_norm())

    def dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        m += np.diag(self.sup, 1)
        m += np.diag(self.sub, -1)
        return m


@dataclass(frozen=True)
class EffectivePotential:
    """W = V - (hbar^2/4m) A A'' - (hbar^2/8m) A'^2 per node."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.complex128)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def effective_potential(
    profiles: SampledProfiles, constants: PhysicalConstants
) -> EffectivePotential:
    hb2m = constants.hbar**2 / constants.mass
    w = (
        profiles.V
        - (hb2m / 4.0) * profiles.A * profiles.d2A
        - (hb2m / 8.0) * profiles.dA**2
    )
    return EffectivePotential(w)


def _extend_half(values: np.ndarray) -> np.ndarray:
    # mirror ghost half-nodes just outside the domain; boundary rows only
    # act on pinned-zero Dirichlet values, so the choice is unobservable
    return np.concatenate(([values[0]], values, [values[-1]]))


def assemble_hamiltonian(
    profiles: SampledProfiles,
    constants: PhysicalConstants,
    representation: str = "psi",
) -> TridiagonalOperator:
    """Build the Hamiltonian matrix in the requested representation.

    psi form: (H psi)_i = -(c/h^2) [a_{i+1/2}(psi_{i+1}-psi_i)
                                    - a_{i-1/2}(psi_i-psi_{i-1})] + W_i psi_i
    phi form: (H phi)_i = -(c/h^2) A_i [A_{i+1/2}(phi_{i+1}-phi_i)
                                    - A_{i-1/2}(phi_i-phi_{i-1})] + V_i phi_i
    with c = hbar^2/2m.
    """
    h = profiles.grid.spacing
    c = constants.hbar**2 / (2.0 * constants.mass)
    if representation == "psi":
        w = effective_potential(profiles, constants).values
        a_ext = _extend_half(profiles.a_half)
        diag = c * (a_ext[:-1] + a_ext[1:]) / h**2 + w
        off = -c * profiles.a_half / h**2
        off.setflags(write=False)
        diag.setflags(write=False)
        return TridiagonalOperator(
            sub=off, diag=diag, sup=off,
            representation="psi", symmetric=True, spacing=h,
        )
    if representation == "phi":
        A = profiles.A
        A_ext = _extend_half(profiles.A_half)
        diag = c * A * (A_ext[:-1] + A_ext[1:]) / h**2 + profiles.V
        sup = -c * A[:-1] * profiles.A_half / h**2
        sub = -c * A[1:] * profiles.A_half / h**2
        symmetric = bool(np.array_equal(sub, sup))
        for arr in (sub, diag, sup):
            arr.setflags(write=False)
        return TridiagonalOperator(
            sub=sub, diag=diag, sup=sup,
            representation="phi", symmetric=symmetric, spacing=h,
        )
    raise ValueError(f"unknown representation {representation!r}")


def central_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Central differences, second-order one-sided stencils at the ends."""
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    d[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return d


def apply_momentum(
    profiles: SampledProfiles, constants: PhysicalConstants, f: Field
) -> Field:
    """Apply -i hbar (A d/dx + A'/2) to a psi-representation field."""
    if f.representation != "psi":
        raise ValueError("momentum operator acts on psi-representation fields")
    if len(f) != profiles.grid.points:
        raise ValueError("field does not match the profile grid")
    d = central_derivative(f.values, profiles.grid.spacing)
    out = -1j * constants.hbar * (profiles.A * d + 0.5 * profiles.dA * f.values)
    return Field(out, "psi")


def _principal_sqrt(values: np.ndarray, xs: np.ndarray) -> np.ndarray:
    on_cut = (values.real < 0) & (np.abs(values.imag) <= SQRT_BRANCH_TOL)
    if np.any(on_cut):
        j = int(np.argmax(on_cut))
        raise EvaluationError(
            float(xs[j]),
            f"sqrt argument {complex(values[j])!r} lies on the negative real axis",
        )
    return np.sqrt(values)


def transform_representation(
    f: Field, profiles: SampledProfiles, direction: str
) -> Field:
    """Map between the two field representations: phi = sqrt(A) * psi."""
    root = _principal_sqrt(profiles.A, profiles.grid.nodes)
    if direction == "phi_to_psi":
        if f.representation != "phi":
            raise ValueError("phi_to_psi expects a phi-representation field")
        return Field(f.values / root, "psi")
    if direction == "psi_to_phi":
        if f.representation != "psi":
            raise ValueError("psi_to_phi expects a psi-representation field")
        return Field(f.values * root, "phi")
    raise ValueError(f"unknown direction {direction!r}")
