"""Problem definition: grid, constants, sampled profiles, parity tools.

The discrete problem lives on a uniform grid with Dirichlet endpoints.
Profiles A, V and the derivatives of A are sampled analytically from
their ASTs at nodes and half-nodes, never interpolated, so the
conservative stencils downstream keep their full second-order accuracy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GenqmError
from .exprlang import ExprAst, eval_jet

__all__ = [
    "AsymmetricGridError",
    "NonRealProfileError",
    "ZeroAuxiliaryError",
    "PhysicalConstants",
    "Grid",
    "Field",
    "ProblemSpec",
    "SampledProfiles",
    "build_problem",
    "pt_reflect",
    "pt_symmetry_report",
    "MIN_AUX_MAGNITUDE",
    "REALNESS_TOL",
    "PT_RESIDUAL_WARN",
]

MODES = ("hermitian", "pt")
REPRESENTATIONS = ("psi", "phi")

# |A| below this is treated as a degenerate kinetic coefficient.
MIN_AUX_MAGNITUDE = 1e-8
# imaginary parts below this count as real in hermitian mode
REALNESS_TOL = 1e-12
# parity-conjugation residual above this triggers a warning in pt mode
PT_RESIDUAL_WARN = 1e-10


class AsymmetricGridError(GenqmError):
    pass


class NonRealProfileError(GenqmError):
    pass


class ZeroAuxiliaryError(GenqmError):
    pass


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a finite positive number, got {v!r}")


@dataclass(frozen=True)
class Grid:
    """Uniform grid of n >= 3 nodes on [xmin, xmax].

    On a symmetric interval (xmin == -xmax) the nodes are built to obey
    x[i] == -x[n-1-i] exactly in floating point, so parity is an exact
    grid symmetry rather than an approximate one.
    """

    xmin: float
    xmax: float
    points: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    half_nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.points >= 3):
            raise ValueError(f"grid needs at least 3 points, got {self.points}")
        if not (math.isfinite(self.xmin) and math.isfinite(self.xmax)):
            raise ValueError("grid bounds must be finite")
        if not self.xmin < self.xmax:
            raise ValueError(f"need xmin < xmax, got [{self.xmin}, {self.xmax}]")
        nodes = self.xmin + self.spacing * np.arange(self.points)
        if self.symmetric:
            nodes = (nodes - nodes[::-1]) / 2.0
        half = (nodes[:-1] + nodes[1:]) / 2.0
        nodes.setflags(write=False)
        half.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "half_nodes", half)

    @property
    def spacing(self) -> float:
        return (self.xmax - self.xmin) / (self.points - 1)

    @property
    def symmetric(self) -> bool:
        return self.xmin == -self.xmax


@dataclass(frozen=True)
class Field:
    """Complex field sampled on the grid nodes, tagged by representation."""

    values: np.ndarray
    representation: str = "psi"

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")
        values = np.asarray(self.values, dtype=np.complex128).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ProblemSpec:
    A: ExprAst
    V: ExprAst
    constants: PhysicalConstants
    grid: Grid
    mode: str = "hermitian"
    representation: str = "psi"
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.boundary != "dirichlet":
            raise ValueError(f"unsupported boundary {self.boundary!r}")
        if self.mode == "pt" and not self.grid.symmetric:
            raise AsymmetricGridError(
                "pt mode requires a symmetric grid (xmin == -xmax), got "
                f"[{self.grid.xmin}, {self.grid.xmax}]"
            )


@dataclass(frozen=True)
class SampledProfiles:
    """Per-node and per-half-node samples of the problem profiles.

    Arrays are complex128; in hermitian mode their imaginary parts are
    exactly zero after validation.  ``a`` is A**2.
    """

    grid: Grid
    A: np.ndarray
    dA: np.ndarray
    d2A: np.ndarray
    V: np.ndarray
    a: np.ndarray
    A_half: np.ndarray
    a_half: np.ndarray

    def __post_init__(self):
        for name in ("A", "dA", "d2A", "V", "a", "A_half", "a_half"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _sample_jets(expr: ExprAst, xs: np.ndarray):
    vals = np.empty(len(xs), dtype=np.complex128)
    d1 = np.empty_like(vals)
    d2 = np.empty_like(vals)
    for i, x in enumerate(xs):
        jet = eval_jet(expr, float(x))
        vals[i], d1[i], d2[i] = jet.value, jet.d1, jet.d2
    return vals, d1, d2


def _require_real(arrays: dict[str, np.ndarray], mode: str) -> None:
    for name, arr in arrays.items():
        worst = float(np.max(np.abs(arr.imag))) if len(arr) else 0.0
        if worst >= REALNESS_TOL:
            raise NonRealProfileError(
                f"{mode} mode requires real profiles but {name} has "
                f"imaginary magnitude up to {worst:.3e}"
            )


def build_problem(spec: ProblemSpec) -> SampledProfiles:
    """Sample and validate profiles for a problem."""
    grid = spec.grid
    A, dA, d2A = _sample_jets(spec.A, grid.nodes)
    V, _, _ = _sample_jets(spec.V, grid.nodes)
    A_half, _, _ = _sample_jets(spec.A, grid.half_nodes)

    if spec.mode == "hermitian":
        _require_real({"A": A, "A'": dA, "A''": d2A, "V": V, "A (half nodes)": A_half},
                      spec.mode)
        A = A.real + 0j
        dA = dA.real + 0j
        d2A = d2A.real + 0j
        V = V.real + 0j
        A_half = A_half.real + 0j
    else:
        for name, expr in (("A", spec.A), ("V", spec.V)):
            residual = pt_symmetry_report(expr, grid)
            if residual > PT_RESIDUAL_WARN:
                warnings.warn(
                    f"profile {name} is not parity-conjugation symmetric: "
                    f"max |f(x) - conj(f(-x))| = {residual:.3e}",
                    stacklevel=2,
                )

    for label, arr, xs in (
        ("node", A, grid.nodes),
        ("half-node", A_half, grid.half_nodes),
    ):
        mags = np.abs(arr)
        j = int(np.argmin(mags))
        if mags[j] < MIN_AUX_MAGNITUDE:
            raise ZeroAuxiliaryError(
                f"|A| = {mags[j]:.3e} < {MIN_AUX_MAGNITUDE:g} at {label} "
                f"x = {float(xs[j])!r}"
            )

    return SampledProfiles(
        grid=grid, A=A, dA=dA, d2A=d2A, V=V,
        a=A * A, A_half=A_half, a_half=A_half * A_half,
    )


def pt_reflect(f: Field, grid: Grid) -> Field:
    """Parity-conjugation image of a field: out[i] = conj(in[n-1-i])."""
    if not grid.symmetric:
        raise AsymmetricGridError("pt_reflect requires a symmetric grid")
    if len(f) != grid.points:
        raise ValueError(f"field length {len(f)} != grid points {grid.points}")
    return Field(np.conj(f.values[::-1]), f.representation)


def pt_symmetry_report(expr: ExprAst, grid: Grid) -> float:
    """max_i |f(x_i) - conj(f(-x_i))| over the grid nodes."""
    if not grid.symmetric:
        raise AsymmetricGridError("pt_symmetry_report requires a symmetric grid")
    vals, _, _ = _sample_jets(expr, grid.nodes)
    return float(np.max(np.abs(vals - np.conj(vals[::-1]))))
