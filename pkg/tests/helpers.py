"""Shared construction helpers for the test suite."""

from genqm.exprlang import parse
from genqm.model import Grid, PhysicalConstants, ProblemSpec, build_problem
from genqm.operators import assemble_hamiltonian


def make_problem(
    A="1",
    V="0",
    xmin=-10.0,
    xmax=10.0,
    n=201,
    hbar=1.0,
    mass=1.0,
    mode="hermitian",
    representation="psi",
):
    spec = ProblemSpec(
        A=parse(A),
        V=parse(V),
        constants=PhysicalConstants(hbar, mass),
        grid=Grid(xmin, xmax, n),
        mode=mode,
        representation=representation,
    )
    profiles = build_problem(spec)
    op = assemble_hamiltonian(profiles, spec.constants, representation)
    return spec, profiles, op
