"""Uniform grid on [0, m] and the discrete population state.

The state couples the boundary-compartment mass u0 (the uninfected class,
which carries mass at load zero) with N cell-average densities u_1..u_N.
Its norm is |u0| + sum_i h*|u_i|, the discrete counterpart of the
L1-plus-point-mass norm; matrices act on the coordinate vector
(u0, u_1, ..., u_N) with pairing weights (1, h, ..., h).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, m] into N cells of width h = m/N."""

    m: float
    N: int

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("domain length m must be positive")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("N must be an integer >= 2")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "m", float(self.m))
        if abs(self.N * self.h - self.m) > 4 * _EPS * self.m:
            raise ValueError("N*h does not reproduce m to machine precision")

    @property
    def h(self):
        return self.m / self.N

    @property
    def centers(self):
        """Cell centers x_i = (i - 1/2) h, i = 1..N."""
        return (np.arange(1, self.N + 1) - 0.5) * self.h

    @property
    def interfaces(self):
        """Cell interfaces xi_i = i*h, i = 0..N (exact across refinement)."""
        return np.arange(self.N + 1) * self.h

    @property
    def weights(self):
        """Pairing weights (1, h, ..., h) of the discrete norm."""
        w = np.full(self.N + 1, self.h)
        w[0] = 1.0
        return w


@dataclass(frozen=True, eq=False)
class PopulationState:
    """Boundary mass u0 plus N cell-average densities (immutable)."""

    u0: float
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        u.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "u0", float(self.u0))


def _check_lengths(state, grid):
    if state.u.shape != (grid.N,):
        raise ValueError(
            f"state has {state.u.shape[0]} cells but the grid has {grid.N}"
        )


def zero_state(grid):
    return PopulationState(0.0, np.zeros(grid.N))


def total_norm(state, grid):
    """|u0| + sum_i h |u_i|; the total population size for nonnegative states."""
    _check_lengths(state, grid)
    return abs(state.u0) + grid.h * float(np.abs(state.u).sum())


def is_nonnegative(state):
    return state.u0 >= 0.0 and bool((state.u >= 0.0).all())


def tail_integrals(state, grid):
    """All tail integrals T_j, j = 0..N, as one array.

    T_0 is the full bulk integral of u (excluding u0); for j >= 1, T_j is
    the midpoint-rule integral from the center of cell j to m:
    T_j = (h/2) u_j + h sum_{k>j} u_k.  Linear in the state (no absolute
    values).
    """
    _check_lengths(state, grid)
    h = grid.h
    # tails[j-1] = h * sum_{k >= j} u_k
    tails = h * np.cumsum(state.u[::-1])[::-1]
    T = np.empty(grid.N + 1)
    T[0] = tails[0]
    T[1:] = tails - 0.5 * h * state.u
    return T


def tail_integral(state, grid, j):
    """Tail integral T_j for a single index j in 0..N."""
    _check_lengths(state, grid)
    if j < 0 or j > grid.N:
        raise IndexError(f"tail index {j} outside 0..{grid.N}")
    h = grid.h
    if j == 0:
        return h * float(state.u.sum())
    return 0.5 * h * float(state.u[j - 1]) + h * float(state.u[j:].sum())


def as_vector(state):
    """Coordinate vector (u0, u_1, ..., u_N)."""
    return np.concatenate(([state.u0], state.u))


def state_from_vector(vec):
    return PopulationState(vec[0], vec[1:])


def state_scale(state, a):
    return PopulationState(a * state.u0, a * state.u)


def state_lincomb(a, s1, b, s2):
    return PopulationState(a * s1.u0 + b * s2.u0, a * s1.u + b * s2.u)


def write_state_csv(path, state, grid):
    """State CSV: header 'x,u', row 'boundary,<u0>', then the N cell rows."""
    _check_lengths(state, grid)
    with open(path, "w", newline="\n") as f:
        f.write("x,u\n")
        f.write(f"boundary,{state.u0!r}\n")
        for x, v in zip(grid.centers, state.u):
            f.write(f"{x!r},{v!r}\n")


def read_state_csv(path, grid=None):
    """Read a state CSV back; verifies the cell count against `grid` if given."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0] != "x,u":
        raise ValueError(f"{path}: expected header 'x,u'")
    if len(lines) < 2 or not lines[1].startswith("boundary,"):
        raise ValueError(f"{path}: expected first data row 'boundary,<u0>'")
    u0 = float(lines[1].split(",", 1)[1])
    xs, us = [], []
    for ln in lines[2:]:
        sx, su = ln.split(",", 1)
        xs.append(float(sx))
        us.append(float(su))
    state = PopulationState(u0, np.array(us))
    if grid is not None:
        _check_lengths(state, grid)
        if xs and np.max(np.abs(np.array(xs) - grid.centers)) > 1e-9 * grid.m:
            raise ValueError(f"{path}: cell centers do not match the grid")
    return state
