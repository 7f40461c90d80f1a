"""The one-dimensional family ``P_mu = -d^2/dx^2 + c/x^2 + mu x^beta``.

An optional step ``height * 1_{(0, s]}`` models the perturbation
``delta * lam * 1_{[0, lam^gamma]}``.  It is sampled at the nodes, so a
perturbed and an unperturbed operator on the same grid differ only by a
nonnegative (or nonpositive) diagonal matrix and min-max comparisons between
them hold exactly for the matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .numerics1d import (
    D,
    DD,
    N,
    BoundaryPair,
    Grid,
    GridPolicy,
    SymTridiagonal,
    build_grid,
    discretize,
    sturm_count,
    trace_below,
)

CRITICAL_C = 0.75


def critical_constant(beta: float, n: int) -> float:
    """Inverse-square coefficient ``(beta n / 4)(beta n / 4 + 1)`` of the
    flattened Laplacian; equals 3/4 when ``beta n = 2``."""
    q = beta * n / 4.0
    return q * (q + 1.0)


@dataclass(frozen=True)
class Step:
    height: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("step width must be positive")


@dataclass(frozen=True)
class GrushinPotential:
    c: float = CRITICAL_C
    mu: float = 1.0
    beta: float = 2.0
    step: Optional[Step] = None

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be >= 0")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            v = self.smooth(x)
        if self.step is not None and self.step.height != 0.0:
            v = v + np.where(x <= self.step.width, self.step.height, 0.0)
        return v

    def smooth(self, x):
        """The potential without the step."""
        v = self.mu * np.power(x, self.beta)
        if self.c:
            v = v + self.c / (x * x)
        return v

    def with_step(self, height: float, width: float) -> "GrushinPotential":
        return replace(self, step=Step(float(height), float(width)))

    def without_step(self) -> "GrushinPotential":
        return replace(self, step=None)

    def infimum(self, b: float) -> float:
        """Lower bound for ``V`` on ``(0, b]``: the infimum of the smooth part
        plus the step height when the step is negative."""
        if self.mu == 0:
            inf = self.c / (b * b)
        elif self.c == 0:
            inf = 0.0
        else:
            inf = float(self.smooth(np.float64(min(minimizer(self.c, self.mu, self.beta), b))))
        if self.step is not None and self.step.height < 0:
            inf += self.step.height
        return inf


def minimizer(c: float, mu: float, beta: float) -> float:
    """Location of the minimum of ``c/x^2 + mu x^beta`` on (0, inf); needs
    ``c, mu > 0``."""
    if not (c > 0 and mu > 0):
        raise ValueError("the minimizer exists only for c > 0 and mu > 0")
    return (2.0 * c / (mu * beta)) ** (1.0 / (2.0 + beta))


@dataclass(frozen=True)
class OperatorSpec:
    potential: GrushinPotential
    b: float
    bc: BoundaryPair = DD
    policy: Optional[GridPolicy] = None

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("interval end b must be positive")
        if self.policy is None:
            raise ValueError("an OperatorSpec needs a grid policy")

    def grid(self) -> Grid:
        return build_grid(self.policy, self.b)

    def matrix(self, grid: Optional[Grid] = None) -> SymTridiagonal:
        return discretize(self.potential, grid or self.grid(), self.bc)


def count_P(spec: OperatorSpec, lam: float) -> int:
    return sturm_count(spec.matrix(), lam)


def trace_P(spec: OperatorSpec, lam: float) -> float:
    return trace_below(spec.matrix(), lam)


class Scaling(NamedTuple):
    energy_factor: float
    stretched_end: float


def scaling_map(mu: float, a: float, beta: float) -> Scaling:
    """``P_mu`` on ``[0, a]`` is unitarily ``mu^(2/(2+beta)) P_1`` on
    ``[0, mu^(1/(2+beta)) a]``."""
    if not (mu > 0 and a > 0 and beta > 0):
        raise ValueError("scaling_map needs mu, a, beta > 0")
    stretch = mu ** (1.0 / (2.0 + beta))
    return Scaling(mu ** (2.0 / (2.0 + beta)), stretch * a)


def split_index(grid: Grid, split: float) -> int:
    """Index of the interior node nearest to ``split``."""
    if not grid.left < split < grid.right:
        raise ValueError(f"split {split!r} outside ({grid.left}, {grid.right})")
    idx = int(np.argmin(np.abs(grid.nodes - split)))
    if not 0 < idx < len(grid) - 1:
        raise ValueError(f"split {split!r} leaves a sub-interval without interior nodes")
    return idx


class Bracket(NamedTuple):
    lower: float
    upper: float


def _split_matrices(spec: OperatorSpec, split: float, inner: str):
    grid = spec.grid()
    left, right = grid.split(split_index(grid, split))
    cond = D if inner == "D" else N
    return (
        discretize(spec.potential, left, BoundaryPair(spec.bc.left, cond)),
        discretize(spec.potential, right, BoundaryPair(cond, spec.bc.right)),
    )


def bracket_count(spec: OperatorSpec, lam: float, split: float) -> Bracket:
    """Dirichlet (lower) and Neumann (upper) decoupled counts at ``split``.

    ``split`` snaps to the nearest grid node; then
    ``lower <= count_P(spec, lam) <= upper`` holds exactly.
    """
    lo = sum(sturm_count(T, lam) for T in _split_matrices(spec, split, "D"))
    hi = sum(sturm_count(T, lam) for T in _split_matrices(spec, split, "N"))
    return Bracket(lo, hi)


def bracket_trace(spec: OperatorSpec, lam: float, split: float) -> Bracket:
    """Magnitudes of the decoupled traces sandwiching ``|trace_P(spec, lam)|``."""
    lo = -sum(trace_below(T, lam) for T in _split_matrices(spec, split, "D"))
    hi = -sum(trace_below(T, lam) for T in _split_matrices(spec, split, "N"))
    return Bracket(lo, hi)
