"""Grids on (0, b] and the symmetric tridiagonal eigen-machinery.

The operator ``-u'' + V u`` is discretized with mass-lumped piecewise-linear
elements.  For cell widths ``h`` and lumped masses ``w`` the stiffness matrix
``K`` and the diagonal mass ``W`` give the symmetric standard problem

    T = W^{-1/2} (K + W V) W^{-1/2},

so eigenvectors of ``T`` are the mass-scaled nodal values ``sqrt(w) * u``.
Their Euclidean norm is the discrete L2 norm of ``u``, which is the
normalization used throughout the package.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels


class BoundaryCondition(enum.Enum):
    DIRICHLET = "D"
    NEUMANN = "N"

    @classmethod
    def parse(cls, value) -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        for bc in cls:
            if key in (bc.value, bc.name):
                return bc
        raise ValueError(f"unknown boundary condition {value!r} (expected D or N)")


D = BoundaryCondition.DIRICHLET
N = BoundaryCondition.NEUMANN


@dataclass(frozen=True)
class BoundaryPair:
    left: BoundaryCondition = D
    right: BoundaryCondition = D

    def __post_init__(self):
        object.__setattr__(self, "left", BoundaryCondition.parse(self.left))
        object.__setattr__(self, "right", BoundaryCondition.parse(self.right))

    def __str__(self):
        return f"{self.left.value}{self.right.value}"


DD = BoundaryPair(D, D)
DN = BoundaryPair(D, N)


# ---------------------------------------------------------------------------
# grid policies


@dataclass(frozen=True)
class UniformPolicy:
    """``m`` equally spaced interior nodes: node i sits at (i + 1) b / (m + 1)."""

    m: int

    def refined(self) -> "UniformPolicy":
        return UniformPolicy(2 * self.m + 1)


@dataclass(frozen=True)
class GeometricPolicy:
    """First gap ``h_min``, gaps growing by at most ``ratio`` up to b."""

    h_min: float
    ratio: float

    def refined(self) -> "GeometricPolicy":
        return GeometricPolicy(self.h_min / 2, math.sqrt(self.ratio))


@dataclass(frozen=True)
class CompositePolicy:
    """Geometric layer from ``h_min`` (growth ``ratio``) blending into a
    uniform tail whose step does not exceed ``h_tail``."""

    h_min: float
    ratio: float
    h_tail: float

    def refined(self) -> "CompositePolicy":
        # Halving every cell: both step sizes halve and each geometric cell
        # splits in two, which takes the square root of the ratio.
        return CompositePolicy(self.h_min / 2, math.sqrt(self.ratio), self.h_tail / 2)


GridPolicy = Union[UniformPolicy, GeometricPolicy, CompositePolicy]


def resolution_policy(
    lam: float,
    layer_fraction: float = 0.05,
    tail_fraction: float = 0.05,
    ratio: float = 1.05,
    layer_scale: Optional[float] = None,
) -> CompositePolicy:
    """Composite policy resolving a spectral window up to energy ``lam``.

    The smallest cell is ``layer_fraction / sqrt(lam)`` and the tail step is
    ``tail_fraction * 2 pi / sqrt(lam)``; both fractions must not exceed 0.1.
    ``layer_scale`` optionally shrinks the first cell further to
    ``layer_fraction * layer_scale`` (used for strongly confined modes).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if not (0 < layer_fraction <= 0.1 and 0 < tail_fraction <= 0.1):
        raise ValueError("resolution fractions must lie in (0, 0.1]")
    h_min = layer_fraction / math.sqrt(lam)
    if layer_scale is not None and layer_scale > 0:
        h_min = min(h_min, layer_fraction * layer_scale)
    h_tail = tail_fraction * 2.0 * math.pi / math.sqrt(lam)
    return CompositePolicy(h_min=h_min, ratio=ratio, h_tail=max(h_tail, h_min))


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior nodes of ``(left, right)``.

    ``left`` and ``right`` are the interval ends.  A Dirichlet end is a point
    where the unknown vanishes; a Neumann end carries an unknown of its own
    (see :func:`unknown_nodes`).  ``left`` is 0 for grids built by
    :func:`build_grid`; sub-grids produced when splitting an interval start
    at an interior node.
    """

    nodes: np.ndarray
    right: float
    left: float = 0.0
    policy: Optional[GridPolicy] = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if nodes.size == 0:
            raise ValueError("grid has no interior nodes")
        if not (self.left < nodes[0] and nodes[-1] < self.right):
            raise ValueError("interior nodes must lie strictly inside (left, right)")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if self.left < 0:
            raise ValueError("grid must live in [0, inf)")

    @property
    def domain_end(self) -> float:
        return self.right

    @property
    def points(self) -> np.ndarray:
        """Interval ends and interior nodes in increasing order."""
        return np.concatenate(([self.left], self.nodes, [self.right]))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.points)

    def __len__(self):
        return self.nodes.size

    def mapped(self, factor: float) -> "Grid":
        """Image of the grid under ``x -> factor * x``."""
        return Grid(self.nodes * factor, self.right * factor, self.left * factor, self.policy)

    def split(self, index: int) -> tuple["Grid", "Grid"]:
        """Sub-grids left and right of interior node ``index``, which becomes
        the shared interval end."""
        nodes = self.nodes
        if not 0 < index < nodes.size - 1:
            raise ValueError("split leaves a sub-interval without interior nodes")
        x = float(nodes[index])
        return (
            Grid(nodes[:index], x, self.left, self.policy),
            Grid(nodes[index + 1:], self.right, x, self.policy),
        )


def _fit_ratio(h_min: float, ratio: float, length: float) -> tuple[int, float]:
    """Number of cells and a ratio ``<= ratio`` so that the geometric cells
    starting at ``h_min`` cover ``length`` exactly."""
    cells = math.ceil(math.log1p(length * (ratio - 1.0) / h_min) / math.log(ratio))
    cells = max(cells, 1)

    def covered(r):
        return h_min * cells if r == 1.0 else h_min * (r**cells - 1.0) / (r - 1.0)

    if covered(1.0) >= length:
        return cells, 1.0
    lo, hi = 1.0, ratio
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if covered(mid) < length:
            lo = mid
        else:
            hi = mid
    return cells, hi


def _geometric_points(start: float, h_min: float, ratio: float, length: float) -> np.ndarray:
    cells, r = _fit_ratio(h_min, ratio, length)
    gaps = h_min * r ** np.arange(cells)
    pts = start + np.concatenate(([0.0], np.cumsum(gaps)))
    pts[-1] = start + length
    return pts


def build_grid(policy: GridPolicy, interval_end: float) -> Grid:
    """Build the interior nodes of ``(0, interval_end)`` for ``policy``."""
    b = float(interval_end)
    if not b > 0:
        raise ValueError("interval_end must be positive")
    if isinstance(policy, UniformPolicy):
        if policy.m < 1:
            raise ValueError("uniform policy needs m >= 1")
        nodes = (np.arange(policy.m) + 1.0) * b / (policy.m + 1)
        return Grid(nodes, b, 0.0, policy)

    if policy.h_min <= 0:
        raise ValueError("h_min must be positive")
    if policy.ratio <= 1:
        raise ValueError("grading ratio must be > 1")

    if isinstance(policy, GeometricPolicy):
        pts = _geometric_points(0.0, policy.h_min, policy.ratio, b)
    elif isinstance(policy, CompositePolicy):
        if policy.h_tail <= 0:
            raise ValueError("h_tail must be positive")
        pts = _composite_points(policy, b)
    else:
        raise TypeError(f"unsupported grid policy {policy!r}")

    if pts.size < 3:
        raise ValueError("grid policy produces fewer than 2 nodes")
    return Grid(pts[1:-1], b, 0.0, policy)


def _composite_points(policy: CompositePolicy, b: float) -> np.ndarray:
    h_min, r, h_tail = policy.h_min, policy.ratio, policy.h_tail
    if h_min >= h_tail:
        cells = max(math.ceil(b / h_tail), 1)
        return np.linspace(0.0, b, cells + 1)
    # geometric stage: largest gap stays <= h_tail
    cells = int(math.floor(math.log(h_tail / h_min) / math.log(r))) + 1
    gaps = h_min * r ** np.arange(cells)
    edges = np.concatenate(([0.0], np.cumsum(gaps)))
    if edges[-1] >= b:
        return _geometric_points(0.0, h_min, r, b)
    while True:
        rest = b - edges[-1]
        n_tail = max(math.ceil(rest / h_tail), 1)
        step = rest / n_tail
        if edges.size < 2 or edges[-1] - edges[-2] <= step:
            break
        edges = edges[:-1]
    tail = edges[-1] + step * np.arange(1, n_tail + 1)
    tail[-1] = b
    return np.concatenate((edges, tail))


# ---------------------------------------------------------------------------
# matrices


@dataclass(frozen=True, eq=False)
class SymTridiagonal:
    """Symmetric tridiagonal matrix.

    ``nodes`` and ``weights`` are attached by :func:`discretize`: the
    positions of the unknowns and their lumped masses.
    """

    diag: np.ndarray
    offdiag: np.ndarray
    nodes: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=float)
        e = np.ascontiguousarray(self.offdiag, dtype=float)
        if d.ndim != 1 or e.ndim != 1 or e.size != max(d.size - 1, 0):
            raise ValueError("need len(offdiag) == len(diag) - 1")
        if d.size == 0:
            raise ValueError("empty matrix")
        for a in (d, e):
            a.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def dim(self) -> int:
        return self.diag.size

    def __len__(self):
        return self.dim

    def with_diagonal_shift(self, shift) -> "SymTridiagonal":
        return SymTridiagonal(self.diag + shift, self.offdiag, self.nodes, self.weights)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    @property
    def scale(self) -> float:
        """``max|diag| + 2 max|offdiag|``, a bound on the spectral radius."""
        emax = float(np.max(np.abs(self.offdiag))) if self.offdiag.size else 0.0
        return float(np.max(np.abs(self.diag))) + 2.0 * emax


def unknown_nodes(grid: Grid, bc: BoundaryPair) -> np.ndarray:
    pieces = []
    if bc.left is N:
        pieces.append([grid.left])
    pieces.append(grid.nodes)
    if bc.right is N:
        pieces.append([grid.right])
    return np.concatenate(pieces)


def lumped_weights(grid: Grid, bc: BoundaryPair) -> np.ndarray:
    h = grid.widths
    w = 0.5 * (h[:-1] + h[1:])
    pieces = []
    if bc.left is N:
        pieces.append([0.5 * h[0]])
    pieces.append(w)
    if bc.right is N:
        pieces.append([0.5 * h[-1]])
    return np.concatenate(pieces)


def discretize(potential: Callable, grid: Grid, bc: BoundaryPair = DD) -> SymTridiagonal:
    """Lumped finite-element matrix of ``-d^2/dx^2 + potential`` on ``grid``.

    ``potential`` is evaluated once on the array of unknown positions.
    """
    bc = bc if isinstance(bc, BoundaryPair) else BoundaryPair(*bc)
    h = grid.widths
    x = unknown_nodes(grid, bc)
    w = lumped_weights(grid, bc)

    inv_h = 1.0 / h
    # stiffness diagonal per unknown: sum of 1/h over adjacent cells
    stiff = inv_h[:-1] + inv_h[1:]
    couplings = inv_h[1:-1]
    if bc.left is N:
        stiff = np.concatenate(([inv_h[0]], stiff))
        couplings = np.concatenate(([inv_h[0]], couplings))
    if bc.right is N:
        stiff = np.concatenate((stiff, [inv_h[-1]]))
        couplings = np.concatenate((couplings, [inv_h[-1]]))

    v = np.broadcast_to(np.asarray(potential(x), dtype=float), x.shape)
    if not np.all(np.isfinite(v)):
        bad = x[~np.isfinite(v)][0]
        raise ValueError(f"potential is not finite at node x = {bad!r}")
    diag = stiff / w + v
    offdiag = -couplings / np.sqrt(w[:-1] * w[1:])
    return SymTridiagonal(diag, offdiag, x, w)


# ---------------------------------------------------------------------------
# spectra


def sturm_count(T: SymTridiagonal, lam: float) -> int:
    """Number of eigenvalues of ``T`` strictly below ``lam``."""
    e2 = T._cache.get("e2")
    if e2 is None:
        e2 = T._cache.setdefault("e2", T.offdiag * T.offdiag)
    return int(_kernels.sturm_count(T.diag, e2, float(lam)))


def default_tol(T: SymTridiagonal) -> float:
    return 1e-14 * max(T.scale, 1.0)


def eigenvalue(T: SymTridiagonal, k: int, tol: float) -> float:
    """The ``k``-th smallest eigenvalue (1-based) by Sturm bisection."""
    if not 1 <= k <= T.dim:
        raise IndexError(f"eigenvalue index {k} outside 1..{T.dim}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    return float(_kernels.kth_eigenvalue(T.diag, T.offdiag, k - 1, float(tol)))


def eigenvalues_below(T: SymTridiagonal, lam: float, tol: Optional[float] = None) -> np.ndarray:
    """All eigenvalues strictly below ``lam``, ascending."""
    tol = default_tol(T) if tol is None else tol
    return _kernels.eigenvalues_below(T.diag, T.offdiag, float(lam), float(tol))


class EigenvectorConvergenceError(RuntimeError):
    """Inverse iteration did not reach the residual bound."""


def eigenvectors(
    T: SymTridiagonal, shifts, maxit: int = 30, cluster_gap: Optional[float] = None
) -> np.ndarray:
    """Eigenvectors (rows) for ascending approximate eigenvalues ``shifts``.

    Shifts closer than ``cluster_gap`` are treated as a cluster and their
    vectors are kept mutually orthogonal.
    """
    shifts = np.ascontiguousarray(shifts, dtype=float)
    if shifts.size == 0:
        return np.zeros((0, T.dim))
    if np.any(np.diff(shifts) < 0):
        raise ValueError("shifts must be ascending")
    gap = 1e-10 * max(T.scale, 1.0) if cluster_gap is None else cluster_gap
    vecs, status = _kernels.inverse_iteration(T.diag, T.offdiag, shifts, gap, maxit)
    if np.any(status < 0):
        bad = shifts[status < 0][0]
        raise EigenvectorConvergenceError(
            f"inverse iteration did not converge near {bad!r}; refine the shift"
        )
    return vecs


def eigenvector(T: SymTridiagonal, lam_hat: float, maxit: int = 30) -> np.ndarray:
    """Unit eigenvector for the eigenvalue closest to ``lam_hat``.

    Uses shifted inverse iteration from the all-ones vector.  The residual
    satisfies ``|T v - lam_hat v| <= 1e-8 * T.scale`` and the first
    significant entry is positive.
    """
    return eigenvectors(T, [lam_hat], maxit=maxit)[0]


def trace_below(T: SymTridiagonal, lam: float, tol: Optional[float] = None) -> float:
    """``sum(lam_j - lam)`` over eigenvalues below ``lam``; always ``<= 0``."""
    ev = eigenvalues_below(T, lam, tol)
    return float(np.sum(ev - lam)) if ev.size else 0.0


def partial_mass(v: np.ndarray, grid: Grid, s: float, bc: BoundaryPair = DD) -> float:
    """Fraction of the mass of ``v`` carried by unknowns at ``x <= s``.

    ``v`` is in mass-scaled coordinates, so each entry squared is the
    lumped-quadrature mass of its node.  Covering every unknown gives 1.0.
    """
    if not grid.left <= s <= grid.right:
        raise ValueError(f"s = {s!r} outside [{grid.left}, {grid.right}]")
    x = unknown_nodes(grid, bc)
    v = np.asarray(v, dtype=float)
    if v.shape != x.shape:
        raise ValueError("vector does not match the grid unknowns")
    total = float(np.dot(v, v))
    if not total > 0:
        raise ValueError("zero vector has no mass profile")
    idx = int(np.searchsorted(x, s, side="right"))
    if idx == x.size:
        return 1.0
    return min(float(np.dot(v[:idx], v[:idx])) / total, 1.0)


def nodal_values(v: np.ndarray, T: SymTridiagonal) -> np.ndarray:
    """Undo the mass scaling: nodal values ``u`` with ``sum(w u^2) = |v|^2``."""
    if T.weights is None:
        raise ValueError("matrix carries no lumped weights")
    return np.asarray(v) / np.sqrt(T.weights)
