"""Mode sums on the collar ``[0, eps0] x T^n`` and the experiments built on them.

Separating variables over the flat torus turns the (flattened) critical
Laplacian into the family ``P_{mu_k}`` with ``c = 3/4``, ``beta = 2/n`` and
``mu_k = sum (2 pi k_i / L_i)^2``.  Every lattice point is its own mode;
lattice points with the same ``mu_k`` share one computed 1D spectrum.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import asymptotics
from .grushin1d import CRITICAL_C, GrushinPotential, minimizer
from .numerics1d import (
    D,
    BoundaryCondition,
    BoundaryPair,
    Grid,
    GridPolicy,
    build_grid,
    discretize,
    eigenvalues_below,
    eigenvectors,
    resolution_policy,
    sturm_count,
    unknown_nodes,
)


@dataclass(frozen=True)
class Resolution:
    """Per-mode grid rule.

    The smallest cell is ``layer_fraction`` times the smaller of
    ``lam^(-1/2)`` and the mode's potential-minimum location; the uniform tail
    step is ``tail_fraction * 2 pi / sqrt(lam)``.
    """

    layer_fraction: float = 0.05
    tail_fraction: float = 0.05
    ratio: float = 1.05

    def policy(self, lam: float, mu: float, beta: float) -> GridPolicy:
        scale = minimizer(CRITICAL_C, mu, beta) if mu > 0 else None
        return resolution_policy(lam, self.layer_fraction, self.tail_fraction, self.ratio, scale)


@dataclass(frozen=True)
class ModelManifold:
    n: int = 1
    circumferences: tuple = (2 * math.pi,)
    epsilon0: float = 1.0
    bc_right: BoundaryCondition = D

    def __post_init__(self):
        object.__setattr__(self, "circumferences", tuple(float(c) for c in self.circumferences))
        object.__setattr__(self, "bc_right", BoundaryCondition.parse(self.bc_right))
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if len(self.circumferences) != self.n:
            raise ValueError(f"need {self.n} circumferences, got {len(self.circumferences)}")
        if any(c <= 0 for c in self.circumferences):
            raise ValueError("circumferences must be positive")
        if not self.epsilon0 > 0:
            raise ValueError("epsilon0 must be positive")

    @property
    def beta(self) -> float:
        return 2.0 / self.n

    @property
    def bc(self) -> BoundaryPair:
        return BoundaryPair(D, self.bc_right)

    @property
    def boundary_volume(self) -> float:
        return math.prod(self.circumferences)

    def mode_key(self, k: Sequence[int]) -> tuple:
        """Canonical key: lattice points with equal keys have equal ``mu_k``."""
        return tuple(sorted((abs(ki), L) for ki, L in zip(k, self.circumferences)))

    def mu(self, k: Sequence[int]) -> float:
        return math.fsum((2.0 * math.pi * a / L) ** 2 for a, L in self.mode_key(k))

    def potential(self, mu: float) -> GrushinPotential:
        return GrushinPotential(c=CRITICAL_C, mu=mu, beta=self.beta)


@dataclass(eq=False)
class ModeSpectrum:
    """Spectrum below the cutoff of one 1D mode operator.

    ``modes`` lists every lattice point sharing this ``mu``; ``vectors`` rows
    are unit eigenvectors in mass-scaled coordinates on ``grid``.
    """

    modes: tuple
    mu: float
    eigenvalues: np.ndarray
    grid: Grid
    bc: BoundaryPair
    vectors: Optional[np.ndarray] = None

    @property
    def multiplicity(self) -> int:
        return len(self.modes)

    @property
    def nodes(self) -> np.ndarray:
        return unknown_nodes(self.grid, self.bc)


@dataclass(eq=False)
class SpectralEnsemble:
    """All eigenpairs of the collar model below ``cutoff``.

    ``eigenvalues``, ``mode`` (lattice point) and ``spectrum`` / ``local``
    (which ModeSpectrum row holds the eigenvector) are aligned arrays sorted
    by eigenvalue, then lattice point.
    """

    manifold: ModelManifold
    cutoff: float
    spectra: list
    eigenvalues: np.ndarray
    modes: list
    spectrum: np.ndarray
    local: np.ndarray
    resolution: Optional[Resolution] = None
    metadata: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def has_vectors(self) -> bool:
        return all(s.vectors is not None for s in self.spectra)

    def __len__(self):
        return self.count

    def vector(self, j: int) -> tuple[np.ndarray, Grid]:
        sp = self.spectra[self.spectrum[j]]
        if sp.vectors is None:
            raise ValueError("ensemble was assembled without eigenvectors")
        return sp.vectors[self.local[j]], sp.grid


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    labels: list
    measured: list
    predicted: list
    ratios: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.measured) != len(self.predicted):
            raise ValueError("measured and predicted must have equal length")
        if not self.ratios:
            self.ratios = [_ratio(m, p) for m, p in zip(self.measured, self.predicted)]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _ratio(m, p):
    return float(m) / float(p) if p else math.nan


# ---------------------------------------------------------------------------
# modes


def _inf_potential(manifold: ModelManifold, mu: float) -> float:
    return manifold.potential(mu).infimum(manifold.epsilon0)


def enumerate_modes(manifold: ModelManifold, lam: float) -> list:
    """Lattice points whose mode operator can have eigenvalues below ``lam``,
    as ``(k, mu_k)`` sorted by ``k``.

    Every eigenvalue of a mode exceeds ``inf V`` on ``(0, eps0]``, so modes
    with ``inf V >= lam`` are dropped; ``k = 0`` is always kept.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    # largest admissible mu: inf V is increasing in mu
    hi = 1.0
    while _inf_potential(manifold, hi) < lam:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _inf_potential(manifold, mid) < lam:
            lo = mid
        else:
            hi = mid
    mu_max = hi
    ranges = [
        range(-int(L * math.sqrt(mu_max) / (2 * math.pi)) - 1, int(L * math.sqrt(mu_max) / (2 * math.pi)) + 2)
        for L in manifold.circumferences
    ]
    out = []
    for k in itertools.product(*ranges):
        mu = manifold.mu(k)
        if not any(k) or (mu <= mu_max and _inf_potential(manifold, mu) < lam):
            out.append((k, mu))
    return out


def _mode_grid(manifold: ModelManifold, lam: float, mu: float, resolution: Resolution,
               policy: Optional[GridPolicy]) -> Grid:
    pol = policy if policy is not None else resolution.policy(lam, mu, manifold.beta)
    return build_grid(pol, manifold.epsilon0)


def _map(func: Callable, tasks: Iterable, workers: int) -> list:
    tasks = list(tasks)
    if workers <= 1 or len(tasks) < 2:
        return [func(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def _grouped_modes(manifold: ModelManifold, lam: float):
    groups: dict = {}
    for k, mu in enumerate_modes(manifold, lam):
        groups.setdefault(manifold.mode_key(k), (mu, []))[1].append(k)
    return [(mu, tuple(ks)) for mu, ks in groups.values()]


def assemble_spectrum(
    manifold: ModelManifold,
    lam: float,
    want_vectors: bool = False,
    resolution: Optional[Resolution] = None,
    policy: Optional[GridPolicy] = None,
    workers: int = 1,
) -> SpectralEnsemble:
    """Merge the per-mode spectra below ``lam``.

    Each mode gets its own grid from ``resolution`` unless a fixed ``policy``
    is given.  ``workers > 1`` evaluates modes on a thread pool; the result
    does not depend on it.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    resolution = resolution or Resolution()
    bc = manifold.bc

    def solve(task):
        mu, ks = task
        grid = _mode_grid(manifold, lam, mu, resolution, policy)
        T = discretize(manifold.potential(mu), grid, bc)
        ev = eigenvalues_below(T, lam)
        vecs = eigenvectors(T, ev) if want_vectors else None
        return ModeSpectrum(ks, mu, ev, grid, bc, vecs)

    spectra = [s for s in _map(solve, _grouped_modes(manifold, lam), workers) if s.eigenvalues.size]
    return _merge(manifold, lam, spectra, resolution, policy)


def _merge(manifold, lam, spectra, resolution, policy) -> SpectralEnsemble:
    vals, modes, which, local = [], [], [], []
    for i, sp in enumerate(spectra):
        for k in sp.modes:
            vals.append(sp.eigenvalues)
            modes.extend([k] * sp.eigenvalues.size)
            which.append(np.full(sp.eigenvalues.size, i))
            local.append(np.arange(sp.eigenvalues.size))
    if vals:
        vals = np.concatenate(vals)
        which = np.concatenate(which)
        local = np.concatenate(local)
    else:
        vals, which, local = np.zeros(0), np.zeros(0, int), np.zeros(0, int)
    # sort by eigenvalue, ties by lattice point
    keys = [np.array([k[i] for k in modes]) for i in reversed(range(manifold.n))] if modes else []
    order = np.lexsort(tuple(keys) + (vals,)) if modes else np.zeros(0, int)
    meta = {"modes": len(spectra), "policy": repr(policy) if policy else repr(resolution)}
    return SpectralEnsemble(
        manifold, float(lam), spectra, vals[order], [modes[i] for i in order],
        which[order], local[order], resolution, meta,
    )


def count_eigenvalues(manifold: ModelManifold, lam: float, resolution: Optional[Resolution] = None,
                      policy: Optional[GridPolicy] = None, workers: int = 1) -> int:
    """``N(lam)`` by Sturm counts per mode, without computing eigenvalues."""
    resolution = resolution or Resolution()
    bc = manifold.bc

    def count(task):
        mu, ks = task
        grid = _mode_grid(manifold, lam, mu, resolution, policy)
        return len(ks) * sturm_count(discretize(manifold.potential(mu), grid, bc), lam)

    return int(sum(_map(count, _grouped_modes(manifold, lam), workers)))


# ---------------------------------------------------------------------------
# experiments


def _require_vectors(ensemble: SpectralEnsemble):
    if not ensemble.has_vectors:
        raise ValueError("ensemble was assembled without eigenvectors")


def _mass_below(sp: ModeSpectrum, s: float) -> float:
    """Summed node-sampled mass at ``x <= s`` over the mode's eigenvectors."""
    idx = int(np.searchsorted(sp.nodes, s, side="right"))
    if idx >= sp.nodes.size:
        return float(sp.eigenvalues.size)
    v = sp.vectors[:, :idx]
    return float(np.sum(v * v))


def mass_profile(ensemble: SpectralEnsemble, gammas: Sequence[float]) -> ExperimentReport:
    """Averaged eigenfunction mass ``F(lam, gamma)`` in the collar
    ``x <= lam^gamma`` against the limit ``2 (1/2 + gamma)``."""
    _require_vectors(ensemble)
    for g in gammas:
        asymptotics._check_gamma(g)
    lam, N = ensemble.cutoff, ensemble.count
    F = []
    for g in gammas:
        s = lam**g
        total = math.fsum(sp.multiplicity * _mass_below(sp, s) for sp in ensemble.spectra)
        F.append(total / N if N else math.nan)
    predicted = [asymptotics.predicted_mass(g) for g in gammas]
    by_gamma = [F[i] for i in np.argsort(gammas, kind="stable")]
    checks = {
        "range": all(0.0 <= f <= 1.0 for f in F),
        "monotone": all(a <= b for a, b in zip(by_gamma, by_gamma[1:])),
    }
    return ExperimentReport(
        "mass-profile", {"lambda": lam, "gamma": list(gammas)}, list(gammas), F, predicted,
        metadata={"N": N, **ensemble.metadata}, checks=checks,
    )


def test_function_average(ensemble: SpectralEnsemble, f: Callable) -> float:
    """``(1/N) sum_j int f(log x / log lam) |phi_j|^2 dx`` by node quadrature."""
    _require_vectors(ensemble)
    lam = ensemble.cutoff
    if not lam > 1:
        raise ValueError("need lam > 1 so that log(lam) > 0")
    parts = []
    for sp in ensemble.spectra:
        scaled = np.log(sp.nodes) / math.log(lam)
        w = np.broadcast_to(np.asarray(f(scaled), dtype=float), scaled.shape)
        parts.append(sp.multiplicity * float(np.sum((sp.vectors * sp.vectors) @ w)))
    return math.fsum(parts) / ensemble.count


test_function_average.__test__ = False  # not a pytest test


def test_function_limit(f: Callable, tol: float = 1e-10) -> float:
    """``2 int_{-1/2}^0 f``, the large-lam value of :func:`test_function_average`."""
    from .quadrature import integrate

    return 2.0 * integrate(lambda g: np.asarray(f(g), dtype=float) * np.ones_like(g),
                           -0.5, 0.0, abs_tol=tol).value


test_function_limit.__test__ = False


def _mode_traces(manifold, lam, mu, ks, grid, height, width):
    """Unperturbed count and trace, and trace with a step, for one mode."""
    pot = manifold.potential(mu)
    T = discretize(pot, grid, manifold.bc)
    ev = eigenvalues_below(T, lam)
    if height == 0.0:
        ev_step = ev
    else:
        ev_step = eigenvalues_below(discretize(pot.with_step(height, width), grid, manifold.bc), lam)
    m = len(ks)
    return m * ev.size, m * math.fsum(lam - ev), m * math.fsum(lam - ev_step)


def trace_difference(
    manifold: ModelManifold,
    lam: float,
    gamma: float,
    delta: float,
    resolution: Optional[Resolution] = None,
    policy: Optional[GridPolicy] = None,
    workers: int = 1,
) -> ExperimentReport:
    """``(|Tr(H - lam)_-| - |Tr(H + delta lam 1_{x <= lam^gamma} - lam)_-|) / (lam N)``
    by mode sums, both traces on the same per-mode grids."""
    asymptotics._check_gamma(gamma)
    asymptotics._check_delta(delta)
    resolution = resolution or Resolution()
    s = lam**gamma

    def task(t):
        mu, ks = t
        grid = _mode_grid(manifold, lam, mu, resolution, policy)
        return _mode_traces(manifold, lam, mu, ks, grid, delta * lam, s)

    rows = _map(task, _grouped_modes(manifold, lam), workers)
    N = sum(r[0] for r in rows)
    tr0 = math.fsum(r[1] for r in rows)
    trd = math.fsum(r[2] for r in rows)
    measured = (tr0 - trd) / (lam * N)
    predicted = asymptotics.predicted_trace_diff(delta, gamma, manifold.n)
    sign_ok = measured == 0.0 if delta == 0 else measured * delta >= 0.0
    return ExperimentReport(
        "trace-diff",
        {"lambda": lam, "gamma": gamma, "delta": delta, "n": manifold.n},
        [lam], [measured], [predicted],
        metadata={"N": N, "trace": tr0, "trace_perturbed": trd},
        checks={"sign": bool(sign_ok)},
    )


def variational_sandwich(ensemble: SpectralEnsemble, gamma: float, delta: float,
                         slack: float = 1e-9) -> ExperimentReport:
    """Check the finite-dimensional variational inequality

        sum_j mass_j(x <= lam^gamma) >= (|Tr(H - lam)_-| - |Tr(H + delta lam 1 - lam)_-|) / (delta lam)

    for ``delta > 0`` (reversed for ``delta < 0``).  The masses and the step
    use the same node-sampled indicator.
    """
    _require_vectors(ensemble)
    asymptotics._check_gamma(gamma)
    asymptotics._check_delta(delta)
    if delta == 0:
        raise ValueError("the sandwich needs delta != 0")
    lam, man = ensemble.cutoff, ensemble.manifold
    s = lam**gamma
    mass, tr0, trd = [], [], []
    for sp in ensemble.spectra:
        m = sp.multiplicity
        mass.append(m * _mass_below(sp, s))
        tr0.append(m * math.fsum(lam - sp.eigenvalues))
        T = discretize(man.potential(sp.mu).with_step(delta * lam, s), sp.grid, sp.bc)
        trd.append(m * math.fsum(lam - eigenvalues_below(T, lam)))
    M = math.fsum(mass)
    A0, Ad = math.fsum(tr0), math.fsum(trd)
    bound = (A0 - Ad) / (delta * lam)
    tol = slack * max(abs(M), abs(bound), 1.0)
    holds = M >= bound - tol if delta > 0 else M <= bound + tol
    N = ensemble.count
    return ExperimentReport(
        "sandwich",
        {"lambda": lam, "gamma": gamma, "delta": delta},
        [delta], [M / N], [bound / N],
        metadata={"N": N, "mass": M, "bound": bound, "slack": tol},
        checks={"sandwich": bool(holds)},
    )


def weyl_limit_constant(manifold: ModelManifold) -> float:
    """Large-lam value of ``N(lam) / (lam^((n+1)/2) log lam)`` from the mode sum.

    Mode ``mu`` contributes about ``A lam^((n+1)/2) mu^(-n/2)`` eigenvalues;
    summing over the lattice shell ``lam <= mu <= lam^(1 + 1/n)`` gives
    ``A vol(T^n) |S^(n-1)| / ((2 pi)^n 2n)``, which is ``A = 1/4`` for n = 1.
    """
    n = manifold.n
    sphere = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    return (asymptotics.constant_A(manifold.beta) * manifold.boundary_volume * sphere
            / ((2 * math.pi) ** n * 2 * n))


def weyl_ratio(
    manifold: ModelManifold,
    lam: float,
    resolution: Optional[Resolution] = None,
    policy: Optional[GridPolicy] = None,
    workers: int = 1,
) -> ExperimentReport:
    """Measured ``N(lam) / (lam^((n+1)/2) log lam)`` next to the phase-space
    mode-sum oracle at the same ``lam``."""
    if not lam > math.e:
        raise ValueError("weyl_ratio needs lam > e")
    shape = lam ** ((manifold.n + 1) / 2) * math.log(lam)
    groups = _grouped_modes(manifold, lam)
    N = count_eigenvalues(manifold, lam, resolution, policy, workers)

    def oracle(t):
        mu, ks = t
        return len(ks) * asymptotics.semiclassical_count(manifold.potential(mu), manifold.epsilon0, lam)

    sc = math.fsum(_map(oracle, groups, workers))
    limit = weyl_limit_constant(manifold)
    return ExperimentReport(
        "weyl-ratio",
        {"lambda": lam, "n": manifold.n},
        [lam], [N / shape], [sc / shape],
        metadata={"N": N, "semiclassical": sc, "limit": limit, "modes": sum(len(k) for _, k in groups)},
    )
