"""Closed-form constants and leading-order predictors for ``P_mu`` sums.

Also hosts the phase-space (semiclassical) eigenvalue count
``(1 / pi) * int sqrt((lam - V)_+) dx`` used as an independent check of the
matrix counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grushin1d import GrushinPotential, minimizer
from .quadrature import integrate


@dataclass(frozen=True)
class AsymptoticContext:
    """Parameters of the leading-order analysis.

    ``E`` and ``eta`` only bound the mode window in the estimates; the
    numerical experiments sum over every contributing mode instead.
    """

    n: int = 1
    beta: float = 2.0
    E: float = 1.0
    eta: float = 0.1
    critical: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not (self.E > 0 and self.eta > 0):
            raise ValueError("E and eta must be positive")
        if self.critical and not math.isclose(self.beta * self.n, 2.0):
            raise ValueError("critical mode needs beta * n == 2")

    @classmethod
    def critical_for(cls, n: int, **kwargs) -> "AsymptoticContext":
        return cls(n=n, beta=2.0 / n, **kwargs)


def _one_minus_power(t: np.ndarray, beta: float) -> np.ndarray:
    """``1 - (1 - t^2)^beta`` without cancellation for small t."""
    return -np.expm1(beta * np.log1p(-t * t))


def _shape_integral(beta: float, power: float, tol: float) -> float:
    """``int_0^1 (1 - z^beta)^power dz``.

    On [1/2, 1] the substitution z = 1 - t^2 removes the edge singularity.
    """
    if not beta > 0:
        raise ValueError("beta must be > 0")

    def near_zero(z):
        return (-np.expm1(beta * np.log(z, where=z > 0, out=np.full_like(z, -np.inf)))) ** power

    def near_one(t):
        return 2.0 * t * _one_minus_power(t, beta) ** power

    head = integrate(near_zero, 0.0, 0.5, abs_tol=tol / 2).value
    tail = integrate(near_one, 0.0, math.sqrt(0.5), abs_tol=tol / 2).value
    return math.fsum((head, tail))


def constant_A(beta: float, tol: float = 1e-13) -> float:
    """``(1 / pi) int_0^1 sqrt(1 - z^beta) dz``."""
    return _shape_integral(beta, 0.5, tol * math.pi) / math.pi


def trace_prefactor(beta: float, tol: float = 1e-13) -> float:
    """``(2 / (3 pi)) int_0^1 (1 - z^beta)^(3/2) dz``; equals
    ``2 / (n + 3) * constant_A(beta)`` for ``beta = 2 / n``."""
    return 2.0 * _shape_integral(beta, 1.5, tol * 1.5 * math.pi) / (3.0 * math.pi)


def predicted_count(omega: float, beta: float) -> float:
    """Leading count of ``P_1`` below ``omega`` on ``[0, omega^(1/beta)]``."""
    if not omega > 0:
        raise ValueError("omega must be > 0")
    return constant_A(beta) * omega ** (0.5 + 1.0 / beta)


def predicted_trace(omega: float, beta: float) -> float:
    """Leading ``|Tr(P_1 - omega)_-|`` on ``[0, omega^(1/beta)]``."""
    if not omega > 0:
        raise ValueError("omega must be > 0")
    return trace_prefactor(beta) * omega ** (1.5 + 1.0 / beta)


def omega_delta(lam: float, j: float, delta: float, n: int) -> float:
    """Rescaled energy ``(1 - delta) lam j^(-2/(n+1))`` of mode j."""
    if not (lam > 0 and j > 0):
        raise ValueError("lam and j must be > 0")
    _check_delta(delta)
    return (1.0 - delta) * lam * j ** (-2.0 / (n + 1))


def _check_delta(delta: float):
    if not -0.5 <= delta <= 0.5:
        raise ValueError(f"delta = {delta!r} outside [-1/2, 1/2]")


def _check_gamma(gamma: float):
    if not -0.5 <= gamma <= 0.0:
        raise ValueError(f"gamma = {gamma!r} outside [-1/2, 0]")


def predicted_trace_diff(delta: float, gamma: float, n: int) -> float:
    """Limit of ``(|Tr(H - lam)_-| - |Tr(H + delta lam 1 - lam)_-|) / (lam N)``
    with the step supported in the collar of width ``lam^gamma``."""
    _check_delta(delta)
    _check_gamma(gamma)
    p = (n + 3) / 2.0
    return 2.0 / (n + 3) * (1.0 - (1.0 - delta) ** p) * 2.0 * (0.5 + gamma)


def predicted_mass(gamma: float) -> float:
    """Limiting fraction of eigenfunction mass within ``x <= lam^gamma``."""
    _check_gamma(gamma)
    return 2.0 * (0.5 + gamma)


# ---------------------------------------------------------------------------
# phase-space count


def _bisect_level(g, lo: float, hi: float, rtol: float = 1e-13) -> float:
    """Root of the monotone ``g`` on ``[lo, hi]`` (sign change assumed)."""
    glo = g(lo)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * abs(hi) or not lo < mid < hi:
            break
        gm = g(mid)
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _allowed_interval(potential: GrushinPotential, shift: float, a: float, b: float, lam: float):
    """Sub-interval of ``[a, b]`` where ``smooth V + shift < lam``, or None.

    The smooth part decreases up to its minimizer and increases after it, so
    the allowed set is an interval whose ends are turning points or ``a, b``.
    """
    c, mu = potential.c, potential.mu

    def excess(x):
        return float(potential.smooth(np.float64(x))) + shift - lam

    if c > 0 and mu > 0:
        xm = min(max(minimizer(c, mu, potential.beta), a), b)
    elif mu > 0:
        xm = a
    else:
        xm = b
    if excess(xm) >= 0:
        return None

    if a == 0.0 and c > 0:
        lo = xm
        while excess(lo) < 0:
            lo *= 0.5
        x_left = _bisect_level(excess, lo, xm)
    elif excess(a) < 0:
        x_left = a
    else:
        x_left = _bisect_level(excess, a, xm)

    x_right = b if excess(b) < 0 else _bisect_level(excess, xm, b)
    return x_left, x_right


def _sqrt_edge_integral(g, x0: float, x1: float, tol: float) -> float:
    """``int sqrt(g)`` over [x0, x1] where g may vanish like a linear function
    at either end; t^2 substitutions from both ends smooth the integrand."""
    mid = 0.5 * (x0 + x1)
    left_len, right_len = mid - x0, x1 - mid

    def from_left(t):
        return 2.0 * left_len * t * np.sqrt(np.maximum(g(x0 + left_len * t * t), 0.0))

    def from_right(t):
        return 2.0 * right_len * t * np.sqrt(np.maximum(g(x1 - right_len * t * t), 0.0))

    return (integrate(from_left, 0.0, 1.0, abs_tol=tol / 2).value
            + integrate(from_right, 0.0, 1.0, abs_tol=tol / 2).value)


def semiclassical_count(
    potential: GrushinPotential, b: float, lam: float, tol: float = 1e-10
) -> float:
    """``(1 / pi) int_0^b sqrt((lam - V(x))_+) dx``."""
    if not (b > 0 and lam > 0):
        raise ValueError("b and lam must be positive")
    pieces = [(0.0, b, 0.0)]
    step = potential.step
    if step is not None and step.height != 0.0:
        if step.width >= b:
            pieces = [(0.0, b, step.height)]
        else:
            pieces = [(0.0, step.width, step.height), (step.width, b, 0.0)]

    total = 0.0
    for a, e, shift in pieces:
        interval = _allowed_interval(potential, shift, a, e, lam)
        if interval is None:
            continue
        x0, x1 = interval
        if x1 <= x0:
            continue

        def gap(x, shift=shift):
            return lam - shift - potential.smooth(x)

        total += _sqrt_edge_integral(gap, x0, x1, tol * math.pi * max(1.0, math.sqrt(lam)))
    return total / math.pi
