"""Characteristic-root oracle for linear constant-delay systems.

The certificates produced by the synthesis module are sufficient
conditions.  This module answers the underlying question directly: where
are the rightmost characteristic roots of

    dx/dt = A x(t) + Ad x(t - h) ?

The infinitesimal generator of the solution semigroup acts on functions
over [-h, 0]; discretizing it by Chebyshev collocation turns the
transcendental eigenproblem into an ordinary one whose leading
eigenvalues converge spectrally fast to the true roots.  The rightmost
real part (the spectral abscissa) decides stability.

Nothing here shares code or theory with the LMI route, which is the
point: agreement between the two is evidence, disagreement is a bug
finder.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpectrumReport",
    "StabilityOptions",
    "OracleInconclusive",
    "char_spectrum",
    "is_stable",
    "critical_delay",
]


class OracleInconclusive(RuntimeError):
    """Order escalation hit its cap before the abscissa settled."""


@dataclass(frozen=True)
class StabilityOptions:
    margin: float = 1e-6
    refine_tol: float = 1e-8
    start_order: int = 16
    max_order: int = 256


@dataclass(frozen=True)
class SpectrumReport:
    """Leading characteristic roots at one delay and one grid order."""

    roots: np.ndarray
    abscissa: float
    order: int
    h: float


def _cheb(N: int):
    """Chebyshev differentiation matrix and nodes on [-1, 1].

    Standard collocation construction: nodes x_k = cos(pi k / N), matrix
    entries from the barycentric weights, diagonal by negative row sums.
    """
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.r_[2.0, np.ones(N - 1), 2.0] * (-1.0) ** np.arange(N + 1)
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D = D - np.diag(D.sum(axis=1))
    return D, x


def char_spectrum(A: np.ndarray, Ad: np.ndarray, h: float, order: int = 64) -> SpectrumReport:
    """Collocation approximation of the delay system's spectrum.

    The generator is discretized on `order` + 1 Chebyshev nodes mapped to
    [-h, 0]; the derivative relation holds at interior nodes while the
    row at the right endpoint carries the dynamics A x(0) + Ad x(-h).
    With h = 0 the exact eigenvalues of A + Ad are returned.
    """
    A = np.asarray(A, dtype=float)
    Ad = np.asarray(Ad, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or Ad.shape != (n, n):
        raise ValueError("A and Ad must be square and of equal order")
    if h < 0.0:
        raise ValueError("delay must be nonnegative")
    if order < 8:
        raise ValueError("order below 8 is too coarse to trust")
    if h == 0.0 or not np.any(Ad):
        # no delayed coupling: the characteristic equation is det(sI - A - Ad) = 0
        # and the grid would only contribute spurious eigenvalues
        roots = np.linalg.eigvals(A + Ad)
    else:
        D, _ = _cheb(order)
        M = np.kron((2.0 / h) * D, np.eye(n))
        M[:n, :] = 0.0
        M[:n, :n] = A
        M[:n, -n:] = Ad
        roots = np.linalg.eigvals(M)
    roots = roots[np.argsort(-roots.real)]
    return SpectrumReport(roots=roots, abscissa=float(roots[0].real), order=order, h=h)


def _settled_abscissa(A, Ad, h, opts: StabilityOptions) -> float:
    order = opts.start_order
    prev = char_spectrum(A, Ad, h, order).abscissa
    if h == 0.0 or not np.any(np.asarray(Ad)):
        return prev
    while order < opts.max_order:
        order *= 2
        cur = char_spectrum(A, Ad, h, order).abscissa
        if abs(cur - prev) < opts.refine_tol:
            return cur
        prev = cur
    raise OracleInconclusive(
        f"abscissa did not settle by order {opts.max_order} at h={h}"
    )


def is_stable(
    A: np.ndarray, Ad: np.ndarray, h: float, options: StabilityOptions | None = None
) -> bool:
    """Ground-truth verdict: rightmost root strictly left of -margin.

    The grid order is doubled until two refinements agree, so a True or
    False from here reflects the converged abscissa, not a lucky coarse
    grid.  Raises OracleInconclusive when refinement never settles.
    """
    opts = options or StabilityOptions()
    return _settled_abscissa(A, Ad, h, opts) < -opts.margin


def critical_delay(
    A: np.ndarray,
    Ad: np.ndarray,
    bracket: tuple[float, float],
    options: StabilityOptions | None = None,
    tol: float = 1e-4,
) -> float:
    """Delay at which stability is lost, located by bisection.

    Requires a valid bracket: stable at the low end, unstable at the
    high end.  Systems stable for every delay have no such bracket and
    this operation refuses them.
    """
    opts = options or StabilityOptions()
    lo, hi = bracket
    if not (0.0 <= lo < hi):
        raise ValueError(f"bracket invalid: [{lo}, {hi}]")
    if not is_stable(A, Ad, lo, opts):
        raise ValueError(f"bracket invalid: system unstable at h={lo}")
    if is_stable(A, Ad, hi, opts):
        raise ValueError(f"bracket invalid: system stable at h={hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_stable(A, Ad, mid, opts):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
