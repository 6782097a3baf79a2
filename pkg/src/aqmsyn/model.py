"""TCP/AQM fluid model: operating point, linearization, uncertainty embedding.

The congestion-avoidance dynamics of N long-lived TCP flows sharing a
bottleneck link of capacity C (packets/s) are described by the average
congestion window W(t) (packets) and the router queue q(t) (packets).
Packets are dropped (or marked) with probability p(t), the knob every AQM
controls.  At an operating point the model pins down three quantities:

    R0 = q0/C + Tp          round-trip time (queueing + propagation)
    W0 = R0*C/N             per-flow window that fills the link
    p0 = 2/W0**2            drop probability balancing additive increase

Small deviations (dW, dq) around that point obey a linear delay system

    x'(t) = A x(t) + Ad x(t - h) + B u(t - h),      h = R0,

with x = [dW, dq]' and u = dp.  All three matrices are rational in R0, so
an uncertain round-trip time R0 in [R0_min, R0_max] is covered by treating
r1 = 1/R0, r2 = 1/R0**2 and r3 = R0 as independent parameters ranging over
a box; the 8 corner systems form a polytope containing every admissible
model.  That embedding is deliberately loose (r1, r2, r3 are functionally
dependent) but keeps every downstream condition linear in the vertices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NetworkParams",
    "Equilibrium",
    "LinearModel",
    "Polytope",
    "equilibrium",
    "linearize",
    "build_polytope",
]


class ModelError(ValueError):
    """Raised when network parameters admit no valid operating point."""


@dataclass(frozen=True)
class NetworkParams:
    """Physical description of the bottleneck.

    N       number of TCP sessions (> 0)
    C       link capacity in packets/second (> 0)
    Tp      propagation delay in seconds (>= 0)
    q0      target queue length in packets (>= 0)
    buffer  queue capacity in packets (> q0)
    """

    N: float
    C: float
    Tp: float
    q0: float
    buffer: float = 800.0

    def __post_init__(self):
        for name in ("N", "C", "Tp", "q0", "buffer"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ModelError(f"{name} must be finite, got {v!r}")
        if self.N <= 0 or self.C <= 0:
            raise ModelError("N and C must be strictly positive")
        if self.Tp < 0 or self.q0 < 0:
            raise ModelError("Tp and q0 must be nonnegative")
        if self.q0 >= self.buffer:
            raise ModelError("target queue q0 must be below the buffer size")


@dataclass(frozen=True)
class Equilibrium:
    """Operating point (W0 packets, p0 probability, R0 seconds)."""

    W0: float
    p0: float
    R0: float


@dataclass(frozen=True)
class LinearModel:
    """Linear delay system x' = A x + Ad x(t-h) + B u(t-h) in (dW, dq)."""

    A: np.ndarray
    Ad: np.ndarray
    B: np.ndarray
    h: float
    n: int = 2
    m: int = 1

    def __post_init__(self):
        if self.A.shape != (self.n, self.n) or self.Ad.shape != (self.n, self.n):
            raise ModelError("state matrices must be n x n")
        if self.B.shape != (self.n, self.m):
            raise ModelError("input matrix must be n x m")
        for M in (self.A, self.Ad, self.B):
            if not np.all(np.isfinite(M)):
                raise ModelError("model matrices must be finite")

    def closed_loop_delayed(self, K: np.ndarray) -> np.ndarray:
        """Delayed-state matrix Ad + B K under u(t) = K x(t)."""
        return self.Ad + self.B @ np.atleast_2d(K)


@dataclass(frozen=True)
class Polytope:
    """Eight corner systems covering R0 in [R0_min, R0_max].

    vertices are ordered by binary enumeration of the (r1, r2, r3) box
    corners with r1 varying slowest and r3 fastest (low before high).
    That ordering is part of the public contract; downstream reports
    index vertices by it.
    """

    vertices: tuple[LinearModel, ...]
    R0_min: float
    R0_max: float
    rho_bounds: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    nominal: LinearModel | None = None

    def __post_init__(self):
        if len(self.vertices) != 8:
            raise ModelError("polytope must have exactly 8 vertices")


def equilibrium(params: NetworkParams) -> Equilibrium:
    """Operating point of the fluid model for the given network.

    Raises ModelError when the required drop probability exceeds 1,
    which happens when the per-flow window R0*C/N falls below sqrt(2);
    the linearization is meaningless there.
    """
    R0 = params.q0 / params.C + params.Tp
    W0 = R0 * params.C / params.N
    p0 = 2.0 / W0**2
    if p0 > 1.0:
        raise ModelError(
            f"infeasible operating point: window W0={W0:.3f} needs drop "
            f"probability {p0:.3f} > 1"
        )
    return Equilibrium(W0=W0, p0=p0, R0=R0)


def _matrices_at(N: float, C: float, R0: float):
    A = np.array(
        [
            [-N / (R0**2 * C), -1.0 / (R0**2 * C)],
            [N / R0, -1.0 / R0],
        ]
    )
    Ad = np.array(
        [
            [-N / (R0**2 * C), 1.0 / (R0**2 * C)],
            [0.0, 0.0],
        ]
    )
    B = np.array([[-(C**2) * R0 / (2.0 * N**2)], [0.0]])
    return A, Ad, B


def linearize(params: NetworkParams, eq: Equilibrium | float) -> LinearModel:
    """Linear delay model around the operating point.

    `eq` is normally the Equilibrium returned by equilibrium(); passing a
    bare float uses it as the round-trip time R0 directly, which is how
    published round-off variants of the same plant are reproduced.
    """
    R0 = eq if isinstance(eq, (int, float)) else eq.R0
    if R0 <= 0:
        raise ModelError("round-trip time must be positive")
    A, Ad, B = _matrices_at(params.N, params.C, R0)
    return LinearModel(A=A, Ad=Ad, B=B, h=R0)


# Generator matrices of the uncertainty embedding: with r1 = 1/R0,
# r2 = 1/R0**2, r3 = R0 the plant matrices decompose as
#   A  = r1*A_GEN1 + r2*A_GEN2,   Ad = r2*AD_GEN,   B = r3*B_GEN.
def _generators(N: float, C: float):
    A_gen1 = np.array([[0.0, 0.0], [N, -1.0]])
    A_gen2 = np.array([[-N / C, -1.0 / C], [0.0, 0.0]])
    Ad_gen = np.array([[-N / C, 1.0 / C], [0.0, 0.0]])
    B_gen = np.array([[-(C**2) / (2.0 * N**2)], [0.0]])
    return A_gen1, A_gen2, Ad_gen, B_gen


def build_polytope(params: NetworkParams, R0_min: float, R0_max: float) -> Polytope:
    """Corner systems of the (r1, r2, r3) box covering R0 in [R0_min, R0_max]."""
    if not (0.0 < R0_min <= R0_max):
        raise ModelError(f"invalid round-trip interval [{R0_min}, {R0_max}]")
    A1, A2, Adg, Bg = _generators(params.N, params.C)
    r1_bounds = (1.0 / R0_max, 1.0 / R0_min)
    r2_bounds = (1.0 / R0_max**2, 1.0 / R0_min**2)
    r3_bounds = (R0_min, R0_max)
    verts = []
    for r1 in r1_bounds:
        for r2 in r2_bounds:
            for r3 in r3_bounds:
                verts.append(
                    LinearModel(
                        A=r1 * A1 + r2 * A2,
                        Ad=r2 * Adg,
                        B=r3 * Bg,
                        h=1.0 / r1,
                    )
                )
    try:
        nominal = linearize(params, equilibrium(params))
    except ModelError:
        # the interval can still be analyzed even when the operating
        # point itself is out of range for these params
        nominal = None
    return Polytope(
        vertices=tuple(verts),
        R0_min=R0_min,
        R0_max=R0_max,
        rho_bounds=(r1_bounds, r2_bounds, r3_bounds),
        nominal=nominal,
    )
