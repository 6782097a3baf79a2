"""Controller synthesis for the delayed TCP/AQM loop.

Three routes produce a marking gain u(t) = K x(t):

* exact cancellation: the delayed term of the fluid model lies in the
  range of the input matrix, so a closed-form gain removes it entirely
  and leaves a delay-free Hurwitz loop.
* delay-independent (IOD) synthesis: a Lyapunov-Krasovskii condition
  that certifies stability for every delay at once.  The synthesis form
  is linear in a transformed variable set (R, S, Z) and recovers the
  gain as K = Z R^-1.
* delay-dependent (DD) relaxation: a discretized functional certifies
  stability up to a finite delay bound h.  Gain and slack variable make
  the condition bilinear, so the algorithm alternates a synthesis step
  (slack frozen, gain free) with an analysis step (gain frozen, slack
  free), each maximizing the certified h by bisection.

All conditions are checked at every vertex of a Polytope when one is
given, with a common certificate across vertices.  Every solve runs
through the verified-margin path of the sdp module; conclusions here
are only as strong as the recomputed eigenvalue margins, never the
interior-point status alone.

The margin of every solve is capped: the conditions are homogeneous, so
an uncapped margin maximizer inflates the certificate scale until it
hits the variable box, which poisons certificate reuse between the two
DD steps.  The cap, together with rescaling the slack against the
smallest Lyapunov eigenvalue, keeps reused certificates compatible with
the V >= I normalization of the next solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Equilibrium, LinearModel, NetworkParams, Polytope
from .sdp import (
    LmiConstraint,
    MatrixVar,
    SdpSolution,
    SolveOptions,
    min_eig,
    solve_feasibility,
)

__all__ = [
    "Gain",
    "IodCertificate",
    "DdCertificate",
    "RelaxationReport",
    "RelaxOptions",
    "SynthesisError",
    "iod_analysis",
    "iod_synthesize",
    "iod_synthesize_robust",
    "iod_analytic_gain",
    "build_gamma",
    "build_S",
    "dd_analysis_step",
    "dd_synthesis_step",
    "dd_relaxation",
    "dd_max_delay",
    "iod_certify_vertices",
    "dd_certify_vertices",
    "dd_max_delay_vertices",
]

# All synthesis-side solves cap the maximized margin.  See module docstring.
_SOLVE = SolveOptions(margin_cap=100.0)


class SynthesisError(RuntimeError):
    """A synthesis route failed in a way that is not plain infeasibility."""


@dataclass(frozen=True)
class Gain:
    """State-feedback row K with u(t) = K x(t).

    For the fluid model the two entries are the per-packet marking
    sensitivities to window deviation (k1) and queue deviation (k2).
    """

    K: np.ndarray

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        if not np.all(np.isfinite(K)):
            raise ValueError("gain entries must be finite")
        object.__setattr__(self, "K", K)

    @property
    def k1(self) -> float:
        return float(self.K[0, 0])

    @property
    def k2(self) -> float:
        return float(self.K[0, 1])


@dataclass(frozen=True)
class IodCertificate:
    """Delay-independent certificate: the pair (P, Q) and its margin."""

    P: np.ndarray
    Q: np.ndarray
    margin: float


@dataclass(frozen=True)
class DdCertificate:
    """Delay-dependent certificate at a given discretization and delay."""

    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    X: np.ndarray
    r: int
    h_m: float
    margin: float


@dataclass(frozen=True)
class RelaxationReport:
    """Trace of the alternating DD algorithm.

    iterations holds (h_max_synthesis, h_max_analysis, Gain) per pass;
    the h values are nondecreasing along the trace by construction, and
    that is verified here rather than assumed.
    """

    iterations: tuple[tuple[float, float, Gain], ...]
    gain: Gain
    h_m: float
    converged: bool
    certificate: DdCertificate | None = None

    def __post_init__(self):
        seq = []
        for hs, ha, _ in self.iterations:
            seq.extend([hs, ha])
        if any(b < a - 1e-12 for a, b in zip(seq, seq[1:])):
            raise SynthesisError(f"regressing h sequence {seq}")


@dataclass(frozen=True)
class RelaxOptions:
    h_tol: float = 1e-3
    max_iters: int = 20
    bracket: tuple[float, float] = (1e-3, 5.0)
    bisect_tol: float = 1e-3
    h0: float | None = None
    initial_gain: Gain | None = None


def _systems(models: LinearModel | Polytope) -> list[LinearModel]:
    if isinstance(models, Polytope):
        return list(models.vertices)
    return [models]


def _gain_matrix(K, m: int, n: int) -> np.ndarray:
    if K is None:
        return np.zeros((m, n))
    if isinstance(K, Gain):
        return K.K
    return np.atleast_2d(np.asarray(K, dtype=float))


def iod_analytic_gain(params: NetworkParams, eq: Equilibrium) -> Gain:
    """Closed-form gain that cancels the delayed term of the fluid model.

    k1 = -2 N^3 / (R0^3 C^3),  k2 = 2 N^2 / (R0^3 C^3).  With this gain
    B K = -A_d exactly, so the closed loop is delay-free; it is also the
    systematic initializer for the DD relaxation.
    """
    N, C, R0 = params.N, params.C, eq.R0
    k1 = -2.0 * N**3 / (R0**3 * C**3)
    k2 = 2.0 * N**2 / (R0**3 * C**3)
    return Gain(K=np.array([[k1, k2]]))


def _cancellation_gain(model: LinearModel) -> Gain:
    """Least-squares delayed-term canceller -pinv(B) A_d.

    Exact whenever A_d lies in the range of B, which holds for every
    fluid-model linearization (only the window row is delayed).
    """
    return Gain(K=-np.linalg.pinv(model.B) @ model.Ad)


def iod_analysis(model: LinearModel, K=None) -> IodCertificate | None:
    """Delay-independent stability check of the closed loop A, A_d + BK.

    Solves [[A'P + PA + Q, P (A_d + BK)], [(A_d + BK)' P, -Q]] < 0 over
    positive definite P, Q.  Returns a certificate or None.
    """
    n = model.n
    Km = _gain_matrix(K, model.m, n)
    Adt = model.Ad + model.B @ Km
    U = np.vstack([np.eye(n), np.zeros((n, n))])
    W = np.vstack([np.zeros((n, n)), np.eye(n)])
    con = LmiConstraint(2 * n, label="iod-analysis")
    con.add_term("P", left=U @ model.A.T, right=U.T, hermitian=True)
    con.add_term("Q", left=U, right=U.T)
    con.add_term("P", left=U, right=Adt @ W.T, hermitian=True)
    con.add_term("Q", left=W, right=W.T, scale=-1.0)
    sol = solve_feasibility(
        [
            MatrixVar("P", n, n, symmetric=True, positive_definite=True),
            MatrixVar("Q", n, n, symmetric=True, positive_definite=True),
        ],
        [con],
        _SOLVE,
    )
    if not sol.certified:
        return None
    return IodCertificate(P=sol.assignment["P"], Q=sol.assignment["Q"], margin=sol.margin)


def _iod_synthesis_constraint(model: LinearModel, order_label: str) -> LmiConstraint:
    n = model.n
    U = np.vstack([np.eye(n), np.zeros((n, n))])
    W = np.vstack([np.zeros((n, n)), np.eye(n)])
    con = LmiConstraint(2 * n, label=order_label)
    con.add_term("R", left=U @ model.A, right=U.T, hermitian=True)
    con.add_term("S", left=U, right=U.T)
    con.add_term("R", left=U @ model.Ad, right=W.T, hermitian=True)
    con.add_term("Z", left=U @ model.B, right=W.T, hermitian=True)
    con.add_term("S", left=W, right=W.T, scale=-1.0)
    return con


def _recover_gain(sol: SdpSolution) -> Gain:
    R = sol.assignment["R"]
    if np.linalg.cond(R) > 1e12:
        raise SynthesisError("ill-conditioned synthesis")
    if min_eig(sol.assignment["S"]) <= 0.0:
        raise SynthesisError("synthesis returned indefinite S")
    return Gain(K=sol.assignment["Z"] @ np.linalg.inv(R))


def _iod_synthesis_vars(model: LinearModel) -> list[MatrixVar]:
    n, m = model.n, model.m
    return [
        MatrixVar("R", n, n, symmetric=True, positive_definite=True),
        MatrixVar("S", n, n, symmetric=True),
        MatrixVar("Z", m, n),
    ]


def _iod_synthesis_solution(models: list[LinearModel]) -> SdpSolution:
    """Raw joint solve of the (R, S, Z) form; also used for diagnostics."""
    cons = [
        _iod_synthesis_constraint(v, f"iod-syn-v{i}") for i, v in enumerate(models)
    ]
    return solve_feasibility(_iod_synthesis_vars(models[0]), cons, _SOLVE)


def iod_synthesize(model: LinearModel) -> tuple[Gain, IodCertificate] | None:
    """Find a gain making the loop stable for every delay, or None.

    The (R, S, Z) form is solved, the gain K = Z R^-1 is recovered, and
    the result is re-certified through iod_analysis before being
    returned; an uncertifiable gain is treated as no certificate.
    """
    sol = _iod_synthesis_solution([model])
    if not sol.certified:
        return None
    gain = _recover_gain(sol)
    cert = iod_analysis(model, gain)
    if cert is None:
        return None
    return gain, cert


def iod_synthesize_robust(
    polytope: Polytope,
) -> tuple[Gain, tuple[IodCertificate, ...]] | None:
    """Common-certificate IOD synthesis over all eight vertices.

    One (R, S, Z) triple must satisfy the synthesis inequality at every
    vertex simultaneously.  The recovered gain is then re-certified by
    an independent iod_analysis at each vertex; all eight must pass.
    """
    verts = _systems(polytope)
    sol = _iod_synthesis_solution(verts)
    if not sol.certified:
        return None
    gain = _recover_gain(sol)
    certs = []
    for v in verts:
        cert = iod_analysis(v, gain)
        if cert is None:
            return None
        certs.append(cert)
    return gain, tuple(certs)


def build_gamma(
    P: np.ndarray, Q: np.ndarray, R: np.ndarray, h: float, r: int, n: int
) -> np.ndarray:
    """Numeric assembly of the discretized functional's derivative kernel.

    Block layout over xi = [dx/dt; x(t); x(t - h/r); ...; x(t - h)]:
    (h/r) R at (1,1); P paired at (1,2); the difference quadratic
    -(r/h) R at (2,2) and (3,3) with +(r/h) R at (2,3); +Q over the
    principal sub-block spanning positions 2..r+1 and -Q over positions
    3..r+2.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    if r < 1 or h <= 0.0:
        raise ValueError("need r >= 1 and h > 0")
    if P.shape != (n, n) or R.shape != (n, n) or Q.shape != (r * n, r * n):
        raise ValueError("block dimensions inconsistent with (r, n)")
    nf = (r + 2) * n
    G = np.zeros((nf, nf))
    s = [slice(i * n, (i + 1) * n) for i in range(r + 2)]
    G[s[0], s[0]] += (h / r) * R
    G[s[0], s[1]] += P
    G[s[1], s[0]] += P
    G[s[1], s[1]] += -(r / h) * R
    G[s[2], s[2]] += -(r / h) * R
    G[s[1], s[2]] += (r / h) * R
    G[s[2], s[1]] += (r / h) * R
    G[n : (r + 1) * n, n : (r + 1) * n] += Q
    G[2 * n : (r + 2) * n, 2 * n : (r + 2) * n] -= Q
    return G


def build_S(model: LinearModel, K, r: int) -> np.ndarray:
    """Dynamics row [-I, A, 0, ..., 0, A_d + BK] tying xi to the system."""
    n = model.n
    Adt = model.Ad + model.B @ _gain_matrix(K, model.m, n)
    blocks = [-np.eye(n), model.A] + [np.zeros((n, n))] * (r - 1) + [Adt]
    return np.hstack(blocks)


def _gamma_terms(con: LmiConstraint, r: int, n: int, h: float) -> None:
    """Same layout as build_gamma, expressed in decision-variable terms."""
    nf = (r + 2) * n
    sel = []
    for i in range(r + 2):
        Si = np.zeros((n, nf))
        Si[:, i * n : (i + 1) * n] = np.eye(n)
        sel.append(Si)
    con.add_term("R", left=sel[0].T, right=sel[0], scale=h / r)
    con.add_term("P", left=sel[0].T, right=sel[1], hermitian=True)
    con.add_term("R", left=sel[1].T, right=sel[1], scale=-r / h)
    con.add_term("R", left=sel[2].T, right=sel[2], scale=-r / h)
    con.add_term("R", left=sel[1].T, right=sel[2], scale=r / h, hermitian=True)
    selq1 = np.zeros((r * n, nf))
    selq1[:, n : (r + 1) * n] = np.eye(r * n)
    selq2 = np.zeros((r * n, nf))
    selq2[:, 2 * n : (r + 2) * n] = np.eye(r * n)
    con.add_term("Q", left=selq1.T, right=selq1)
    con.add_term("Q", left=selq2.T, right=selq2, scale=-1.0)


def _dd_vars(n: int, r: int, slack: bool, m: int = 0) -> list[MatrixVar]:
    nf = (r + 2) * n
    out = [
        MatrixVar("P", n, n, symmetric=True, positive_definite=True),
        MatrixVar("Q", r * n, r * n, symmetric=True, positive_definite=True),
        MatrixVar("R", n, n, symmetric=True, positive_definite=True),
    ]
    if slack:
        out.append(MatrixVar("X", nf, n))
    else:
        out.append(MatrixVar("K", m, n))
    return out


def dd_analysis_step(
    models: LinearModel | Polytope, K, r: int, h: float
) -> DdCertificate | None:
    """Delay-dependent feasibility at fixed gain: Gamma + <X S> < 0.

    X is free here.  For a Polytope the same P, Q, R, X must satisfy the
    condition with every vertex's dynamics row.
    """
    if h <= 0.0:
        raise ValueError("delay bound must be positive")
    systems = _systems(models)
    n = systems[0].n
    cons = []
    for i, mod in enumerate(systems):
        con = LmiConstraint((r + 2) * n, label=f"dd-ana-v{i}")
        _gamma_terms(con, r, n, h)
        con.add_term("X", right=build_S(mod, K, r), hermitian=True)
        cons.append(con)
    sol = solve_feasibility(_dd_vars(n, r, slack=True), cons, _SOLVE)
    if not sol.certified:
        return None
    a = sol.assignment
    return DdCertificate(
        P=a["P"], Q=a["Q"], R=a["R"], X=a["X"], r=r, h_m=h, margin=sol.margin
    )


def dd_synthesis_step(
    models: LinearModel | Polytope, X: np.ndarray, r: int, h: float
) -> tuple[Gain, DdCertificate] | None:
    """Delay-dependent synthesis at fixed slack: the gain enters affinely.

    The returned (P, Q, R) with the frozen X form a complete stability
    certificate for the returned gain at delay h; no separate
    re-certification solve is needed because the inequality checked here
    is the analysis condition itself, at one particular slack.
    """
    if h <= 0.0:
        raise ValueError("delay bound must be positive")
    X = np.asarray(X, dtype=float)
    systems = _systems(models)
    n, m = systems[0].n, systems[0].m
    sel_last = np.zeros((n, (r + 2) * n))
    sel_last[:, -n:] = np.eye(n)
    cons = []
    for i, mod in enumerate(systems):
        con = LmiConstraint((r + 2) * n, label=f"dd-syn-v{i}")
        _gamma_terms(con, r, n, h)
        S0 = build_S(mod, None, r)
        con.add_constant(X @ S0 + S0.T @ X.T)
        con.add_term("K", left=X @ mod.B, right=sel_last, hermitian=True)
        cons.append(con)
    sol = solve_feasibility(_dd_vars(n, r, slack=False, m=m), cons, _SOLVE)
    if not sol.certified:
        return None
    a = sol.assignment
    gain = Gain(K=a["K"])
    cert = DdCertificate(
        P=a["P"], Q=a["Q"], R=a["R"], X=X, r=r, h_m=h, margin=sol.margin
    )
    return gain, cert


def _rescale_slack(cert: DdCertificate) -> np.ndarray:
    """Scale X down by the smallest Lyapunov eigenvalue.

    The DD condition is homogeneous, so (P, Q, R, X)/s is feasible for
    any s > 0.  Dividing by min eig(P, Q, R) makes the rescaled
    certificate an interior point of the next solve's V >= I region,
    where the frozen-X step can actually find it.
    """
    s = min(min_eig(cert.P), min_eig(cert.Q), min_eig(cert.R))
    return cert.X / s


def _bisect_max(feasible, lo: float, hi: float, tol: float):
    """Largest argument in [lo, hi] at which feasible() returns a value.

    Assumes feasibility holds on an interval [lo, h*] and fails beyond.
    The returned pair is always the outcome of an actual feasibility
    check at that point, never an interpolation.
    """
    val = feasible(lo)
    if val is None:
        return None, None
    best = (lo, val)
    val = feasible(hi)
    if val is not None:
        return hi, val
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        val = feasible(mid)
        if val is not None:
            lo, best = mid, (mid, val)
        else:
            hi = mid
    return best


def dd_max_delay(
    models: LinearModel | Polytope,
    K,
    r: int,
    bracket: tuple[float, float] = (1e-3, 5.0),
    tol: float = 1e-3,
) -> float | None:
    """Largest certified delay bound for a fixed gain, by bisection.

    Returns None when even the lower bracket end is infeasible.  The
    value returned was itself checked feasible; feasibility fails within
    2 tol above it (inside the bracket).
    """
    h, _ = _bisect_max(
        lambda hh: dd_analysis_step(models, K, r, hh), bracket[0], bracket[1], tol
    )
    return h


def iod_certify_vertices(
    polytope: Polytope, K
) -> tuple[IodCertificate, ...] | None:
    """Certify an externally supplied gain vertex by vertex (IOD).

    Each vertex gets its own delay-independent analysis with its own
    (P, Q).  This is the right question for a gain whose origin is
    unknown: it asks whether every corner system is stabilized, without
    insisting that one common functional witnesses all corners at once
    the way the robust synthesis route does for its own gains.
    """
    certs = []
    for v in polytope.vertices:
        cert = iod_analysis(v, K)
        if cert is None:
            return None
        certs.append(cert)
    return tuple(certs)


def dd_certify_vertices(
    polytope: Polytope, K, r: int, h: float
) -> tuple[DdCertificate, ...] | None:
    """Per-vertex delay-dependent certification of a supplied gain at h.

    Same convention as iod_certify_vertices: individual (P, Q, R, X)
    per corner.  The common-certificate route (dd_analysis_step on the
    Polytope itself) is strictly more demanding and is what the
    relaxation algorithm uses internally for gains it synthesizes.
    """
    certs = []
    for v in polytope.vertices:
        cert = dd_analysis_step(v, K, r, h)
        if cert is None:
            return None
        certs.append(cert)
    return tuple(certs)


def dd_max_delay_vertices(
    polytope: Polytope,
    K,
    r: int,
    bracket: tuple[float, float] = (1e-3, 5.0),
    tol: float = 1e-3,
) -> float | None:
    """Worst-corner delay bound of a supplied gain, vertex by vertex.

    Bisection runs independently per vertex; the reported bound is the
    minimum, i.e. the delay certified at every corner of the box.
    """
    worst = None
    for v in polytope.vertices:
        h = dd_max_delay(v, K, r, bracket, tol)
        if h is None:
            return None
        worst = h if worst is None else min(worst, h)
    return worst


def dd_relaxation(
    models: LinearModel | Polytope, r: int, options: RelaxOptions | None = None
) -> RelaxationReport:
    """Alternating gain/slack maximization of the certified delay bound.

    Starts from the delayed-term-cancelling gain (at the nominal
    operating point for a Polytope) and a slack taken from an analysis
    solve at a small delay, then repeats: synthesis step maximizing h
    with the slack frozen, analysis step maximizing h with the gain
    frozen.  Both maximizations are bisections because h enters the
    kernel nonlinearly.  Stops when the two bounds agree to h_tol.
    """
    opts = options or RelaxOptions()
    if isinstance(models, Polytope):
        h_small = models.R0_min / 2.0
        seed_model = models.nominal or models.vertices[0]
    else:
        h_small = models.h / 2.0
        seed_model = models
    h0 = opts.h0 if opts.h0 is not None else h_small
    K = opts.initial_gain or _cancellation_gain(seed_model)

    cert = dd_analysis_step(models, K, r, h0)
    if cert is None:
        raise SynthesisError("no DD-stabilizable starting point")
    X = _rescale_slack(cert)

    lo, hi = opts.bracket
    h = max(h0, lo)
    iterations: list[tuple[float, float, Gain]] = []
    converged = False
    for _ in range(opts.max_iters):
        # the slack's absolute scale is a free choice, but the frozen-X
        # solve is only well conditioned in a window of it; a failure at
        # the handed-over scale is retried a few decades away (cheap:
        # an infeasible start is one solve)
        hs = syn = None
        for scale in (1.0, 0.1, 0.01, 10.0):
            Xs = X * scale
            hs, syn = _bisect_max(
                lambda hh: dd_synthesis_step(models, Xs, r, hh), h, hi, opts.bisect_tol
            )
            if hs is not None:
                break
        if hs is None:
            break
        K = syn[0]
        ha, ana = _bisect_max(
            lambda hh: dd_analysis_step(models, K, r, hh), hs, hi, opts.bisect_tol
        )
        if ha is None:
            break
        cert = ana
        X = _rescale_slack(cert)
        iterations.append((hs, ha, K))
        h = ha
        if ha - hs < opts.h_tol:
            converged = True
            break
    final = DdCertificate(
        P=cert.P, Q=cert.Q, R=cert.R, X=cert.X, r=r, h_m=h, margin=cert.margin
    )
    return RelaxationReport(
        iterations=tuple(iterations),
        gain=K,
        h_m=h,
        converged=converged,
        certificate=final,
    )
