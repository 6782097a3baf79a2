"""Small dense semidefinite feasibility engine.

Every stability and synthesis condition in this toolkit is an affine
symmetric-matrix inequality F(x) < 0 over a handful of matrix decision
variables (Lyapunov matrices, slack blocks, controller gains).  This
module poses the joint feasibility question as a margin maximization

    max t   s.t.   F_k(x) + t*I <= 0   for every constraint k,

solved with a primal-dual interior-point method on the equivalent cone
program.  Two details make the outcome trustworthy rather than merely
plausible:

* homogeneity: the Lyapunov-type conditions are invariant under scaling
  all variables by a positive factor, so variables declared positive
  definite are normalized to V >= I.  This removes the degenerate ray
  and makes margins comparable across runs.
* verification: the solver's claim is never taken at face value.  The
  margin is recomputed from the returned assignment with a symmetric
  eigensolver, and a problem counts as certified only when that
  recomputed margin clears the feasibility tolerance.

The search space is additionally confined to a large box |x_i| <= box,
which keeps the margin program bounded when a condition is feasible with
unbounded certificates, and an optional cap on t stops the optimizer
from inflating certificate scale once feasibility is established (useful
when the certificate is handed to a follow-up solve).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as _cvxmat
from cvxopt import solvers as _cvxsolvers

__all__ = [
    "MatrixVar",
    "LmiConstraint",
    "SolveOptions",
    "SdpSolution",
    "solve_feasibility",
    "min_eig",
    "verify_assignment",
]

CERTIFIED = "certified-feasible"
NO_CERTIFICATE = "no-certificate"


class AssemblyError(ValueError):
    """Raised when constraints or variables are dimensionally inconsistent."""


@dataclass(frozen=True)
class MatrixVar:
    """A matrix decision variable.

    Symmetric variables are parametrized by their upper triangle
    (n*(n+1)/2 scalars); rectangular ones by all rows*cols entries.
    positive_definite adds the V >= I normalization row to any solve
    this variable participates in.
    """

    name: str
    rows: int
    cols: int
    symmetric: bool = False
    positive_definite: bool = False

    def __post_init__(self):
        if self.symmetric and self.rows != self.cols:
            raise AssemblyError(f"symmetric variable {self.name} must be square")
        if self.positive_definite and not self.symmetric:
            raise AssemblyError(f"definiteness on {self.name} requires symmetry")

    @property
    def nscalars(self) -> int:
        if self.symmetric:
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols

    def basis(self):
        """Unit directions of the parametrization, as dense matrices."""
        out = []
        if self.symmetric:
            n = self.rows
            for i in range(n):
                for j in range(i, n):
                    E = np.zeros((n, n))
                    E[i, j] = 1.0
                    E[j, i] = 1.0
                    out.append(E)
        else:
            for i in range(self.rows):
                for j in range(self.cols):
                    E = np.zeros((self.rows, self.cols))
                    E[i, j] = 1.0
                    out.append(E)
        return out

    def devec(self, x: np.ndarray) -> np.ndarray:
        """Matrix value from the scalar parameter slice."""
        if self.symmetric:
            n = self.rows
            M = np.zeros((n, n))
            k = 0
            for i in range(n):
                for j in range(i, n):
                    M[i, j] = x[k]
                    M[j, i] = x[k]
                    k += 1
            return M
        return np.asarray(x, dtype=float).reshape(self.rows, self.cols)


class LmiConstraint:
    """Affine symmetric-matrix function F(x) = F0 + sum of terms, F(x) < 0.

    Each term contributes  scale * L @ op(V) @ R  where op is identity or
    transpose; with hermitian=True the transpose of the whole product is
    added as well, which is how paired blocks like P*Ad / Ad'*P enter.
    """

    def __init__(self, order: int, label: str = ""):
        self.order = int(order)
        self.label = label
        self.F0 = np.zeros((self.order, self.order))
        self._terms: list[tuple] = []

    def add_constant(self, M: np.ndarray) -> "LmiConstraint":
        M = np.asarray(M, dtype=float)
        if M.shape != (self.order, self.order):
            raise AssemblyError(
                f"constant block {M.shape} does not fit constraint order {self.order}"
            )
        self.F0 = self.F0 + M
        return self

    def add_term(
        self,
        var: str,
        left: np.ndarray | None = None,
        right: np.ndarray | None = None,
        transpose: bool = False,
        hermitian: bool = False,
        scale: float = 1.0,
    ) -> "LmiConstraint":
        self._terms.append((var, left, right, transpose, hermitian, scale))
        return self

    @staticmethod
    def _apply(term, V: np.ndarray) -> np.ndarray:
        _, L, R, tr, herm, sc = term
        M = V.T if tr else V
        if L is not None:
            M = L @ M
        if R is not None:
            M = M @ R
        M = sc * M
        if herm:
            M = M + M.T
        return M

    def coefficients(self, var: MatrixVar) -> np.ndarray:
        """Stack of dF/dx_k for this variable, shape (nscalars, order, order)."""
        T = np.zeros((var.nscalars, self.order, self.order))
        basis = var.basis()
        for term in self._terms:
            if term[0] != var.name:
                continue
            for k, E in enumerate(basis):
                M = self._apply(term, E)
                if M.shape != (self.order, self.order):
                    raise AssemblyError(
                        f"term on {var.name} produces block {M.shape}, "
                        f"constraint order is {self.order}"
                    )
                T[k] += M
        return T

    def evaluate(self, assignment: dict[str, np.ndarray]) -> np.ndarray:
        F = self.F0.copy()
        for term in self._terms:
            name = term[0]
            if name not in assignment:
                raise AssemblyError(f"assignment misses variable {name}")
            F = F + self._apply(term, np.asarray(assignment[name], dtype=float))
        asym = np.abs(F - F.T).max()
        if asym > 1e-9 * (1.0 + np.abs(F).max()):
            raise AssemblyError(
                f"constraint {self.label or '?'} evaluates non-symmetric "
                f"(asymmetry {asym:.2e}); check hermitian pairing of terms"
            )
        return 0.5 * (F + F.T)


@dataclass(frozen=True)
class SolveOptions:
    feas_tol: float = 1e-7
    max_iters: int = 500
    box: float = 1e6
    margin_cap: float | None = None


@dataclass(frozen=True)
class SdpSolution:
    status: str
    assignment: dict[str, np.ndarray] = field(default_factory=dict)
    margin: float = -np.inf
    iterations: int = 0
    solver_state: str = ""

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED


def min_eig(M: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def verify_assignment(
    constraints: list[LmiConstraint],
    assignment: dict[str, np.ndarray],
    tol: float,
) -> list[tuple[float, bool]]:
    """Independent re-check: lambda_max(F_k(x)) and pass/fail against -tol.

    This is the certification path: it shares no code with the interior
    point iteration beyond the constraint description itself.
    """
    out = []
    for con in constraints:
        lam = -min_eig(-con.evaluate(assignment))
        out.append((lam, lam <= -tol))
    return out


def solve_feasibility(
    variables: list[MatrixVar],
    constraints: list[LmiConstraint],
    options: SolveOptions | None = None,
) -> SdpSolution:
    """Find an assignment making every constraint negative definite.

    Returns certified-feasible only when the margin recomputed from the
    assignment by verify_assignment clears options.feas_tol; the interior
    point status is recorded but never trusted on its own.
    """
    opts = options or SolveOptions()
    if not variables or not constraints:
        raise AssemblyError("need at least one variable and one constraint")
    names = [v.name for v in variables]
    if len(set(names)) != len(names):
        raise AssemblyError("duplicate variable names")

    offsets = {}
    ntot = 0
    for v in variables:
        offsets[v.name] = ntot
        ntot += v.nscalars
    if ntot > 500:
        raise AssemblyError(f"{ntot} scalar unknowns exceeds the engine's scale")
    t_idx = ntot
    nvar = ntot + 1

    # objective: minimize -t
    c = np.zeros(nvar)
    c[t_idx] = -1.0

    Gs, hs = [], []
    for con in constraints:
        m = con.order
        G = np.zeros((m * m, nvar))
        for v in variables:
            T = con.coefficients(v)
            off = offsets[v.name]
            for k in range(v.nscalars):
                G[:, off + k] += T[k].reshape(m * m)
        G[:, t_idx] = np.eye(m).reshape(m * m)
        Gs.append(_cvxmat(G))
        hs.append(_cvxmat(-con.F0))
    for v in variables:
        if not v.positive_definite:
            continue
        m = v.rows
        G = np.zeros((m * m, nvar))
        off = offsets[v.name]
        for k, E in enumerate(v.basis()):
            G[:, off + k] = -E.reshape(m * m)
        Gs.append(_cvxmat(G))
        hs.append(_cvxmat(-np.eye(m)))

    nlin = 2 * ntot + (1 if opts.margin_cap is not None else 0)
    Gl = np.zeros((nlin, nvar))
    Gl[:ntot, :ntot] = np.eye(ntot)
    Gl[ntot : 2 * ntot, :ntot] = -np.eye(ntot)
    hl = np.full(nlin, opts.box)
    if opts.margin_cap is not None:
        Gl[2 * ntot, t_idx] = 1.0
        hl[2 * ntot] = opts.margin_cap

    try:
        sol = _cvxsolvers.sdp(
            _cvxmat(c),
            Gl=_cvxmat(Gl),
            hl=_cvxmat(hl),
            Gs=Gs,
            hs=hs,
            options={"show_progress": False, "maxiters": opts.max_iters},
        )
    except (ZeroDivisionError, ArithmeticError, ValueError) as exc:
        # cvxopt's scaling update divides by an iterate eigenvalue and can
        # hit exact zero on degenerate inputs; treat that as no certificate
        return SdpSolution(status=NO_CERTIFICATE, solver_state=f"solver error: {exc}")

    if sol["x"] is None:
        return SdpSolution(
            status=NO_CERTIFICATE,
            solver_state=str(sol["status"]),
            iterations=int(sol.get("iterations", 0) or 0),
        )

    x = np.asarray(sol["x"]).ravel()
    assignment = {
        v.name: v.devec(x[offsets[v.name] : offsets[v.name] + v.nscalars])
        for v in variables
    }
    margin = min(
        -float(np.linalg.eigvalsh(con.evaluate(assignment))[-1]) for con in constraints
    )
    for v in variables:
        if v.positive_definite and min_eig(assignment[v.name]) <= 0.0:
            # normalization row violated; no certificate regardless of status
            margin = min(margin, min_eig(assignment[v.name]))
    status = CERTIFIED if margin >= opts.feas_tol else NO_CERTIFICATE
    return SdpSolution(
        status=status,
        assignment=assignment,
        margin=float(margin),
        iterations=int(sol.get("iterations", 0) or 0),
        solver_state=str(sol["status"]),
    )
