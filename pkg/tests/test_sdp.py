"""Feasibility engine: assembly, solving, verification, properties."""
import numpy as np
import pytest

from aqmsyn.sdp import (
    CERTIFIED,
    NO_CERTIFICATE,
    AssemblyError,
    LmiConstraint,
    MatrixVar,
    SolveOptions,
    min_eig,
    solve_feasibility,
    verify_assignment,
)
from sdputil import random_instance, run_agreement_suite


def test_matrixvar_scalar_counts():
    assert MatrixVar("P", 2, 2, symmetric=True).nscalars == 3
    assert MatrixVar("X", 2, 3).nscalars == 6
    assert MatrixVar("K", 1, 2).nscalars == 2


def test_matrixvar_devec_basis_roundtrip():
    v = MatrixVar("P", 3, 3, symmetric=True)
    x = np.arange(1.0, v.nscalars + 1.0)
    M = v.devec(x)
    assert np.array_equal(M, M.T)
    rebuilt = sum(xi * E for xi, E in zip(x, v.basis()))
    assert np.array_equal(rebuilt, M)
    r = MatrixVar("X", 2, 3)
    y = np.arange(6.0)
    assert np.array_equal(r.devec(y), y.reshape(2, 3))


def test_matrixvar_validation():
    with pytest.raises(AssemblyError):
        MatrixVar("P", 2, 3, symmetric=True)
    with pytest.raises(AssemblyError):
        MatrixVar("P", 2, 2, positive_definite=True)


def test_constraint_constant_shape_check():
    con = LmiConstraint(2)
    with pytest.raises(AssemblyError):
        con.add_constant(np.eye(3))


def test_constraint_evaluate_checks():
    con = LmiConstraint(2, label="asym")
    con.add_term("P", left=np.array([[1.0, 0.0], [0.0, 2.0]]))
    P = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(AssemblyError, match="non-symmetric"):
        con.evaluate({"P": P})
    with pytest.raises(AssemblyError, match="misses variable"):
        con.evaluate({})


def test_constraint_block_shape_check():
    con = LmiConstraint(3)
    con.add_term("P", left=np.eye(2))
    with pytest.raises(AssemblyError, match="block"):
        con.coefficients(MatrixVar("P", 2, 2, symmetric=True))


def test_solve_scalar_interval():
    # F(x) = diag(x - 1, -x) < 0 is feasible exactly for x in (0, 1)
    x = MatrixVar("x", 1, 1)
    con = LmiConstraint(2)
    con.add_constant(np.diag([-1.0, 0.0]))
    con.add_term("x", left=np.array([[1.0], [0.0]]), right=np.array([[1.0, 0.0]]))
    con.add_term("x", left=np.array([[0.0], [1.0]]), right=np.array([[0.0, 1.0]]), scale=-1.0)
    sol = solve_feasibility([x], [con])
    assert sol.status == CERTIFIED
    val = float(sol.assignment["x"][0, 0])
    assert 0.0 < val < 1.0
    # the margin-maximal point is the interval midpoint
    assert val == pytest.approx(0.5, abs=1e-3)
    assert sol.margin == pytest.approx(0.5, abs=1e-3)


def test_solve_normalized_lyapunov():
    P = MatrixVar("P", 2, 2, symmetric=True, positive_definite=True)
    con = LmiConstraint(2)
    con.add_term("P", scale=-1.0)
    sol = solve_feasibility([P], [con], SolveOptions(margin_cap=10.0))
    assert sol.certified
    assert sol.margin >= 1.0
    assert min_eig(sol.assignment["P"]) >= 1.0 - 1e-9


def test_solve_provably_infeasible_iod_instance():
    # scalar x' = x + 0.5 x(t-h): [[2P+Q, 0.5P], [0.5P, -Q]] < 0 cannot
    # hold because the (1,1) block is positive for any P, Q > 0
    P = MatrixVar("P", 1, 1, symmetric=True, positive_definite=True)
    Q = MatrixVar("Q", 1, 1, symmetric=True, positive_definite=True)
    e1 = np.array([[1.0], [0.0]])
    e2 = np.array([[0.0], [1.0]])
    con = LmiConstraint(2)
    con.add_term("P", left=e1, right=e1.T, hermitian=True)  # 2P at (1,1)
    con.add_term("P", left=e1, right=e2.T, scale=0.5, hermitian=True)
    con.add_term("Q", left=e1, right=e1.T, scale=0.5, hermitian=True)
    con.add_term("Q", left=e2, right=e2.T, scale=-0.5, hermitian=True)
    sol = solve_feasibility([P, Q], [con])
    assert sol.status == NO_CERTIFICATE


def test_min_eig_examples():
    assert min_eig(np.eye(3)) == pytest.approx(1.0, abs=1e-12)
    assert min_eig(np.diag([-1.0, 2.0])) == pytest.approx(-1.0, abs=1e-12)
    assert min_eig(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(-1.0, abs=1e-12)


def test_verify_assignment_roundtrip():
    x = MatrixVar("x", 1, 1)
    con = LmiConstraint(2)
    con.add_constant(np.diag([-1.0, 0.0]))
    con.add_term("x", left=np.array([[1.0], [0.0]]), right=np.array([[1.0, 0.0]]))
    con.add_term("x", left=np.array([[0.0], [1.0]]), right=np.array([[0.0, 1.0]]), scale=-1.0)
    sol = solve_feasibility([x], [con])
    results = verify_assignment([con], sol.assignment, tol=sol.margin / 2.0)
    assert all(ok for _, ok in results)
    assert all(lam <= -sol.margin + 1e-9 for lam, _ in results)


def test_verify_assignment_failure_reported():
    con = LmiConstraint(2)
    con.add_constant(np.eye(2))
    con.add_term("x", left=np.array([[1.0], [0.0]]), right=np.array([[1.0, 0.0]]))
    results = verify_assignment([con], {"x": np.zeros((1, 1))}, tol=1e-7)
    assert results == [(1.0, False)]


def test_solver_input_validation():
    x = MatrixVar("x", 1, 1)
    con = LmiConstraint(1)
    con.add_term("x")
    with pytest.raises(AssemblyError):
        solve_feasibility([], [con])
    with pytest.raises(AssemblyError):
        solve_feasibility([x], [])
    with pytest.raises(AssemblyError, match="duplicate"):
        solve_feasibility([x, x], [con])
    with pytest.raises(AssemblyError, match="scale"):
        solve_feasibility([MatrixVar("big", 30, 30)], [con])


def test_homogeneity_of_verdicts():
    # scaling F0 and every coefficient map by a > 0 must not change the
    # certified / no-certificate verdict
    rng = np.random.default_rng(7)
    for _ in range(20):
        variables, constraints, _ = random_instance(rng)
        base = solve_feasibility(variables, constraints, SolveOptions(margin_cap=10.0))
        for alpha in (0.01, 100.0):
            con = constraints[0]
            scaled = LmiConstraint(con.order, label="scaled")
            scaled.add_constant(alpha * con.F0)
            for name, L, R, tr, herm, sc in con._terms:
                scaled.add_term(name, left=L, right=R, transpose=tr,
                                hermitian=herm, scale=alpha * sc)
            again = solve_feasibility(variables, [scaled], SolveOptions(margin_cap=10.0))
            assert again.certified == base.certified, (
                f"verdict flipped under scaling alpha={alpha}"
            )


def test_margin_monotone_under_added_constraints():
    # a small box (instead of a margin cap) keeps the optimum attained,
    # so the recomputed margins of the two solves are comparable
    rng = np.random.default_rng(11)
    opts = SolveOptions(box=50.0)
    checked = 0
    while checked < 25:
        v1, c1, forced1 = random_instance(rng)
        v2, c2, forced2 = random_instance(rng)
        if forced1 or forced2:
            continue
        if v2[0].nscalars != v1[0].nscalars:
            continue
        alone = solve_feasibility(v1, c1, opts)
        if not alone.certified:
            continue
        joined = solve_feasibility(v1, c1 + c2, opts)
        if joined.certified:
            assert joined.margin <= alone.margin + 1e-5 * (1.0 + abs(alone.margin))
        checked += 1


def test_quick_agreement_sample():
    # small pre-check of the full 200-instance acceptance suite
    disagreements, ncert, nrefused = run_agreement_suite(30, seed=5)
    assert disagreements == []
    assert ncert > 0 and nrefused > 0
