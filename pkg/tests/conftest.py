"""Shared fixtures: the benchmark network and its standard models."""
import numpy as np
import pytest

from aqmsyn import (
    Equilibrium,
    NetworkParams,
    build_polytope,
    equilibrium,
    linearize,
)

HOLLOT = NetworkParams(N=60.0, C=3750.0, Tp=0.2, q0=175.0, buffer=800.0)

# Rounded round-trip time as printed alongside the benchmark matrices;
# the exact value is 175/3750 + 0.2 = 0.24666...
R0_ROUNDED = 0.246


@pytest.fixture(scope="session")
def hollot():
    return HOLLOT


@pytest.fixture(scope="session")
def eq_exact():
    return equilibrium(HOLLOT)


@pytest.fixture(scope="session")
def lm_exact(eq_exact):
    return linearize(HOLLOT, eq_exact)


@pytest.fixture(scope="session")
def eq_rounded():
    W0 = R0_ROUNDED * HOLLOT.C / HOLLOT.N
    return Equilibrium(W0=W0, p0=2.0 / W0**2, R0=R0_ROUNDED)


@pytest.fixture(scope="session")
def lm_rounded():
    return linearize(HOLLOT, R0_ROUNDED)


@pytest.fixture(scope="session")
def poly_045():
    return build_polytope(HOLLOT, 0.10, 0.45)


@pytest.fixture(scope="session")
def poly_050():
    return build_polytope(HOLLOT, 0.10, 0.50)


@pytest.fixture(scope="session")
def poly_040():
    return build_polytope(HOLLOT, 0.10, 0.40)


def scalar_model(a: float, ad: float, b: float = 0.0, h: float = 1.0):
    """1-state delay system as a LinearModel (n=1, m=1)."""
    from aqmsyn import LinearModel

    return LinearModel(
        A=np.array([[a]]),
        Ad=np.array([[ad]]),
        B=np.array([[b]]),
        h=h,
        n=1,
        m=1,
    )
