"""
Shared fixtures: pendulum Hamiltonians, config paths and a precision guard.
"""
import os
from fractions import Fraction

import pytest
from mpmath import mp

from splitting.fourier import ExactComplex
from splitting.model_core import HamiltonianSpec

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")

# (cos x - 1)(1 + sin t) as (k, j, coefficient)
PENDULUM_TERMS = [
    (1, 0, ExactComplex.of("1/2")), (-1, 0, ExactComplex.of("1/2")), (0, 0, ExactComplex.of(-1)),
    (1, 1, ExactComplex.of(0, "-1/4")), (-1, -1, ExactComplex.of(0, "1/4")),
    (1, -1, ExactComplex.of(0, "1/4")), (-1, 1, ExactComplex.of(0, "-1/4")),
    (0, 1, ExactComplex.of(0, "1/2")), (0, -1, ExactComplex.of(0, "-1/2")),
]


def pendulum(eta=0, alpha=0) -> HamiltonianSpec:
    """h = I^2/2 + eta I^3 + delta (1 + alpha I)(1 + sin t)(cos x - 1)."""
    h0 = [(2, Fraction(1, 2))]
    if eta:
        h0.append((3, Fraction(eta)))
    terms = [(k, 0, j, c) for k, j, c in PENDULUM_TERMS]
    if alpha:
        terms += [(k, 1, j, c * Fraction(alpha)) for k, j, c in PENDULUM_TERMS]
    return HamiltonianSpec.build(h0, terms)


def config_path(name):
    return os.path.join(CONFIG_DIR, name)


@pytest.fixture
def precision():
    """30 digits for the test, restored afterwards."""
    saved = mp.dps
    mp.dps = 30
    yield mp.dps
    mp.dps = saved


@pytest.fixture
def precision40():
    """40 digits for the closed-form checks."""
    saved = mp.dps
    mp.dps = 40
    yield mp.dps
    mp.dps = saved


@pytest.fixture
def pendulum_spec():
    return pendulum()


@pytest.fixture
def pendulum_eta_spec():
    return pendulum(eta=Fraction(1, 10))
