import numpy as np
import pytest

from twistorkit.spaces import PSEUDO, SYMPLECTIC, standard_structure
from twistorkit.verdicts import sample_fibre

# (p, q) halves: signatures (4,0), (2,2), (6,0), (4,2)
PSEUDO_HALVES = [(2, 0), (1, 1), (3, 0), (2, 1)]
SYMPLECTIC_HALVES = [2, 3]


def pseudo_base(p, q, **kwargs):
    return standard_structure(PSEUDO, p, q, **kwargs)


def symplectic_base(n):
    return standard_structure(SYMPLECTIC, n=n)


def all_bases():
    return [pseudo_base(p, q) for p, q in PSEUDO_HALVES] + [symplectic_base(n) for n in SYMPLECTIC_HALVES]


def base_id(base):
    if base.is_pseudo:
        return f"pseudo{base.signature[0]}{base.signature[1]}"
    return f"sympl{base.dim}"


def fibre_points(base, count=4, seed=0):
    return sample_fibre(base, count, seed)


def rel(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm((a - b).ravel()) / max(1.0, np.linalg.norm(b.ravel())))


@pytest.fixture
def riemannian4():
    return pseudo_base(2, 0)


@pytest.fixture
def oriented4():
    return pseudo_base(2, 0, oriented=True)


@pytest.fixture
def split4():
    return pseudo_base(1, 1)


@pytest.fixture
def symplectic4():
    return symplectic_base(2)
