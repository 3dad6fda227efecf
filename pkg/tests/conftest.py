import numpy as np
import pytest

from relosplit import operators

GAMMA_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_affine(rng, dim, scale=1.0):
    """A random monotone affine operator: PSD symmetric part plus skew."""
    root = scale * rng.standard_normal((dim, dim)) / np.sqrt(dim)
    skew = scale * rng.standard_normal((dim, dim))
    return operators.AffineMonotone(root @ root.T + (skew - skew.T),
                                    scale * rng.standard_normal(dim))


def operator_zoo(rng, dim=3):
    """One instance of every catalog kind, including the nested wrappers."""
    inner = operators.NegLog(dim)
    return [
        operators.Zero(dim),
        operators.ScaledIdentity(1.5, dim),
        random_affine(rng, dim),
        operators.NormalConePoint(rng.standard_normal(dim)),
        operators.NormalConeBox(-np.ones(dim), np.ones(dim)),
        operators.NormalConeBall(rng.standard_normal(dim), 1.5),
        operators.NegLog(dim),
        operators.Translated(inner, rng.standard_normal(dim)),
        operators.Scaled(inner, 2.0),
    ]


@pytest.fixture
def zoo(rng):
    return operator_zoo(rng)
