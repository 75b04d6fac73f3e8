import numpy as np

from slrtrack.linalg import BasisMatrix
from slrtrack.linalg import random_basis
from slrtrack.utilities import rng_stream


def sparse_vector(n, support, rng, low=10.0, high=20.0):
    x = np.zeros(n)
    x[support] = rng.uniform(low, high, size=len(support)) * rng.choice([-1.0, 1.0], size=len(support))
    return x


def low_rank(n, d, r, seed, scale=1.0):
    """
    Product of two orthonormalized Gaussian factors with all nonzero singular values equal to ``scale``.

    """
    U = random_basis(n, r, rng_stream(seed, "U")).data
    V = random_basis(d, r, rng_stream(seed, "V")).data
    return scale * U @ V.T, BasisMatrix(U)
