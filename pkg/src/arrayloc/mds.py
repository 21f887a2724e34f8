"""Classical multidimensional scaling.

Recovers a centered point set from a complete squared-distance matrix:
double-center to a Gram matrix, eigendecompose, and keep the m leading
eigenpairs by magnitude.  Negative leading eigenvalues (non-Euclidean
inputs) are clipped to zero.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from .geometry import Edm, NodeLayout

# A leading eigenvalue below -NEG_EIG_TOL * |lambda_1| signals an input too
# far from any Euclidean configuration for clipping to be quiet about it.
NEG_EIG_TOL = 1e-6


class EigenSystem(NamedTuple):
    values: np.ndarray  # sorted by descending magnitude
    vectors: np.ndarray  # orthonormal columns, same order


def eigen_by_magnitude(matrix: np.ndarray) -> EigenSystem:
    """Full symmetric eigendecomposition, ordered by |eigenvalue| descending."""
    values, vectors = np.linalg.eigh(matrix)
    order = np.argsort(-np.abs(values), kind="stable")
    return EigenSystem(values[order], vectors[:, order])


def gram_from_edm(edm: Edm, s: np.ndarray | None = None) -> np.ndarray:
    """Gram matrix -1/2 (I - 1 s^T) D (I - s 1^T) for a complete D.

    Args:
        edm: fully observed squared-distance matrix.
        s: centering weights with s^T 1 == 1; defaults to uniform 1/N.
    """
    if not edm.is_complete:
        raise ValueError("Gram construction needs a fully observed matrix")
    d = edm.entries
    n = d.shape[0]
    if s is None:
        s = np.full(n, 1.0 / n)
    else:
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.shape[0] != n:
            raise ValueError("centering vector length must match matrix size")
        if abs(s.sum() - 1.0) > 1e-9:
            raise ValueError("centering vector must sum to 1")
    j = np.eye(n) - np.outer(np.ones(n), s)
    g = -0.5 * j @ d @ j.T
    return 0.5 * (g + g.T)


def classical_mds(edm: Edm, m: int) -> NodeLayout:
    """Embed a complete squared-distance matrix into m dimensions.

    Args:
        edm: fully observed squared-distance matrix.
        m: target dimension (1 <= m <= node count).

    Returns:
        Centered layout whose distance matrix reproduces ``edm`` exactly
        when the input is Euclidean of dimension <= m.
    """
    n = edm.count
    if m < 1 or m > n:
        raise ValueError("target dimension must lie in [1, node count]")
    system = eigen_by_magnitude(gram_from_edm(edm))
    leading = system.values[:m]
    head = abs(float(system.values[0]))
    if np.any(leading < -NEG_EIG_TOL * head):
        warnings.warn(
            "input is strongly non-Euclidean; negative leading eigenvalues "
            "clipped to zero",
            RuntimeWarning,
            stacklevel=2,
        )
    scale = np.sqrt(np.clip(leading, 0.0, None))
    return NodeLayout(scale[:, None] * system.vectors[:, :m].T)
