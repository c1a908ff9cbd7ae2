"""Road-network adjacency handling and the symmetric-normalized propagation
matrix used by every graph convolution layer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGraph, ParseError

SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class RoadNetwork:
    """Immutable graph: raw adjacency plus the precomputed propagation matrix."""
    n_nodes: int
    adjacency: np.ndarray
    propagation: np.ndarray


def build_propagation(adjacency):
    """Self-loop augmented, symmetrically degree-normalized adjacency.

    Given A, returns D^{-1/2} (A + I) D^{-1/2} with D the diagonal of
    row sums of A + I. Self-loops guarantee strictly positive degrees.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidGraph(f"adjacency must be square, got shape {a.shape}")
    if a.size == 0:
        raise InvalidGraph("adjacency is empty")
    if np.any(a < 0):
        i, j = np.argwhere(a < 0)[0]
        raise InvalidGraph(f"negative entry at ({i}, {j})")
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise InvalidGraph("adjacency is not symmetric within tolerance")
    a_tilde = a + np.eye(a.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return (a_tilde * d_inv_sqrt[:, None]) * d_inv_sqrt[None, :]


def road_network(adjacency):
    a = np.asarray(adjacency, dtype=np.float64)
    return RoadNetwork(n_nodes=a.shape[0], adjacency=a,
                       propagation=build_propagation(a))


def load_adjacency(path):
    """Read a headerless square CSV of nonnegative floats into a RoadNetwork."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(i for i, c in enumerate(cells)
                           if not _is_float(c))
                raise ParseError(
                    f"{path}: non-numeric cell at row {lineno}, column {bad + 1}")
    if not rows:
        raise ParseError(f"{path}: empty adjacency file")
    width = len(rows[0])
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise ParseError(
                f"{path}: row {i} has {len(r)} columns, expected {width}")
    if len(rows) != width:
        raise ParseError(
            f"{path}: matrix is {len(rows)}x{width}, expected square")
    return road_network(np.array(rows, dtype=np.float64))


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def spectral_radius_estimate(m, iters=200, seed=0):
    """Power-iteration estimate of the spectral radius (validation helper)."""
    m = np.asarray(m, dtype=np.float64)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = m @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
    return float(np.abs(v @ (m @ v)))
