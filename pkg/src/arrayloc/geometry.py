"""Array geometry primitives.

Node layouts, squared-distance matrices with optional observation masks,
connectivity bookkeeping, and the structural completability check that
decides whether a partially observed distance matrix pins down a rigid
2-D arrangement.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np


class CompletabilityError(Exception):
    """Observation mask cannot support incremental node resolution."""


@dataclass
class NodeLayout:
    """Point set in m-dimensional space; column i is the position of node i."""

    coords: np.ndarray

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2:
            raise ValueError("coords must be a 2-D array shaped (dims, nodes)")
        if coords.shape[0] < 1 or coords.shape[1] < 1:
            raise ValueError("layout needs at least one dimension and one node")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        self.coords = coords

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def count(self) -> int:
        return self.coords.shape[1]


@dataclass
class AdjacencyMask:
    """Symmetric, zero-diagonal indicator of which node pairs were measured."""

    mask: np.ndarray

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise ValueError("mask must be a square matrix")
        mask = mask.astype(bool)
        if np.any(np.diag(mask)):
            raise ValueError("mask diagonal must be zero (no self-links)")
        if not np.array_equal(mask, mask.T):
            raise ValueError("mask must be symmetric")
        self.mask = mask

    @property
    def count(self) -> int:
        return self.mask.shape[0]

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.mask)) // 2

    def missing_pairs(self) -> list[tuple[int, int]]:
        """Unobserved (i, j) pairs with i < j, row-major order."""
        n = self.count
        return [
            (i, j) for i in range(n) for j in range(i + 1, n) if not self.mask[i, j]
        ]

    @classmethod
    def complete(cls, n: int) -> "AdjacencyMask":
        return cls(~np.eye(n, dtype=bool))


@dataclass
class Edm:
    """Matrix of squared internode distances (m^2).

    ``observed`` marks the valid entries when only part of the matrix has
    been measured; ``None`` means fully observed.  Unobserved positions are
    tracked by the mask alone, never by sentinel values.
    """

    entries: np.ndarray
    observed: AdjacencyMask | None = None

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("distance matrix must be square")
        if self.observed is not None and self.observed.count != entries.shape[0]:
            raise ValueError("mask size does not match matrix size")
        obs = self.observed_bool(entries.shape[0])
        vals = entries[obs]
        if vals.size and not np.all(np.isfinite(vals)):
            raise ValueError("observed entries must be finite")
        scale = float(np.max(np.abs(vals))) if vals.size else 0.0
        tol = 1e-9 * max(scale, 1.0)
        if np.any(np.abs(np.diag(entries)) > tol):
            raise ValueError("diagonal must be zero")
        if vals.size and np.any(np.abs(entries - entries.T)[obs] > tol):
            raise ValueError("observed entries must be symmetric")
        if vals.size and np.any(vals < 0.0):
            raise ValueError("observed squared distances must be non-negative")
        self.entries = entries

    def observed_bool(self, n: int | None = None) -> np.ndarray:
        if n is None:
            n = self.entries.shape[0]
        if self.observed is None:
            return ~np.eye(n, dtype=bool)
        return self.observed.mask

    @property
    def count(self) -> int:
        return self.entries.shape[0]

    @property
    def is_complete(self) -> bool:
        n = self.count
        return self.observed is None or self.observed.edge_count == max_edges(n)


def edm_from_points(layout: NodeLayout) -> Edm:
    """Squared-distance matrix of a layout (exact, symmetric, hollow)."""
    x = layout.coords
    diff = x[:, :, None] - x[:, None, :]
    return Edm(np.einsum("kij,kij->ij", diff, diff))


def max_edges(n: int) -> int:
    if n < 2:
        raise ValueError("need at least two nodes")
    return n * (n - 1) // 2


def min_edges(n: int) -> int:
    """Fewest links that can still rigidly resolve a 2-D array of n nodes."""
    if n < 4:
        raise ValueError("incremental 2-D resolution needs at least 4 nodes")
    return 3 * n - 6


def min_connectivity(n: int) -> float:
    return min_edges(n) / max_edges(n)


def connectivity_ratio(mask: AdjacencyMask) -> float:
    return mask.edge_count / max_edges(mask.count)


def _closure_resolves_all(adj: np.ndarray, seed: tuple[int, ...], m: int) -> bool:
    # Monotone closure: once a node has >= m+1 resolved neighbours it can be
    # multilaterated, so batch-adding candidates per round changes nothing.
    n = adj.shape[0]
    resolved = np.zeros(n, dtype=bool)
    resolved[list(seed)] = True
    while not resolved.all():
        counts = adj[:, resolved].sum(axis=1)
        candidates = ~resolved & (counts >= m + 1)
        if not candidates.any():
            return False
        resolved |= candidates
    return True


def is_completable(mask: AdjacencyMask, m: int = 2) -> bool:
    """Whether some fully connected (m+2)-node seed can resolve every node.

    Starting from a complete quadrilateral, a node is resolvable once it has
    at least m+1 links into the already-resolved set; the check greedily
    grows that set and tries every candidate seed.
    """
    if m != 2:
        raise ValueError("only the planar case (m == 2) is supported")
    n = mask.count
    if n < 4:
        raise ValueError("completability requires at least 4 nodes")
    adj = mask.mask
    degrees = adj.sum(axis=1)
    eligible = np.flatnonzero(degrees >= 3)
    for seed in combinations(eligible.tolist(), 4):
        block = adj[np.ix_(seed, seed)]
        if not np.all(block | np.eye(4, dtype=bool)):
            continue
        if _closure_resolves_all(adj, seed, m):
            return True
    return False


def random_completable_mask(
    n: int, c: float, rng: np.random.Generator
) -> AdjacencyMask:
    """Random mask with round(c * max_edges) links, completable by construction.

    A random complete quadrilateral seeds the graph, every further node is
    attached to three already-placed nodes, and leftover edge budget is spent
    on uniformly random extra links.
    """
    if n < 4:
        raise ValueError("need at least 4 nodes")
    if not 0.0 < c <= 1.0:
        raise ValueError("connectivity must lie in (0, 1]")
    budget = math.floor(c * max_edges(n) + 0.5)
    if budget < min_edges(n):
        raise ValueError(
            f"edge budget {budget} below structural minimum {min_edges(n)}"
        )
    adj = np.zeros((n, n), dtype=bool)
    order = rng.permutation(n)
    seed, rest = order[:4], order[4:]
    for i, j in combinations(seed.tolist(), 2):
        adj[i, j] = adj[j, i] = True
    placed = list(seed)
    for node in rest.tolist():
        for k in rng.choice(len(placed), size=3, replace=False):
            adj[node, placed[k]] = adj[placed[k], node] = True
        placed.append(node)
    free = [(i, j) for i in range(n) for j in range(i + 1, n) if not adj[i, j]]
    extra = budget - 6 - 3 * (n - 4)
    if extra:
        for k in rng.choice(len(free), size=extra, replace=False):
            i, j = free[k]
            adj[i, j] = adj[j, i] = True
    return AdjacencyMask(adj)


def mask_edm(full: Edm, mask: AdjacencyMask) -> Edm:
    """Attach an observation mask; entries are kept intact, not zeroed."""
    if full.count != mask.count:
        raise ValueError("mask size does not match matrix size")
    return Edm(full.entries.copy(), observed=mask)


# ---------------------------------------------------------------------------
# CSV serialization: header row "n0,n1,...", one matrix/layout row per line.
# ---------------------------------------------------------------------------


def _write_rows(path: str | Path, rows: np.ndarray) -> None:
    rows = np.asarray(rows)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"n{i}" for i in range(rows.shape[1])])
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def _read_rows(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not header[0].startswith("n"):
            raise ValueError(f"{path}: missing 'n0,n1,...' header row")
        data = [[float(v) for v in row] for row in reader if row]
    if not data:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(data, dtype=float)
    if arr.shape[1] != len(header):
        raise ValueError(f"{path}: row width does not match header")
    return arr


def write_layout_csv(path: str | Path, layout: NodeLayout) -> None:
    _write_rows(path, layout.coords)


def read_layout_csv(path: str | Path) -> NodeLayout:
    return NodeLayout(_read_rows(path))


def write_edm_csv(path: str | Path, edm: Edm) -> None:
    _write_rows(path, edm.entries)


def read_edm_csv(path: str | Path, mask: AdjacencyMask | None = None) -> Edm:
    return Edm(_read_rows(path), observed=mask)


def write_mask_csv(path: str | Path, mask: AdjacencyMask) -> None:
    _write_rows(path, mask.mask.astype(float))


def read_mask_csv(path: str | Path) -> AdjacencyMask:
    return AdjacencyMask(_read_rows(path) != 0.0)
