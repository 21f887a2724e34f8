"""Distance-matrix completion by differential evolution.

The unknowns are the missing squared distances.  Each candidate completion
is embedded with classical MDS and scored by how well the induced distance
matrix reproduces the observed entries:

    F(p) = 1/2 * || W o (D_obs - edm(mds(complete(D_obs, p)))) ||_F^2

DE/rand/1/bin evolves a population of candidates; the best-ranked parents
breed several offspring each, survivors are chosen by rank from parents and
offspring together, and the rest of the population is replaced by fresh
random immigrants each generation to keep exploring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .geometry import AdjacencyMask, CompletabilityError, Edm, NodeLayout, \
    edm_from_points, is_completable
from .mds import classical_mds

# Offspring bred per surviving parent each generation.  A wide brood with
# rank survival keeps the best cost falling almost every generation, which
# the windowed stall test below relies on.
OFFSPRING_PER_PARENT = 3


@dataclass
class SolverConfig:
    population_size: int = 200
    max_generations: int = 100
    convergence_delta: float = 1e-6  # mean best-cost drop per generation
    convergence_window: int = 5
    parent_fraction: float = 0.5  # survivors; the rest immigrate randomly
    differential_weight: float = 0.8
    crossover_rate: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 4:
            raise ValueError("population must have at least 4 individuals")
        if self.max_generations < 1:
            raise ValueError("need at least one generation")
        if self.convergence_delta < 0:
            raise ValueError("convergence threshold cannot be negative")
        if self.convergence_window < 1:
            raise ValueError("convergence window must be at least 1")
        if not 0.0 < self.parent_fraction <= 1.0:
            raise ValueError("parent fraction must lie in (0, 1]")
        if not 0.0 < self.differential_weight <= 2.0:
            raise ValueError("differential weight must lie in (0, 2]")
        if not 0.0 < self.crossover_rate <= 1.0:
            raise ValueError("crossover rate must lie in (0, 1]")


@dataclass
class SolverRun:
    best_cost_history: np.ndarray  # best-so-far after each generation
    best_vector_history: np.ndarray  # (generations, n_missing)
    best_vector: np.ndarray
    generations_used: int
    converged: bool
    recovered_layout: NodeLayout


def _completed_stack(
    vectors: np.ndarray,
    entries: np.ndarray,
    pair_idx: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    rows, cols = pair_idx
    stack = np.broadcast_to(entries, (vectors.shape[0],) + entries.shape).copy()
    stack[:, rows, cols] = vectors
    stack[:, cols, rows] = vectors
    return stack


def _batched_coords(stack: np.ndarray, m: int) -> np.ndarray:
    """Classical MDS over a stack of complete matrices; coords as (P, N, m)."""
    n = stack.shape[-1]
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * (centering @ stack @ centering.T)
    gram = 0.5 * (gram + gram.transpose(0, 2, 1))
    values, vectors = np.linalg.eigh(gram)
    order = np.argsort(-np.abs(values), axis=-1, kind="stable")[:, :m]
    leading = np.clip(np.take_along_axis(values, order, axis=1), 0.0, None)
    chosen = np.take_along_axis(vectors, order[:, None, :], axis=2)
    return np.sqrt(leading)[:, None, :] * chosen


def _batched_costs(
    vectors: np.ndarray,
    entries: np.ndarray,
    weights: np.ndarray,
    pair_idx: tuple[np.ndarray, np.ndarray],
    m: int,
) -> np.ndarray:
    stack = _completed_stack(vectors, entries, pair_idx)
    coords = _batched_coords(stack, m)
    sq_norms = np.sum(coords**2, axis=2)
    recon = (
        sq_norms[:, :, None]
        + sq_norms[:, None, :]
        - 2.0 * coords @ coords.transpose(0, 2, 1)
    )
    residual = (entries - recon) * weights
    return 0.5 * np.sum(residual**2, axis=(1, 2))


def evaluate_cost(
    vector: np.ndarray, observed: Edm, mask: AdjacencyMask, m: int
) -> float:
    """Score one candidate completion against the observed entries."""
    pairs = mask.missing_pairs()
    vector = np.asarray(vector, dtype=float).reshape(-1)
    if vector.size != len(pairs):
        raise ValueError(
            f"candidate has {vector.size} entries, mask misses {len(pairs)}"
        )
    entries = observed.entries.copy()
    for (i, j), value in zip(pairs, vector):
        entries[i, j] = entries[j, i] = value
    layout = classical_mds(Edm(entries), m)
    recon = edm_from_points(layout).entries
    residual = (observed.entries - recon) * mask.mask
    return 0.5 * float(np.sum(residual**2))


def _geodesic_upper_bounds(
    observed: Edm, mask: AdjacencyMask, pair_idx
) -> np.ndarray:
    """Squared shortest-path distances through observed links.

    The triangle inequality caps every missing distance by the geodesic
    through measured edges, so these are valid (and fairly tight) boxes.
    """
    weights = np.where(mask.mask, np.sqrt(np.abs(observed.entries)), 0.0)
    # shortest_path treats 0 as "no edge"; an observed zero-length link
    # still connects its endpoints, so nudge it onto a tiny positive weight.
    weights[mask.mask & (weights == 0.0)] = 1e-12
    geodesic = shortest_path(weights, method="D", directed=False)
    rows, cols = pair_idx
    bounds = geodesic[rows, cols] ** 2
    if not np.all(np.isfinite(bounds)):
        raise CompletabilityError("observation graph is not connected")
    return bounds


def complete_and_localize(
    observed: Edm,
    mask: AdjacencyMask,
    m: int,
    config: SolverConfig | None = None,
    rng: np.random.Generator | None = None,
) -> SolverRun:
    """Recover node positions from a partially observed distance matrix.

    Args:
        observed: squared-distance matrix, valid at masked-true entries.
        mask: which entries were measured; must be completable.
        m: embedding dimension.
        config: DE settings; defaults match the reference setup.
        rng: random source; defaults to a generator seeded by config.seed.

    Returns:
        SolverRun with per-generation best-so-far history.  The best cost
        never rises: the incumbent individual survives every generation.
    """
    config = config or SolverConfig()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if observed.count != mask.count:
        raise ValueError("mask size must match matrix size")
    if not is_completable(mask, m):
        raise CompletabilityError(
            "observation mask cannot anchor every node in the array"
        )
    pairs = mask.missing_pairs()
    entries = observed.entries
    weights = mask.mask.astype(float)

    if not pairs:
        layout = classical_mds(Edm(entries.copy()), m)
        recon = edm_from_points(layout).entries
        cost = 0.5 * float(np.sum(((entries - recon) * weights) ** 2))
        return SolverRun(
            best_cost_history=np.array([cost]),
            best_vector_history=np.zeros((1, 0)),
            best_vector=np.zeros(0),
            generations_used=1,
            converged=True,
            recovered_layout=layout,
        )

    pair_idx = (
        np.array([i for i, _ in pairs]),
        np.array([j for _, j in pairs]),
    )
    lower = np.zeros(len(pairs))
    upper = np.maximum(_geodesic_upper_bounds(observed, mask, pair_idx), 1e-12)

    pop_size = config.population_size
    n_parents = min(pop_size, max(4, round(config.parent_fraction * pop_size)))
    n_vars = len(pairs)
    population = lower + (upper - lower) * rng.random((pop_size, n_vars))
    costs = _batched_costs(population, entries, weights, pair_idx, m)

    best_idx = int(np.argmin(costs))
    best_cost = float(costs[best_idx])
    best_vector = population[best_idx].copy()
    cost_history = [best_cost]
    vector_history = [best_vector.copy()]
    converged = False

    n_kids = OFFSPRING_PER_PARENT * n_parents
    targets = np.tile(np.arange(n_parents), OFFSPRING_PER_PARENT)
    while len(cost_history) < config.max_generations and not converged:
        order = np.argsort(costs, kind="stable")
        parents = population[order[:n_parents]]
        parent_costs = costs[order[:n_parents]]
        # DE/rand/1/bin among the parents, several offspring per parent.
        # Donor triples exclude the target but are otherwise uniform.
        keys = rng.random((n_kids, n_parents))
        keys[np.arange(n_kids), targets] = 2.0
        donor_idx = np.argsort(keys, axis=1, kind="stable")[:, :3]
        a, b, c = (parents[donor_idx[:, k]] for k in range(3))
        donors = a + config.differential_weight * (b - c)
        cross = rng.random((n_kids, n_vars)) < config.crossover_rate
        forced = rng.integers(0, n_vars, size=n_kids)
        cross[np.arange(n_kids), forced] = True
        target_vecs = parents[targets]
        children = np.where(cross, donors, target_vecs)
        # Out-of-bounds coordinates restart halfway between the target and
        # the violated bound.  Hard clipping would pile many individuals
        # onto identical boundary values and bleed diversity.
        children = np.where(children < lower, 0.5 * (target_vecs + lower), children)
        children = np.where(children > upper, 0.5 * (target_vecs + upper), children)
        child_costs = _batched_costs(children, entries, weights, pair_idx, m)
        # Rank selection over parents and children together.  The incumbent
        # best is a parent, so it survives unless a child beats it.
        pool = np.vstack([parents, children])
        pool_costs = np.concatenate([parent_costs, child_costs])
        keep = np.argsort(pool_costs, kind="stable")[:n_parents]
        survivors = pool[keep]
        survivor_costs = pool_costs[keep]
        # The culled share of the population immigrates uniformly at random.
        immigrants = lower + (upper - lower) * rng.random(
            (pop_size - n_parents, n_vars)
        )
        if immigrants.shape[0]:
            immigrant_costs = _batched_costs(
                immigrants, entries, weights, pair_idx, m
            )
        else:
            immigrant_costs = np.zeros(0)
        population = np.vstack([survivors, immigrants])
        costs = np.concatenate([survivor_costs, immigrant_costs])
        if survivor_costs[0] < best_cost:
            best_cost = float(survivor_costs[0])
            best_vector = survivors[0].copy()
        cost_history.append(best_cost)
        vector_history.append(best_vector.copy())
        g = len(cost_history) - 1
        w = config.convergence_window
        if g >= w:
            # Fractional improvement per generation, averaged over the
            # window.  An absolute test would halt mid-descent at whatever
            # scale matches the threshold; stalling is scale-free.
            ref = cost_history[g - w]
            mean_drop = (ref - cost_history[g]) / w
            if mean_drop <= config.convergence_delta * max(ref, 1e-300):
                converged = True

    completed = entries.copy()
    completed[pair_idx[0], pair_idx[1]] = best_vector
    completed[pair_idx[1], pair_idx[0]] = best_vector
    layout = classical_mds(Edm(completed), m)
    return SolverRun(
        best_cost_history=np.array(cost_history),
        best_vector_history=np.array(vector_history),
        best_vector=best_vector,
        generations_used=len(cost_history),
        converged=converged,
        recovered_layout=layout,
    )
