"""1D partitions of (0, 1): construction, Doerfler marking and bisection."""
from __future__ import annotations

import numpy as np

__all__ = ["Mesh", "MeshError", "MarkedSet", "uniform_mesh", "doerfler_mark", "refine",
           "MAX_NEIGHBOR_RATIO"]

MAX_NEIGHBOR_RATIO = 2.0
_RATIO_SLACK = 1e-12


class MeshError(ValueError):
    pass


class Mesh:
    """Ordered partition 0 = x_0 < x_1 < ... < x_N = 1.

    ``generation`` counts how often each element was bisected, starting from
    whatever mesh the history began with. Instances are read-only.
    """

    __slots__ = ("_nodes", "_generation")

    def __init__(self, nodes, generation=None):
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise MeshError("a mesh needs at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise MeshError("nodes must start at 0 and end at 1")
        h = np.diff(nodes)
        if np.any(h <= 0.0):
            raise MeshError("nodes must be strictly increasing")
        ratio = _neighbor_ratios(h)
        if ratio.size and ratio.max() > MAX_NEIGHBOR_RATIO * (1 + _RATIO_SLACK):
            i = int(np.argmax(ratio))
            raise MeshError(
                f"elements {i} and {i + 1} violate the neighbor ratio bound "
                f"({ratio[i]:.4g} > {MAX_NEIGHBOR_RATIO})")
        if generation is None:
            generation = np.zeros(h.size, dtype=int)
        else:
            generation = np.array(generation, dtype=int)
            if generation.shape != h.shape:
                raise MeshError("one generation entry per element required")
        nodes.flags.writeable = False
        generation.flags.writeable = False
        self._nodes = nodes
        self._generation = generation

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def generation(self) -> np.ndarray:
        return self._generation

    @property
    def n_elements(self) -> int:
        return self._nodes.size - 1

    def __len__(self):
        return self.n_elements

    @property
    def h(self) -> np.ndarray:
        return np.diff(self._nodes)

    @property
    def left(self) -> np.ndarray:
        return self._nodes[:-1]

    @property
    def right(self) -> np.ndarray:
        return self._nodes[1:]

    def element(self, i: int) -> tuple[float, float]:
        return float(self._nodes[i]), float(self._nodes[i + 1])

    def locate(self, x) -> np.ndarray:
        """Index of the element containing each point (right end belongs to the last element)."""
        idx = np.searchsorted(self._nodes, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)

    def max_neighbor_ratio(self) -> float:
        r = _neighbor_ratios(self.h)
        return float(r.max()) if r.size else 1.0

    def reflected(self) -> "Mesh":
        """Image of the mesh under x -> 1 - x."""
        nodes = 1.0 - self._nodes[::-1]
        nodes[0], nodes[-1] = 0.0, 1.0
        return Mesh(nodes, self._generation[::-1])

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (np.array_equal(self._nodes, other._nodes)
                and np.array_equal(self._generation, other._generation))

    def __hash__(self):
        return hash((self._nodes.tobytes(), self._generation.tobytes()))

    def __repr__(self):
        return f"Mesh(N={self.n_elements}, hmin={self.h.min():.3g}, hmax={self.h.max():.3g})"


def _neighbor_ratios(h):
    if h.size < 2:
        return np.empty(0)
    return np.maximum(h[1:] / h[:-1], h[:-1] / h[1:])


def uniform_mesh(n_elements: int) -> Mesh:
    n_elements = int(n_elements)
    if n_elements < 1:
        raise MeshError("n_elements must be positive")
    nodes = np.arange(n_elements + 1) / n_elements
    return Mesh(nodes)


class MarkedSet(frozenset):
    """Element indices chosen for refinement.

    ``converged`` is set when the indicators carried no error at all.
    """

    converged = False

    def __new__(cls, indices=(), converged=False):
        obj = super().__new__(cls, (int(i) for i in indices))
        obj.converged = converged
        return obj


def doerfler_mark(squared_indicators, theta: float) -> MarkedSet:
    """Minimal set M with ``theta * sum(eta^2) <= sum_{T in M} eta_T^2``.

    Greedy selection of the largest indicators gives a set of minimal
    cardinality. Ties are broken by the lower element index.
    """
    eta2 = np.asarray(squared_indicators, dtype=float)
    if eta2.ndim != 1:
        raise ValueError("indicators must be a 1D array")
    if not np.all(np.isfinite(eta2)) or np.any(eta2 < 0):
        raise ValueError("indicators must be finite and nonnegative")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    total = eta2.sum()
    if total == 0.0:
        return MarkedSet((), converged=True)
    if theta == 1.0:
        return MarkedSet(np.flatnonzero(eta2 > 0))
    order = np.lexsort((np.arange(eta2.size), -eta2))
    partial = np.cumsum(eta2[order])
    goal = theta * total
    count = int(np.searchsorted(partial, goal, side="left")) + 1
    # cumsum roundoff can leave the last partial sum a hair below the goal
    count = min(count, eta2.size)
    return MarkedSet(order[:count])


def refine(mesh: Mesh, marked) -> Mesh:
    """Bisect the marked elements, then restore the neighbor ratio bound.

    Closure: while some element is more than twice as long as a neighbor,
    bisect it. The result is the smallest refinement containing all marked
    bisections that satisfies the ratio bound.
    """
    marked = np.asarray(sorted(marked), dtype=int)
    n = mesh.n_elements
    if marked.size and (marked.min() < 0 or marked.max() >= n):
        raise MeshError("marked element index out of range")
    nodes = mesh.nodes
    gen = mesh.generation
    split = np.zeros(n, dtype=bool)
    split[marked] = True
    nodes, gen = _bisect(nodes, gen, split)
    while True:
        h = np.diff(nodes)
        too_big = np.zeros(h.size, dtype=bool)
        lim = MAX_NEIGHBOR_RATIO * (1 + _RATIO_SLACK)
        too_big[:-1] |= h[:-1] > lim * h[1:]
        too_big[1:] |= h[1:] > lim * h[:-1]
        if not too_big.any():
            break
        nodes, gen = _bisect(nodes, gen, too_big)
    return Mesh(nodes, gen)


def _bisect(nodes, gen, split):
    mids = 0.5 * (nodes[:-1] + nodes[1:])[split]
    new_nodes = np.insert(nodes, np.flatnonzero(split) + 1, mids)
    new_gen = np.repeat(gen + split, np.where(split, 2, 1))
    return new_nodes, new_gen
