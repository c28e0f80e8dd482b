"""Unweighted undirected graphs: construction, random models, perturbation.

Adjacency matrices are stored densely as float 0/1 arrays so they can be
used directly in matrix products. Integer matrix powers are cached on the
instance.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Invalid graph parameters or malformed adjacency data."""


class AdjacencyMatrix:
    """Symmetric 0/1 adjacency matrix with zero diagonal.

    Parameters
    ----------
    data : array_like, shape (n, n)
        Entries must be 0 or 1, symmetric, with zero diagonal.
    """

    def __init__(self, data):
        a = np.array(data, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError(f"adjacency must be square, got shape {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise GraphError("adjacency entries must be 0 or 1")
        if not np.array_equal(a, a.T):
            raise GraphError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise GraphError("adjacency must have zero diagonal")
        a.setflags(write=False)
        self._data = a
        self._powers: dict[int, np.ndarray] = {}
        self._float_powers: dict[int, np.ndarray] = {}

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n(self) -> int:
        return self._data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return np.array_equal(self._data, other._data)

    def __hash__(self):
        return hash(self._data.tobytes())

    def __repr__(self):
        return f"AdjacencyMatrix(n={self.n}, edges={self.edge_count()})"

    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self._data, 1)))

    def edges(self) -> np.ndarray:
        """Edge list as an (E, 2) int array of 0-based pairs with i < j."""
        i, j = np.nonzero(np.triu(self._data, 1))
        return np.column_stack([i, j]).astype(np.int64)

    def degrees(self) -> np.ndarray:
        return self._data.sum(axis=1)

    def power(self, k: int) -> np.ndarray:
        """Exact integer k-th matrix power, cached (read-only)."""
        return power(self, k)

    def power_float(self, k: int) -> np.ndarray:
        """k-th power as float64 for use in products (cached)."""
        if k not in self._float_powers:
            p = self.power(k).astype(float)
            p.setflags(write=False)
            self._float_powers[k] = p
        return self._float_powers[k]

    @classmethod
    def from_edges(cls, n: int, edges) -> AdjacencyMatrix:
        a = np.zeros((n, n))
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n or np.any(e[:, 0] == e[:, 1])):
            raise GraphError("edge indices out of range or self-loop")
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
        return cls(a)


def _check_prob(name, p):
    if not (0.0 <= p <= 1.0) or not np.isfinite(p):
        raise GraphError(f"{name} must lie in [0, 1], got {p}")


def _check_n(n):
    if int(n) != n or n < 1:
        raise GraphError(f"node count must be a positive integer, got {n}")


def _from_upper_mask(mask: np.ndarray) -> AdjacencyMatrix:
    upper = np.triu(mask, 1).astype(float)
    return AdjacencyMatrix(upper + upper.T)


def erdos_renyi(n: int, eps: float, rng: np.random.Generator) -> AdjacencyMatrix:
    """Erdos-Renyi G(n, eps) graph; each unordered pair is an edge w.p. eps."""
    _check_n(n)
    _check_prob("eps", eps)
    return _from_upper_mask(rng.random((n, n)) < eps)


def sbm_two_block(n: int, p_in: float, p_out: float,
                  rng: np.random.Generator) -> AdjacencyMatrix:
    """Two-community stochastic block model with equal halves.

    Nodes ``0..n/2-1`` form the first block and the rest the second.
    """
    _check_n(n)
    if n % 2:
        raise GraphError(f"two-block model needs an even node count, got {n}")
    _check_prob("p_in", p_in)
    _check_prob("p_out", p_out)
    block = np.arange(n) >= n // 2
    same = block[:, None] == block[None, :]
    prob = np.where(same, p_in, p_out)
    return _from_upper_mask(rng.random((n, n)) < prob)


def geometric_graph(n: int, radius: float,
                    rng: np.random.Generator) -> AdjacencyMatrix:
    """Random geometric graph on the unit square.

    Points are uniform on [0, 1]^2 and two nodes are joined when their
    Euclidean distance is strictly smaller than `radius`.
    """
    _check_n(n)
    if not radius > 0:
        raise GraphError(f"radius must be positive, got {radius}")
    pts = rng.random((n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    return _from_upper_mask(dist < radius)


def graph_error(w: AdjacencyMatrix, eps1: float, eps2: float,
                rng: np.random.Generator) -> AdjacencyMatrix:
    """Perturb a graph by random edge removal and insertion.

    Each existing edge is removed with probability `eps1` and each absent
    edge is added with probability `eps2`, independently over unordered
    pairs. Self-loops are never created.
    """
    _check_prob("eps1", eps1)
    _check_prob("eps2", eps2)
    a = w.data
    n = w.n
    remove = rng.random((n, n)) < eps1
    add = rng.random((n, n)) < eps2
    new = np.where(a == 1, ~remove, add)
    return _from_upper_mask(new)


def power(w: AdjacencyMatrix, k: int) -> np.ndarray:
    """Exact k-th power of `w` in integer arithmetic, k >= 1."""
    if int(k) != k or k < 1:
        raise GraphError(f"power must be a positive integer, got {k}")
    cache = w._powers
    if k not in cache:
        if k == 1:
            p = w.data.astype(np.int64)
        else:
            p = power(w, k - 1) @ w.data.astype(np.int64)
        p.setflags(write=False)
        cache[k] = p
    return cache[k]


def save_edge_list(w: AdjacencyMatrix, path) -> None:
    """Write ``i j`` lines (0-based, i < j) preceded by a ``# n=<N>`` header."""
    path = Path(path)
    lines = [f"# n={w.n}"] + [f"{i} {j}" for i, j in w.edges()]
    path.write_text("\n".join(lines) + "\n")


def load_edge_list(path, n: int | None = None) -> AdjacencyMatrix:
    """Read an edge-list file written by :func:`save_edge_list`.

    The node count comes from the ``# n=`` header when present; otherwise
    `n` must be given.
    """
    edges = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("n=") and n is None:
                n = int(line[1:].strip()[2:])
            continue
        i, j = (int(t) for t in line.split())
        if i >= j:
            raise GraphError(f"edge list expects i < j, got {i} {j}")
        edges.append((i, j))
    if n is None:
        raise GraphError("node count missing: no '# n=' header and n not given")
    return AdjacencyMatrix.from_edges(n, edges)
