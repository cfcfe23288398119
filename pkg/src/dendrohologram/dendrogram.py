"""Epistemic dendrogram: distances, agglomerative clustering, branch codes."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, DomainError, IngestionError, StateError
from .padic import BranchCode

LINKAGES = ("single", "complete", "average", "ward")
METRICS = ("euclidean", "manhattan")

_CDIST_NAME = {"euclidean": "euclidean", "manhattan": "cityblock"}


@dataclass(frozen=True)
class EventPoint:
    id: int
    coords: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        if self.id < 0:
            raise IngestionError(f"event id must be non-negative, got {self.id}")
        if not all(np.isfinite(self.coords)):
            raise IngestionError(f"event {self.id} has a non-finite coordinate")


def events_from_array(coords: np.ndarray) -> list[EventPoint]:
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.ndim != 2:
        raise IngestionError("coordinates must be a 2-D array (events x dims)")
    return [EventPoint(i, tuple(row)) for i, row in enumerate(coords)]


def validate_events(events: Sequence[EventPoint]) -> np.ndarray:
    """Return the (N, dim) coordinate array after checking ids and dimensions."""
    if len(events) < 2:
        raise IngestionError(f"need at least 2 events, got {len(events)}")
    ids = sorted(e.id for e in events)
    if ids != list(range(len(events))):
        raise IngestionError("event ids must be distinct and dense 0..N-1")
    dims = {len(e.coords) for e in events}
    if len(dims) != 1:
        raise IngestionError(f"mixed coordinate dimensions: {sorted(dims)}")
    if dims == {0}:
        raise IngestionError("events have no coordinates")
    ordered = sorted(events, key=lambda e: e.id)
    return np.array([e.coords for e in ordered], dtype=float)


def pairwise_distances(events: Sequence[EventPoint], metric: str = "euclidean") -> np.ndarray:
    """Symmetric N x N distance matrix, rows ordered by event id."""
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; choose from {METRICS}")
    X = validate_events(events)
    dm = cdist(X, X, _CDIST_NAME[metric])
    # enforce exact symmetry and a zero diagonal
    dm = np.minimum(dm, dm.T)
    np.fill_diagonal(dm, 0.0)
    return dm


def check_distance_matrix(dm: np.ndarray) -> np.ndarray:
    dm = np.asarray(dm, dtype=float)
    if dm.ndim != 2 or dm.shape[0] != dm.shape[1]:
        raise DomainError("distance matrix must be square")
    if dm.shape[0] < 2:
        raise DomainError("distance matrix needs n >= 2")
    if not np.all(np.isfinite(dm)) or np.any(dm < 0):
        raise DomainError("distance matrix entries must be finite and non-negative")
    if not np.array_equal(dm, dm.T) or np.any(np.diag(dm) != 0):
        raise DomainError("distance matrix must be symmetric with zero diagonal")
    return dm


@dataclass(frozen=True)
class Merge:
    """Internal node. ``left`` is the child holding the smaller event id."""

    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Full binary merge tree.

    Nodes are numbered like scipy's linkage: leaves ``0..N-1`` and merge ``k``
    is node ``N + k``. ``codes[i]`` is the branch code of event ``i``.
    """

    n_leaves: int
    merges: tuple[Merge, ...]
    codes: tuple[BranchCode, ...] | None = None

    @property
    def root(self) -> int:
        return 2 * self.n_leaves - 2

    def children(self, node: int) -> tuple[int, int] | None:
        if node < self.n_leaves:
            return None
        m = self.merges[node - self.n_leaves]
        return m.left, m.right

    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def linkage_matrix(self) -> np.ndarray:
        """scipy-style ``(N-1, 4)`` linkage matrix."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float)

    def leaf_depths(self) -> list[int]:
        depth = [0] * (2 * self.n_leaves - 1)
        for node in range(self.root, self.n_leaves - 1, -1):
            m = self.merges[node - self.n_leaves]
            depth[m.left] = depth[m.right] = depth[node] + 1
        return depth[: self.n_leaves]

    def lca_depth(self, a: int, b: int) -> int:
        """Depth (edges from the root) of the lowest common ancestor of two leaves."""
        parent = {}
        for k, m in enumerate(self.merges):
            parent[m.left] = parent[m.right] = self.n_leaves + k

        def path(x):
            out = [x]
            while x in parent:
                x = parent[x]
                out.append(x)
            return out

        pa, pb = path(a), set(path(b))
        lca = next(x for x in pa if x in pb)
        return len(path(lca)) - 1

    def require_codes(self) -> tuple[BranchCode, ...]:
        if self.codes is None:
            raise StateError("dendrogram has no branch codes; call assign_codes first")
        return self.codes


def _lance_williams(linkage, d_ak, d_bk, d_ab, na, nb, nk):
    if linkage == "single":
        return np.minimum(d_ak, d_bk)
    if linkage == "complete":
        return np.maximum(d_ak, d_bk)
    if linkage == "average":
        return (na * d_ak + nb * d_bk) / (na + nb)
    # ward, on distances (not squared)
    t = na + nb + nk
    sq = ((na + nk) * d_ak**2 + (nb + nk) * d_bk**2 - nk * d_ab**2) / t
    return np.sqrt(np.maximum(sq, 0.0))


def agglomerate(dm: np.ndarray, linkage: str = "average") -> Dendrogram:
    """Agglomerative clustering with a deterministic tie rule.

    Clusters are identified by their smallest event id. Among pairs at the
    minimal linkage distance the lexicographically smallest
    ``(min id, max id)`` pair is merged first.
    """
    if linkage not in LINKAGES:
        raise ConfigError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    dm = check_distance_matrix(dm)
    n = dm.shape[0]
    D = dm.astype(float, copy=True)
    np.fill_diagonal(D, np.inf)
    node = np.arange(n)  # slot (= cluster id) -> current node index
    size = np.ones(n)
    merges = []
    for k in range(n - 1):
        # row-major argmin over a symmetric matrix yields the smallest (i, j), i < j
        flat = int(np.argmin(D))
        a, b = divmod(flat, n)
        d_ab = float(D[a, b])
        new = _lance_williams(linkage, D[a], D[b], d_ab, size[a], size[b], size)
        merges.append(Merge(int(node[a]), int(node[b]), d_ab, int(size[a] + size[b])))
        D[a, :] = new
        D[:, a] = new
        D[b, :] = np.inf
        D[:, b] = np.inf
        D[a, a] = np.inf
        size[a] += size[b]
        node[a] = n + k
    return Dendrogram(n, tuple(merges))


def assign_codes(d: Dendrogram, base: int = 2) -> Dendrogram:
    """Label leaves with root-to-leaf digit paths, zero-padded to the maximum depth.

    At each merge the child holding the smaller event id gets digit 0.
    """
    n = d.n_leaves
    paths: list[tuple[int, ...]] = [()] * (2 * n - 1)
    for node in range(d.root, n - 1, -1):
        m = d.merges[node - n]
        paths[m.left] = paths[node] + (0,)
        paths[m.right] = paths[node] + (1,)
    depth = max(len(paths[i]) for i in range(n))
    codes = tuple(BranchCode(paths[i] + (0,) * (depth - len(paths[i])), base) for i in range(n))
    return replace(d, codes=codes)


def build_dendrogram(
    events: Sequence[EventPoint], metric: str = "euclidean", linkage: str = "average"
) -> Dendrogram:
    return assign_codes(agglomerate(pairwise_distances(events, metric), linkage))
