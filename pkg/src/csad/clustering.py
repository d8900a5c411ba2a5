"""Flat-kernel mean shift and a dense HDBSCAN, both self-contained.

Mean shift groups component descriptors without choosing a cluster count;
HDBSCAN separates consistent label-map histograms from outliers. Both are
deterministic: ties break on the lowest index everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllNoise, EmptyInput, TooFewPoints

NOISE = -1


@dataclass(frozen=True)
class MeanShiftConfig:
    bandwidth: float
    max_iter: int = 300
    convergence_tol: float | None = None   # defaults to 1e-4 * bandwidth
    mode_merge_radius: float | None = None  # defaults to bandwidth

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @property
    def tol(self) -> float:
        return self.convergence_tol if self.convergence_tol is not None else 1e-4 * self.bandwidth

    @property
    def merge_radius(self) -> float:
        return self.mode_merge_radius if self.mode_merge_radius is not None else self.bandwidth


@dataclass(frozen=True)
class HdbscanConfig:
    min_cluster_size: int = 5
    min_samples: int = 5

    def __post_init__(self):
        if self.min_cluster_size < 2 or self.min_samples < 2:
            raise ValueError("min_cluster_size and min_samples must be >= 2")

    @staticmethod
    def for_n(n: int) -> "HdbscanConfig":
        mcs = max(5, int(np.ceil(0.1 * n)))
        return HdbscanConfig(min_cluster_size=mcs, min_samples=mcs)


@dataclass
class ClusterAssignment:
    labels: np.ndarray                 # int, NOISE for noise points
    modes: np.ndarray | None = None    # (n_clusters, dim) for mean shift
    sizes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if not self.sizes:
            ids, counts = np.unique(self.labels[self.labels != NOISE], return_counts=True)
            self.sizes = {int(i): int(c) for i, c in zip(ids, counts)}

    @property
    def cluster_ids(self) -> list[int]:
        return sorted(self.sizes)


def mean_shift(points, cfg: MeanShiftConfig) -> ClusterAssignment:
    """Seed every point; shift with a flat kernel of radius `bandwidth`."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        raise EmptyInput("mean_shift needs at least one point")
    if not np.isfinite(pts).all():
        raise EmptyInput("mean_shift requires finite points")
    n = len(pts)
    modes = pts.copy()
    bw = cfg.bandwidth
    for i in range(n):
        m = modes[i]
        for _ in range(cfg.max_iter):
            d2 = np.sum((pts - m) ** 2, axis=1)
            within = d2 <= bw * bw
            new = pts[within].mean(axis=0)
            step = float(np.linalg.norm(new - m))
            m = new
            if step < cfg.tol:
                break
        modes[i] = m

    # merge converged modes in seed order so the result ignores input order
    # only through deterministic index-based ties
    kept: list[np.ndarray] = []
    assign = np.empty(n, dtype=int)
    for i in range(n):
        placed = False
        for ci, km in enumerate(kept):
            if np.linalg.norm(modes[i] - km) <= cfg.merge_radius:
                assign[i] = ci
                placed = True
                break
        if not placed:
            kept.append(modes[i])
            assign[i] = len(kept) - 1
    kept_arr = np.array(kept)
    # final labels: nearest surviving mode
    d = np.linalg.norm(pts[:, None, :] - kept_arr[None, :, :], axis=2)
    labels = np.argmin(d, axis=1)
    return ClusterAssignment(labels=labels, modes=kept_arr)


def alpha_filter(assignment: ClusterAssignment, alpha: int) -> ClusterAssignment:
    """Drop clusters smaller than alpha; renumber survivors 1..N by size descending."""
    labels = assignment.labels.copy()
    survivors = [(sz, cid) for cid, sz in assignment.sizes.items() if sz >= alpha]
    survivors.sort(key=lambda t: (-t[0], t[1]))
    remap = {cid: rank + 1 for rank, (_, cid) in enumerate(survivors)}
    out = np.full_like(labels, NOISE)
    for cid, new in remap.items():
        out[labels == cid] = new
    modes = None
    if assignment.modes is not None and remap:
        order = [cid for _, cid in survivors]
        valid = [cid for cid in order if cid < len(assignment.modes)]
        if len(valid) == len(order):
            modes = assignment.modes[order]
    return ClusterAssignment(labels=out, modes=modes)


def largest_cluster_filter(assignment: ClusterAssignment) -> np.ndarray:
    """Indices of the maximum-size cluster's members; ties go to the smallest id."""
    if not assignment.sizes:
        raise AllNoise("no non-noise cluster present")
    best = min(assignment.sizes, key=lambda cid: (-assignment.sizes[cid], cid))
    return np.flatnonzero(assignment.labels == best)


# --- HDBSCAN ----------------------------------------------------------------

def _mst_edges(dist: np.ndarray) -> list[tuple[float, int, int]]:
    """Prim's algorithm on a dense distance matrix."""
    n = len(dist)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.full(n, -1)
    in_tree[0] = True
    best[:] = dist[0]
    best_from[:] = 0
    edges = []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        j = int(np.argmin(cand))
        edges.append((float(best[j]), int(best_from[j]), j))
        in_tree[j] = True
        closer = dist[j] < best
        best[closer] = dist[j][closer]
        best_from[closer] = j
    return edges


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(2 * n - 1))
        self.size = [1] * n + [0] * (n - 1)
        self.next_label = n

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        lab = self.next_label
        self.next_label += 1
        self.parent[a] = lab
        self.parent[b] = lab
        self.size[lab] = self.size[a] + self.size[b]
        return lab


def _single_linkage(edges, n):
    """Merge rows (left, right, distance, size), scipy linkage layout."""
    uf = _UnionFind(n)
    rows = []
    for d, a, b in sorted(edges, key=lambda e: e[0]):
        ra, rb = uf.find(a), uf.find(b)
        rows.append((ra, rb, d, uf.size[ra] + uf.size[rb]))
        uf.union(ra, rb)
    return rows


def hdbscan(points, cfg: HdbscanConfig) -> ClusterAssignment:
    """Density clustering via mutual reachability, MST, and excess-of-mass.

    Core distance of a point is the distance to its min_samples-th nearest
    other point. Clusters smaller than min_cluster_size never materialize;
    points falling out early are noise.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if n < cfg.min_cluster_size:
        raise TooFewPoints(f"need >= {cfg.min_cluster_size} points, got {n}")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    k = min(cfg.min_samples, n - 1)
    core = np.sort(dist, axis=1)[:, k]
    mreach = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mreach, 0.0)
    merges = _single_linkage(_mst_edges(mreach), n)

    # children of each dendrogram node
    children = {}
    node_size = [1] * n
    for i, (l, r, d, s) in enumerate(merges):
        children[n + i] = (l, r, d)
        node_size.append(s)

    def leaves(node):
        stack, out = [node], []
        while stack:
            v = stack.pop()
            if v < n:
                out.append(v)
            else:
                l, r, _ = children[v]
                stack.extend((l, r))
        return out

    tiny = 1e-12
    root = n + len(merges) - 1 if merges else 0

    # condense: clusters are dendrogram regions with >= min_cluster_size leaves
    cluster_birth = {0: 0.0}            # condensed cluster id -> birth lambda
    cluster_children: dict[int, list[int]] = {0: []}
    cluster_points: dict[int, list[tuple[int, float]]] = {0: []}  # (point, lambda out)
    cluster_death = {}
    cluster_split_mass: dict[int, tuple[int, float]] = {}  # members alive at split
    next_cid = 1
    stack = [(root, 0)]                 # (dendrogram node, condensed cluster id)
    while stack:
        node, cid = stack.pop()
        if node < n:
            cluster_points[cid].append((node, np.inf))
            cluster_death.setdefault(cid, np.inf)
            continue
        l, r, d = children[node]
        lam = 1.0 / max(d, tiny)
        ls = node_size[l] if l >= n else 1
        rs = node_size[r] if r >= n else 1
        big_l = ls >= cfg.min_cluster_size
        big_r = rs >= cfg.min_cluster_size
        if big_l and big_r:
            cluster_death[cid] = min(cluster_death.get(cid, np.inf), lam)
            cluster_split_mass[cid] = (ls + rs, lam)
            for child in (l, r):
                new = next_cid
                next_cid += 1
                cluster_birth[new] = lam
                cluster_children[new] = []
                cluster_points[new] = []
                cluster_children[cid].append(new)
                stack.append((child, new))
        elif big_l or big_r:
            big, small = (l, r) if big_l else (r, l)
            for p in leaves(small):
                cluster_points[cid].append((p, lam))
            stack.append((big, cid))
        else:
            for p in leaves(l) + leaves(r):
                cluster_points[cid].append((p, lam))
            cluster_death[cid] = min(cluster_death.get(cid, np.inf), lam)

    # stability: sum over points of (lambda they left at) - birth lambda
    cap = 1.0 / tiny
    stability = {}
    for cid, plist in cluster_points.items():
        death = min(cluster_death.get(cid, np.inf), cap)
        birth = cluster_birth[cid]
        s = 0.0
        for _, lam in plist:
            s += min(lam, death if np.isfinite(death) else cap) - birth
        if cid in cluster_split_mass:
            count, lam = cluster_split_mass[cid]
            s += count * (min(lam, cap) - birth)
        stability[cid] = s

    # excess of mass, bottom-up
    selected: set[int] = set()

    def choose(cid) -> float:
        kids = cluster_children.get(cid, [])
        if not kids:
            if cid == 0:
                # a root with no internal split carries no density structure;
                # keep it only in the degenerate case where every point
                # detaches at the same scale (e.g. all points identical)
                lams = [min(lam, cap) for _, lam in cluster_points[cid]]
                if max(lams) - min(lams) > 1e-9 * max(lams):
                    return 0.0
            selected.add(cid)
            return stability[cid]
        subtotal = sum(choose(k2) for k2 in kids)
        if stability[cid] > subtotal:
            for k2 in kids:
                _deselect(k2)
            selected.add(cid)
            return stability[cid]
        return subtotal

    def _deselect(cid):
        selected.discard(cid)
        for k2 in cluster_children.get(cid, []):
            _deselect(k2)

    choose(0)

    def subtree_points(cid):
        out = [p for p, _ in cluster_points[cid]]
        for k2 in cluster_children.get(cid, []):
            out.extend(subtree_points(k2))
        return out

    labels = np.full(n, NOISE, dtype=int)
    for new_id, cid in enumerate(sorted(selected)):
        for p in subtree_points(cid):
            labels[p] = new_id
    # points that fell out of a selected cluster before it was born stay noise;
    # points inside selected subtrees are members by construction
    return ClusterAssignment(labels=labels)
