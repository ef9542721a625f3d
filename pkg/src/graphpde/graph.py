"""Sparse directed graph construction.

Two constructions are supported:

* ``build_rdgg``: random directed geometric graph on the torus, edges found by
  a uniform periodic cell grid whose cell width is at least the interaction
  radius, so only the 3^d neighboring cells of a point need to be searched.
  Self-loops are included: degrees sum the weight over every node, matching
  the convention that the degree is a sum over the whole sample.
* ``build_knn_graph``: directed k-nearest-neighbor graph over arbitrary
  vectors with Gaussian-of-ratio weights exp(-4 |x_i-x_j|^2 / d_k(x_i)^2).

Adjacency is stored as CSR out-edges (row = source); the transpose is
materialized once because the PageRank operator consumes in-edges while
degrees consume out-edges.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import sparse

from graphpde.errors import ConfigurationError, DegenerateGraphError
from graphpde.geometry import torus_displacement
from graphpde.kernels import check_interaction_radius

_KNN_TIE_PAD = 8  # extra candidates kept so boundary ties sort by (dist, index)


class DirectedGeometricGraph:
    """Immutable sparse directed weighted graph.

    Attributes:
        points: (n, d) array of node positions (None for loaded edge lists).
        W: CSR out-adjacency, W[i, j] = weight of edge i -> j.
        Wt: CSR transpose of W (in-adjacency), materialized at build time.
        degrees: out-degree vector d_i = sum_j W[i, j], all positive.
        degree_scale: n h^d for geometric graphs, mean degree for k-NN graphs;
            the factor that turns PageRank values into normalized ones.
        params: construction metadata (kind, n, h, eps, kernel, k, ...).
    """

    def __init__(self, points, W, degree_scale, params):
        self.points = points
        self.W = W.tocsr()
        if self.W.nnz and self.W.data.min() < 0.0:
            raise ValueError("negative edge weight")
        self._Wt = None
        self.degrees = np.asarray(self.W.sum(axis=1)).ravel()
        self.degree_scale = float(degree_scale)
        self.params = dict(params)
        zero = np.flatnonzero(self.degrees <= 0.0)
        if zero.size:
            raise DegenerateGraphError(
                f"node {zero[0]} has zero degree (of {zero.size} such nodes)")

    @property
    def Wt(self):
        """In-adjacency (transpose of W), materialized on first use."""
        if self._Wt is None:
            self._Wt = self.W.T.tocsr()
        return self._Wt

    @property
    def n(self):
        return self.W.shape[0]

    def in_degrees(self):
        return np.asarray(self.W.sum(axis=0)).ravel()

    def save(self, path, sidecar=None):
        """Write the edge list as ``src,dst,weight`` CSV plus a sidecar."""
        from graphpde.dataio import write_sidecar

        coo = self.W.tocoo()
        with open(path, "w") as fh:
            fh.write("src,dst,weight\n")
            for i, j, w in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i},{j},{float(w)!r}\n")
        meta = dict(self.params)
        meta["degree_scale"] = self.degree_scale
        if sidecar is None:
            sidecar = str(path) + ".meta"
        write_sidecar(sidecar, meta)

    @classmethod
    def load(cls, path, sidecar=None):
        from graphpde.dataio import read_sidecar

        rows, cols, vals = [], [], []
        with open(path) as fh:
            header = fh.readline()
            if header.strip() != "src,dst,weight":
                raise ValueError(f"unexpected edge-list header: {header.strip()!r}")
            for line in fh:
                if not line.strip():
                    continue
                a, b, w = line.split(",")
                rows.append(int(a))
                cols.append(int(b))
                vals.append(float(w))
        n = max(max(rows), max(cols)) + 1 if rows else 0
        W = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
        if sidecar is None:
            sidecar = str(path) + ".meta"
        try:
            meta = read_sidecar(sidecar)
        except OSError:
            meta = {}
        scale = float(meta.get("degree_scale", 0.0))
        if scale <= 0.0:
            scale = float(np.asarray(W.sum(axis=1)).mean())
        meta.setdefault("kind", "loaded")
        return cls(None, W, scale, meta)


def degrees(graph):
    """Cached out-degree vector d(x) = sum_y omega(x, y)."""
    return graph.degrees


def _weight_block(points_src, points_dst, kernel, drift, h, eps, b_src, B_src):
    """Weights from every source to every destination: (ns, nd) array.

    Displacements are minimal-image without the half-open boundary fold; the
    fold never changes a norm, and build throughput matters here.
    """
    disp = points_dst[None, :, :] - points_src[:, None, :]
    disp -= np.rint(disp)
    if eps:
        disp -= b_src[:, None, :] * eps
    if B_src is not None:
        disp = np.einsum("sij,stj->sti", B_src, disp)
    arg = np.einsum("stk,stk->st", disp, disp)
    np.sqrt(arg, out=arg)
    arg *= 1.0 / h
    return kernel.eval_unchecked(arg)


def build_rdgg(points, kernel, drift, h, eps):
    """Directed geometric graph via periodic cell lists.

    Preconditions: 2h*Binv_sup + eps*b_sup < 1/2 so the minimal-image
    convention identifies interacting pairs unambiguously.
    """
    check_interaction_radius(drift, h, eps)
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    radius = kernel.support_radius * h * drift.Binv_sup + eps * drift.b_sup
    m = max(2, int(1.0 / radius))
    m = min(m, int(2 ** (62 / d)), 1 << 20)

    cells = np.minimum((points * m).astype(np.int64), m - 1)
    cell_ids = np.ravel_multi_index(cells.T, (m,) * d)
    order = np.argsort(cell_ids, kind="stable")
    sorted_ids = cell_ids[order]
    uniq, starts = np.unique(sorted_ids, return_index=True)
    ends = np.append(starts[1:], n)
    slice_of = {int(cid): (int(s), int(e)) for cid, s, e in zip(uniq, starts, ends)}

    b_all = drift.eval_b(points) if eps else np.zeros_like(points)
    B_all = drift.eval_B(points) if not drift.is_identity_B() else None

    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=d)))
    rows, cols, vals = [], [], []
    for cid, s0, e0 in zip(uniq, starts, ends):
        src = order[s0:e0].astype(np.int32)
        multi = np.array(np.unravel_index(cid, (m,) * d))
        nbr_ids = np.unique(
            np.ravel_multi_index(((multi + offsets) % m).T, (m,) * d))
        for nid in nbr_ids:
            span = slice_of.get(int(nid))
            if span is None:
                continue
            dst = order[span[0]:span[1]].astype(np.int32)
            w = _weight_block(points[src], points[dst], kernel, drift, h, eps,
                              b_all[src], B_all[src] if B_all is not None else None)
            flat = w.ravel()
            nz = np.flatnonzero(flat)
            if nz.size:
                si, di = np.divmod(nz, w.shape[1])
                rows.append(src[si])
                cols.append(dst[di])
                vals.append(flat[nz])
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    W = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
    params = {"kind": "rdgg", "n": n, "d": d, "h": h, "eps": eps,
              "kernel": kernel.name, "drift": drift.name,
              "identity_B": drift.is_identity_B()}
    return DirectedGeometricGraph(points, W, n * h**d, params)


def build_rdgg_bruteforce(points, kernel, drift, h, eps):
    """All-pairs reference construction; the oracle for the cell-list path."""
    check_interaction_radius(drift, h, eps)
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    b_all = drift.eval_b(points) if eps else np.zeros_like(points)
    B_all = drift.eval_B(points) if not drift.is_identity_B() else None
    w = _weight_block(points, points, kernel, drift, h, eps, b_all, B_all)
    w[w <= 0.0] = 0.0
    W = sparse.coo_matrix(w)
    params = {"kind": "rdgg-bruteforce", "n": n, "d": d, "h": h, "eps": eps,
              "kernel": kernel.name, "drift": drift.name,
              "identity_B": drift.is_identity_B()}
    return DirectedGeometricGraph(points, W, n * h**d, params)


def build_knn_graph(vectors, k):
    """Directed k-NN graph with weights exp(-4 |x_i - x_j|^2 / d_k(x_i)^2).

    Self is excluded both from the neighbor list and from the definition of
    d_k.  Ties are broken by ascending index.  Duplicate points are fatal only
    when they force d_k = 0.
    """
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2:
        raise ValueError("vectors must be a 2-d array")
    n, _ = vectors.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k + 1:
        raise ValueError(f"need at least k+1={k + 1} vectors, got {n}")

    sq = np.einsum("ij,ij->i", vectors, vectors)
    n_cand = min(k + _KNN_TIE_PAD, n - 1)
    block = max(1, min(n, int(2e7) // max(n, 1)))
    nbr_idx = np.empty((n, k), dtype=np.int64)
    nbr_d2 = np.empty((n, k), dtype=float)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * vectors[lo:hi] @ vectors.T
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(lo, hi) - lo, np.arange(lo, hi)] = np.inf
        part = np.argpartition(d2, n_cand - 1, axis=1)[:, :n_cand]
        cand_d2 = np.take_along_axis(d2, part, axis=1)
        sub = np.lexsort((part, cand_d2), axis=1)[:, :k]
        nbr_idx[lo:hi] = np.take_along_axis(part, sub, axis=1)
        nbr_d2[lo:hi] = np.take_along_axis(cand_d2, sub, axis=1)

    dk2 = nbr_d2[:, -1]
    zero = np.flatnonzero(dk2 <= 0.0)
    if zero.size:
        raise DegenerateGraphError(
            f"node {zero[0]} has zero distance to its k-th neighbor "
            "(duplicate points)")
    weights = np.exp(-4.0 * nbr_d2 / dk2[:, None])
    rows = np.repeat(np.arange(n), k)
    W = sparse.coo_matrix((weights.ravel(), (rows, nbr_idx.ravel())), shape=(n, n))
    graph = DirectedGeometricGraph(
        vectors, W, 1.0, {"kind": "knn", "n": n, "d": vectors.shape[1], "k": k})
    graph.degree_scale = float(graph.degrees.mean())
    return graph
