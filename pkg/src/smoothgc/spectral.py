"""Spectral clustering of learned representations.

Pipeline: linear-kernel similarity, elementwise-absolute symmetrization,
eigenvectors of the r largest eigenvalues, Lloyd k-means on the spectral
embedding.  The eigensolver route is picked by problem size and every route
is verified against the same residual and orthonormality bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceError

DENSE_EIGH_MAX = 512            # below this, full dense decomposition is cheapest
KERNEL_MATERIALIZE_MAX = 25000  # above this, never hold the n x n kernel
RESIDUAL_RTOL = 1e-8
_V0_SEED = 20240901             # fixed Lanczos start so embeddings are run-seed independent


@dataclass
class ClusterPartition:
    """Cluster ids per node plus the spectral embedding that produced them."""

    assignments: np.ndarray     # (n,) ids in [0, r)
    r: int
    embedding: np.ndarray       # (n, r)
    inertia: float


def linear_kernel(x: np.ndarray) -> np.ndarray:
    """Pairwise inner products X X^T."""
    x = np.asarray(x, dtype=np.float64)
    return x @ x.T


def symmetrize(k: np.ndarray) -> np.ndarray:
    """Elementwise-absolute symmetrization (|K| + |K^T|) / 2; exactly symmetric."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {k.shape}")
    a = np.abs(k)
    return 0.5 * (a + a.T)


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _verify_eigenpairs(matvec, fro: float, vecs: np.ndarray, vals: np.ndarray) -> str | None:
    """Residual and orthonormality checks; returns a diagnostic or None."""
    resid = matvec(vecs) - vecs * vals
    worst = float(np.max(np.linalg.norm(resid, axis=0))) if vecs.size else 0.0
    bound = RESIDUAL_RTOL * fro
    if worst > bound:
        return f"eigen residual {worst:.3e} exceeds {bound:.3e}"
    gram = vecs.T @ vecs
    ortho = float(np.max(np.abs(gram - np.eye(vecs.shape[1]))))
    if ortho > 1e-8:
        return f"eigenvector orthonormality error {ortho:.3e} exceeds 1e-08"
    return None


def top_eigenvectors(w: np.ndarray, r: int,
                     dense_max: int = DENSE_EIGH_MAX) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of the r largest eigenvalues of a symmetric matrix.

    Small problems use a dense decomposition; larger ones a Lanczos solver
    with a fixed deterministic start vector.  The returned pairs always pass
    the residual bound ||W v - lambda v|| <= 1e-8 ||W||_F and are orthonormal;
    a failed Lanczos run falls back to the dense route before giving up.
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    if w.ndim != 2 or w.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    if not 1 <= r <= n:
        raise ValueError(f"r must be in [1, {n}], got {r}")
    fro = float(np.linalg.norm(w))

    def dense() -> tuple[np.ndarray, np.ndarray]:
        vals, vecs = np.linalg.eigh(w)
        order = np.argsort(vals)[::-1][:r]
        return vecs[:, order], vals[order]

    if n <= dense_max or r > n - 2:
        vecs, vals = dense()
    else:
        v0 = np.random.default_rng(_V0_SEED).standard_normal(n)
        try:
            vals, vecs = spla.eigsh(w, k=r, which="LA", v0=v0, maxiter=50 * n)
            order = np.argsort(vals)[::-1]
            vals, vecs = vals[order], vecs[:, order]
            if _verify_eigenpairs(lambda v: w @ v, fro, vecs, vals) is not None:
                vecs, vals = dense()
        except spla.ArpackNoConvergence as exc:
            if n > 8192:
                raise ConvergenceError(f"Lanczos failed to converge: {exc}") from exc
            vecs, vals = dense()

    vecs = _canonical_signs(vecs)
    problem = _verify_eigenpairs(lambda v: w @ v, fro, vecs, vals)
    if problem is not None:
        raise ConvergenceError(problem)
    return vecs, vals


class _AbsKernelOperator(spla.LinearOperator):
    """Matvec of (|K| + |K^T|)/2 with K = X X^T, recomputed blockwise.

    Avoids materializing the n x n kernel; each matvec costs one blockwise
    pass over X X^T, so this route is reserved for sizes where memory, not
    time, is the binding constraint.
    """

    def __init__(self, x: np.ndarray, block: int = 2048):
        self.x = np.asarray(x, dtype=np.float64)
        self.block = block
        n = self.x.shape[0]
        super().__init__(dtype=np.float64, shape=(n, n))

    def _matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v).ravel()
        n = self.shape[0]
        out = np.zeros(n)
        for start in range(0, n, self.block):
            stop = min(start + self.block, n)
            t = np.abs(self.x[start:stop] @ self.x.T)
            out[start:stop] += 0.5 * (t @ v)
            out += 0.5 * (t.T @ v[start:stop])
        return out

    def fro_norm(self) -> float:
        n = self.shape[0]
        total = 0.0
        for start in range(0, n, self.block):
            stop = min(start + self.block, n)
            t = np.abs(self.x[start:stop] @ self.x.T)
            total += float((t * t).sum())
        return float(np.sqrt(total))


def _top_eigenvectors_operator(op: _AbsKernelOperator, r: int
                               ) -> tuple[np.ndarray, np.ndarray]:
    n = op.shape[0]
    v0 = np.random.default_rng(_V0_SEED).standard_normal(n)
    try:
        vals, vecs = spla.eigsh(op, k=r, which="LA", v0=v0, maxiter=100 * n)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos failed to converge: {exc}") from exc
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vecs = _canonical_signs(vecs)
    problem = _verify_eigenpairs(lambda m: op @ m, op.fro_norm(), vecs, vals)
    if problem is not None:
        raise ConvergenceError(problem)
    return vecs, vals


def _plus_plus_centroids(points: np.ndarray, r: int, rng: np.random.Generator
                         ) -> np.ndarray:
    """k-means++ seeding."""
    n = points.shape[0]
    centers = np.empty((r, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, r):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int,
           inertia_trace: list | None = None) -> tuple[np.ndarray, float]:
    n, r = points.shape[0], centers.shape[0]
    sq = (points * points).sum(axis=1)
    assign = np.full(n, -1, dtype=np.int64)
    inertia = np.inf
    for it in range(max_iters):
        d2 = sq[:, None] - 2.0 * points @ centers.T + (centers * centers).sum(axis=1)
        np.maximum(d2, 0.0, out=d2)
        new_assign = np.argmin(d2, axis=1)
        best = d2[np.arange(n), new_assign]

        # Re-seed empty clusters at the point farthest from its own centroid.
        counts = np.bincount(new_assign, minlength=r)
        stolen: list[int] = []
        for c in np.nonzero(counts == 0)[0]:
            order = np.argsort(-best, kind="stable")
            pick = next(int(i) for i in order if int(i) not in stolen)
            stolen.append(pick)
            new_assign[pick] = c
            centers[c] = points[pick]
            best[pick] = 0.0

        inertia = float(best.sum())
        if inertia_trace is not None:
            inertia_trace.append(inertia)
        if np.array_equal(new_assign, assign) or it == max_iters - 1:
            return new_assign, inertia
        assign = new_assign
        for c in range(r):
            members = assign == c
            if members.any():
                centers[c] = points[members].mean(axis=0)
    return assign, inertia


def kmeans(points: np.ndarray, r: int, seed: int, restarts: int = 10,
           max_iters: int = 100, inertia_trace: list | None = None
           ) -> ClusterPartition:
    """Best-of-restarts Lloyd iterations with k-means++ seeding.

    Deterministic for a given seed; ties between restarts keep the earlier
    result.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if n < r:
        raise ValueError(f"need at least r={r} points, got {n}")
    rng = np.random.default_rng(seed)
    best_assign, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _plus_plus_centroids(points, r, rng)
        assign, inertia = _lloyd(points, centers, max_iters, inertia_trace)
        if inertia < best_inertia:
            best_assign, best_inertia = assign, inertia
    return ClusterPartition(assignments=best_assign, r=r, embedding=points,
                            inertia=best_inertia)


def spectral_embedding(x_bar: np.ndarray, r: int,
                       normalize: bool = False,
                       dense_max: int = DENSE_EIGH_MAX,
                       materialize_max: int = KERNEL_MATERIALIZE_MAX
                       ) -> np.ndarray:
    """Top-r eigenvectors of the symmetrized linear kernel of x_bar.

    Above materialize_max nodes the kernel is never held in memory; the
    Lanczos matvec recomputes it blockwise instead.
    """
    x_bar = np.asarray(x_bar, dtype=np.float64)
    n = x_bar.shape[0]
    if n <= materialize_max:
        w = symmetrize(linear_kernel(x_bar))
        vecs, _ = top_eigenvectors(w, r, dense_max=dense_max)
    else:
        vecs, _ = _top_eigenvectors_operator(_AbsKernelOperator(x_bar), r)
    if normalize:
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        vecs = vecs / norms
    return vecs


def cluster(x_bar: np.ndarray, r: int, seed: int, restarts: int = 10,
            normalize_embedding: bool = False,
            dense_max: int = DENSE_EIGH_MAX,
            materialize_max: int = KERNEL_MATERIALIZE_MAX) -> ClusterPartition:
    """Full pipeline from representations to a partition."""
    vecs = spectral_embedding(x_bar, r, normalize=normalize_embedding,
                              dense_max=dense_max,
                              materialize_max=materialize_max)
    return kmeans(vecs, r, seed, restarts=restarts)
