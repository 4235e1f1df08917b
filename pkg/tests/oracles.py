"""Independent reference implementations used only by the tests.

Everything here is deliberately naive (explicit loops, dense algebra,
exhaustive enumeration) and shares no code with the library paths it checks.
"""

from itertools import permutations
from math import log, sqrt, tanh

import numpy as np


def dense_filter_matrix(n, edges, self_loops: bool) -> np.ndarray:
    """(I + D^-1/2 A D^-1/2) / 2 built entry by entry."""
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    if self_loops:
        a = a + np.eye(n)
    deg = a.sum(axis=1)
    g = np.eye(n)
    for i in range(n):
        for j in range(n):
            if a[i, j] and deg[i] > 0 and deg[j] > 0:
                g[i, j] += a[i, j] / sqrt(deg[i] * deg[j])
    return 0.5 * g


def dense_power_layers(n, edges, x, max_order, self_loops=True):
    """G^k X for k = 1..M via explicit dense matrix powers."""
    g = dense_filter_matrix(n, edges, self_loops)
    return [np.linalg.matrix_power(g, k) @ x for k in range(1, max_order + 1)]


def smoothness_pairwise(n, edges, f) -> float:
    """Half the degree-normalized squared edge disagreements, both directions."""
    deg = np.zeros(n)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    total = 0.0
    for i, j in edges:
        diff = f[i] / sqrt(deg[i]) - f[j] / sqrt(deg[j])
        total += 2 * diff * diff      # both orientations
    isolated = sum(f[i] * f[i] for i in range(n) if deg[i] == 0)
    return 0.5 * total + isolated


def jacobi_eigh(a: np.ndarray, sweeps: int = 100, tol: float = 1e-12):
    """Cyclic Jacobi rotations for a small symmetric matrix."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] ** 2
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = 0.5 * np.arctan2(2 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
        if off < tol:
            break
    vals = np.diag(a).copy()
    order = np.argsort(vals)[::-1]
    return vals[order], v[:, order]


def brute_force_accuracy(pred, truth) -> float:
    """Max agreement over every injective cluster-to-class mapping."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    p_ids = sorted(set(int(v) for v in pred))
    t_ids = sorted(set(int(v) for v in truth))
    size = max(len(p_ids), len(t_ids))
    t_padded = t_ids + [None] * (size - len(t_ids))
    best = 0
    for perm in permutations(t_padded, len(p_ids)):
        mapping = dict(zip(p_ids, perm))
        best = max(best, sum(1 for p, t in zip(pred, truth) if mapping[int(p)] == t))
    return best / len(pred)


def nmi_direct(pred, truth) -> float:
    """NMI from an explicitly built contingency table, geometric normalization."""
    pred = list(int(v) for v in pred)
    truth = list(int(v) for v in truth)
    n = len(pred)
    table: dict[tuple[int, int], int] = {}
    for p, t in zip(pred, truth):
        table[(p, t)] = table.get((p, t), 0) + 1
    row = {}
    col = {}
    for (p, t), c in table.items():
        row[p] = row.get(p, 0) + c
        col[t] = col.get(t, 0) + c
    mi = 0.0
    for (p, t), c in table.items():
        mi += (c / n) * log((c / n) / ((row[p] / n) * (col[t] / n)))
    hp = -sum((c / n) * log(c / n) for c in row.values())
    ht = -sum((c / n) * log(c / n) for c in col.values())
    if hp == 0.0 or ht == 0.0:
        return 1.0 if hp == ht else 0.0
    return mi / sqrt(hp * ht)


def tightness_enumeration(points, assign) -> float:
    """Cluster-averaged intra-cluster pair sums by explicit double loops."""
    points = np.asarray(points, dtype=np.float64)
    clusters = sorted(set(int(a) for a in assign))
    total = 0.0
    for c in clusters:
        members = [i for i, a in enumerate(assign) if a == c]
        if len(members) < 2:
            continue
        s = 0.0
        for i in members:
            for j in members:
                if i != j:
                    s += float(np.linalg.norm(points[i] - points[j]))
        total += s / (len(members) * (len(members) - 1))
    return total / len(clusters)


def separation_enumeration(points, assign) -> float:
    """Cluster-averaged cross-cluster pair sums with the intra-pair normalizer."""
    points = np.asarray(points, dtype=np.float64)
    clusters = sorted(set(int(a) for a in assign))
    n = len(assign)
    total = 0.0
    for c in clusters:
        members = [i for i, a in enumerate(assign) if a == c]
        if len(members) < 2:
            continue
        s = 0.0
        for i in members:
            for j in range(n):
                if assign[j] != c:
                    s += float(np.linalg.norm(points[i] - points[j]))
        total += s / (len(members) * (len(members) - 1))
    return total / len(clusters)


def scalar_rnn(weights, xs):
    """Closed-form scalar recurrence for a 1x1 simple-recurrent cell."""
    s = 0.0
    out = []
    for x in xs:
        s = tanh(x * weights["w_x"] + s * weights["w_s"] + weights["b"])
        out.append(s)
    return out


def scalar_gru(weights, xs):
    """Closed-form scalar recurrence for a 1x1 gated cell."""

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    s = 0.0
    out = []
    for x in xs:
        u = sig(x * weights["w_xu"] + s * weights["w_su"] + weights["b_u"])
        r = sig(x * weights["w_xr"] + s * weights["w_sr"] + weights["b_r"])
        c = tanh(x * weights["w_xc"] + r * s * weights["w_sc"] + weights["b_c"])
        s = (1 - u) * s + u * c
        out.append(s)
    return out


def random_connected_graph(rng, n, extra_edges=0):
    """Random spanning tree plus optional extra edges; always connected."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a = int(order[k])
        b = int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    target = min(n - 1 + extra_edges, n * (n - 1) // 2)
    while len(edges) < target:
        a, b = rng.integers(n), rng.integers(n)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return sorted(edges)
