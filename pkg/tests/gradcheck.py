"""Central-difference gradient checking harness shared by the test modules."""

import numpy as np

from smoothgc import build_graph, init_params
from smoothgc.graph import LayerSource
from smoothgc.sensor import run_sensor_all, run_sensor_graph_cached
from smoothgc.training import _bptt_graph, _bptt_node, _fuse_cached, loss_context

from oracles import random_connected_graph


def make_instance(seed, n=6, m=3, d=4, max_order=5, cell="gated-recurrent",
                  mode="node"):
    rng = np.random.default_rng(seed)
    edges = random_connected_graph(rng, n, extra_edges=2)
    graph = build_graph(edges, rng.standard_normal((n, m)))
    params = init_params(cell, m, d, seed=seed + 1, pooled=(mode == "graph"))
    assign = rng.integers(2, size=n)
    if len(set(assign.tolist())) < 2:
        assign[0] = 1 - assign[0]
    return graph, params, assign, max_order


def forward_loss(graph, params, assign, max_order, mode, lam_tig, lam_sep):
    source = LayerSource(graph, max_order)
    runner = run_sensor_graph_cached if mode == "graph" else run_sensor_all
    schedule, cache = runner(params, source, 1.0, max_order)
    x_bar = _fuse_cached(cache, schedule)
    ctx = loss_context(x_bar, assign)
    loss = lam_tig * ctx.tightness + (lam_sep / ctx.separation if lam_sep else 0.0)
    return loss, schedule, cache, ctx


def analytic_gradients(graph, params, assign, max_order, mode, lam_tig, lam_sep):
    _, _, cache, ctx = forward_loss(graph, params, assign, max_order, mode,
                                    lam_tig, lam_sep)
    d_xbar = ctx.grad(lam_tig, lam_sep)
    bptt = _bptt_graph if mode == "graph" else _bptt_node
    return bptt(params, cache, d_xbar)


def max_relative_error(graph, params, assign, max_order, mode,
                       lam_tig=1.0, lam_sep=2.0, step=1e-5, floor=1e-6):
    """Worst per-coordinate relative error vs central differences.

    Coordinates where the perturbation flips a halting decision are excluded
    (the loss is only piecewise smooth there); the floor keeps finite-
    difference roundoff on near-zero gradients from masquerading as error.
    """
    grads = analytic_gradients(graph, params, assign, max_order, mode,
                               lam_tig, lam_sep)
    worst = 0.0
    for name, w in params.weights.items():
        it = np.nditer(w, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            old = w[ix]
            w[ix] = old + step
            lp, sp, _, _ = forward_loss(graph, params, assign, max_order, mode,
                                        lam_tig, lam_sep)
            w[ix] = old - step
            lm, sm, _, _ = forward_loss(graph, params, assign, max_order, mode,
                                        lam_tig, lam_sep)
            w[ix] = old
            if not np.array_equal(sp.orders, sm.orders):
                continue
            fd = (lp - lm) / (2 * step)
            an = float(grads[name][ix])
            rel = abs(fd - an) / max(abs(fd), abs(an), floor)
            worst = max(worst, rel)
    return worst
