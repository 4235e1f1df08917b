"""Self-supervised training of the saturation sensor.

Each epoch: forward sensor pass, fuse the weighted layers, partition the
representations spectrally, score the partition with the tightness and
separation losses, backpropagate through the fusion weights and the recurrent
cell, and take an Adam step.  The discrete halting depths and the partition
are treated as constants of the epoch; the remainder weight's dependence on
the earlier saturation probabilities is differentiated exactly.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from . import data as data_io
from .config import TrainConfig
from .errors import CollapseError, SingletonClusterError
from .graph import AttributedGraph, FilteredSignalStack, LayerSource
from .metrics import evaluate
from .sensor import (ForwardCache, HaltingSchedule, SensorParams,
                     _cell_backward, init_params, run_sensor_all,
                     run_sensor_graph_cached)
from .spectral import ClusterPartition, cluster

log = logging.getLogger(__name__)

PROPORTION_GRID = ("1:3", "1:4", "1:5", "1:10", "1:20", "1:30", "1:40", "1:50")


# ---------------------------------------------------------------------------
# Tightness / separation losses
# ---------------------------------------------------------------------------

def pairwise_distances(x: np.ndarray) -> np.ndarray:
    """Dense Euclidean distance matrix with an exactly zero diagonal."""
    x = np.asarray(x, dtype=np.float64)
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    d = np.sqrt(d2)
    np.fill_diagonal(d, 0.0)
    return d


def _assignments_of(partition) -> np.ndarray:
    if isinstance(partition, ClusterPartition):
        return partition.assignments
    return np.asarray(partition, dtype=np.int64)


def node_tightness(x_bar: np.ndarray, partition, i: int) -> float:
    """Mean distance from node i to the other members of its cluster."""
    assign = _assignments_of(partition)
    x_bar = np.asarray(x_bar, dtype=np.float64)
    members = np.nonzero(assign == assign[i])[0]
    others = members[members != i]
    if others.size == 0:
        raise SingletonClusterError(f"node {i} is alone in cluster {assign[i]}")
    return float(np.linalg.norm(x_bar[others] - x_bar[i], axis=1).mean())


def node_separation(x_bar: np.ndarray, partition, i: int) -> float:
    """Mean over foreign clusters of the mean distance from node i to them."""
    assign = _assignments_of(partition)
    x_bar = np.asarray(x_bar, dtype=np.float64)
    own = assign[i]
    ids = [c for c in np.unique(assign) if c != own]
    if not ids:
        raise ValueError("separation needs at least two clusters")
    means = []
    for c in ids:
        members = np.nonzero(assign == c)[0]
        means.append(np.linalg.norm(x_bar[members] - x_bar[i], axis=1).mean())
    return float(np.mean(means))


def _cluster_weights(assign: np.ndarray) -> tuple[np.ndarray, int]:
    """Per-node weight 1/(|c|(|c|-1)) of its cluster (0 for singletons)."""
    ids, counts = np.unique(assign, return_counts=True)
    weight = np.zeros(int(assign.max()) + 1)
    for c, nc in zip(ids, counts):
        if nc >= 2:
            weight[c] = 1.0 / (nc * (nc - 1))
        else:
            log.warning("cluster %d is a singleton; its loss terms are skipped", c)
    return weight[assign], int(ids.size)


def loss_tightness(x_bar: np.ndarray, partition) -> float:
    """Cluster-averaged normalized sum of ordered intra-cluster distances."""
    assign = _assignments_of(partition)
    d = pairwise_distances(x_bar)
    wv, n_clusters = _cluster_weights(assign)
    same = assign[:, None] == assign[None, :]
    return float((d * same * wv[:, None]).sum() / n_clusters)


def loss_separation(x_bar: np.ndarray, partition) -> float:
    """Cluster-averaged normalized sum of ordered cross-cluster distances.

    The per-cluster normalizer is 1/(|c|(|c|-1)) even though the inner sum
    ranges over |c|(n-|c|) pairs; the mismatch is deliberate and gets
    absorbed by the separation weight.
    """
    assign = _assignments_of(partition)
    if np.unique(assign).size < 2:
        raise ValueError("separation needs at least two clusters")
    d = pairwise_distances(x_bar)
    wv, n_clusters = _cluster_weights(assign)
    diff = assign[:, None] != assign[None, :]
    return float((d * diff * wv[:, None]).sum() / n_clusters)


def combined_loss(x_bar: np.ndarray, partition, lambda_tig: float,
                  lambda_sep: float) -> float:
    """lambda_tig * tightness + lambda_sep / separation."""
    lt = loss_tightness(x_bar, partition)
    if lambda_sep == 0.0:
        return lambda_tig * lt
    ls = loss_separation(x_bar, partition)
    if ls == 0.0:
        raise CollapseError("inter-cluster separation collapsed to zero")
    return lambda_tig * lt + lambda_sep / ls


@dataclass
class LossContext:
    """Loss terms plus everything needed to emit the representation gradient."""

    tightness: float
    separation: float
    _grad_fn: object

    def grad(self, lambda_tig: float, lambda_sep: float) -> np.ndarray:
        return self._grad_fn(lambda_tig, lambda_sep)


def _exact_loss_context(x_bar: np.ndarray, assign: np.ndarray) -> LossContext:
    d = pairwise_distances(x_bar)
    wv, n_clusters = _cluster_weights(assign)
    same = assign[:, None] == assign[None, :]
    lt = float((d * same * wv[:, None]).sum() / n_clusters)
    ls = float((d * (~same) * wv[:, None]).sum() / n_clusters)
    pair_w = (wv[:, None] + wv[None, :]) / n_clusters

    def grad(lambda_tig: float, lambda_sep: float) -> np.ndarray:
        coeff = np.where(same, lambda_tig * pair_w,
                         (-lambda_sep / ls**2) * pair_w if lambda_sep else 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(d > 0, coeff / d, 0.0)
        np.fill_diagonal(c, 0.0)
        return c.sum(axis=1)[:, None] * x_bar - c @ x_bar

    return LossContext(lt, ls, grad)


def _sampled_loss_context(x_bar: np.ndarray, assign: np.ndarray, budget: int,
                          rng: np.random.Generator) -> LossContext:
    """Unbiased pair-sampled estimates of both loss terms and their gradient."""
    n = x_bar.shape[0]
    ids, counts = np.unique(assign, return_counts=True)
    n_clusters = int(ids.size)
    members = {int(c): np.nonzero(assign == c)[0] for c in ids}
    live = [int(c) for c, nc in zip(ids, counts) if nc >= 2]

    tig_pairs = {c: len(members[c]) * (len(members[c]) - 1) for c in live}
    sep_pairs = {c: len(members[c]) * (n - len(members[c])) for c in live}
    tig_total = sum(tig_pairs.values())
    sep_total = sum(sep_pairs.values())

    samples = []   # (ii, jj, dist, per-pair tig coeff, per-pair sep coeff)
    lt = 0.0
    ls = 0.0
    for c in live:
        mem = members[c]
        nc = mem.size
        w_c = 1.0 / (nc * (nc - 1))

        s_tig = max(1, int(round(budget * tig_pairs[c] / tig_total)))
        pi = rng.integers(nc, size=s_tig)
        po = (pi + 1 + rng.integers(nc - 1, size=s_tig)) % nc
        ii, jj = mem[pi], mem[po]
        dist = np.linalg.norm(x_bar[ii] - x_bar[jj], axis=1)
        lt += w_c * tig_pairs[c] * dist.mean() / n_clusters
        tig_coeff = np.full(s_tig, w_c * tig_pairs[c] / (s_tig * n_clusters))
        samples.append((ii, jj, dist, tig_coeff, np.zeros(s_tig)))

        if sep_pairs[c] > 0 and sep_total > 0:
            outside = np.setdiff1d(np.arange(n), mem, assume_unique=False)
            s_sep = max(1, int(round(budget * sep_pairs[c] / sep_total)))
            ii = mem[rng.integers(nc, size=s_sep)]
            jj = outside[rng.integers(outside.size, size=s_sep)]
            dist = np.linalg.norm(x_bar[ii] - x_bar[jj], axis=1)
            ls += w_c * sep_pairs[c] * dist.mean() / n_clusters
            sep_coeff = np.full(s_sep, w_c * sep_pairs[c] / (s_sep * n_clusters))
            samples.append((ii, jj, dist, np.zeros(s_sep), sep_coeff))

    def grad(lambda_tig: float, lambda_sep: float) -> np.ndarray:
        out = np.zeros_like(x_bar)
        sep_scale = (-lambda_sep / ls**2) if (lambda_sep and ls > 0) else 0.0
        for ii, jj, dist, tig_coeff, sep_coeff in samples:
            coeff = lambda_tig * tig_coeff + sep_scale * sep_coeff
            ok = dist > 0
            if not ok.any():
                continue
            unit = (x_bar[ii[ok]] - x_bar[jj[ok]]) / dist[ok][:, None]
            contrib = coeff[ok][:, None] * unit
            np.add.at(out, ii[ok], contrib)
            np.add.at(out, jj[ok], -contrib)
        return out

    return LossContext(lt, ls, grad)


def loss_context(x_bar: np.ndarray, partition, exact_pair_limit: int = 5000,
                 budget: int = 2_000_000,
                 rng: np.random.Generator | None = None) -> LossContext:
    assign = _assignments_of(partition)
    if x_bar.shape[0] <= exact_pair_limit:
        return _exact_loss_context(x_bar, assign)
    if rng is None:
        rng = np.random.default_rng(0)
    return _sampled_loss_context(x_bar, assign, budget, rng)


# ---------------------------------------------------------------------------
# Backpropagation through fusion weights and the recurrent sensor
# ---------------------------------------------------------------------------

def _fuse_cached(cache: ForwardCache, schedule: HaltingSchedule) -> np.ndarray:
    """Fusion driven by the padded weight table kept in the forward cache."""
    if cache.scope == "graph":
        q = schedule.q[0]
        order = int(schedule.orders[0])
        out = None
        for k, layer in enumerate(cache.source.iter_layers(), start=1):
            if k > order:
                break
            term = q[k - 1] * layer
            out = term if out is None else out + term
        return out
    out = np.zeros_like(cache.source.graph.features)
    for step in cache.steps:
        rows = cache.step_rows(step)
        out[step.idx] += step.q[:, None] * rows
    return out


def _bptt_node(params: SensorParams, cache: ForwardCache,
               d_xbar: np.ndarray) -> dict[str, np.ndarray]:
    grads = params.zeros_like()
    n, d = d_xbar.shape[0], params.hidden_dim
    w_h = params.weights["halt_w"]

    # Gradient of the loss in each unit's halting-step weight (the remainder).
    dq_steps: list[np.ndarray] = []
    dq_last = np.zeros(n)
    for step in cache.steps:
        rows = cache.step_rows(step)
        dq = np.einsum("ij,ij->i", rows, d_xbar[step.idx])
        dq_steps.append(dq)
        if step.halted.any():
            hid = step.idx[step.halted]
            dq_last[hid] = dq[step.halted]

    d_state = np.zeros((n, d))
    for step, dq in zip(reversed(cache.steps), reversed(dq_steps)):
        live = ~step.halted
        if not live.any():
            continue
        idx_live = step.idx[live]
        # q_k = h_k for k < N, and the remainder loses h_k once per earlier step.
        dh = dq[live] - dq_last[idx_live]
        h = step.h[live]
        sig = dh * h * (1.0 - h)
        s_new = step.s_new[live]
        grads["halt_w"] += s_new.T @ sig
        grads["halt_b"][0] += sig.sum()
        upstream = d_state[idx_live] + sig[:, None] * w_h[None, :]
        gates = tuple(g[live] for g in step.gates) if step.gates is not None else None
        x_rows = cache.step_rows(step)[live]
        d_prev, _ = _cell_backward(params, step.s_prev[live], x_rows, gates,
                                   s_new, upstream, grads, need_dx=False)
        d_state[idx_live] = d_prev

    if cache.prime is not None:
        carrying = np.any(d_state != 0.0, axis=1)
        if carrying.any():
            pr = cache.prime
            x = cache.step_rows(pr)[carrying]
            gates = tuple(g[carrying] for g in pr.gates) if pr.gates is not None else None
            _cell_backward(params, pr.s_prev[carrying], x, gates,
                           pr.s_new[carrying], d_state[carrying], grads,
                           need_dx=False)
    return grads


def _bptt_graph(params: SensorParams, cache: ForwardCache,
                d_xbar: np.ndarray) -> dict[str, np.ndarray]:
    grads = params.zeros_like()
    steps = cache.steps
    order = len(steps)
    w_h = params.weights["halt_w"]

    dq = np.zeros(order)
    for k, layer in enumerate(cache.source.iter_layers(), start=1):
        if k > order:
            break
        dq[k - 1] = float((layer * d_xbar).sum())

    carry = np.zeros((1, params.hidden_dim))
    for k in range(order - 1, 0, -1):          # step `order` carries no gradient
        step = steps[k - 1]
        dh = dq[k - 1] - dq[order - 1]
        h = float(step.h[0])
        sig = dh * h * (1.0 - h)
        grads["halt_w"] += sig * step.s_new[0]
        grads["halt_b"][0] += sig
        upstream = carry + sig * w_h[None, :]
        d_prev, dx = _cell_backward(params, step.s_prev, step.x, step.gates,
                                    step.s_new, upstream, grads, need_dx=True)
        grads["pool_w"] += np.outer(step.pooled_mean, dx[0])
        grads["pool_b"] += dx[0]
        carry = d_prev

    if cache.prime is not None and np.any(carry != 0.0):
        pr = cache.prime
        _, dx = _cell_backward(params, pr.s_prev, pr.x, pr.gates, pr.s_new,
                               carry, grads, need_dx=True)
        grads["pool_w"] += np.outer(pr.pooled_mean, dx[0])
        grads["pool_b"] += dx[0]
    return grads


def _as_source(graph: AttributedGraph, stack) -> LayerSource:
    if isinstance(stack, LayerSource):
        return stack
    if isinstance(stack, FilteredSignalStack):
        return LayerSource(graph, stack.max_order, prebuilt=stack)
    raise TypeError(f"expected a layer stack or source, got {type(stack)!r}")


def backward(graph: AttributedGraph, stack, params: SensorParams,
             schedule: HaltingSchedule, partition, lambda_tig: float,
             lambda_sep: float, *, cache: ForwardCache | None = None,
             prime: bool = True, exact_pair_limit: int = 5000,
             budget: int = 2_000_000,
             rng: np.random.Generator | None = None
             ) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and its exact gradient in the sensor parameters.

    The partition and the halting depths are constants; gradients flow
    through the fusion weights (including the remainder), the halting unit
    and the recurrent states.
    """
    source = _as_source(graph, stack)
    if cache is None:
        cap = schedule.cap or int(schedule.orders.max())
        if schedule.scope == "graph":
            _, cache = run_sensor_graph_cached(params, source, schedule.epsilon,
                                               cap, prime=prime)
        else:
            _, cache = run_sensor_all(params, source, schedule.epsilon,
                                      cap, prime=prime)
    x_bar = _fuse_cached(cache, schedule)
    ctx = loss_context(x_bar, partition, exact_pair_limit, budget, rng)
    if lambda_sep != 0.0 and ctx.separation == 0.0:
        raise CollapseError("inter-cluster separation collapsed to zero")
    loss = lambda_tig * ctx.tightness + (
        lambda_sep / ctx.separation if lambda_sep else 0.0
    )
    d_xbar = ctx.grad(lambda_tig, lambda_sep)
    if cache.scope == "graph":
        grads = _bptt_graph(params, cache, d_xbar)
    else:
        grads = _bptt_node(params, cache, d_xbar)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient in parameter {name!r}")
    return loss, grads


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros(cls, params: SensorParams) -> "AdamState":
        return cls(m=params.zeros_like(), v=params.zeros_like())


def adam_step(params: SensorParams, grads: dict[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8, t: int = 1
              ) -> SensorParams:
    """Bias-corrected Adam update, in place on the parameter arrays."""
    if t < 1:
        raise ValueError(f"step counter must be >= 1, got {t}")
    for name, g in grads.items():
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        m_hat = state.m[name] / (1.0 - beta1**t)
        v_hat = state.v[name] / (1.0 - beta2**t)
        params.weights[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def _derived_seed(seed: int, epoch: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0x7FFFFFFF, epoch, stream])


def should_stop(losses: list[float], window: int, tol: float) -> bool:
    """Early termination once the recent loss trace has flattened."""
    if len(losses) < window:
        return False
    return float(np.std(np.asarray(losses[-window:]))) < tol


def _forward(params: SensorParams, source: LayerSource, cfg: TrainConfig,
             mode: str):
    if mode == "as-gc":
        return run_sensor_graph_cached(params, source, cfg.epsilon, cfg.max_order)
    return run_sensor_all(params, source, cfg.epsilon, cfg.max_order)


def train(graph: AttributedGraph, config: TrainConfig, mode: str
          ) -> tuple[SensorParams, "data_io.RunReport"]:
    """Full self-supervised training run; returns trained params and a report."""
    if mode not in ("as-gc", "nas-gc"):
        raise ValueError(f"mode must be 'as-gc' or 'nas-gc', got {mode!r}")
    if graph.r is None:
        raise ValueError("graph has no expected cluster count r")
    config.validate()
    r = graph.r
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    params = init_params(config.cell_kind, graph.m, config.hidden_dim,
                         config.seed, pooled=(mode == "as-gc"))
    t0 = time.perf_counter()
    source = LayerSource(graph, config.max_order, config.self_loops,
                         config.memory_budget_mb)
    timings["stack"] = time.perf_counter() - t0

    adam = AdamState.zeros(params)
    lam_tig, lam_sep = config.lambda_tig, config.lambda_sep
    lr = config.learning_rate
    losses: list[float] = []
    epochs: list[dict] = []
    partition: ClusterPartition | None = None
    stopped_early = False
    proportion = config.proportion_ratio()

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        schedule, cache = _forward(params, source, config, mode)
        x_bar = _fuse_cached(cache, schedule)
        timings["forward"] = timings.get("forward", 0.0) + time.perf_counter() - t0

        t0 = time.perf_counter()
        if partition is None or (epoch - 1) % config.recluster_every == 0:
            partition = cluster(
                x_bar, r, seed=int(_derived_seed(config.seed, epoch, 1).integers(2**31)),
                restarts=config.kmeans_restarts,
                normalize_embedding=config.normalize_embedding,
                dense_max=config.dense_eigh_max,
                materialize_max=config.kernel_materialize_max,
            )
        timings["cluster"] = timings.get("cluster", 0.0) + time.perf_counter() - t0

        t0 = time.perf_counter()
        ctx = loss_context(x_bar, partition, config.exact_pair_limit,
                           config.pair_sampling_budget,
                           _derived_seed(config.seed, epoch, 2))
        if epoch == 1 and proportion is not None:
            # Proportion "a:b" makes the separation term a/b of the tightness
            # term at epoch 1, using the observed loss magnitudes.  Larger b
            # weakens the spread pressure, which is what lets the halting
            # depths grow as the smoothing pays off.
            a, b = proportion
            if ctx.tightness > 0 and ctx.separation > 0:
                lam_sep = (a / b) * lam_tig * ctx.tightness * ctx.separation
                log.info("auto-calibrated separation weight to %.6g "
                         "for target proportion %s", lam_sep, config.proportion)
            else:
                log.warning("degenerate epoch-1 losses; keeping lambda_sep=%g", lam_sep)
        if lam_sep != 0.0 and ctx.separation == 0.0:
            raise CollapseError(
                f"separation collapsed to zero at epoch {epoch}; "
                f"loss trace so far: {losses}"
            )
        loss = lam_tig * ctx.tightness + (lam_sep / ctx.separation if lam_sep else 0.0)
        d_xbar = ctx.grad(lam_tig, lam_sep)
        timings["loss"] = timings.get("loss", 0.0) + time.perf_counter() - t0

        t0 = time.perf_counter()
        if cache.scope == "graph":
            grads = _bptt_graph(params, cache, d_xbar)
        else:
            grads = _bptt_node(params, cache, d_xbar)
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise ValueError(f"non-finite gradient in parameter {name!r} "
                                 f"at epoch {epoch}")
        if config.anneal_factor is not None and epoch > config.anneal_start_epoch:
            lr *= config.anneal_factor
        adam_step(params, grads, adam, lr, t=epoch)
        timings["backward"] = timings.get("backward", 0.0) + time.perf_counter() - t0

        losses.append(loss)
        entry = {
            "epoch": epoch,
            "loss": loss,
            "tightness": ctx.tightness,
            "separation": ctx.separation,
            "lambda_sep": lam_sep,
            "learning_rate": lr,
        }
        if graph.labels is not None:
            entry.update(evaluate(partition.assignments, graph.labels))
        epochs.append(entry)
        log.info("epoch %d: loss %.6f (tig %.6f, sep %.6f)", epoch, loss,
                 ctx.tightness, ctx.separation)
        if should_stop(losses, config.early_stop_window, config.early_stop_std):
            stopped_early = True
            break

    # Evaluate the final parameters.
    n_epochs = len(losses)
    schedule, cache = _forward(params, source, config, mode)
    x_bar = _fuse_cached(cache, schedule)
    partition = cluster(
        x_bar, r, seed=int(_derived_seed(config.seed, n_epochs + 1, 1).integers(2**31)),
        restarts=config.kmeans_restarts,
        normalize_embedding=config.normalize_embedding,
        dense_max=config.dense_eigh_max,
        materialize_max=config.kernel_materialize_max,
    )
    final_ctx = loss_context(x_bar, partition, config.exact_pair_limit,
                             config.pair_sampling_budget,
                             _derived_seed(config.seed, n_epochs + 1, 2))
    if lam_sep != 0.0 and final_ctx.separation == 0.0:
        raise CollapseError(
            f"separation collapsed to zero at final evaluation; "
            f"loss trace: {losses}"
        )
    final = {
        "loss": lam_tig * final_ctx.tightness
        + (lam_sep / final_ctx.separation if lam_sep else 0.0),
        "tightness": final_ctx.tightness,
        "separation": final_ctx.separation,
        "lambda_sep": lam_sep,
        "inertia": partition.inertia,
    }
    if graph.labels is not None:
        final.update(evaluate(partition.assignments, graph.labels))
    timings["total"] = time.perf_counter() - t_total

    if mode == "as-gc":
        orders = [int(schedule.orders[0])] * graph.n
    else:
        orders = [int(o) for o in schedule.orders]
    report = data_io.RunReport(
        mode=mode,
        config=config.to_dict(),
        dataset=data_io.dataset_summary(graph),
        seed=config.seed,
        workers=config.workers,
        epochs=epochs,
        final=final,
        orders=orders,
        stopped_early=stopped_early,
        n_epochs=n_epochs,
        timings=timings,
        assignments=[int(a) for a in partition.assignments],
    )
    return params, report


def auto_select_proportion(graph: AttributedGraph, base_config: TrainConfig,
                           mode: str = "nas-gc") -> tuple[float, dict]:
    """Grid search over the tightness : separation proportion.

    Runs one full training per grid point (all sharing the base seed), emits
    every row, and marks two selections: the metric-best row when labels
    exist (oracle) and the row whose final loss, normalized by its own
    epoch-1 loss, is lowest (unsupervised).
    """
    rows = []
    for prop in PROPORTION_GRID:
        cfg = replace(base_config, proportion=prop)
        _, report = train(graph, cfg, mode)
        first, last = report.epochs[0], report.epochs[-1]
        row = {
            "proportion": prop,
            "lambda_sep": last["lambda_sep"],
            "epoch1_loss": first["loss"],
            "final_loss": report.final["loss"],
            "normalized_final": report.final["loss"] / first["loss"]
            if first["loss"] else float("inf"),
            "n_epochs": report.n_epochs,
        }
        for key in ("acc", "nmi", "f1"):
            if key in report.final:
                row[key] = report.final[key]
        rows.append(row)

    unsup = min(range(len(rows)), key=lambda i: rows[i]["normalized_final"])
    sweep = {
        "rows": rows,
        "unsupervised_choice": rows[unsup]["proportion"],
        "oracle_choice": None,
    }
    if graph.labels is not None:
        oracle = max(range(len(rows)), key=lambda i: rows[i].get("acc", -1.0))
        sweep["oracle_choice"] = rows[oracle]["proportion"]
    return float(rows[unsup]["lambda_sep"]), sweep
