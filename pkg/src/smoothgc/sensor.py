"""Recurrent saturation sensor over successive convolution layers.

A recurrent cell reads the filtered signals order by order and a sigmoid
halting unit emits a per-step saturation probability.  Probabilities are
accumulated until they reach the threshold epsilon (or the order cap), the
final step receives the remainder weight so the weights sum to epsilon
exactly, and the weighted layers are fused into the output representation.

Two scopes are supported: a single shared schedule driven by pooled layer
summaries (graph level), and one schedule per node driven by that node's own
filtered rows (node level).  The node-level forward consumes layers lazily
and stops per node as soon as it halts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .graph import FilteredSignalStack, LayerSource

SIMPLE_RECURRENT = "simple-recurrent"
GATED_RECURRENT = "gated-recurrent"
CELL_KINDS = (SIMPLE_RECURRENT, GATED_RECURRENT)

# Draw order matters: initialization must be reproducible from the seed alone.
_GRU_MATS = ("w_xu", "w_su", "w_xr", "w_sr", "w_xc", "w_sc")
_GRU_BIASES = ("b_u", "b_r", "b_c")
_RNN_MATS = ("w_x", "w_s")
_RNN_BIASES = ("b",)


@dataclass
class SensorParams:
    """Trainable weights of the sensor: recurrent cell, halting unit, pooling.

    weights maps names to arrays; the set of names depends on cell_kind and
    on whether the sensor is pooled (graph level).  halt_b is stored with
    shape (1,) so every parameter is an ndarray.
    """

    cell_kind: str
    input_dim: int
    hidden_dim: int
    weights: dict[str, np.ndarray]

    @property
    def pooled(self) -> bool:
        return "pool_w" in self.weights

    def size(self) -> int:
        return sum(w.size for w in self.weights.values())

    def copy(self) -> "SensorParams":
        return SensorParams(self.cell_kind, self.input_dim, self.hidden_dim,
                            {k: v.copy() for k, v in self.weights.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.weights.items()}


def init_params(cell_kind: str, input_dim: int, hidden_dim: int, seed: int,
                pooled: bool = False, halt_bias: float = 1.0) -> SensorParams:
    """Seeded initialization.

    Matrices are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], cell biases
    start at zero, and the halting bias starts positive so early saturation
    probabilities are high and the initial depth is shallow; training deepens
    the convolution where it pays off.  The pooling affine map starts as the
    identity.
    """
    if input_dim < 1 or hidden_dim < 1:
        raise ValueError(f"dims must be >= 1, got m={input_dim}, d={hidden_dim}")
    if cell_kind not in CELL_KINDS:
        raise ValueError(f"unknown cell kind {cell_kind!r}; expected one of {CELL_KINDS}")
    rng = np.random.default_rng(seed)
    m, d = input_dim, hidden_dim

    def draw(fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
        b = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-b, b, size=shape)

    weights: dict[str, np.ndarray] = {}
    if pooled:
        weights["pool_w"] = np.eye(m)
        weights["pool_b"] = np.zeros(m)
    mats = _GRU_MATS if cell_kind == GATED_RECURRENT else _RNN_MATS
    biases = _GRU_BIASES if cell_kind == GATED_RECURRENT else _RNN_BIASES
    for name in mats:
        fan_in = m if name.startswith("w_x") else d
        weights[name] = draw(fan_in, (fan_in, d))
    for name in biases:
        weights[name] = np.zeros(d)
    weights["halt_w"] = draw(d, (d,))
    weights["halt_b"] = np.array([float(halt_bias)])
    return SensorParams(cell_kind, m, d, weights)


def _cell_forward(params: SensorParams, state: np.ndarray, x: np.ndarray):
    """Batched cell update; returns (new_state, gate_cache)."""
    w = params.weights
    if params.cell_kind == GATED_RECURRENT:
        u = expit(x @ w["w_xu"] + state @ w["w_su"] + w["b_u"])
        r = expit(x @ w["w_xr"] + state @ w["w_sr"] + w["b_r"])
        c = np.tanh(x @ w["w_xc"] + (r * state) @ w["w_sc"] + w["b_c"])
        new = (1.0 - u) * state + u * c
        return new, (u, r, c)
    new = np.tanh(x @ w["w_x"] + state @ w["w_s"] + w["b"])
    return new, None


def _cell_backward(params: SensorParams, s_prev: np.ndarray, x: np.ndarray,
                   gates, s_new: np.ndarray, d_state: np.ndarray,
                   grads: dict[str, np.ndarray], need_dx: bool):
    """Reverse the cell update: accumulate weight grads, return (d_s_prev, dx)."""
    w = params.weights
    if params.cell_kind == GATED_RECURRENT:
        u, r, c = gates
        du = d_state * (c - s_prev)
        dc = d_state * u
        d_prev = d_state * (1.0 - u)

        dtc = dc * (1.0 - c * c)
        grads["w_xc"] += x.T @ dtc
        grads["w_sc"] += (r * s_prev).T @ dtc
        grads["b_c"] += dtc.sum(axis=0)
        drs = dtc @ w["w_sc"].T
        dr = drs * s_prev
        d_prev = d_prev + drs * r

        dtr = dr * r * (1.0 - r)
        grads["w_xr"] += x.T @ dtr
        grads["w_sr"] += s_prev.T @ dtr
        grads["b_r"] += dtr.sum(axis=0)
        d_prev = d_prev + dtr @ w["w_sr"].T

        dtu = du * u * (1.0 - u)
        grads["w_xu"] += x.T @ dtu
        grads["w_su"] += s_prev.T @ dtu
        grads["b_u"] += dtu.sum(axis=0)
        d_prev = d_prev + dtu @ w["w_su"].T

        dx = None
        if need_dx:
            dx = dtc @ w["w_xc"].T + dtr @ w["w_xr"].T + dtu @ w["w_xu"].T
        return d_prev, dx

    dt = d_state * (1.0 - s_new * s_new)
    grads["w_x"] += x.T @ dt
    grads["w_s"] += s_prev.T @ dt
    grads["b"] += dt.sum(axis=0)
    d_prev = dt @ w["w_s"].T
    dx = dt @ w["w_x"].T if need_dx else None
    return d_prev, dx


def cell_step(params: SensorParams, state: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One recurrent update for a single state vector or a batch of rows."""
    state = np.asarray(state, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    single = state.ndim == 1
    if single:
        state, x = state[None, :], x[None, :]
    if state.shape[1] != params.hidden_dim or x.shape[1] != params.input_dim:
        raise ValueError(
            f"expected state dim {params.hidden_dim} and input dim "
            f"{params.input_dim}, got {state.shape[1]} and {x.shape[1]}"
        )
    new, _ = _cell_forward(params, state, x)
    return new[0] if single else new


def halt_prob(params: SensorParams, state: np.ndarray):
    """Sigmoid readout of the saturation probability, strictly inside (0, 1)."""
    state = np.asarray(state, dtype=np.float64)
    single = state.ndim == 1
    if state.shape[-1] != params.hidden_dim:
        raise ValueError(f"state dim {state.shape[-1]} != {params.hidden_dim}")
    out = expit(state @ params.weights["halt_w"] + params.weights["halt_b"][0])
    return float(out) if single else out


def pool_input(params: SensorParams, signals: np.ndarray) -> np.ndarray:
    """Graph-level pooling: column mean followed by the learned affine map."""
    if not params.pooled:
        raise ValueError("params carry no pooling map; init with pooled=True")
    v = signals.mean(axis=0)
    return v @ params.weights["pool_w"] + params.weights["pool_b"]


def saturation_schedule(h_values: Sequence[float], epsilon: float,
                        max_order: int) -> tuple[int, np.ndarray]:
    """Closed-form halting arithmetic for a prescribed probability sequence.

    Returns the selected order N = min(cap, first k with cumulative sum >=
    epsilon) and the weights (h_1, ..., h_{N-1}, epsilon - sum(h_{<N})).
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    acc = 0.0
    q: list[float] = []
    for k, h in enumerate(h_values, start=1):
        h = float(h)
        if acc + h >= epsilon or k == max_order:
            q.append(epsilon - acc)
            return k, np.array(q)
        q.append(h)
        acc += h
    raise ValueError(
        f"h sequence of length {len(q)} exhausted before saturation or cap {max_order}"
    )


@dataclass
class NodeSchedule:
    """Halting outcome for a single unit: order, weights, probabilities, states."""

    order: int
    q: np.ndarray
    h: np.ndarray
    states: list[np.ndarray] = field(default_factory=list)


@dataclass
class HaltingSchedule:
    """Halting outcome for every unit, node scope or one shared graph entry.

    Hidden states are attached for the single graph-level trajectory; for the
    node scope they stay with the forward cache (one batch per step) instead
    of being reshaped into n ragged lists.
    """

    epsilon: float
    scope: str                     # "node" or "graph"
    orders: np.ndarray             # (n,) or (1,)
    q: list[np.ndarray]
    h: list[np.ndarray]
    cap: int = 0                   # order cap in force during the forward pass
    states: list[np.ndarray] | None = None

    def __post_init__(self):
        if self.cap == 0:
            self.cap = int(np.max(self.orders))

    def order_histogram(self) -> list[tuple[int, int]]:
        vals, counts = np.unique(self.orders, return_counts=True)
        return [(int(v), int(c)) for v, c in zip(vals, counts)]


def run_sensor_node(params: SensorParams, inputs: Iterable[np.ndarray],
                    epsilon: float, max_order: int,
                    prime: np.ndarray | None = None) -> NodeSchedule:
    """Run the sensor over one node's filtered rows, consuming them lazily.

    Stops pulling inputs as soon as the node halts, so at most N_i rows are
    consumed.  When prime is given, the cell first digests the raw feature
    row from the zero state before any halting step.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    state = np.zeros(params.hidden_dim)
    if prime is not None:
        state = cell_step(params, state, np.asarray(prime, dtype=np.float64))
    acc = 0.0
    hs: list[float] = []
    qs: list[float] = []
    states: list[np.ndarray] = []
    it = iter(inputs)
    for k in range(1, max_order + 1):
        try:
            x = next(it)
        except StopIteration:
            raise ValueError(f"inputs exhausted at order {k} before halting") from None
        state = cell_step(params, state, np.asarray(x, dtype=np.float64))
        h = halt_prob(params, state)
        states.append(state)
        hs.append(h)
        if acc + h >= epsilon or k == max_order:
            qs.append(epsilon - acc)
            return NodeSchedule(order=k, q=np.array(qs), h=np.array(hs), states=states)
        qs.append(h)
        acc += h
    raise AssertionError("unreachable: cap guarantees halting")


@dataclass
class StepCache:
    """Forward quantities of one sensor step, kept for the reverse pass."""

    k: int
    idx: np.ndarray | None         # active node ids (node scope)
    s_prev: np.ndarray             # (B, d)
    s_new: np.ndarray
    gates: tuple | None
    h: np.ndarray                  # (B,)
    q: np.ndarray
    halted: np.ndarray             # (B,) bool
    x: np.ndarray | None = None    # input rows, stored only when streaming
    pooled_mean: np.ndarray | None = None   # pre-affine column mean (graph scope)


@dataclass
class ForwardCache:
    """Everything the reverse pass needs about a sensor forward run."""

    scope: str
    source: LayerSource
    prime: StepCache | None
    steps: list[StepCache]
    q_padded: np.ndarray | None = None   # (n, max_k) node scope

    def step_rows(self, step: StepCache) -> np.ndarray:
        """Input rows consumed at this step (raw features for the prime step)."""
        if step.x is not None:
            return step.x
        layer = (self.source.graph.features if step.k == 0
                 else self.source.layer(step.k))
        return layer[step.idx] if step.idx is not None else layer


def run_sensor_all(params: SensorParams, source: LayerSource, epsilon: float,
                   max_order: int, prime: bool = True
                   ) -> tuple[HaltingSchedule, ForwardCache]:
    """Vectorized node-level forward pass over all nodes at once.

    At step k only the still-running nodes are advanced; per-step batches of
    states, gates and probabilities are cached for backpropagation.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    graph = source.graph
    n, d = graph.n, params.hidden_dim
    state = np.zeros((n, d))
    prime_cache = None
    if prime:
        s_new, gates = _cell_forward(params, state, graph.features)
        prime_cache = StepCache(
            k=0, idx=None, s_prev=state, s_new=s_new, gates=gates,
            h=np.zeros(0), q=np.zeros(0), halted=np.zeros(0, dtype=bool),
            x=graph.features if source.streaming else None,
        )
        state = s_new.copy()   # later steps mutate `state` in place

    acc = np.zeros(n)
    orders = np.zeros(n, dtype=np.int64)
    alive = np.arange(n)
    steps: list[StepCache] = []
    h_pad = np.zeros((n, max_order))
    q_pad = np.zeros((n, max_order))

    for k, layer in enumerate(source.iter_layers(), start=1):
        if alive.size == 0 or k > max_order:
            break
        x = layer[alive]
        s_prev = state[alive]
        s_new, gates = _cell_forward(params, s_prev, x)
        h = expit(s_new @ params.weights["halt_w"] + params.weights["halt_b"][0])
        halted = (acc[alive] + h >= epsilon) | (k == max_order)
        q = np.where(halted, epsilon - acc[alive], h)
        orders[alive[halted]] = k
        h_pad[alive, k - 1] = h
        q_pad[alive, k - 1] = q
        state[alive] = s_new
        steps.append(StepCache(k=k, idx=alive, s_prev=s_prev, s_new=s_new,
                               gates=gates, h=h, q=q, halted=halted,
                               x=x if source.streaming else None))
        acc[alive] += h
        alive = alive[~halted]

    if alive.size:
        raise AssertionError("layer source shorter than the order cap")

    schedule = HaltingSchedule(
        epsilon=epsilon, scope="node", orders=orders,
        q=[q_pad[i, :orders[i]].copy() for i in range(n)],
        h=[h_pad[i, :orders[i]].copy() for i in range(n)],
        cap=max_order,
    )
    cache = ForwardCache(scope="node", source=source, prime=prime_cache,
                         steps=steps, q_padded=q_pad)
    return schedule, cache


def run_sensor_graph_cached(params: SensorParams, source: LayerSource,
                            epsilon: float, max_order: int, prime: bool = True
                            ) -> tuple[HaltingSchedule, ForwardCache]:
    """Graph-level forward pass: one shared trajectory over pooled layers."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    if not params.pooled:
        raise ValueError("graph-level sensor needs pooling params; "
                         "init with pooled=True")
    graph = source.graph
    d = params.hidden_dim
    state = np.zeros((1, d))
    prime_cache = None
    if prime:
        v0 = graph.features.mean(axis=0)
        u0 = (v0 @ params.weights["pool_w"] + params.weights["pool_b"])[None, :]
        s_new, gates = _cell_forward(params, state, u0)
        prime_cache = StepCache(k=0, idx=None, s_prev=state, s_new=s_new,
                                gates=gates, h=np.zeros(0), q=np.zeros(0),
                                halted=np.zeros(0, dtype=bool), x=u0,
                                pooled_mean=v0)
        state = s_new

    acc = 0.0
    hs: list[float] = []
    qs: list[float] = []
    steps: list[StepCache] = []
    order = 0
    for k, layer in enumerate(source.iter_layers(), start=1):
        if k > max_order:
            break
        v = layer.mean(axis=0)
        u = (v @ params.weights["pool_w"] + params.weights["pool_b"])[None, :]
        s_prev = state
        s_new, gates = _cell_forward(params, s_prev, u)
        h = float(expit(s_new[0] @ params.weights["halt_w"]
                        + params.weights["halt_b"][0]))
        halted = acc + h >= epsilon or k == max_order
        q = (epsilon - acc) if halted else h
        hs.append(h)
        qs.append(q)
        steps.append(StepCache(k=k, idx=None, s_prev=s_prev, s_new=s_new,
                               gates=gates, h=np.array([h]), q=np.array([q]),
                               halted=np.array([halted]), x=u, pooled_mean=v))
        state = s_new
        acc += h
        if halted:
            order = k
            break
    if order == 0:
        raise AssertionError("layer source shorter than the order cap")

    schedule = HaltingSchedule(epsilon=epsilon, scope="graph",
                               orders=np.array([order], dtype=np.int64),
                               q=[np.array(qs)], h=[np.array(hs)],
                               cap=max_order,
                               states=[st.s_new[0] for st in steps])
    cache = ForwardCache(scope="graph", source=source, prime=prime_cache,
                         steps=steps)
    return schedule, cache


def run_sensor_graph(params: SensorParams, source: LayerSource, epsilon: float,
                     max_order: int, prime: bool = True) -> HaltingSchedule:
    """Graph-level schedule without the backward cache."""
    schedule, _ = run_sensor_graph_cached(params, source, epsilon, max_order, prime)
    return schedule


def _layer_iter(layers) -> Iterable[np.ndarray]:
    if isinstance(layers, FilteredSignalStack):
        return layers.layers
    if isinstance(layers, LayerSource):
        return layers.iter_layers()
    return layers


def fuse_representation(layers, schedule: HaltingSchedule) -> np.ndarray:
    """Weighted sum of each unit's first N layers under its halting weights."""
    it = _layer_iter(layers)
    if schedule.scope == "graph":
        order = int(schedule.orders[0])
        q = schedule.q[0]
        out = None
        for k, layer in enumerate(it, start=1):
            if k > order:
                break
            term = q[k - 1] * layer
            out = term if out is None else out + term
        if out is None or k < order:
            raise ValueError("layer source shorter than the schedule order")
        return out

    orders = schedule.orders
    n = orders.shape[0]
    max_k = int(orders.max())
    out = None
    for k, layer in enumerate(it, start=1):
        if k > max_k:
            break
        w = np.zeros(n)
        sel = orders >= k
        w[sel] = [schedule.q[i][k - 1] for i in np.nonzero(sel)[0]]
        term = w[:, None] * layer
        out = term if out is None else out + term
    if out is None:
        raise ValueError("empty layer source")
    return out


def fixed_k_representation(stack, k: int) -> np.ndarray:
    """Order-fixed baseline: the representation is layer k itself."""
    if isinstance(stack, LayerSource):
        if not 1 <= k <= stack.max_order:
            raise ValueError(f"order {k} outside range 1..{stack.max_order}")
        return stack.layer(k)
    return stack.layer(k)
