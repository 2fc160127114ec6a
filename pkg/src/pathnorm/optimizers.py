"""SGD, AdaGrad and path-normalized SGD behind one step interface.

The path-normalized update divides each coordinate's gradient by a per-edge
scaling: the sum over all input-to-output paths through the edge of the
product of the other edges' |w|^p, raised to 2/p.  Those per-edge scalings
come out of one forward and one backward accumulator sweep over the graph,
so a step costs about one extra single-example pass regardless of batch
size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .graph import LevelSets, NetworkGraph
from .norms import _check_weights

OPTIMIZER_KINDS = ("sgd", "adagrad", "pathsgd")


@dataclass(frozen=True)
class PathScalars:
    """Per-node and per-edge accumulators of the path-normalization sweep.

    gamma_in(v) sums |w|^p path products from the inputs to v, gamma_out(v)
    from v to the outputs; gamma_edge(u -> v) = (gamma_in(u)*gamma_out(v))^(2/p).
    """

    gamma_in: np.ndarray
    gamma_out: np.ndarray
    gamma_edge: np.ndarray


@dataclass
class OptimizerState:
    """Mutable optimizer configuration and per-edge accumulators.

    kind: one of "sgd", "adagrad", "pathsgd".
    lr: step size.
    p: path-norm exponent (pathsgd only).
    epsilon: divide-by-zero guard for the adaptive denominators.
    adagrad_accum: running sum of squared gradients (adagrad only).
    clamped_edges: how many edges hit the epsilon guard in the last
    path-normalized step; nonzero values flag degenerate scalings.
    """

    kind: str
    lr: float
    p: float = 2.0
    epsilon: float = 1e-8
    adagrad_accum: np.ndarray | None = None
    clamped_edges: int = field(default=0, init=False)

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigError(f"unknown optimizer kind {self.kind!r}")
        if not self.lr > 0:
            raise ConfigError(f"step size must be positive, got {self.lr}")
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")


def compute_gamma(g: NetworkGraph, levels: LevelSets, w: np.ndarray,
                  p: float) -> PathScalars:
    """Per-edge path scalings by forward/backward sweeps over the levels.

    One pass accumulates gamma_in along increasing input levels, the other
    gamma_out along increasing output levels; both touch every edge once, so
    the cost is independent of the batch size.
    """
    w = _check_weights(g, w)
    if p < 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    if levels.depth != g.depth:
        raise ConfigError("level sets do not match the graph")
    wp = np.abs(w) ** p

    gamma_in = np.zeros(g.n_nodes)
    gamma_in[g.input_nodes] = 1.0
    for block in g.in_blocks:
        gamma_in[block.nodes] = gamma_in[block.src_nodes] @ block.matrix(wp)
        bad = ~np.isfinite(gamma_in[block.nodes])
        if bad.any():
            node = int(block.nodes[np.argmax(bad)])
            raise NumericError(f"non-finite gamma_in at node {node}", node=node)

    gamma_out = np.zeros(g.n_nodes)
    gamma_out[g.output_nodes] = 1.0
    for block in g.out_blocks:
        gamma_out[block.nodes] = block.matrix(wp) @ gamma_out[block.dst_nodes]
        bad = ~np.isfinite(gamma_out[block.nodes])
        if bad.any():
            node = int(block.nodes[np.argmax(bad)])
            raise NumericError(f"non-finite gamma_out at node {node}", node=node)

    gamma_edge = (gamma_in[g.edge_src] * gamma_out[g.edge_dst]) ** (2.0 / p)
    return PathScalars(gamma_in=gamma_in, gamma_out=gamma_out, gamma_edge=gamma_edge)


def sgd_step(state: OptimizerState, w: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Plain gradient step: w - lr * grad."""
    return w - state.lr * grad


def adagrad_step(state: OptimizerState, w: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Adaptive step dividing by the root of the running squared-gradient sum."""
    if state.adagrad_accum is None:
        state.adagrad_accum = np.zeros_like(w)
    state.adagrad_accum += grad * grad
    return w - state.lr * grad / np.sqrt(state.adagrad_accum + state.epsilon)


def pathsgd_step(g: NetworkGraph, levels: LevelSets, state: OptimizerState,
                 w: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Path-normalized step: each coordinate scaled by its gamma at current w.

    All coordinates update synchronously from the same scalars snapshot.
    Scalings below epsilon are clamped to it (and counted in
    state.clamped_edges): a zero gamma means every path through the edge has
    another zero weight, where the normalized step is undefined.
    """
    scalars = compute_gamma(g, levels, w, state.p)
    gamma = scalars.gamma_edge
    clamped = gamma < state.epsilon
    state.clamped_edges = int(clamped.sum())
    if state.clamped_edges:
        gamma = np.maximum(gamma, state.epsilon)
    return w - (state.lr / gamma) * grad


def optimizer_step(g: NetworkGraph, levels: LevelSets, state: OptimizerState,
                   w: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Dispatch one update step by state.kind."""
    if state.kind == "sgd":
        return sgd_step(state, w, grad)
    if state.kind == "adagrad":
        return adagrad_step(state, w, grad)
    return pathsgd_step(g, levels, state, w, grad)
