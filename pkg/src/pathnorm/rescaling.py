"""Rescaling operations on RELU networks and the balancing oracle.

Rescaling a hidden node multiplies its incoming weights by c > 0 and divides
its outgoing weights by c; the computed function and every path product are
unchanged.  Two weight vectors are rescaling equivalent when a sequence of
such operations maps one to the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError
from .graph import NetworkGraph, count_paths
from .norms import group_norm_max, path_vector_bruteforce, _check_weights


@dataclass(frozen=True)
class RescalingOp:
    """Scale node's incoming weights by c and outgoing weights by 1/c."""

    node: int
    c: float

    def inverse(self) -> "RescalingOp":
        return RescalingOp(self.node, 1.0 / self.c)


@dataclass(frozen=True)
class RescalingPlan:
    """An ordered sequence of rescaling operations."""

    ops: tuple

    def apply(self, g: NetworkGraph, w: np.ndarray) -> np.ndarray:
        out = _check_weights(g, w).copy()
        for op in self.ops:
            _apply_inplace(g, out, op)
        return out

    def inverse(self) -> "RescalingPlan":
        return RescalingPlan(tuple(op.inverse() for op in reversed(self.ops)))


def _validate_op(g: NetworkGraph, op: RescalingOp):
    if not (op.c > 0) or not math.isfinite(op.c):
        raise ConfigError(f"rescaling constant must be positive and finite, got {op.c}")
    if op.node < 0 or op.node >= g.n_nodes:
        raise ConfigError(f"node {op.node} out of range")
    if g.level_in[op.node] == 0 or g.level_out[op.node] == 0:
        raise ConfigError(f"node {op.node} is an input or output node; only hidden "
                          "nodes can be rescaled")


def _apply_inplace(g: NetworkGraph, w: np.ndarray, op: RescalingOp):
    _validate_op(g, op)
    w[g.in_edges[op.node]] *= op.c
    w[g.out_edges[op.node]] /= op.c


def apply_rescaling(g: NetworkGraph, w: np.ndarray, op: RescalingOp) -> np.ndarray:
    """Apply one rescaling operation, returning new weights."""
    out = _check_weights(g, w).copy()
    _apply_inplace(g, out, op)
    return out


def random_plan(g: NetworkGraph, n_ops: int, c_low: float, c_high: float,
                seed: int) -> RescalingPlan:
    """Random hidden nodes with log-uniform scales in [c_low, c_high]."""
    if len(g.hidden_nodes) == 0:
        raise ConfigError("graph has no hidden nodes to rescale")
    rng = np.random.Generator(np.random.PCG64(seed))
    nodes = rng.choice(g.hidden_nodes, size=n_ops, replace=True)
    log_c = rng.uniform(math.log(c_low), math.log(c_high), size=n_ops)
    return RescalingPlan(tuple(
        RescalingOp(int(v), float(math.exp(lc))) for v, lc in zip(nodes, log_c)
    ))


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    deviation: float   # normalized max deviation between path aggregates
    method: str        # "paths" (exact pi comparison) or "edge-aggregates"


def check_rescaling_equivalent(g: NetworkGraph, w1: np.ndarray, w2: np.ndarray,
                               tol: float,
                               path_limit: int = 100_000) -> EquivalenceReport:
    """Decide whether w1 and w2 look rescaling equivalent.

    Small graphs compare the full path vectors; large graphs compare per-edge
    DP aggregates (the sum over paths through each edge of the path product,
    signed and in absolute value), which every rescaling leaves unchanged.
    This is a sound proxy: equivalence implies equality of the compared
    quantities, but weight vectors with zeros or compensating sign patterns
    can agree without being equivalent.
    """
    w1 = _check_weights(g, w1)
    w2 = _check_weights(g, w2)
    if count_paths(g) <= path_limit:
        a = path_vector_bruteforce(g, w1, max_paths=path_limit)
        b = path_vector_bruteforce(g, w2, max_paths=path_limit)
        dev = _normalized_inf_dev(a, b)
        return EquivalenceReport(dev <= tol, dev, "paths")
    dev = 0.0
    for take_abs in (False, True):
        a = _edge_path_aggregates(g, np.abs(w1) if take_abs else w1)
        b = _edge_path_aggregates(g, np.abs(w2) if take_abs else w2)
        dev = max(dev, _normalized_inf_dev(a, b))
    return EquivalenceReport(dev <= tol, dev, "edge-aggregates")


def _normalized_inf_dev(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / (1.0 + np.max(np.abs(a))))


def _edge_path_aggregates(g: NetworkGraph, w: np.ndarray) -> np.ndarray:
    """Per edge, the sum over the paths through it of the full path product."""
    s_in = np.zeros(g.n_nodes)
    s_in[g.input_nodes] = 1.0
    for block in g.in_blocks:
        s_in[block.nodes] = s_in[block.src_nodes] @ block.matrix(w)
    s_out = np.zeros(g.n_nodes)
    s_out[g.output_nodes] = 1.0
    for block in g.out_blocks:
        s_out[block.nodes] = block.matrix(w) @ s_out[block.dst_nodes]
    return s_in[g.edge_src] * w * s_out[g.edge_dst]


def unbalance(g: NetworkGraph, w: np.ndarray, k: int, seed: int,
              scale_factor: float = 10.0,
              lognormal_mu: float = 0.0,
              lognormal_sigma: float = 1.0) -> np.ndarray:
    """Unbalance a network by k random rescalings, preserving its function.

    Draws k hidden units uniformly with replacement and rescales each by
    scale_factor * c with c log-normal, so the result is rescaling equivalent
    to w by construction.
    """
    w = _check_weights(g, w)
    if len(g.hidden_nodes) == 0:
        raise ConfigError("graph has no hidden units to unbalance")
    if k < 0:
        raise ConfigError(f"k must be >= 0, got {k}")
    out = w.copy()
    if k == 0:
        return out
    rng = np.random.Generator(np.random.PCG64(seed))
    units = rng.choice(g.hidden_nodes, size=k, replace=True)
    cs = rng.lognormal(mean=lognormal_mu, sigma=lognormal_sigma, size=k)
    for v, c in zip(units, cs):
        _apply_inplace(g, out, RescalingOp(int(v), float(scale_factor * c)))
    return out


def balance_oracle(g: NetworkGraph, w: np.ndarray, p: float,
                   max_edges: int = 30):
    """Minimize mu_{p,inf} over the rescaling-equivalence class of w.

    One log-scale variable per hidden node.  In log-scale space the log of
    every per-node incoming norm is a log-sum-exp of affine functions, hence
    convex, so minimizing the max is a smooth convex program in epigraph
    form: minimize z subject to log-norm_v(t) <= z.  Solved with SLSQP.
    (Plain per-coordinate descent on the max stalls on plateaus where no
    single scale can move the incumbent maximum, so a joint method is
    required.)  Returns the balanced weights and the achieved mu_{p,inf},
    recomputed from those weights.

    The minimum equals phi_p(w)^(1/depth) only on single-output graphs; with
    C outputs the minimum can drop as low as phi_p / C^(1/p) because the
    output units cannot be rescaled yet all contribute path mass.
    """
    w = _check_weights(g, w)
    if p < 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    if g.n_edges > max_edges:
        raise ConfigError(f"balance oracle is for small graphs: {g.n_edges} edges "
                          f"> cap {max_edges}")
    if np.any(w == 0.0):
        raise ConfigError("balance oracle requires all weights nonzero")

    hidden = g.hidden_nodes
    if len(hidden) == 0:
        return w.copy(), group_norm_max(g, w, p)
    hid_pos = {int(v): i for i, v in enumerate(hidden)}
    n_h = len(hidden)

    # Per constrained (non-input) node: incoming edge sources and p*log|w|.
    constrained = [v for v in range(g.n_nodes) if len(g.in_edges[v])]
    node_terms = []
    for v in constrained:
        eids = g.in_edges[v]
        node_terms.append((v, g.edge_src[eids], p * np.log(np.abs(w[eids]))))

    def full_t(th):
        t = np.zeros(g.n_nodes)
        t[hidden] = th
        return t

    def log_norms_and_grads(th):
        """log of each constrained node's in-norm^p, with d/d(t_hidden)."""
        t = full_t(th)
        vals = np.empty(len(constrained))
        grads = np.zeros((len(constrained), n_h))
        for j, (v, srcs, base) in enumerate(node_terms):
            terms = base + p * (t[v] - t[srcs])
            m = terms.max()
            e = np.exp(terms - m)
            s = e.sum()
            vals[j] = m + math.log(s)
            sm = e / s
            if v in hid_pos:
                grads[j, hid_pos[v]] += p
            for src, weight in zip(srcs.tolist(), sm):
                if src in hid_pos:
                    grads[j, hid_pos[src]] -= p * weight
        return vals, grads

    # Epigraph variables x = (t_hidden..., z); minimize z.
    def objective(x):
        return x[-1]

    def objective_grad(x):
        gvec = np.zeros(len(x))
        gvec[-1] = 1.0
        return gvec

    def cons_fun(x):
        vals, _ = log_norms_and_grads(x[:-1])
        return x[-1] - vals

    def cons_jac(x):
        _, grads = log_norms_and_grads(x[:-1])
        jac = np.hstack([-grads, np.ones((len(constrained), 1))])
        return jac

    from scipy.optimize import minimize

    v0, _ = log_norms_and_grads(np.zeros(n_h))
    x0 = np.concatenate([np.zeros(n_h), [v0.max()]])
    best = None
    for attempt in range(3):
        res = minimize(objective, x0, jac=objective_grad, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": cons_fun,
                                     "jac": cons_jac}],
                       options={"ftol": 1e-14, "maxiter": 2000})
        vals, _ = log_norms_and_grads(res.x[:-1])
        achieved = vals.max()
        if best is None or achieved < best[0]:
            best = (achieved, res.x[:-1].copy())
        if res.success:
            break
        # Retry from the feasible point just reached.
        x0 = np.concatenate([res.x[:-1], [achieved]])
    else:
        raise ConvergenceError("balance oracle failed to converge",
                               residual=float(best[0]))

    scale = np.exp(full_t(best[1]))
    balanced = w * scale[g.edge_dst] / scale[g.edge_src]
    return balanced, group_norm_max(g, balanced, p)
