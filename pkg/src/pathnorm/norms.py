"""Group norms, the path vector and the lp path norm.

The path norm phi_p is the lp norm of the path vector pi(w), whose entries
are the products of weights along every input-to-output path.  It is computed
two ways: by explicit path enumeration (the oracle, exponential) and by a
per-node dynamic program (one pass over the edges).  The two must agree.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .graph import NetworkGraph, count_paths

# Path structure is immutable per graph; cache it so repeated oracle calls
# (e.g. invariance checks every optimizer step) enumerate only once.
_PATH_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()

DEFAULT_MAX_PATHS = 1_000_000


def _path_structure(g: NetworkGraph, max_paths: int):
    """All input-to-output paths as (flat edge ids, path boundaries).

    Paths are enumerated depth-first from each input node in order, following
    outgoing edges by ascending edge id; the resulting path order is the
    canonical index order of the path vector.
    """
    cached = _PATH_CACHE.get(g)
    if cached is None:
        n = count_paths(g)
        if n > max_paths:
            raise ConfigError(f"graph has {n} paths, above the cap of {max_paths}")
        is_output = np.zeros(g.n_nodes, dtype=bool)
        is_output[g.output_nodes] = True
        out_edges = [e.tolist() for e in g.out_edges]
        dst = g.edge_dst.tolist()
        flat, indptr, path = [], [0], []
        for start in g.input_nodes.tolist():
            stack = [iter(out_edges[start])]
            while stack:
                e = next(stack[-1], None)
                if e is None:
                    stack.pop()
                    if path:
                        path.pop()
                    continue
                path.append(e)
                d = dst[e]
                if is_output[d]:
                    flat.extend(path)
                    indptr.append(len(flat))
                    path.pop()
                else:
                    stack.append(iter(out_edges[d]))
        cached = (np.asarray(flat, dtype=np.int64), np.asarray(indptr, dtype=np.int64))
        _PATH_CACHE[g] = cached
    flat, indptr = cached
    if len(indptr) - 1 > max_paths:
        raise ConfigError(f"graph has {len(indptr) - 1} paths, above the cap of {max_paths}")
    return cached


def path_vector_bruteforce(g: NetworkGraph, w: np.ndarray,
                           max_paths: int = DEFAULT_MAX_PATHS) -> np.ndarray:
    """The path vector pi(w) by explicit enumeration: one product per path."""
    w = _check_weights(g, w)
    flat, indptr = _path_structure(g, max_paths)
    if len(indptr) == 1:
        return np.zeros(0)
    return np.multiply.reduceat(w[flat], indptr[:-1])


def path_norm_dp(g: NetworkGraph, w: np.ndarray, p: float) -> float:
    """phi_p(w) = ||pi(w)||_p via the single-sweep dynamic program.

    Per-node accumulators s(v) = sum over incoming edges of s(u)*|w_uv|^p,
    with s = 1 on the inputs; the norm is the p-th root of the total mass
    reaching the outputs.
    """
    if p < 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    w = _check_weights(g, w)
    wp = np.abs(w) ** p
    s = np.zeros(g.n_nodes)
    s[g.input_nodes] = 1.0
    for block in g.in_blocks:
        s[block.nodes] = s[block.src_nodes] @ block.matrix(wp)
        bad = ~np.isfinite(s[block.nodes])
        if bad.any():
            node = int(block.nodes[np.argmax(bad)])
            raise NumericError(f"non-finite path-norm accumulator at node {node}", node=node)
    return float(np.sum(s[g.output_nodes])) ** (1.0 / p)


def group_norm(g: NetworkGraph, w: np.ndarray, p: float, q: float) -> float:
    """Per-unit group norm mu_{p,q}: lq norm over nodes of incoming lp norms.

    q = inf gives the per-unit max norm (the supremum over nodes).
    """
    if p < 1 or q < 1:
        raise ConfigError(f"p and q must be >= 1, got p={p}, q={q}")
    if math.isinf(p):
        raise ConfigError("p must be finite")
    w = _check_weights(g, w)
    per_node = np.bincount(g.edge_dst, weights=np.abs(w) ** p, minlength=g.n_nodes)
    if math.isinf(q):
        return float(per_node.max()) ** (1.0 / p)
    return float(np.sum(per_node ** (q / p))) ** (1.0 / q)


def group_norm_max(g: NetworkGraph, w: np.ndarray, p: float) -> float:
    """mu_{p,inf}: the largest per-unit incoming lp norm."""
    return group_norm(g, w, p, math.inf)


@dataclass(frozen=True)
class Lemma1Report:
    """Outcome of the path-norm / per-unit-max-norm duality check.

    Three legs: (i) phi_p is invariant under random rescalings, (ii) every
    rescaling's mu_{p,inf}^depth upper-bounds phi_p, (iii) the numeric
    balancer closes the gap.  ``failed_legs`` names whichever legs missed
    their tolerance.
    """

    ok: bool
    failed_legs: tuple
    invariance_dev: float      # max relative |phi_p(w~) - phi_p(w)|
    bound_violation: float     # max of phi_p - mu^d over samples (<= slack if ok)
    oracle_rel_gap: float      # |oracle mu^d - phi_p| / phi_p
    n_samples: int


def lemma1_check(g: NetworkGraph, w: np.ndarray, p: float, n_samples: int,
                 seed: int = 0,
                 invariance_tol: float = 1e-12,
                 bound_slack: float = 1e-9,
                 oracle_tol: float = 1e-6) -> Lemma1Report:
    """Check phi_p(w) = min over equivalent networks of mu_{p,inf}^depth.

    The identity (and the one-sided bound phi_p <= mu^depth) holds for
    single-output graphs; with C outputs the minimum sits below phi_p by up
    to a factor C^(1/p), so such graphs are rejected here.
    """
    from .rescaling import balance_oracle, random_plan

    if g.n_outputs != 1:
        raise ConfigError("the path-norm / max-norm duality needs a single "
                          f"output node; graph has {g.n_outputs}")
    w = _check_weights(g, w)
    phi = path_norm_dp(g, w, p)
    d = g.depth

    inv_dev = 0.0
    bound_violation = -math.inf
    for i in range(n_samples):
        plan = random_plan(g, n_ops=8, c_low=0.1, c_high=10.0, seed=seed + i)
        wt = plan.apply(g, w)
        phi_t = path_norm_dp(g, wt, p)
        inv_dev = max(inv_dev, abs(phi_t - phi) / max(1.0, abs(phi)))
        bound_violation = max(bound_violation, phi - group_norm_max(g, wt, p) ** d)

    _, mu_min = balance_oracle(g, w, p)
    oracle_gap = abs(mu_min ** d - phi) / abs(phi) if phi else abs(mu_min ** d)

    failed = []
    if inv_dev > invariance_tol:
        failed.append("invariance")
    if bound_violation > bound_slack:
        failed.append("upper-bound")
    if oracle_gap > oracle_tol:
        failed.append("oracle-gap")
    return Lemma1Report(
        ok=not failed,
        failed_legs=tuple(failed),
        invariance_dev=inv_dev,
        bound_violation=bound_violation,
        oracle_rel_gap=oracle_gap,
        n_samples=n_samples,
    )


def _check_weights(g: NetworkGraph, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (g.n_edges,):
        raise ConfigError(f"weight vector has shape {w.shape}, expected ({g.n_edges},)")
    return w
