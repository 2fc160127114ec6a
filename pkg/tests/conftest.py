"""Shared test helpers: random DAGs and brute-force reference oracles."""

import numpy as np
import pytest

from pathnorm import NetworkGraph, build_layered


def random_dag(seed, max_edges=12, max_nodes=8, min_outputs=1):
    """A small random DAG satisfying every structural invariant.

    Nodes get a random topological ordering, edges are sampled among the
    order-respecting pairs, and inputs/outputs fall out as the sourceless and
    sinkless nodes, which guarantees every node lies on an input-output path.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    while True:
        n = int(rng.integers(3, max_nodes + 1))
        pos = rng.permutation(n)
        pairs = [(u, v) for u in range(n) for v in range(n) if pos[u] < pos[v]]
        m = int(rng.integers(2, max_edges + 1))
        if m > len(pairs):
            continue
        chosen = rng.choice(len(pairs), size=m, replace=False)
        edges = [pairs[i] for i in chosen]
        used = sorted({x for e in edges for x in e})
        relabel = {v: i for i, v in enumerate(used)}
        src = np.array([relabel[u] for u, _ in edges])
        dst = np.array([relabel[v] for _, v in edges])
        indeg = np.bincount(dst, minlength=len(used))
        outdeg = np.bincount(src, minlength=len(used))
        inputs = np.nonzero(indeg == 0)[0]
        outputs = np.nonzero(outdeg == 0)[0]
        if len(outputs) < min_outputs:
            continue
        return NetworkGraph(n_nodes=len(used), edge_src=src, edge_dst=dst,
                            input_nodes=inputs, output_nodes=outputs)


def random_weights(g, seed, low=-2.0, high=2.0, avoid_zero=0.0):
    rng = np.random.Generator(np.random.PCG64(seed))
    w = rng.uniform(low, high, g.n_edges)
    if avoid_zero:
        w = np.where(np.abs(w) < avoid_zero, avoid_zero * np.sign(w) + (w == 0) * avoid_zero, w)
    return w


def enumerate_paths_reference(g):
    """All input-output paths as edge-id tuples, by plain recursion."""
    out_edges = g.out_edges
    is_output = np.zeros(g.n_nodes, dtype=bool)
    is_output[g.output_nodes] = True
    paths = []

    def walk(v, acc):
        if is_output[v]:
            paths.append(tuple(acc))
            return
        for e in out_edges[v]:
            walk(int(g.edge_dst[e]), acc + [int(e)])

    for v in g.input_nodes:
        walk(int(v), [])
    return paths


def gamma_reference(g, w, p):
    """Per-edge path scaling by literal path enumeration."""
    paths = enumerate_paths_reference(g)
    wp = np.abs(np.asarray(w)) ** p
    gamma = np.zeros(g.n_edges)
    for path in paths:
        for e in path:
            rest = 1.0
            for k in path:
                if k != e:
                    rest *= wp[k]
            gamma[e] += rest
    return gamma ** (2.0 / p)


def forward_reference(g, w, x):
    """Per-node loop forward pass; returns (node values, pre-activations)."""
    vals = np.zeros(g.n_nodes)
    pre = np.zeros(g.n_nodes)
    vals[g.input_nodes] = x
    is_output = np.zeros(g.n_nodes, dtype=bool)
    is_output[g.output_nodes] = True
    is_input = np.zeros(g.n_nodes, dtype=bool)
    is_input[g.input_nodes] = True
    for v in g.topo_order:
        if is_input[v]:
            continue
        z = sum(w[e] * vals[g.edge_src[e]] for e in g.in_edges[v])
        pre[v] = z
        vals[v] = z if is_output[v] else max(z, 0.0)
    return vals, pre


@pytest.fixture
def diamond():
    """The [1,2,1] net with weights a=1, b=2, c=3, d=4."""
    return build_layered([1, 2, 1]), np.array([1.0, 2.0, 3.0, 4.0])
