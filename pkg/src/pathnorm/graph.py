"""DAG topology for feedforward networks: construction, levels, path counts.

A network is a directed acyclic graph with D designated input nodes
(in-degree 0) and C designated output nodes (out-degree 0).  Weights live in
a flat float64 array indexed by edge id; edge ids are dense integers assigned
here once and reused everywhere, so runs are reproducible bit-for-bit.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, GraphError

# Dense per-level blocks refuse to materialize matrices bigger than this.
_MAX_BLOCK_ELEMENTS = 200_000_000


@dataclass(frozen=True, eq=False)
class LevelSets:
    """Longest-path level structure of a graph.

    ``v_in_levels[i]`` holds the nodes whose longest path from an input has
    exactly i edges; ``v_out_levels[i]`` is symmetric toward the outputs.
    Level 0 is the input (resp. output) set itself, and both families
    partition the node set.
    """

    v_in_levels: tuple
    v_out_levels: tuple

    @property
    def depth(self) -> int:
        return len(self.v_in_levels) - 1


@dataclass(frozen=True, eq=False)
class _LevelBlock:
    """Dense scatter layout for the edges entering one in-level.

    ``matrix(w)[rows, cols] = w[eids]`` gives an (n_src, n_nodes) matrix so a
    level's pre-activations are ``values[:, src_nodes] @ matrix``.  Positions
    not backed by an edge are structural zeros.
    """

    nodes: np.ndarray      # node ids in this level, ascending
    src_nodes: np.ndarray  # unique source node ids, ascending
    rows: np.ndarray       # per-edge row into src_nodes
    cols: np.ndarray       # per-edge column into nodes
    eids: np.ndarray       # per-edge weight index

    def matrix(self, w: np.ndarray) -> np.ndarray:
        m = np.zeros((len(self.src_nodes), len(self.nodes)))
        m[self.rows, self.cols] = w[self.eids]
        return m


@dataclass(frozen=True, eq=False)
class _OutBlock:
    """Same idea as _LevelBlock but for the edges leaving one out-level."""

    nodes: np.ndarray      # node ids in this out-level, ascending
    dst_nodes: np.ndarray  # unique destination node ids, ascending
    rows: np.ndarray       # per-edge row into nodes
    cols: np.ndarray       # per-edge column into dst_nodes
    eids: np.ndarray

    def matrix(self, w: np.ndarray) -> np.ndarray:
        m = np.zeros((len(self.nodes), len(self.dst_nodes)))
        m[self.rows, self.cols] = w[self.eids]
        return m


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Immutable DAG topology with input/output designations.

    Construction validates every structural invariant (acyclicity, in-degree
    0 inputs, out-degree 0 outputs, no dead nodes) and canonicalizes the edge
    order: edges are sorted by the topological index of their source, then of
    their target, where the topological order itself breaks ties by smallest
    node id.  Edge id k is the k-th edge in that order.
    """

    n_nodes: int
    edge_src: np.ndarray
    edge_dst: np.ndarray
    input_nodes: np.ndarray
    output_nodes: np.ndarray
    depth: int = field(init=False)

    def __post_init__(self):
        src = np.asarray(self.edge_src, dtype=np.int64).ravel()
        dst = np.asarray(self.edge_dst, dtype=np.int64).ravel()
        inputs = np.asarray(self.input_nodes, dtype=np.int64).ravel()
        outputs = np.asarray(self.output_nodes, dtype=np.int64).ravel()

        if self.n_nodes < 2:
            raise GraphError("a network needs at least 2 nodes")
        if len(src) != len(dst):
            raise GraphError("edge_src and edge_dst lengths differ")
        if len(src) == 0:
            raise GraphError("a network needs at least one edge")
        for arr, what in ((src, "edge endpoint"), (dst, "edge endpoint"),
                          (inputs, "input node"), (outputs, "output node")):
            if arr.size and (arr.min() < 0 or arr.max() >= self.n_nodes):
                raise GraphError(f"{what} id out of range [0, {self.n_nodes})")
        if len(inputs) == 0 or len(outputs) == 0:
            raise GraphError("need at least one input and one output node")
        if len(np.unique(inputs)) != len(inputs) or len(np.unique(outputs)) != len(outputs):
            raise GraphError("duplicate node in input or output list")
        if np.intersect1d(inputs, outputs).size:
            raise GraphError("a node cannot be both input and output")
        if np.any(src == dst):
            raise GraphError("self-loop edge")
        if len(np.unique(src * self.n_nodes + dst)) != len(src):
            raise GraphError("duplicate edge")

        is_input = np.zeros(self.n_nodes, dtype=bool)
        is_input[inputs] = True
        is_output = np.zeros(self.n_nodes, dtype=bool)
        is_output[outputs] = True
        if is_input[dst].any():
            raise GraphError("input node has an incoming edge")
        if is_output[src].any():
            raise GraphError("output node has an outgoing edge")

        topo = _topological_order(self.n_nodes, src, dst)

        # Reachability from inputs and co-reachability to outputs: every node
        # must sit on some input-to-output path.
        fwd = np.zeros(self.n_nodes, dtype=bool)
        fwd[inputs] = True
        bwd = np.zeros(self.n_nodes, dtype=bool)
        bwd[outputs] = True
        topo_pos = np.empty(self.n_nodes, dtype=np.int64)
        topo_pos[topo] = np.arange(self.n_nodes)
        by_topo = np.argsort(topo_pos[src], kind="stable")
        for e in by_topo:
            if fwd[src[e]]:
                fwd[dst[e]] = True
        for e in by_topo[::-1]:
            if bwd[dst[e]]:
                bwd[src[e]] = True
        dead = np.nonzero(~(fwd & bwd))[0]
        if dead.size:
            raise GraphError(f"nodes not on any input-output path: {dead.tolist()}")

        # Canonical edge order: topological index of source, then of target.
        perm = np.lexsort((topo_pos[dst], topo_pos[src]))
        src, dst = src[perm], dst[perm]

        lvl_in = _longest_path_levels(self.n_nodes, src, dst, inputs, topo)
        lvl_out = _longest_path_levels(self.n_nodes, dst, src, outputs, topo[::-1])

        object.__setattr__(self, "edge_src", src)
        object.__setattr__(self, "edge_dst", dst)
        object.__setattr__(self, "input_nodes", inputs)
        object.__setattr__(self, "output_nodes", outputs)
        object.__setattr__(self, "depth", int(lvl_in.max()))
        object.__setattr__(self, "_topo_order", topo)
        object.__setattr__(self, "_level_in", lvl_in)
        object.__setattr__(self, "_level_out", lvl_out)
        for a in (src, dst, inputs, outputs, topo, lvl_in, lvl_out):
            a.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    @property
    def n_inputs(self) -> int:
        return len(self.input_nodes)

    @property
    def n_outputs(self) -> int:
        return len(self.output_nodes)

    @property
    def topo_order(self) -> np.ndarray:
        return self._topo_order

    @property
    def level_in(self) -> np.ndarray:
        """Per-node longest-path distance from the inputs."""
        return self._level_in

    @property
    def level_out(self) -> np.ndarray:
        """Per-node longest-path distance to the outputs."""
        return self._level_out

    @cached_property
    def hidden_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.input_nodes] = False
        mask[self.output_nodes] = False
        return np.nonzero(mask)[0]

    @cached_property
    def fan_in(self) -> np.ndarray:
        return np.bincount(self.edge_dst, minlength=self.n_nodes)

    @cached_property
    def out_edges(self) -> list:
        """Outgoing edge ids per node, ascending (canonical order)."""
        lists = [[] for _ in range(self.n_nodes)]
        for e in range(self.n_edges):
            lists[self.edge_src[e]].append(e)
        return [np.asarray(l, dtype=np.int64) for l in lists]

    @cached_property
    def in_edges(self) -> list:
        """Incoming edge ids per node, ascending."""
        lists = [[] for _ in range(self.n_nodes)]
        for e in range(self.n_edges):
            lists[self.edge_dst[e]].append(e)
        return [np.asarray(l, dtype=np.int64) for l in lists]

    @cached_property
    def in_blocks(self) -> list:
        """One _LevelBlock per in-level 1..depth, the forward schedule."""
        blocks = []
        for i in range(1, self.depth + 1):
            nodes = np.nonzero(self._level_in == i)[0]
            sel = np.nonzero(self._level_in[self.edge_dst] == i)[0]
            srcs, dsts = self.edge_src[sel], self.edge_dst[sel]
            src_nodes = np.unique(srcs)
            if len(src_nodes) * len(nodes) > _MAX_BLOCK_ELEMENTS:
                raise GraphError(f"in-level {i} block too large to densify")
            blocks.append(_LevelBlock(
                nodes=nodes,
                src_nodes=src_nodes,
                rows=np.searchsorted(src_nodes, srcs),
                cols=np.searchsorted(nodes, dsts),
                eids=sel,
            ))
        return blocks

    @cached_property
    def out_blocks(self) -> list:
        """One _OutBlock per out-level 1..depth, the reverse schedule."""
        blocks = []
        for i in range(1, self.depth + 1):
            nodes = np.nonzero(self._level_out == i)[0]
            sel = np.nonzero(self._level_out[self.edge_src] == i)[0]
            srcs, dsts = self.edge_src[sel], self.edge_dst[sel]
            dst_nodes = np.unique(dsts)
            if len(dst_nodes) * len(nodes) > _MAX_BLOCK_ELEMENTS:
                raise GraphError(f"out-level {i} block too large to densify")
            blocks.append(_OutBlock(
                nodes=nodes,
                dst_nodes=dst_nodes,
                rows=np.searchsorted(nodes, srcs),
                cols=np.searchsorted(dst_nodes, dsts),
                eids=sel,
            ))
        return blocks


def _topological_order(n_nodes, src, dst) -> np.ndarray:
    """Kahn's algorithm with a min-heap, so the order is canonical."""
    indeg = np.bincount(dst, minlength=n_nodes)
    succ = [[] for _ in range(n_nodes)]
    for s, d in zip(src.tolist(), dst.tolist()):
        succ[s].append(d)
    ready = [v for v in range(n_nodes) if indeg[v] == 0]
    heapq.heapify(ready)
    order = []
    remaining = indeg.copy()
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for u in succ[v]:
            remaining[u] -= 1
            if remaining[u] == 0:
                heapq.heappush(ready, u)
    if len(order) != n_nodes:
        raise GraphError("cycle detected: no topological order exists")
    return np.asarray(order, dtype=np.int64)


def _longest_path_levels(n_nodes, src, dst, sources, topo) -> np.ndarray:
    """Longest-path DP over a topological order.

    `sources` are the distance-0 nodes; passing the reversed order with
    swapped endpoints computes distances toward the outputs instead.
    """
    level = np.full(n_nodes, -1, dtype=np.int64)
    level[sources] = 0
    pos = np.empty(n_nodes, dtype=np.int64)
    pos[topo] = np.arange(n_nodes)
    by_src = np.argsort(pos[src], kind="stable")
    seen = np.zeros(n_nodes, dtype=bool)
    seen[sources] = True
    for e in by_src.tolist():
        s, d = src[e], dst[e]
        # A topological schedule never consumes an unvisited predecessor.
        assert seen[s], "DP visited a node before its predecessors"
        if level[s] < 0:
            raise GraphError(f"node {s} has no path from a source node")
        level[d] = max(level[d], level[s] + 1)
        seen[d] = True
    return level


def build_layered(layer_sizes) -> NetworkGraph:
    """Fully connected network over consecutive layers.

    Nodes are numbered layer by layer; the first layer is the input set and
    the last is the output set, so depth equals len(layer_sizes) - 1.
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ConfigError("need at least two layers")
    if any(int(s) != s or s < 1 for s in sizes):
        raise ConfigError(f"layer sizes must be positive integers, got {sizes}")
    sizes = [int(s) for s in sizes]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    src, dst = [], []
    for i in range(len(sizes) - 1):
        a = np.arange(offsets[i], offsets[i + 1])
        b = np.arange(offsets[i + 1], offsets[i + 2])
        src.append(np.repeat(a, len(b)))
        dst.append(np.tile(b, len(a)))
    return NetworkGraph(
        n_nodes=int(offsets[-1]),
        edge_src=np.concatenate(src),
        edge_dst=np.concatenate(dst),
        input_nodes=np.arange(sizes[0]),
        output_nodes=np.arange(offsets[-2], offsets[-1]),
    )


def compute_levels(g: NetworkGraph) -> LevelSets:
    """Longest-path level sets V^i_in and V^i_out, i = 0..depth."""
    v_in = tuple(np.nonzero(g.level_in == i)[0] for i in range(g.depth + 1))
    v_out = tuple(np.nonzero(g.level_out == i)[0] for i in range(g.depth + 1))
    return LevelSets(v_in_levels=v_in, v_out_levels=v_out)


def count_paths(g: NetworkGraph) -> int:
    """Exact number of directed input-to-output paths (arbitrary precision)."""
    counts = [0] * g.n_nodes
    for v in g.input_nodes:
        counts[v] = 1
    pos = np.empty(g.n_nodes, dtype=np.int64)
    pos[g.topo_order] = np.arange(g.n_nodes)
    for e in np.argsort(pos[g.edge_src], kind="stable").tolist():
        counts[g.edge_dst[e]] += counts[g.edge_src[e]]
    return sum(counts[v] for v in g.output_nodes)


def parse_arch(text: str):
    """'784x4000x4000x10' -> [784, 4000, 4000, 10]."""
    try:
        sizes = [int(tok) for tok in text.lower().split("x")]
    except ValueError:
        raise ConfigError(f"bad architecture string: {text!r}") from None
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ConfigError(f"bad architecture string: {text!r}")
    return sizes


def parse_graph_file(text: str) -> NetworkGraph:
    """Parse the line-oriented graph description format.

    Header line ``nodes N inputs <ids> outputs <ids>`` followed by one
    ``edge SRC DST`` line per edge.  Blank lines and ``#`` comments are
    ignored.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphError("empty graph description")
    head = lines[0].split()
    if len(head) < 5 or head[0] != "nodes":
        raise GraphError(f"bad header: {lines[0]!r}")
    try:
        n_nodes = int(head[1])
        i_in = head.index("inputs")
        i_out = head.index("outputs")
        inputs = [int(t) for t in head[i_in + 1:i_out]]
        outputs = [int(t) for t in head[i_out + 1:]]
    except (ValueError, IndexError):
        raise GraphError(f"bad header: {lines[0]!r}") from None
    src, dst = [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3 or parts[0] != "edge":
            raise GraphError(f"bad edge line: {ln!r}")
        src.append(int(parts[1]))
        dst.append(int(parts[2]))
    return NetworkGraph(
        n_nodes=n_nodes,
        edge_src=np.asarray(src, dtype=np.int64),
        edge_dst=np.asarray(dst, dtype=np.int64),
        input_nodes=np.asarray(inputs, dtype=np.int64),
        output_nodes=np.asarray(outputs, dtype=np.int64),
    )


def format_graph_file(g: NetworkGraph) -> str:
    """Inverse of parse_graph_file (edges in canonical id order)."""
    head = "nodes {} inputs {} outputs {}".format(
        g.n_nodes,
        " ".join(map(str, g.input_nodes.tolist())),
        " ".join(map(str, g.output_nodes.tolist())),
    )
    body = "\n".join(f"edge {s} {d}" for s, d in zip(g.edge_src, g.edge_dst))
    return head + "\n" + body + "\n"
