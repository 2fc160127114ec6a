"""Graph construction, level sets, path counting and the file format."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathnorm import (GraphError, ConfigError, NetworkGraph, build_layered,
                      compute_levels, count_paths, format_graph_file,
                      parse_arch, parse_graph_file)
from conftest import random_dag


def test_smallest_network():
    g = build_layered([1, 1])
    assert g.n_edges == 1
    assert g.depth == 1
    assert g.input_nodes.tolist() == [0]
    assert g.output_nodes.tolist() == [1]


def test_paper_architecture_shape():
    g = build_layered([784, 4000, 4000, 10])
    assert g.depth == 3
    assert g.n_edges == 784 * 4000 + 4000 * 4000 + 4000 * 10
    assert g.n_inputs == 784
    assert g.n_outputs == 10


def test_diamond_structure(diamond):
    g, _ = diamond
    assert g.n_edges == 4
    assert count_paths(g) == 2
    # canonical edge order: (0,1), (0,2), (1,3), (2,3)
    assert list(zip(g.edge_src.tolist(), g.edge_dst.tolist())) == \
        [(0, 1), (0, 2), (1, 3), (2, 3)]


def test_levels_diamond(diamond):
    g, _ = diamond
    lv = compute_levels(g)
    assert [x.tolist() for x in lv.v_in_levels] == [[0], [1, 2], [3]]
    assert [x.tolist() for x in lv.v_out_levels] == [[3], [1, 2], [0]]
    assert lv.depth == 2


def test_levels_chain():
    lv = compute_levels(build_layered([1, 1]))
    assert [x.tolist() for x in lv.v_in_levels] == [[0], [1]]


def test_levels_skip_edge():
    # i -> h -> o plus a skip edge i -> o: o has longest input path 2.
    g = NetworkGraph(n_nodes=3, edge_src=np.array([0, 0, 1]),
                     edge_dst=np.array([2, 1, 2]),
                     input_nodes=np.array([0]), output_nodes=np.array([2]))
    lv = compute_levels(g)
    assert g.depth == 2
    assert [x.tolist() for x in lv.v_in_levels] == [[0], [1], [2]]


def test_levels_partition():
    for seed in range(20):
        g = random_dag(seed)
        lv = compute_levels(g)
        for family in (lv.v_in_levels, lv.v_out_levels):
            seen = np.concatenate(family)
            assert sorted(seen.tolist()) == list(range(g.n_nodes))
        assert set(lv.v_in_levels[0].tolist()) == set(g.input_nodes.tolist())
        assert set(lv.v_out_levels[0].tolist()) == set(g.output_nodes.tolist())


def test_layered_levels_match_layers():
    g = build_layered([2, 3, 2])
    lv = compute_levels(g)
    assert [x.tolist() for x in lv.v_in_levels] == [[0, 1], [2, 3, 4], [5, 6]]
    # V^i_in == V^(d-i)_out for layered graphs
    for i in range(g.depth + 1):
        assert lv.v_in_levels[i].tolist() == lv.v_out_levels[g.depth - i].tolist()


def test_count_paths_examples(diamond):
    g, _ = diamond
    assert count_paths(g) == 2
    assert count_paths(build_layered([2, 3, 2])) == 12
    assert count_paths(build_layered([1, 1])) == 1


@settings(max_examples=50, deadline=None)
@given(sizes=st.lists(st.integers(1, 5), min_size=2, max_size=5))
def test_count_paths_is_product_of_layer_sizes(sizes):
    assert count_paths(build_layered(sizes)) == int(np.prod(sizes))


def test_relabeling_invariance():
    for seed in range(10):
        g = random_dag(seed)
        rng = np.random.Generator(np.random.PCG64(seed + 1000))
        perm = rng.permutation(g.n_nodes)
        g2 = NetworkGraph(n_nodes=g.n_nodes, edge_src=perm[g.edge_src],
                          edge_dst=perm[g.edge_dst],
                          input_nodes=perm[g.input_nodes],
                          output_nodes=perm[g.output_nodes])
        lv, lv2 = compute_levels(g), compute_levels(g2)
        assert g2.depth == g.depth
        for a, b in zip(lv.v_in_levels, lv2.v_in_levels):
            assert sorted(perm[a].tolist()) == sorted(b.tolist())


def test_count_paths_big_is_exact_int():
    # 100^11 overflows both int64 and float64's exact-integer range.
    assert count_paths(build_layered([100] * 11)) == 100 ** 11


def test_rejects_empty_and_zero_layers():
    with pytest.raises(ConfigError):
        build_layered([])
    with pytest.raises(ConfigError):
        build_layered([3])
    with pytest.raises(ConfigError):
        build_layered([2, 0, 2])


def test_rejects_cycle():
    with pytest.raises(GraphError, match="cycle|path"):
        NetworkGraph(n_nodes=3, edge_src=np.array([0, 1, 2]),
                     edge_dst=np.array([1, 2, 1]),
                     input_nodes=np.array([0]), output_nodes=np.array([2]))


def test_rejects_dead_node():
    # Node 3 hangs off the side with no route to an output.
    with pytest.raises(GraphError, match="input-output path"):
        NetworkGraph(n_nodes=4, edge_src=np.array([0, 0]),
                     edge_dst=np.array([1, 3]),
                     input_nodes=np.array([0]), output_nodes=np.array([1]))


def test_rejects_edge_into_input():
    with pytest.raises(GraphError, match="input"):
        NetworkGraph(n_nodes=3, edge_src=np.array([0, 1]),
                     edge_dst=np.array([1, 0]),
                     input_nodes=np.array([0]), output_nodes=np.array([1]))


def test_rejects_duplicate_edge():
    with pytest.raises(GraphError, match="duplicate"):
        NetworkGraph(n_nodes=2, edge_src=np.array([0, 0]),
                     edge_dst=np.array([1, 1]),
                     input_nodes=np.array([0]), output_nodes=np.array([1]))


def test_parse_arch():
    assert parse_arch("784x4000x4000x10") == [784, 4000, 4000, 10]
    with pytest.raises(ConfigError):
        parse_arch("784")
    with pytest.raises(ConfigError):
        parse_arch("784xabc")


def test_graph_file_roundtrip(diamond):
    g, _ = diamond
    text = format_graph_file(g)
    g2 = parse_graph_file(text)
    assert g2.n_nodes == g.n_nodes
    assert g2.edge_src.tolist() == g.edge_src.tolist()
    assert g2.edge_dst.tolist() == g.edge_dst.tolist()
    assert g2.input_nodes.tolist() == g.input_nodes.tolist()
    assert g2.output_nodes.tolist() == g.output_nodes.tolist()


def test_graph_file_roundtrip_random():
    for seed in range(10):
        g = random_dag(seed)
        g2 = parse_graph_file(format_graph_file(g))
        assert g2.edge_src.tolist() == g.edge_src.tolist()
        assert g2.edge_dst.tolist() == g.edge_dst.tolist()


def test_parse_graph_file_errors():
    with pytest.raises(GraphError):
        parse_graph_file("")
    with pytest.raises(GraphError):
        parse_graph_file("nodes x inputs 0 outputs 1")
    with pytest.raises(GraphError):
        parse_graph_file("nodes 2 inputs 0 outputs 1\nedge 0")
