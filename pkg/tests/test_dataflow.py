from pathlib import Path

import pytest

from spatialqr.dataflow import (
    IterNode,
    MemorySource,
    ProducerSource,
    build_graph,
    emit_dot,
    emit_trace,
    enumerate_iterations,
    evaluate_graph,
    format_trace_text,
    graph_stats,
    graph_to_json,
    relay_view,
    trace_to_json,
)
from spatialqr.numeric import AugmentedMatrix, qr_givens_reference, random_matrix
from spatialqr.specdsl import builtin_qr_spec

FIXTURES = Path(__file__).parent / "fixtures"


def x_count(m, n):
    return sum(max(0, m - col) for col in range(1, n + 1))


def y_count(m, n):
    return sum(max(0, m - col) * (n + 1 - col) for col in range(1, n + 1))


def make_aug(m, n, seed=0):
    return AugmentedMatrix.from_parts(random_matrix(m, n, seed), [1.0] * m)


class TestEnumeration:
    def test_x_order_at_4x4(self):
        spec = builtin_qr_spec()
        nodes = enumerate_iterations(spec.func("X"), 4, 4)
        assert [node.coords for node in nodes] == [
            (1, 4), (1, 3), (1, 2), (2, 4), (2, 3), (3, 4),
        ]

    def test_y_first_four_at_4x4(self):
        spec = builtin_qr_spec()
        nodes = enumerate_iterations(spec.func("Y"), 4, 4)
        assert len(nodes) == 20
        assert [node.coords for node in nodes[:4]] == [
            (1, 4, 2), (1, 4, 3), (1, 4, 4), (1, 4, 5),
        ]

    def test_column_with_empty_row_range(self):
        spec = builtin_qr_spec()
        nodes = enumerate_iterations(spec.func("X"), 4, 4)
        assert all(node.coords[0] != 4 for node in nodes)

    def test_count_formulas(self):
        spec = builtin_qr_spec()
        for m in range(1, 9):
            for n in range(1, m + 1):
                assert len(enumerate_iterations(spec.func("X"), m, n)) == x_count(m, n)
                assert len(enumerate_iterations(spec.func("Y"), m, n)) == y_count(m, n)


class TestBuildGraph:
    def test_node_count_matches_trace(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        assert len(g.nodes) == 26
        assert len(emit_trace(4, 4)) == 26

    def test_memory_pattern_edge(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        node = IterNode("X", (1, 4))
        sources = {(e.port, e.source) for e in g.in_edges[node]}
        assert sources == {
            (0, MemorySource("A'", 4, 1)),
            (1, MemorySource("A'", 3, 1)),
        }
        assert g.node_pattern[node] == "a"

    def test_both_from_y_pattern_edge(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        node = IterNode("X", (2, 4))
        sources = {(e.port, e.source) for e in g.in_edges[node]}
        assert sources == {
            (0, ProducerSource(IterNode("Y", (1, 4, 2)), 0)),
            (1, ProducerSource(IterNode("Y", (1, 3, 2)), 0)),
        }
        assert g.node_pattern[node] == "c"

    def test_in_degrees(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        for node in g.nodes:
            expected = 2 if node.func == "X" else 4
            assert len(g.in_edges[node]) == expected

    def test_topo_order_is_valid(self):
        g = build_graph(builtin_qr_spec(), 6, 4)
        position = {node: i for i, node in enumerate(g.topo_order)}
        for e in g.edges:
            if isinstance(e.source, ProducerSource):
                assert position[e.source.node] < position[e.sink]

    def test_pattern_census_closed_form(self):
        spec = builtin_qr_spec()
        for m in range(1, 9):
            for n in range(1, m + 1):
                g = build_graph(spec, m, n)
                counts = {"a": 0, "b": 0, "c": 0, "d": 0}
                for node in g.nodes:
                    if node.func == "X":
                        counts[g.node_pattern[node]] += 1
                assert counts["a"] == (1 if m >= 2 else 0)
                assert counts["b"] == max(0, m - 2)
                assert counts["c"] == max(0, min(n, m - 1) - 1)
                assert counts["d"] == x_count(m, n) - sum(
                    counts[p] for p in "abc"
                )


class TestTrace:
    def test_matches_golden_fixture(self):
        golden = (FIXTURES / "trace_4x4_golden.txt").read_text()
        assert format_trace_text(emit_trace(4, 4)) == golden

    def test_first_and_last_events(self):
        events = emit_trace(4, 4)
        first, last = events[0], events[-1]
        assert (first.col, first.row, first.k) == (1, 4, None)
        assert first.accesses[0].render() == "c,s[4,1](W)"
        assert (last.col, last.row, last.k) == (3, 4, 5)
        assert last.accesses[0].render() == "c,s[4,3](R)"
        assert [a.render() for a in last.accesses[1:]] == ["A'[4,5]", "A'[3,5]"]

    def test_access_shape_invariant(self):
        for e in emit_trace(5, 3):
            assert len(e.accesses) == 3
            cs, a1, a2 = e.accesses
            assert cs.name == "c,s"
            assert cs.mode == ("W" if e.k is None else "R")
            assert a1.mode == a2.mode == "RW"

    def test_empty_trace(self):
        assert emit_trace(1, 1) == []
        assert format_trace_text([]) == ""

    def test_json_event_count(self):
        import json

        obj = json.loads(trace_to_json(emit_trace(4, 4)))
        assert len(obj["events"]) == 26


class TestDot:
    def test_counts_and_shapes(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        dot = emit_dot(g)
        assert dot.count("[shape=") == 26
        assert '"X_1_4" [shape=ellipse];' in dot
        assert '"Y_1_4_2" [shape=box];' in dot

    def test_deterministic(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        assert emit_dot(g) == emit_dot(build_graph(builtin_qr_spec(), 4, 4))

    def test_empty_graph_is_valid(self):
        g = build_graph(builtin_qr_spec(), 1, 1)
        dot = emit_dot(g)
        assert dot.startswith("digraph dataflow {")
        assert dot.rstrip().endswith("}")
        assert "->" not in dot


class TestStats:
    def test_counts_at_4x4(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        stats = graph_stats(g)
        assert stats["x_nodes"] == 6
        assert stats["y_nodes"] == 20
        assert stats["cs_edges"] == 20  # one logical pair per update node

    def test_all_zero_for_1x1(self):
        stats = graph_stats(build_graph(builtin_qr_spec(), 1, 1))
        assert all(v == 0 for v in stats.values())

    def test_critical_path_brute_force(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        succs = {node: [] for node in g.nodes}
        for e in g.edges:
            if isinstance(e.source, ProducerSource):
                succs[e.source.node].append(e.sink)
        memo = {}

        def longest(node):
            if node not in memo:
                memo[node] = 1 + max((longest(s) for s in succs[node]), default=0)
            return memo[node]

        expected = max(longest(node) for node in g.nodes)
        assert graph_stats(g)["critical_path_length"] == expected

    def test_json_dump_deterministic(self):
        g = build_graph(builtin_qr_spec(), 4, 4)
        assert graph_to_json(g) == graph_to_json(build_graph(builtin_qr_spec(), 4, 4))


class TestRelayView:
    def test_head_keeps_direct_edge(self):
        g = relay_view(build_graph(builtin_qr_spec(), 4, 4))
        node = IterNode("Y", (1, 4, 2))
        cs = [e for e in g.in_edges[node] if e.pattern == "cs"]
        assert len(cs) == 1
        assert cs[0].source == ProducerSource(IterNode("X", (1, 4)), None)

    def test_interior_takes_neighbour(self):
        g = relay_view(build_graph(builtin_qr_spec(), 4, 4))
        node = IterNode("Y", (1, 4, 3))
        cs = [e for e in g.in_edges[node] if e.pattern == "cs"]
        assert cs[0].source == ProducerSource(IterNode("Y", (1, 4, 2)), None)

    def test_update_in_degree_drops_to_three(self):
        g = relay_view(build_graph(builtin_qr_spec(), 4, 4))
        for node in g.nodes:
            if node.func == "Y":
                assert len(g.in_edges[node]) == 3


class TestGraphEvaluation:
    @pytest.mark.parametrize("m,n", [(4, 4), (6, 4), (8, 8), (2, 2), (5, 1), (3, 5)])
    def test_bitwise_match_with_reference(self, m, n):
        for seed in range(3):
            aug = make_aug(m, n, seed)
            expected = qr_givens_reference(aug).r_aug
            g = build_graph(builtin_qr_spec(), m, n)
            actual = evaluate_graph(g, aug)
            assert actual.inner.data == expected.inner.data

    def test_input_snapshot_not_mutated(self):
        aug = make_aug(4, 4)
        before = list(aug.inner.data)
        evaluate_graph(build_graph(builtin_qr_spec(), 4, 4), aug)
        assert aug.inner.data == before
