import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import has_cycle, longest_path_levels
from rcl.errors import CausalityCycleError
from rcl.graph import ReactionGraph, assign_levels, detect_cycles, dispatch_key, edges_respected, to_dot

LOOP = """
main reactor {{
  a = new R()
  b = new R()
  a.y -> b.x{delay}
  b.y -> a.x
}}
reactor R {{
  input x: int
  output y: int
  reaction(x) -> y {{= set(y, x) =}}
}}
"""


def random_dag(rng: random.Random, n: int, p: float) -> ReactionGraph:
    nodes = [f"r{i:02d}" for i in range(n)]
    order = nodes[:]
    rng.shuffle(order)  # topological order unrelated to names
    edges = {(order[i], order[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < p}
    return ReactionGraph(nodes=nodes, edges=edges)


def simple_cycles_oracle(nodes, edges):
    """Every elementary cycle by trying all node sequences; tiny graphs only."""
    found = set()
    for k in range(1, len(nodes) + 1):
        for seq in itertools.permutations(nodes, k):
            if seq[0] != min(seq):
                continue
            if all((seq[i], seq[(i + 1) % k]) in edges for i in range(k)):
                found.add(seq)
    return sorted(list(c) for c in found)


def test_vision_edges(vision):
    g = vision.graph
    assert ("vision.camera.reaction1", "vision.detect.reaction1") in g.edges
    assert ("robot.pedal.reaction1", "robot.pedal.reaction2") in g.edges
    assert ("vision.detect.reaction1", "robot.stop.reaction2") not in g.edges
    assert g.delayed[("vision.detect.reaction1", "robot.stop.reaction2")] == 10_000_000
    assert detect_cycles(g) == []


def test_vision_levels_match_oracle(vision):
    g = vision.graph
    assert vision.levels == longest_path_levels(g.nodes, g.edges)
    assert vision.levels["vision.camera.reaction1"] == 0
    assert vision.levels["vision.detect.reaction1"] == 1


def test_chain_levels():
    g = ReactionGraph(nodes=["a", "b", "c"], edges={("a", "b"), ("b", "c")})
    assert assign_levels(g) == {"a": 0, "b": 1, "c": 2}


def test_delay_free_loop_rejected(compile_text):
    with pytest.raises(CausalityCycleError) as e:
        compile_text(LOOP.format(delay=""))
    assert e.value.cycles == [["a.reaction1", "b.reaction1"]]
    assert "causality cycle: a.reaction1 -> b.reaction1 -> a.reaction1" in str(e.value)


def test_after_delay_breaks_loop(compile_text):
    p = compile_text(LOOP.format(delay=" after 1 ms"))
    assert detect_cycles(p.graph) == []
    assert not has_cycle(p.graph.nodes, p.graph.edges)


def test_zero_delay_also_breaks_loop(compile_text):
    p = compile_text(LOOP.format(delay=" after 0"))
    assert detect_cycles(p.graph) == []


def test_assign_levels_rejects_cycles():
    g = ReactionGraph(nodes=["a", "b"], edges={("a", "b"), ("b", "a")})
    with pytest.raises(CausalityCycleError):
        assign_levels(g)


def test_dot_output(vision):
    dot = to_dot(vision.graph, vision.levels)
    assert '"robot.stop.reaction1 (level=2, deadline=3 ms)"' in dot
    assert '"vision.camera.reaction1" -> "vision.detect.reaction1";' in dot
    assert '[style=dashed, label="10 ms"]' in dot


def test_dispatch_prefers_nearer_deadline():
    keys = sorted([dispatch_key("b", None), dispatch_key("z", 3), dispatch_key("a", 10), dispatch_key("a", None)])
    assert [k[1] for k in keys] == ["z", "a", "a", "b"]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 12), st.floats(0.0, 0.6))
def test_levels_equal_longest_path(seed, n, p):
    g = random_dag(random.Random(seed), n, p)
    levels = assign_levels(g)
    assert levels == longest_path_levels(g.nodes, g.edges)
    assert edges_respected(g, levels)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 6), st.floats(0.0, 0.7))
def test_cycles_match_oracles(seed, n, p):
    rng = random.Random(seed)
    nodes = [f"n{i}" for i in range(n)]
    edges = {(a, b) for a in nodes for b in nodes if rng.random() < p}
    g = ReactionGraph(nodes=nodes, edges=edges)
    cycles = detect_cycles(g, limit=10**6)
    assert bool(cycles) == has_cycle(nodes, edges)
    assert cycles == simple_cycles_oracle(nodes, edges)
    capped = detect_cycles(g, limit=3)
    assert len(capped) == min(3, len(cycles)) and all(c in cycles for c in capped)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_delayed_edges_never_in_graph(seed):
    # every delayed connection in a random pipeline is absent from the edge set
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    lines = [f"  r{i} = new R()" for i in range(n)]
    delayed = set()
    for i in range(n - 1):
        if rng.random() < 0.5:
            lines.append(f"  r{i}.y -> r{i + 1}.x after {rng.randint(0, 3)} ms")
            delayed.add((f"r{i}.reaction1", f"r{i + 1}.reaction1"))
        else:
            lines.append(f"  r{i}.y -> r{i + 1}.x")
    from rcl.compiler import compile_source
    text = "main reactor {\n" + "\n".join(lines) + "\n}\n" + \
        "reactor R {\n input x: int\n output y: int\n reaction(x) -> y {= set(y, x) =}\n}"
    g = compile_source(text).graph
    assert not (delayed & g.edges)
    assert set(g.delayed) == delayed
