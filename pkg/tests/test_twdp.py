import math
import random
from itertools import product

import pytest

from config import Config
from models.decomposition import BagPartition, DecompositionException, NodeKind, parse_td
from models.instance import TrivialAnswerException, Variant, normalize
from models.outcome import Answer
from services.exceptions import BudgetExceededException
from services.partitions import restricted_growth_strings
from services.solver import MODE_DOUBLE, brute_force, verify_defense
from services.twdp import (
    TreeDecompositionSolver, build_decomposition, decomposition_from_td, dp_solve, partition_cut_capacity,
    traceback_defense,
)
from tests.conftest import make_instance
from tests.factories import random_instance, random_variant_instance


def _without_st_edge(inst):
    return inst.with_changes(edges=tuple(e for e in inst.edges if {e.u, e.v} != {inst.s, inst.t}))


def _parallel_paths(rng, middles=4, variant=Variant.WMCP, max_a=2):
    """G - {s,t} 无边：每个中间顶点各连 s 与 t"""
    low = 0 if variant == Variant.ZWMCP else 1
    edges = []
    for i in range(middles):
        for end in ('s', 't'):
            edges.append((end, f"x{i}", rng.randint(1, 3), rng.randint(low, 2)))
    return make_instance(edges, d=rng.randint(0, 4), a=rng.randint(0, max_a), variant=variant)


@pytest.fixture
def long_path():
    return make_instance([('s', 'v1'), ('v1', 'v2'), ('v2', 't')], d=3, a=1, variant=Variant.MCP)


def test_partition_cut_capacity_examples():
    inst = make_instance([('s', 'v', 1, 1), ('v', 't', 1, 2)], d=1, a=1)
    bag = ['s', 't', 'v']
    assert partition_cut_capacity(inst, bag, BagPartition.of([bag])) == 0
    assert partition_cut_capacity(inst, bag, BagPartition.of([('s',), ('v', 't')])) == 1
    assert partition_cut_capacity(inst, ['s', 't'], BagPartition.of([('s',), ('t',)])) == 0


def test_build_decomposition_path(long_path):
    for strategy in ('auto', 'min_degree', 'min_fill', 'path'):
        decomposition = build_decomposition(long_path, strategy)
        decomposition.validate(long_path)
        assert decomposition.width <= 3
        assert decomposition.nodes[decomposition.root].bag == {'s', 't'}


def test_build_decomposition_star():
    inst = _parallel_paths(random.Random(0))
    decomposition = build_decomposition(inst, 'min_degree')
    decomposition.validate(inst)
    assert decomposition.width == 2
    assert decomposition.max_join_bag == 3
    assert any(node.kind == NodeKind.JOIN for node in decomposition.nodes.values())
    assert build_decomposition(inst).strategy == 'min_degree'


def test_build_decomposition_only_terminals():
    inst = make_instance([], d=0, a=0, extra_vertices=())
    decomposition = build_decomposition(inst)
    assert decomposition.width == 1
    assert len(decomposition.nodes) == 1


def test_build_decomposition_unknown_strategy(long_path):
    with pytest.raises(ValueError):
        build_decomposition(long_path, 'exact')


# 顶点编号：s=1, t=2, v1=3, v2=4
@pytest.mark.parametrize('text, message', [
    ("s td 1 1 4\nb 1 3\n", 'vertex cover'),
    ("s td 2 1 4\nb 1 3\nb 2 4\n1 2\n", 'edge cover'),
    ("s td 3 2 4\nb 1 3\nb 2 4\nb 3 3 4\n1 2\n2 3\n", 'connectivity'),
    ("s td 2 2 4\nb 1 3 4\nb 2 3\n", 'tree'),
    ("s td 1 2 5\nb 1 3 4\n", 'vertex count'),
    ("s td 1 2 4\nb 1 3 9\n", 'vertex cover'),
])
def test_td_validation_names_property(long_path, text, message):
    with pytest.raises(DecompositionException, match=message):
        decomposition_from_td(long_path, parse_td(text))


def test_td_accepted_and_solved(long_path):
    decomposition = decomposition_from_td(long_path, parse_td("c path\ns td 1 2 4\nb 1 3 4\n"))
    decomposition.validate(long_path)
    outcome = dp_solve(long_path, decomposition)
    assert outcome.answer == Answer.YES
    assert verify_defense(long_path, outcome.defense)


def test_td_round_trip(long_path):
    decomposition = build_decomposition(long_path)
    again = decomposition_from_td(long_path, parse_td(decomposition.to_td(long_path)))
    again.validate(long_path)
    assert dp_solve(long_path, again).answer == dp_solve(long_path, decomposition).answer


def test_parse_td_errors():
    with pytest.raises(DecompositionException):
        parse_td("b 1 2\n")
    with pytest.raises(DecompositionException):
        parse_td("s td 2 1 2\nb 1 1\n")
    with pytest.raises(DecompositionException):
        parse_td("s td 1 1 2\nb 1 x\n")


@pytest.mark.parametrize('text', [
    "s td 1 3 4\nb 1 3 4\n",
    "s td 2 1 4\nb 1 3 4\nb 2 3\n1 2\n",
])
def test_parse_td_checks_declared_bag_size(text):
    with pytest.raises(DecompositionException, match='最大 bag'):
        parse_td(text)


def test_dp_examples(path_instance, diamond):
    outcome = dp_solve(path_instance)
    assert outcome.answer == Answer.YES
    assert outcome.defense.total_cost == 2
    assert verify_defense(path_instance, outcome.defense)
    assert outcome.stats['table_entries'] > 0

    assert dp_solve(diamond.with_changes(d=1)).answer == Answer.NO
    relaxed = dp_solve(diamond.with_changes(a=1, d=0))
    assert relaxed.answer == Answer.YES
    assert len(relaxed.defense) == 0


def test_dp_zero_capacity_star():
    inst = make_instance([('s', 'u', 1, 0), ('u', 't', 1, 0)], d=1, a=0, variant=Variant.ZWMCP)
    assert dp_solve(inst).answer == Answer.NO
    outcome = dp_solve(inst.with_changes(d=2))
    assert outcome.answer == Answer.YES
    assert outcome.defense.sorted_edges() == [('s', 'u'), ('t', 'u')]


def test_dp_st_edge_preamble():
    cheap = make_instance([('s', 't', 1, 1), ('s', 'v', 1, 1), ('v', 't', 1, 1)], d=1, a=1)
    outcome = dp_solve(cheap)
    assert outcome.answer == Answer.YES
    assert outcome.defense.sorted_edges() == [('s', 't')]

    heavy = make_instance([('s', 't', 5, 3), ('s', 'v', 1, 1), ('v', 't', 1, 1)], d=1, a=2)
    outcome = dp_solve(heavy)
    assert outcome.answer == Answer.YES
    assert len(outcome.defense) == 0

    lonely = make_instance([('s', 't', 5, 1)], d=1, a=1)
    assert dp_solve(lonely).answer == Answer.NO


def test_dp_width_limits(long_path):
    with pytest.raises(DecompositionException):
        dp_solve(long_path, max_width=1)
    with pytest.raises(DecompositionException):
        dp_solve(long_path, config=Config(twdp_max_bag=2))


def test_solver_rejects_bad_arguments(path_instance):
    decomposition = build_decomposition(path_instance)
    with pytest.raises(ValueError):
        TreeDecompositionSolver(path_instance, decomposition, clamp=path_instance.a)
    with_st = make_instance([('s', 't'), ('s', 'v'), ('v', 't')], d=1, a=1)
    with pytest.raises(ValueError):
        TreeDecompositionSolver(with_st, build_decomposition(with_st))


def test_join_combination_budget():
    inst = _parallel_paths(random.Random(1)).with_changes(a=2, d=1)
    config = Config(twdp_max_join_combinations=1)
    with pytest.raises(BudgetExceededException):
        dp_solve(inst, config=config, prune_join=False, strategy='min_degree')


def test_traceback_function_matches_root_value(path_instance):
    solver = TreeDecompositionSolver(path_instance, build_decomposition(path_instance))
    outcome = solver.solve()
    defense = traceback_defense(solver)
    assert defense == outcome.defense
    assert defense.total_cost == solver.value(*solver.root_key())


def _brute_entry(inst, decomposition, node_id, partition, value, protected):
    """G_x 中 D ∩ E(bag) = D_x、所有避开 D 的 P-划分割容量 ≥ value 的最小代价"""
    node = decomposition.nodes[node_id]
    inner_vertices = sorted(decomposition.subtree_vertices(node_id) - node.bag)
    inside = decomposition.subtree_vertices(node_id)
    edges = [e for e in inst.edges if e.u in inside and e.v in inside]
    free = [e for e in edges if not (e.u in node.bag and e.v in node.bag)]

    cuts = []
    for labels in product(range(len(partition.blocks)), repeat=len(inner_vertices)):
        label = {v: partition.block_index(v) for v in node.bag}
        label.update(zip(inner_vertices, labels))
        crossing = {e.key for e in edges if label[e.u] != label[e.v]}
        cuts.append((crossing, sum(e.capacity for e in edges if e.key in crossing)))

    base_cost = inst.cost_of(protected)
    best = math.inf
    for mask in range(1 << len(free)):
        chosen = set(protected) | {free[k].key for k in range(len(free)) if mask >> k & 1}
        cost = base_cost + sum(free[k].cost for k in range(len(free)) if mask >> k & 1)
        if cost >= best:
            continue
        if all(capacity >= value or crossing & chosen for crossing, capacity in cuts):
            best = cost
    return best


def test_table_entry_semantics():
    rng = random.Random(61)
    checked = 0
    for _ in range(25):
        inst = _without_st_edge(random_variant_instance(rng, n_max=5, extra_edges=3))
        decomposition = build_decomposition(inst)
        solver = TreeDecompositionSolver(inst, decomposition)
        for node_id in rng.sample(sorted(decomposition.nodes), min(4, len(decomposition.nodes))):
            node = decomposition.nodes[node_id]
            order = sorted(node.bag)
            partition = BagPartition.from_rgs(order, rng.choice(list(restricted_growth_strings(len(order)))))
            value = rng.randint(1, inst.a + 1)
            bag_edges = [e.key for e in inst.edges if e.u in node.bag and e.v in node.bag]
            protected = [key for key in bag_edges if rng.random() < 0.3]
            expected = _brute_entry(inst, decomposition, node_id, partition, value, protected)
            assert solver.table_entry(node_id, {partition: value}, protected) == expected
            checked += 1
    assert checked >= 20


def test_dp_agrees_with_brute_force():
    rng = random.Random(67)
    for _ in range(100):
        inst = normalize(random_variant_instance(rng, n_max=7, extra_edges=2))
        oracle = brute_force(inst, MODE_DOUBLE)
        outcome = dp_solve(inst)
        assert outcome.answer == oracle.answer
        if outcome.is_yes:
            assert verify_defense(inst, outcome.defense)


def test_traceback_cost_is_minimum_on_zero_capacity_instances():
    rng = random.Random(71)
    for _ in range(100):
        try:
            inst = normalize(_without_st_edge(
                random_instance(rng, n_min=4, n_max=7, extra_edges=2, variant=Variant.ZWMCP)
            ))
        except TrivialAnswerException:
            continue
        oracle = brute_force(inst, MODE_DOUBLE)
        outcome = dp_solve(inst)
        assert outcome.answer == oracle.answer
        if outcome.is_yes:
            assert outcome.defense.total_cost == oracle.defense.total_cost
            assert verify_defense(inst, outcome.defense)


def test_clamp_does_not_change_answers():
    rng = random.Random(73)
    for _ in range(40):
        inst = normalize(random_variant_instance(rng, n_max=6, extra_edges=2))
        assert dp_solve(inst, clamp=inst.a + 3).answer == dp_solve(inst).answer


def test_pruned_join_matches_uncapped():
    rng = random.Random(79)
    for _ in range(15):
        inst = _parallel_paths(rng, variant=rng.choice([Variant.WMCP, Variant.ZWMCP]))
        pruned = dp_solve(inst, prune_join=True, strategy='min_degree')
        uncapped = dp_solve(inst, prune_join=False, strategy='min_degree')
        assert pruned.answer == uncapped.answer == brute_force(inst, MODE_DOUBLE).answer
