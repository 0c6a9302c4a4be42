import json
import random

import networkx as nx
import pytest

from models.instance import TrivialAnswerException, Variant, normalize, parse
from models.outcome import Answer
from services.generator import (
    GeneratorException, GeneratorService, binpacking_defense, binpacking_scale, gen_biclique_zwmcp,
    gen_binpacking, gen_knapsack, gen_regular_is, knapsack_defense,
)
from services.kernel import min_vertex_cover
from services.solver import MODE_DOUBLE, brute_force, search_tree, verify_defense

FOUR_ITEM_SIZES = [4, 1, 3, 4]


def solve(inst):
    """小实例用双重暴力，其余 WMCP 实例用搜索树"""
    try:
        inst = normalize(inst)
    except TrivialAnswerException as e:
        return e.answer
    if inst.m <= 12:
        return brute_force(inst, MODE_DOUBLE).answer
    return search_tree(inst).answer


@pytest.mark.parametrize('graph, k, expected', [
    (nx.complete_graph(3), 1, Answer.YES),
    (nx.complete_graph(3), 2, Answer.NO),
    (nx.cycle_graph(4), 2, Answer.YES),
])
def test_regular_is_examples(graph, k, expected):
    generated = GeneratorService().regular_is(graph, k)
    assert generated.expected == expected
    assert solve(generated.instance) == expected


def test_regular_is_parameters():
    inst = gen_regular_is(nx.complete_graph(3), 1)
    assert (inst.d, inst.a) == (1, 4)
    assert inst.n == 2 + 3 * 2 + 3
    assert nx.is_bipartite(inst.graph())


def test_regular_is_rejects_bad_sources():
    with pytest.raises(GeneratorException):
        gen_regular_is(nx.path_graph(3), 1)
    with pytest.raises(GeneratorException):
        gen_regular_is(nx.complete_graph(3), -1)


def test_knapsack_examples():
    inst = gen_knapsack([2, 3], [5, 4], 2, 5)
    assert (inst.d, inst.a) == (2, 6)
    assert solve(inst) == Answer.YES
    assert verify_defense(inst, knapsack_defense(inst, [0]))
    assert solve(gen_knapsack([2, 3], [5, 4], 1, 5)) == Answer.NO
    empty = GeneratorService().knapsack([2, 3], [5, 4], 0, 0)
    assert empty.expected == Answer.YES
    assert solve(empty.instance) == Answer.YES


def test_knapsack_structure():
    inst = gen_knapsack([1, 2, 3], [3, 2, 1], 3, 4)
    assert len(min_vertex_cover(inst.graph())) <= 2
    assert inst.edge('t', 'u1').capacity == 4
    assert inst.edge('s', 'u3').cost == 3


def test_knapsack_rejects_bad_sources():
    with pytest.raises(GeneratorException):
        gen_knapsack([], [], 1, 1)
    with pytest.raises(GeneratorException):
        gen_knapsack([1, 2], [1], 1, 1)
    with pytest.raises(GeneratorException):
        gen_knapsack([0], [1], 1, 1)


def test_binpacking_four_items_three_bins():
    generated = GeneratorService().binpacking(FOUR_ITEM_SIZES, 4, 3)
    inst = generated.instance
    scale = binpacking_scale(FOUR_ITEM_SIZES, 4)
    assert scale == 32
    assert (inst.d, inst.a) == (4, 364)
    assert [inst.edge('s', f"u{i}").capacity for i in range(1, 5)] == [4 * scale, scale, 3 * scale, 4 * scale]
    assert generated.metadata['parameters']['lambda'] == 32
    assert generated.expected == Answer.YES
    assert verify_defense(inst, binpacking_defense(inst, [0, 1, 1, 2]))


def test_binpacking_structure():
    inst = gen_binpacking(FOUR_ITEM_SIZES, 4, 3)
    assert inst.m == 4 * 5
    cover = {'s', 'b1', 'b2', 'b3'}
    assert all(e.u in cover or e.v in cover for e in inst.edges)
    assert nx.is_bipartite(inst.graph())


@pytest.mark.parametrize('sizes, capacity, bins, expected', [
    ([2, 2], 2, 2, Answer.YES),
    ([3, 1], 2, 2, Answer.NO),
])
def test_binpacking_examples(sizes, capacity, bins, expected):
    generated = GeneratorService().binpacking(sizes, capacity, bins)
    assert generated.expected == expected
    assert solve(generated.instance) == expected


def test_binpacking_unequal_total_still_emitted():
    generated = GeneratorService().binpacking([1, 1], 2, 2)
    assert generated.metadata['equivalent'] is False
    assert generated.expected == Answer.NO


@pytest.mark.parametrize('left, right, edges, k, expected', [
    ([1], [1], [(1, 1)], 1, Answer.YES),
    ([1, 2], [1, 2], [(1, 1), (2, 2)], 2, Answer.NO),
    ([1, 2], [1, 2], [(1, 1), (1, 2), (2, 1), (2, 2)], 2, Answer.YES),
])
def test_biclique_examples(left, right, edges, k, expected):
    generated = GeneratorService().biclique(left, right, edges, k)
    assert generated.expected == expected
    assert generated.instance.variant == Variant.ZWMCP
    assert solve(generated.instance) == expected
    if expected == Answer.YES:
        witness = [tuple(pair) for pair in generated.metadata['witness']]
        assert verify_defense(generated.instance, witness)


def test_biclique_parameters():
    inst = gen_biclique_zwmcp([1], [1], [(1, 1)], 1)
    assert (inst.d, inst.a, inst.n) == (5, 0, 5)
    assert gen_biclique_zwmcp([1, 2], [1, 2], [(1, 1)], 2).d == 24


def test_biclique_rejects_bad_sources():
    with pytest.raises(GeneratorException):
        gen_biclique_zwmcp([1], [1], [(1, 5)], 1)
    with pytest.raises(GeneratorException):
        gen_biclique_zwmcp([1], [1], [(1, 1)], 0)


def test_metadata_round_trip():
    generated = GeneratorService(seed=5).random('knapsack')
    data = generated.to_dict()
    assert data['metadata']['seed'] == 5
    assert data['metadata']['family'] == 'knapsack'
    assert parse(json.dumps(data)) == generated.instance


def test_seeded_generation_is_deterministic():
    first = GeneratorService(seed=9).random('biclique')
    second = GeneratorService(seed=9).random('biclique')
    assert first.instance == second.instance


def test_unknown_family():
    with pytest.raises(GeneratorException):
        GeneratorService(seed=1).random('clique')


def test_random_regular_is_sources():
    service = GeneratorService(seed=101)
    rng = random.Random(101)
    for _ in range(50):
        n = rng.randint(2, 4)
        r = rng.choice([r for r in range(min(2, n - 1) + 1) if n * r % 2 == 0])
        graph = nx.random_regular_graph(r, n, seed=rng.randrange(2 ** 31))
        generated = service.regular_is(graph, rng.randint(0, 2))
        assert nx.is_bipartite(generated.instance.graph())
        assert solve(generated.instance) == generated.expected


def test_random_knapsack_sources():
    service = GeneratorService(seed=103)
    for _ in range(50):
        generated = service.random_knapsack(max_items=4)
        assert len(min_vertex_cover(generated.instance.graph())) <= 2
        assert solve(generated.instance) == generated.expected


def test_random_binpacking_sources():
    service = GeneratorService(seed=107)
    for _ in range(50):
        generated = service.random_binpacking(max_items=3, max_bins=2)
        assert generated.metadata['equivalent']
        assert solve(generated.instance) == generated.expected


def test_random_biclique_sources():
    service = GeneratorService(seed=109)
    for _ in range(50):
        generated = service.random_biclique(max_side=2)
        assert solve(generated.instance) == generated.expected
