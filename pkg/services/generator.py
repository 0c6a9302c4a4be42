import logging
import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from models.certificate import DefenseSet
from models.instance import Edge, Instance, Variant, edge_key
from models.outcome import Answer

logger = logging.getLogger(__name__)

FAMILIES = ('is', 'knapsack', 'binpacking', 'biclique')


class GeneratorException(Exception):
    """源实例不满足构造的前提"""
    pass


@dataclass
class GeneratedInstance:
    """生成的实例及其元数据（源实例、已知答案、参数）"""
    family: str
    instance: Instance
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def expected(self) -> Optional[Answer]:
        value = self.metadata.get('expected')
        return Answer(value) if value is not None else None

    def to_dict(self) -> Dict[str, Any]:
        data = self.instance.to_dict()
        data['metadata'] = self.metadata
        return data


# ---- 正则独立集 ----

def _is_name(v: Hashable) -> str:
    return f"v{v}"


def _is_edge_name(u: Hashable, v: Hashable) -> str:
    a, b = sorted((str(u), str(v)))
    return f"w{a}-{b}"


def gen_regular_is(graph: nx.Graph, k: int) -> Instance:
    """r-正则图的独立集 -> WMCP（二部图，只有与 s 相连的边可保护）"""
    degrees = {d for _, d in graph.degree()}
    if len(degrees) > 1:
        raise GeneratorException(f"图不是正则图，度数: {sorted(degrees)}")
    if k < 0:
        raise GeneratorException(f"k 不能为负: {k}")
    r = degrees.pop() if degrees else 0
    n = graph.number_of_nodes()

    vertices = ['s', 't']
    edges: List[Edge] = []
    expensive = k + 1
    for v in graph.nodes:
        name = _is_name(v)
        vertices += [name, f"{name}'"]
        edges += [Edge('s', name, 1, 1), Edge(name, f"{name}'", expensive, 1), Edge(f"{name}'", 't', expensive, 1)]
    for u, v in graph.edges:
        w = _is_edge_name(u, v)
        vertices.append(w)
        edges += [Edge(_is_name(u), w, expensive, 1), Edge(_is_name(v), w, expensive, 1), Edge(w, 't', expensive, 1)]
    return Instance(vertices=tuple(vertices), edges=tuple(edges), s='s', t='t',
                    d=k, a=n + k * r - 1, variant=Variant.WMCP)


def independent_set_witness(graph: nx.Graph, k: int) -> Optional[List[Hashable]]:
    """大小为 k 的独立集（枚举）；不存在时返回 None"""
    for subset in combinations(sorted(graph.nodes, key=str), k):
        if not any(graph.has_edge(u, v) for u, v in combinations(subset, 2)):
            return list(subset)
    return None


def regular_is_defense(inst: Instance, independent: Iterable[Hashable]) -> DefenseSet:
    """独立集 S -> 防御 {{s,v} | v ∈ S}"""
    chosen = sorted(independent, key=str)[:inst.d]
    return DefenseSet.of(inst, [('s', _is_name(v)) for v in chosen])


# ---- 背包 ----

def _item(i: int) -> str:
    return f"u{i + 1}"


def gen_knapsack(sizes: Sequence[int], values: Sequence[int], budget: int, target: int) -> Instance:
    """背包 -> WMCP，{s,t} 是大小为 2 的顶点覆盖"""
    if len(sizes) != len(values):
        raise GeneratorException("物品大小与价值的数量不一致")
    if not sizes:
        raise GeneratorException("至少需要一个物品")
    if any(f < 1 for f in sizes) or any(g < 1 for g in values):
        raise GeneratorException("物品大小与价值必须为正整数")
    if budget < 0 or target < 0:
        raise GeneratorException("背包预算与目标价值不能为负")

    d = budget
    vertices = ['s', 't'] + [_item(i) for i in range(len(sizes))]
    edges: List[Edge] = []
    for i, (f, g) in enumerate(zip(sizes, values)):
        edges.append(Edge('s', _item(i), f, 1))
        edges.append(Edge(_item(i), 't', d + 1, g + 1))
    return Instance(vertices=tuple(vertices), edges=tuple(edges), s='s', t='t',
                    d=d, a=len(sizes) + target - 1, variant=Variant.WMCP)


def knapsack_witness(sizes: Sequence[int], values: Sequence[int], budget: int,
                     target: int) -> Optional[List[int]]:
    """总大小 ≤ budget 且总价值 ≥ target 的物品下标集合"""
    indices = range(len(sizes))
    for size in range(len(sizes) + 1):
        for subset in combinations(indices, size):
            if sum(sizes[i] for i in subset) <= budget and sum(values[i] for i in subset) >= target:
                return list(subset)
    return None


def knapsack_defense(inst: Instance, selection: Iterable[int]) -> DefenseSet:
    return DefenseSet.of(inst, [('s', _item(i)) for i in selection])


# ---- 装箱 ----

def _bin(j: int) -> str:
    return f"b{j + 1}"


def binpacking_scale(sizes: Sequence[int], capacity: int) -> int:
    """λ = 2·B·|U|"""
    return 2 * capacity * len(sizes)


def gen_binpacking(sizes: Sequence[int], capacity: int, bins: int) -> Instance:
    """装箱 -> WMCP，图是 ({s} ∪ 箱子, {t} ∪ 物品) 上的完全二部图"""
    if not sizes:
        raise GeneratorException("至少需要一个物品")
    if any(f < 1 for f in sizes) or capacity < 1 or bins < 1:
        raise GeneratorException("物品大小、箱子容量与箱子数必须为正整数")
    if sum(sizes) != capacity * bins:
        logger.warning(f"物品总大小 {sum(sizes)} ≠ B·k = {capacity * bins}，源实例平凡为 NO")

    scale = binpacking_scale(sizes, capacity)
    d = len(sizes)
    left = ['s'] + [_bin(j) for j in range(bins)]
    right = ['t'] + [_item(i) for i in range(len(sizes))]
    edges: List[Edge] = []
    for x in left:
        for y in right:
            if x != 's' and y != 't':
                edges.append(Edge(x, y, 1, 1))
            elif x == 's' and y != 't':
                edges.append(Edge(x, y, d + 1, scale * sizes[int(y[1:]) - 1]))
            elif x != 's' and y == 't':
                edges.append(Edge(x, y, d + 1, scale * capacity))
            else:
                edges.append(Edge(x, y, d + 1, 1))
    a = len(sizes) * bins + scale * (capacity * bins - 1)
    return Instance(vertices=tuple(left + right), edges=tuple(edges), s='s', t='t',
                    d=d, a=a, variant=Variant.WMCP)


def binpacking_witness(sizes: Sequence[int], capacity: int, bins: int) -> Optional[List[int]]:
    """每个箱子恰好装满 capacity 的分配（物品 -> 箱子下标）"""
    if sum(sizes) != capacity * bins:
        return None
    order = sorted(range(len(sizes)), key=lambda i: -sizes[i])
    load = [0] * bins
    assignment = [0] * len(sizes)

    def place(pos: int) -> bool:
        if pos == len(order):
            return all(x == capacity for x in load)
        item = order[pos]
        tried = set()
        for j in range(bins):
            # 负载相同的箱子只试一个
            if load[j] in tried or load[j] + sizes[item] > capacity:
                continue
            tried.add(load[j])
            load[j] += sizes[item]
            assignment[item] = j
            if place(pos + 1):
                return True
            load[j] -= sizes[item]
        return False

    return assignment if place(0) else None


def binpacking_defense(inst: Instance, assignment: Sequence[int]) -> DefenseSet:
    return DefenseSet.of(inst, [(_item(i), _bin(j)) for i, j in enumerate(assignment)])


# ---- Biclique ----

def _left(x: Hashable) -> str:
    return f"x{x}"


def _right(y: Hashable) -> str:
    return f"y{y}"


def _middle(x: Hashable, y: Hashable) -> str:
    return f"w{x}-{y}"


def _bipartite_pairs(left: Sequence[Hashable], right: Sequence[Hashable],
                     edges: Iterable[Tuple[Hashable, Hashable]]) -> List[Tuple[Hashable, Hashable]]:
    # 边按 (X 侧端点, Y 侧端点) 给出
    left_set, right_set = set(left), set(right)
    pairs = []
    for x, y in edges:
        if x not in left_set or y not in right_set:
            raise GeneratorException(f"边 {x}-{y} 不跨越两侧，输入不是二部图")
        pairs.append((x, y))
    return sorted(set(pairs), key=lambda pair: (str(pair[0]), str(pair[1])))


def gen_biclique_zwmcp(left: Sequence[Hashable], right: Sequence[Hashable],
                       edges: Iterable[Tuple[Hashable, Hashable]], k: int) -> Instance:
    """(k,k)-Biclique -> ZWMCP：细分每条边，加入零容量的边缘边"""
    if k < 1:
        raise GeneratorException(f"k 必须 ≥ 1: {k}")
    pairs = _bipartite_pairs(left, right, edges)
    d = (2 * k + 1) * k * k + 2 * k
    vertices = ['s', 't'] + [_left(x) for x in left] + [_right(y) for y in right]
    instance_edges = [Edge('s', _left(x), 1, 0) for x in left] + [Edge(_right(y), 't', 1, 0) for y in right]
    for x, y in pairs:
        w = _middle(x, y)
        vertices.append(w)
        instance_edges.append(Edge(_left(x), w, d + 1, 1))
        instance_edges.append(Edge(w, _right(y), 2 * k + 1, 0))
    return Instance(vertices=tuple(vertices), edges=tuple(instance_edges), s='s', t='t',
                    d=d, a=k * k - 1, variant=Variant.ZWMCP)


def biclique_witness(left: Sequence[Hashable], right: Sequence[Hashable],
                     edges: Iterable[Tuple[Hashable, Hashable]], k: int) -> Optional[Tuple[List, List]]:
    """(k,k)-biclique (S_X, S_Y)；不存在时返回 None"""
    pairs = set(_bipartite_pairs(left, right, edges))
    for side in combinations(sorted(left, key=str), k):
        common = [y for y in sorted(right, key=str) if all((x, y) in pairs for x in side)]
        if len(common) >= k:
            return list(side), common[:k]
    return None


def biclique_defense(inst: Instance, side_x: Sequence[Hashable], side_y: Sequence[Hashable]) -> DefenseSet:
    keys = [edge_key(_middle(x, y), _right(y)) for x in side_x for y in side_y]
    keys += [('s', _left(x)) for x in side_x] + [(_right(y), 't') for y in side_y]
    return DefenseSet.of(inst, keys)


class GeneratorService:
    """生成带元数据的实例；随机模式下源实例由枚举求解"""

    def __init__(self, seed: Optional[int] = None):
        self.rng = random.Random(seed)
        self.seed = seed
        self.logger = logging.getLogger(__name__)

    def regular_is(self, graph: nx.Graph, k: int) -> GeneratedInstance:
        inst = gen_regular_is(graph, k)
        witness = independent_set_witness(graph, k)
        metadata = {
            'family': 'is',
            'source': {'vertices': [str(v) for v in graph.nodes],
                       'edges': [[str(u), str(v)] for u, v in graph.edges], 'k': k},
            'expected': Answer.of(witness is not None).value,
            'parameters': {'d': inst.d, 'a': inst.a},
        }
        if witness is not None:
            metadata['witness'] = regular_is_defense(inst, witness).to_json()
        return self._emit('is', inst, metadata)

    def knapsack(self, sizes: Sequence[int], values: Sequence[int], budget: int, target: int) -> GeneratedInstance:
        inst = gen_knapsack(sizes, values, budget, target)
        witness = knapsack_witness(sizes, values, budget, target)
        metadata = {
            'family': 'knapsack',
            'source': {'sizes': list(sizes), 'values': list(values), 'B': budget, 'C': target},
            'expected': Answer.of(witness is not None).value,
            'parameters': {'d': inst.d, 'a': inst.a},
        }
        if witness is not None:
            metadata['witness'] = knapsack_defense(inst, witness).to_json()
        return self._emit('knapsack', inst, metadata)

    def binpacking(self, sizes: Sequence[int], capacity: int, bins: int) -> GeneratedInstance:
        inst = gen_binpacking(sizes, capacity, bins)
        witness = binpacking_witness(sizes, capacity, bins)
        metadata = {
            'family': 'binpacking',
            'source': {'sizes': list(sizes), 'B': capacity, 'k': bins},
            'expected': Answer.of(witness is not None).value,
            'equivalent': sum(sizes) == capacity * bins,
            'parameters': {'d': inst.d, 'a': inst.a, 'lambda': binpacking_scale(sizes, capacity)},
        }
        if witness is not None:
            metadata['witness'] = binpacking_defense(inst, witness).to_json()
        return self._emit('binpacking', inst, metadata)

    def biclique(self, left: Sequence[Hashable], right: Sequence[Hashable],
                 edges: Sequence[Tuple[Hashable, Hashable]], k: int) -> GeneratedInstance:
        inst = gen_biclique_zwmcp(left, right, edges, k)
        witness = biclique_witness(left, right, edges, k)
        metadata = {
            'family': 'biclique',
            'source': {'left': [str(x) for x in left], 'right': [str(y) for y in right],
                       'edges': [[str(x), str(y)] for x, y in edges], 'k': k},
            'expected': Answer.of(witness is not None).value,
            'parameters': {'d': inst.d, 'a': inst.a},
        }
        if witness is not None:
            metadata['witness'] = biclique_defense(inst, *witness).to_json()
        return self._emit('biclique', inst, metadata)

    def _emit(self, family: str, inst: Instance, metadata: Dict[str, Any]) -> GeneratedInstance:
        if self.seed is not None:
            metadata['seed'] = self.seed
        self.logger.info(f"生成 {family} 实例: |V|={inst.n}, |E|={inst.m}, d={inst.d}, a={inst.a}")
        return GeneratedInstance(family, inst, metadata)

    # ---- 随机源实例 ----

    def random_regular_is(self, max_vertices: int = 5) -> GeneratedInstance:
        n = self.rng.randint(2, max_vertices)
        degrees = [r for r in range(min(3, n - 1) + 1) if n * r % 2 == 0]
        r = self.rng.choice(degrees)
        graph = nx.random_regular_graph(r, n, seed=self.rng.randrange(2 ** 31))
        return self.regular_is(graph, self.rng.randint(0, n))

    def random_knapsack(self, max_items: int = 4) -> GeneratedInstance:
        count = self.rng.randint(1, max_items)
        sizes = [self.rng.randint(1, 4) for _ in range(count)]
        values = [self.rng.randint(1, 4) for _ in range(count)]
        return self.knapsack(sizes, values, self.rng.randint(0, sum(sizes)), self.rng.randint(0, sum(values) + 1))

    def random_binpacking(self, max_items: int = 4, max_bins: int = 3) -> GeneratedInstance:
        bins = self.rng.randint(1, max_bins)
        count = self.rng.randint(bins, max(bins, max_items))
        sizes = [self.rng.randint(1, 3) for _ in range(count)]
        remainder = sum(sizes) % bins
        if remainder:
            sizes[-1] += bins - remainder
        return self.binpacking(sizes, sum(sizes) // bins, bins)

    def random_biclique(self, max_side: int = 2) -> GeneratedInstance:
        left = list(range(1, self.rng.randint(1, max_side) + 1))
        right = list(range(1, self.rng.randint(1, max_side) + 1))
        edges = [(x, y) for x in left for y in right if self.rng.random() < 0.6]
        return self.biclique(left, right, edges, self.rng.randint(1, max_side))

    def random(self, family: str) -> GeneratedInstance:
        makers = {
            'is': self.random_regular_is,
            'knapsack': self.random_knapsack,
            'binpacking': self.random_binpacking,
            'biclique': self.random_biclique,
        }
        if family not in makers:
            raise GeneratorException(f"未知的实例族: {family}")
        return makers[family]()
