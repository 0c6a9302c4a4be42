import logging
from itertools import combinations
from typing import Dict, Hashable, Iterable, Mapping, Optional, Set, Tuple, Union

import networkx as nx
from networkx.algorithms.flow import edmonds_karp

from models.certificate import CutSet, DefenseSet
from models.instance import EdgeKey, Instance, edge_key

logger = logging.getLogger(__name__)

PairKey = Tuple[str, str]

_SOURCE = ('source',)
_SINK = ('sink',)


def _flow_graph(inst: Instance, capacities: Optional[Mapping[EdgeKey, int]] = None) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(inst.vertices)
    for e in inst.edges:
        cap = e.capacity if capacities is None else capacities[e.key]
        g.add_edge(e.u, e.v, capacity=cap)
    return g


def _residual_source_side(residual: nx.DiGraph, x: Hashable) -> Set[Hashable]:
    """残量网络中从 x 可达的顶点"""
    arcs = [(u, v) for u, v, attr in residual.edges(data=True) if attr['capacity'] - attr['flow'] > 0]
    reach = nx.DiGraph(arcs)
    reach.add_node(x)
    return {x} | nx.descendants(reach, x)


def min_cut(inst: Instance, capacities: Optional[Mapping[EdgeKey, int]] = None,
            x: Optional[str] = None, y: Optional[str] = None) -> Tuple[int, CutSet, Set[str]]:
    """最小 (x,y)-割

    返回 (割值, 割边, x 侧顶点)。割值按传入的 capacities 计算，
    CutSet 的 total_capacity 按实例自身容量计算。x 侧取残量网络中
    从 x 可达的顶点。
    """
    x = inst.s if x is None else x
    y = inst.t if y is None else y
    if x == y:
        raise ValueError(f"最小割的两个端点相同: {x}")
    g = _flow_graph(inst, capacities)
    residual = edmonds_karp(g, x, y, capacity='capacity')
    value = residual.graph['flow_value']
    x_side = {v for v in _residual_source_side(residual, x) if v in g}
    cut_keys = [e.key for e in inst.edges if (e.u in x_side) != (e.v in x_side)]
    return value, CutSet.of(inst, cut_keys), x_side


def avoiding_min_cut(inst: Instance, defense: Union[DefenseSet, Iterable[EdgeKey]]) -> Optional[CutSet]:
    """与防御集不相交、容量 ≤ a 的 (s,t)-割；不存在时返回 None

    受保护的边容量视为 a+1，于是容量 ≤ a 的最小割不可能包含它们。
    """
    protected = defense.edges if isinstance(defense, DefenseSet) else {edge_key(u, v) for u, v in defense}
    capacities = {e.key: (inst.a + 1 if e.key in protected else e.capacity) for e in inst.edges}
    value, cut, _ = min_cut(inst, capacities, inst.s, inst.t)
    if value <= inst.a:
        return cut
    return None


def gomory_hu_tree(inst: Instance) -> nx.Graph:
    """Gomory-Hu 树，边属性 weight 为对应最小割值"""
    return nx.gomory_hu_tree(_flow_graph(inst), capacity='capacity')


def all_pairs_min_cut(inst: Instance, method: str = 'naive') -> Dict[PairKey, int]:
    """所有顶点对的最小割值，键为按字典序排列的顶点对"""
    g = _flow_graph(inst)
    values: Dict[PairKey, int] = {}
    if method == 'naive':
        for u, v in combinations(inst.vertices, 2):
            values[(u, v)] = nx.maximum_flow_value(g, u, v, capacity='capacity', flow_func=edmonds_karp)
    elif method == 'gomory_hu':
        tree = nx.gomory_hu_tree(g, capacity='capacity')
        for u, v in combinations(inst.vertices, 2):
            path = nx.shortest_path(tree, u, v)
            values[(u, v)] = min(tree[p][q]['weight'] for p, q in zip(path, path[1:]))
    else:
        raise ValueError(f"未知的全对最小割方法: {method}")
    logger.debug(f"计算了 {len(values)} 个顶点对的最小割 ({method})")
    return values


def bipartite_min_cost_vertex_cover(left: Iterable[Hashable], right: Iterable[Hashable],
                                    pairs: Iterable[Tuple[Hashable, Hashable]],
                                    cost: Mapping[Hashable, int]) -> Tuple[int, Set[Hashable]]:
    """二部图最小代价顶点覆盖（最大流归约）

    源点到左侧元素、右侧元素到汇点的弧容量为元素代价，
    左右之间的弧不设容量（不可切断）。
    """
    left = set(left)
    right = set(right)
    network = nx.DiGraph()
    network.add_node(_SOURCE)
    network.add_node(_SINK)
    for x in left:
        network.add_edge(_SOURCE, ('L', x), capacity=cost[x])
    for y in right:
        network.add_edge(('R', y), _SINK, capacity=cost[y])
    pair_count = 0
    for x, y in pairs:
        if x not in left or y not in right:
            raise ValueError(f"顶点对 ({x}, {y}) 不是左右各一个端点")
        network.add_edge(('L', x), ('R', y))
        pair_count += 1
    if pair_count == 0:
        return 0, set()

    residual = edmonds_karp(network, _SOURCE, _SINK, capacity='capacity')
    source_side = _residual_source_side(residual, _SOURCE)
    cover = {x for x in left if ('L', x) not in source_side}
    cover |= {y for y in right if ('R', y) in source_side}
    return residual.graph['flow_value'], cover
