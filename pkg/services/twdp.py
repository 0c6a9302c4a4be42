import logging
import math
import sys
from itertools import permutations, product
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx
from networkx.algorithms.approximation import treewidth_min_degree, treewidth_min_fill_in

from config import Config
from models.certificate import DefenseSet
from models.decomposition import (
    BagPartition, DecompositionException, DecompositionNode, NiceDecomposition, NodeKind, RawDecomposition,
)
from models.instance import EdgeKey, Instance, edge_key
from models.outcome import Answer, SolveOutcome
from services.exceptions import BudgetExceededException
from services.partitions import BagTables, forget_lifts, introduce_projection

logger = logging.getLogger(__name__)

INF = math.inf

# 需求函数的稀疏表示：((划分编号, 需求值), ...)，只保留非平凡项
Requirement = Tuple[Tuple[int, int], ...]
TableKey = Tuple[int, Requirement, int]

# 不超过该数量的非端点顶点时，路径分解的顶点顺序穷举求得
_EXHAUSTIVE_ORDER_LIMIT = 7


class _NiceBuilder:
    """逐个添加 nice 节点"""

    def __init__(self, terminals: Tuple[str, str]):
        self.terminals = frozenset(terminals)
        self.nodes: Dict[int, DecompositionNode] = {}

    def _add(self, kind: NodeKind, bag: FrozenSet[str], children: Tuple[int, ...] = (),
             vertex: Optional[str] = None) -> int:
        node_id = len(self.nodes)
        self.nodes[node_id] = DecompositionNode(node_id, kind, bag, children, vertex)
        return node_id

    def leaf(self) -> int:
        return self._add(NodeKind.LEAF, self.terminals)

    def introduce(self, child: int, v: str) -> int:
        return self._add(NodeKind.INTRODUCE, self.nodes[child].bag | {v}, (child,), v)

    def forget(self, child: int, v: str) -> int:
        return self._add(NodeKind.FORGET, self.nodes[child].bag - {v}, (child,), v)

    def join(self, left: int, right: int) -> int:
        return self._add(NodeKind.JOIN, self.nodes[left].bag, (left, right))

    def transition(self, child: int, target: FrozenSet[str]) -> int:
        """先逐个遗忘、再逐个引入，直到 bag 等于 target"""
        bag = self.nodes[child].bag
        for v in sorted(bag - target):
            child = self.forget(child, v)
        for v in sorted(target - bag):
            child = self.introduce(child, v)
        return child


def nicify(inst: Instance, bags: Mapping[int, Set[str]], tree_edges: Iterable[Tuple[int, int]],
           root: int, strategy: str = "") -> NiceDecomposition:
    """把 G - {s,t} 的普通树分解转换为 nice 形式，并在每个 bag 中加入 s,t"""
    tree = nx.Graph()
    tree.add_nodes_from(bags)
    tree.add_edges_from(tree_edges)
    builder = _NiceBuilder((inst.s, inst.t))
    terminals = builder.terminals

    children: Dict[int, List[int]] = {node: [] for node in bags}
    for parent, child in nx.bfs_edges(tree, root):
        children[parent].append(child)
    tops: Dict[int, int] = {}
    for node in nx.dfs_postorder_nodes(tree, root):
        target = frozenset(bags[node]) | terminals
        kids = [builder.transition(tops[c], target) for c in sorted(children[node])]
        if not kids:
            top = builder.transition(builder.leaf(), target)
        else:
            top = kids[0]
            for other in kids[1:]:
                top = builder.join(top, other)
        tops[node] = top
    root_id = builder.transition(tops[root], terminals)
    return NiceDecomposition(nodes=builder.nodes, root=root_id, terminals=(inst.s, inst.t), strategy=strategy)


def _core_graph(inst: Instance) -> nx.Graph:
    core = inst.graph()
    core.remove_nodes_from([inst.s, inst.t])
    return core


def _separation_bags(order: Sequence[str], graph: nx.Graph) -> List[Set[str]]:
    """按顶点顺序构造路径分解：bag_i 含 v_i 以及仍有后续邻居的先前顶点"""
    position = {v: i for i, v in enumerate(order)}
    last = {v: max([position[u] for u in graph[v]] + [position[v]]) for v in order}
    return [{v} | {u for u in order[:i] if last[u] >= i} for i, v in enumerate(order)]


def _path_order(graph: nx.Graph) -> List[str]:
    vertices = sorted(graph.nodes)
    if len(vertices) <= _EXHAUSTIVE_ORDER_LIMIT:
        return list(min(
            permutations(vertices),
            key=lambda order: max((len(b) for b in _separation_bags(order, graph)), default=0),
        ))
    # 贪心：每次选使活跃集合最小的顶点
    order: List[str] = []
    remaining = set(vertices)
    while remaining:
        placed = set(order)

        def active_after(v: str) -> int:
            done = placed | {v}
            return sum(1 for u in done if any(w not in done for w in graph[u]))

        best = min(sorted(remaining), key=active_after)
        order.append(best)
        remaining.remove(best)
    return order


def _tree_from_heuristic(inst: Instance, core: nx.Graph, strategy: str) -> NiceDecomposition:
    heuristic = treewidth_min_degree if strategy == 'min_degree' else treewidth_min_fill_in
    _, tree = heuristic(core)
    ids = {bag: i for i, bag in enumerate(sorted(tree.nodes, key=lambda b: (len(b), sorted(b))))}
    bags = {i: set(bag) for bag, i in ids.items()}
    edges = [(ids[p], ids[q]) for p, q in tree.edges]
    return nicify(inst, bags, edges, root=0, strategy=strategy)


def _path_decomposition(inst: Instance, core: nx.Graph) -> NiceDecomposition:
    order = _path_order(core)
    bags = dict(enumerate(_separation_bags(order, core)))
    edges = [(i, i + 1) for i in range(len(order) - 1)]
    return nicify(inst, bags, edges, root=0, strategy='path')


def build_decomposition(inst: Instance, strategy: str = 'auto', config: Optional[Config] = None) -> NiceDecomposition:
    """启发式构造 G - {s,t} 的树分解并转换为含 {s,t} 的 nice 形式

    auto：min-degree 分解的 join bag 都不超过上限时使用它，否则改用无 join 的路径分解。
    """
    config = config or Config()
    core = _core_graph(inst)
    if core.number_of_nodes() == 0:
        return nicify(inst, {0: set()}, [], root=0, strategy=strategy)
    if strategy in ('min_degree', 'min_fill'):
        return _tree_from_heuristic(inst, core, strategy)
    if strategy == 'path':
        return _path_decomposition(inst, core)
    if strategy != 'auto':
        raise ValueError(f"未知的分解策略: {strategy}")

    tree = _tree_from_heuristic(inst, core, 'min_degree')
    if tree.max_join_bag <= config.twdp_max_join_bag:
        return tree
    path = _path_decomposition(inst, core)
    logger.debug(f"min-degree 分解的 join bag 为 {tree.max_join_bag}，改用路径分解 (宽度 {path.width})")
    return path


def decomposition_from_td(inst: Instance, raw: RawDecomposition) -> NiceDecomposition:
    """校验外部 .td（顶点按实例顶点序从 1 编号）并转换为 nice 形式"""
    if raw.vertex_count != inst.n:
        raise DecompositionException(f"vertex count: .td 声明 {raw.vertex_count} 个顶点，实例有 {inst.n} 个")
    names = {i + 1: v for i, v in enumerate(inst.vertices)}
    terminals = {inst.s, inst.t}
    bags: Dict[int, Set[str]] = {}
    for bag_id, members in raw.bags.items():
        unknown = [x for x in members if x not in names]
        if unknown:
            raise DecompositionException(f"vertex cover: bag {bag_id} 含未知顶点编号 {unknown[0]}")
        bags[bag_id] = {names[x] for x in members} - terminals

    tree = nx.Graph()
    tree.add_nodes_from(bags)
    for p, q in raw.tree_edges:
        if p not in bags or q not in bags:
            raise DecompositionException(f"tree: 树边 {p}-{q} 引用了未定义的 bag")
        tree.add_edge(p, q)
    if not bags or not nx.is_tree(tree):
        raise DecompositionException("tree: bag 之间的边不构成一棵树")

    core = _core_graph(inst)
    for v in core.nodes:
        holders = [b for b, members in bags.items() if v in members]
        if not holders:
            raise DecompositionException(f"vertex cover: 顶点 {v} 不在任何 bag 中")
        if not nx.is_connected(tree.subgraph(holders)):
            raise DecompositionException(f"connectivity: 含 {v} 的 bag 不连通")
    for u, v in core.edges:
        if not any({u, v} <= members for members in bags.values()):
            raise DecompositionException(f"edge cover: 边 {u}-{v} 不在任何 bag 中")
    return nicify(inst, bags, tree.edges, root=min(bags), strategy='td')


def partition_cut_capacity(inst: Instance, bag: Iterable[str], partition: BagPartition) -> int:
    """bag 内部跨越不同块的边的容量和"""
    members = set(bag)
    return sum(e.capacity for e in inst.edges
               if e.u in members and e.v in members and partition.separates(e.u, e.v))


class TreeDecompositionSolver:
    """沿 nice 树分解自顶向下记忆化求表项 T[x, f_x, D_x]

    表项含义：G_x 中与 bag 内部边的交恰为 D_x 的边集 D 的最小代价，
    使得对每个划分 P，G_x 中避开 D 的 P-划分割容量都至少为 f_x(P)。
    实例中不得含 {s,t} 边（由 dp_solve 预处理）。
    """

    def __init__(self, inst: Instance, decomposition: NiceDecomposition, config: Optional[Config] = None,
                 clamp: Optional[int] = None, prune_join: Optional[bool] = None):
        self.inst = inst
        self.decomposition = decomposition
        self.config = config or Config()
        self.logger = logging.getLogger(__name__)
        self.clamp = inst.a + 1 if clamp is None else clamp
        if self.clamp < inst.a + 1:
            raise ValueError("需求上限不能小于 a+1")
        self.prune_join = self.config.twdp_prune_join if prune_join is None else prune_join
        if inst.edge(inst.s, inst.t) is not None:
            raise ValueError("动态规划要求实例中没有 {s,t} 边")

        if decomposition.width + 1 > self.config.twdp_max_bag:
            raise DecompositionException(
                f"bag 大小 {decomposition.width + 1} 超过上限 {self.config.twdp_max_bag}")
        if decomposition.max_join_bag > self.config.twdp_max_join_bag:
            raise DecompositionException(
                f"join bag 大小 {decomposition.max_join_bag} 超过上限 {self.config.twdp_max_join_bag}")

        others = [v for v in inst.vertices if v not in (inst.s, inst.t)]
        self.order = [inst.s, inst.t] + others
        self.number = {v: i for i, v in enumerate(self.order)}
        self.edge_keys: List[EdgeKey] = [e.key for e in inst.edges]
        self.edge_bit = {key: k for k, key in enumerate(self.edge_keys)}
        self.edge_cost = [e.cost for e in inst.edges]
        self.adjacent: Dict[Tuple[int, int], Tuple[int, int]] = {}
        for k, e in enumerate(inst.edges):
            i, j = self.number[e.u], self.number[e.v]
            self.adjacent[(i, j)] = (k, e.capacity)
            self.adjacent[(j, i)] = (k, e.capacity)

        self.bags: Dict[int, Tuple[int, ...]] = {
            node_id: tuple(sorted(self.number[v] for v in node.bag))
            for node_id, node in decomposition.nodes.items()
        }
        self._tables: Dict[Tuple[int, ...], BagTables] = {}
        self.bag_mask: Dict[int, int] = {node_id: self._bag_edges_mask(bag) for node_id, bag in self.bags.items()}
        self._forget: Dict[int, List[List[int]]] = {}
        self._introduce: Dict[int, List[Tuple[int, int, int]]] = {}
        self.memo: Dict[TableKey, Tuple[float, Tuple[TableKey, ...]]] = {}

    # ---- 预计算 ----

    def _bag_edges_mask(self, bag: Tuple[int, ...]) -> int:
        mask = 0
        for x in range(len(bag)):
            for y in range(x + 1, len(bag)):
                hit = self.adjacent.get((bag[x], bag[y]))
                if hit:
                    mask |= 1 << hit[0]
        return mask

    def tables(self, node_id: int) -> BagTables:
        bag = self.bags[node_id]
        if bag not in self._tables:
            edges = []
            for x in range(len(bag)):
                for y in range(x + 1, len(bag)):
                    hit = self.adjacent.get((bag[x], bag[y]))
                    if hit:
                        edges.append((x, y, hit[0], hit[1]))
            self._tables[bag] = BagTables(bag, edges)
        return self._tables[bag]

    def _forget_lifts(self, node_id: int) -> List[List[int]]:
        if node_id not in self._forget:
            node = self.decomposition.nodes[node_id]
            child = node.children[0]
            self._forget[node_id] = forget_lifts(self.tables(node_id), self.tables(child), self.number[node.vertex])
        return self._forget[node_id]

    def _introduce_projection(self, node_id: int) -> List[Tuple[int, int, int]]:
        if node_id not in self._introduce:
            node = self.decomposition.nodes[node_id]
            child = node.children[0]
            v = self.number[node.vertex]
            vertex_edges = [(u, *self.adjacent[(v, u)]) for u in self.bags[child] if (v, u) in self.adjacent]
            self._introduce[node_id] = introduce_projection(self.tables(child), self.tables(node_id), v, vertex_edges)
        return self._introduce[node_id]

    def _cost(self, mask: int) -> int:
        total = 0
        while mask:
            low = mask & -mask
            total += self.edge_cost[low.bit_length() - 1]
            mask ^= low
        return total

    def normalize(self, node_id: int, requirement: Mapping[int, int], protected: int) -> Requirement:
        """去掉平凡的需求项：被 bag 跨块边自动满足，或因跨块边受保护而无约束"""
        tables = self.tables(node_id)
        return tuple(sorted(
            (idx, min(value, self.clamp)) for idx, value in requirement.items()
            if value > tables.cross_cap[idx] and not protected & tables.cross_mask[idx]
        ))

    # ---- 递推 ----

    def value(self, node_id: int, requirement: Requirement, protected: int) -> float:
        key = (node_id, requirement, protected)
        cached = self.memo.get(key)
        if cached is not None:
            return cached[0]
        node = self.decomposition.nodes[node_id]
        if node.kind == NodeKind.LEAF:
            result = (0 if not requirement else INF, ())
        elif node.kind == NodeKind.INTRODUCE:
            result = self._introduce_entry(node, requirement, protected)
        elif node.kind == NodeKind.FORGET:
            result = self._forget_entry(node, requirement, protected)
        else:
            result = self._join_entry(node, requirement, protected)
        self.memo[key] = result
        return result[0]

    def _introduce_entry(self, node: DecompositionNode, requirement: Requirement, protected: int):
        child = node.children[0]
        projection = self._introduce_projection(node.id)
        lowered: Dict[int, int] = {}
        for idx, value in requirement:
            child_idx, cut_mask, cut_cap = projection[idx]
            if protected & cut_mask:
                continue
            if value - cut_cap > lowered.get(child_idx, 0):
                lowered[child_idx] = value - cut_cap
        child_protected = protected & self.bag_mask[child]
        child_req = self.normalize(child, lowered, child_protected)
        extra = self._cost(protected & ~self.bag_mask[child])
        child_key = (child, child_req, child_protected)
        return self.value(*child_key) + extra, (child_key,)

    def _forget_entry(self, node: DecompositionNode, requirement: Requirement, protected: int):
        child = node.children[0]
        lifts = self._forget_lifts(node.id)
        lifted = {child_idx: value for idx, value in requirement for child_idx in lifts[idx]}
        vertex_mask = self.bag_mask[child] & ~self.bag_mask[node.id]

        subsets = [0]
        bits = vertex_mask
        while bits:
            low = bits & -bits
            subsets += [s | low for s in subsets]
            bits ^= low

        best: float = INF
        best_key: Optional[TableKey] = None
        for extra in sorted(subsets):
            child_protected = protected | extra
            if self._cost(child_protected) >= best:
                continue
            child_key = (child, self.normalize(child, lifted, child_protected), child_protected)
            candidate = self.value(*child_key)
            if candidate < best:
                best, best_key = candidate, child_key
        return best, ((best_key,) if best_key is not None else ())

    def _join_entry(self, node: DecompositionNode, requirement: Requirement, protected: int):
        left, right = node.children
        tables = self.tables(node.id)
        required = dict(requirement)
        if self.prune_join:
            indices = [idx for idx, _ in requirement]
            ranges = [range(tables.cross_cap[idx], min(self.clamp, value + tables.cross_cap[idx]) + 1)
                      for idx, value in requirement]
        else:
            indices = list(range(len(tables)))
            ranges = [range(0, self.clamp + 1) for _ in indices]
        combinations = math.prod(len(r) for r in ranges)
        if combinations > self.config.twdp_max_join_combinations:
            raise BudgetExceededException(
                'twdp_max_join_combinations', self.config.twdp_max_join_combinations,
                f"join 节点 {node.id} 需要枚举 {combinations} 种 f_y")

        shared_cost = self._cost(protected)
        best: float = INF
        best_keys: Tuple[TableKey, ...] = ()
        for choice in product(*ranges):
            left_raw = dict(zip(indices, choice))
            right_raw = {
                idx: max(0, min(self.clamp, required.get(idx, 0) - left_raw[idx] + tables.cross_cap[idx]))
                for idx in indices
            }
            left_key = (left, self.normalize(left, left_raw, protected), protected)
            left_value = self.value(*left_key)
            if left_value >= best:
                continue
            right_key = (right, self.normalize(right, right_raw, protected), protected)
            total = left_value + self.value(*right_key) - shared_cost
            if total < best:
                best, best_keys = total, (left_key, right_key)
        return best, best_keys

    # ---- 对外接口 ----

    def root_key(self) -> TableKey:
        root = self.decomposition.root
        tables = self.tables(root)
        separated = tables.index[(0, 1)]
        return root, self.normalize(root, {separated: self.inst.a + 1}, 0), 0

    def solve(self) -> SolveOutcome:
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 20 * len(self.decomposition.nodes) + 1000))
        try:
            root_value = self.value(*self.root_key())
        finally:
            sys.setrecursionlimit(limit)
        stats = {
            'table_entries': len(self.memo),
            'decomposition_nodes': len(self.decomposition.nodes),
            'width': self.decomposition.width,
        }
        if root_value <= self.inst.d:
            defense = self.traceback_defense()
            return SolveOutcome(Answer.YES, defense, stats, solver='dp')
        return SolveOutcome(Answer.NO, None, stats, solver='dp')

    def traceback_defense(self) -> DefenseSet:
        """沿记忆化表中记录的最优选择回溯，收集所有 D_x"""
        protected = 0
        stack = [self.root_key()]
        while stack:
            key = stack.pop()
            protected |= key[2]
            stack.extend(self.memo[key][1])
        keys = [self.edge_keys[k] for k in range(len(self.edge_keys)) if protected >> k & 1]
        return DefenseSet.of(self.inst, keys)

    def table_entry(self, node_id: int, requirement: Mapping[BagPartition, int],
                    protected: Iterable[EdgeKey]) -> float:
        """按给定 (f_x, D_x) 计算表项；未给出的划分需求视为 0"""
        order = [self.order[i] for i in self.bags[node_id]]
        tables = self.tables(node_id)
        raw = {tables.index[partition.rgs(order)]: value for partition, value in requirement.items()}
        mask = 0
        for u, v in protected:
            bit = 1 << self.edge_bit[edge_key(u, v)]
            if not bit & self.bag_mask[node_id]:
                raise ValueError(f"边 {u}-{v} 不在节点 {node_id} 的 bag 内")
            mask |= bit
        return self.value(node_id, self.normalize(node_id, raw, mask), mask)


def traceback_defense(solver: TreeDecompositionSolver) -> DefenseSet:
    return solver.traceback_defense()


def dp_solve(inst: Instance, decomposition: Optional[NiceDecomposition] = None, config: Optional[Config] = None,
             clamp: Optional[int] = None, prune_join: Optional[bool] = None,
             strategy: str = 'auto', max_width: Optional[int] = None) -> SolveOutcome:
    """树分解动态规划求解（接受全部三种变体）

    max_width 给出时，所得分解宽度超过它就抛出 DecompositionException。
    """
    st_edge = inst.edge(inst.s, inst.t)
    reduced = inst
    if st_edge is not None:
        if st_edge.cost <= inst.d:
            return SolveOutcome(Answer.YES, DefenseSet.of(inst, [st_edge.key]), {'table_entries': 0}, solver='dp')
        a = inst.a - st_edge.capacity
        if a < 0:
            return SolveOutcome(Answer.YES, DefenseSet.empty(), {'table_entries': 0}, solver='dp')
        reduced = inst.with_changes(edges=tuple(e for e in inst.edges if e is not st_edge), a=a)

    if decomposition is None:
        decomposition = build_decomposition(reduced, strategy, config)
    else:
        decomposition.validate(reduced)
    if max_width is not None and decomposition.width > max_width:
        raise DecompositionException(f"分解宽度 {decomposition.width} 超过上限 {max_width}")
    solver = TreeDecompositionSolver(reduced, decomposition, config, clamp=clamp, prune_join=prune_join)
    outcome = solver.solve()
    if outcome.defense is not None:
        outcome.defense = DefenseSet.of(inst, outcome.defense.edges)
    logger.debug(f"动态规划完成: 宽度 {decomposition.width}, 表项 {outcome.stats['table_entries']}")
    return outcome
