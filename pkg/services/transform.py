import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple, Union

from config import Config
from models.certificate import CutSet, DefenseSet
from models.instance import Edge, EdgeKey, Instance, TrivialAnswerException, Variant, edge_key
from models.outcome import Answer
from services.cut_enumeration import BipartitionEnumerator
from services.exceptions import BudgetExceededException, TransformNotApplicableException
from services.flow import min_cut

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MergeRecord:
    """一次合并：u 与 w 合并为 merged"""
    u: str
    w: str
    merged: str


@dataclass
class MergeTrace:
    """合并记录序列，可在原实例上重放"""
    records: List[MergeRecord] = field(default_factory=list)

    def append(self, record: MergeRecord):
        self.records.append(record)

    def replay(self, inst: Instance) -> Instance:
        for record in self.records:
            inst = merge(inst, record.u, record.w)
        return inst

    def to_json(self) -> List[List[str]]:
        return [[r.u, r.w, r.merged] for r in self.records]

    def __len__(self) -> int:
        return len(self.records)


class FreshNames:
    """确定性的新顶点命名（e#0, e#1, ...），跳过已有名字"""

    def __init__(self, taken: Iterable[str], prefix: str = 'e#'):
        self.taken = set(taken)
        self.prefix = prefix
        self.counter = 0

    def __iter__(self) -> Iterator[str]:
        return self

    def __next__(self) -> str:
        while f"{self.prefix}{self.counter}" in self.taken:
            self.counter += 1
        name = f"{self.prefix}{self.counter}"
        self.taken.add(name)
        self.counter += 1
        return name


def _merged_name(inst: Instance, u: str, w: str) -> str:
    if inst.s in (u, w):
        return inst.s
    if inst.t in (u, w):
        return inst.t
    base = f"{min(u, w)}+{max(u, w)}"
    if base not in inst.vertices:
        return base
    return next(FreshNames(inst.vertices, prefix=f"{base}#"))


def merge(inst: Instance, u: str, w: str) -> Instance:
    """合并顶点 u 与 w

    公共邻居的平行边合并为一条：代价取最小值，容量取和；
    边 {u,w} 消失。合并端点时新顶点沿用端点名字。
    """
    if u == w:
        raise ValueError(f"不能合并同一个顶点: {u}")
    for x in (u, w):
        if x not in inst.adjacency:
            raise ValueError(f"顶点不存在: {x}")
    if {u, w} == {inst.s, inst.t}:
        raise ValueError("不能合并 s 与 t")

    merged = _merged_name(inst, u, w)
    rename = {u: merged, w: merged}
    collapsed: Dict[EdgeKey, Tuple[int, int]] = {}
    for e in inst.edges:
        x, y = rename.get(e.u, e.u), rename.get(e.v, e.v)
        if x == y:
            continue
        key = edge_key(x, y)
        if key in collapsed:
            cost, capacity = collapsed[key]
            collapsed[key] = (min(cost, e.cost), capacity + e.capacity)
        else:
            collapsed[key] = (e.cost, e.capacity)

    edges = [Edge(x, y, cost, capacity) for (x, y), (cost, capacity) in collapsed.items()]
    variant = inst.variant
    if variant == Variant.MCP and any(e.capacity != 1 for e in edges):
        variant = Variant.WMCP
    vertices = [v for v in inst.vertices if v not in (u, w)] + [merged]
    return Instance(vertices=tuple(vertices), edges=tuple(edges), s=inst.s, t=inst.t,
                    d=inst.d, a=inst.a, variant=variant)


def _enumerator(inst: Instance, max_free_vertices: Optional[int]) -> BipartitionEnumerator:
    if max_free_vertices is None:
        max_free_vertices = Config().enum_max_free_vertices
    return BipartitionEnumerator(inst, max_free_vertices)


def enumerate_minimal_cuts(inst: Instance, cap_bound: int,
                           max_free_vertices: Optional[int] = None) -> List[CutSet]:
    """容量 ≤ cap_bound 的全部极小 (s,t)-割，每个恰好一次"""
    enumerator = _enumerator(inst, max_free_vertices)
    return [CutSet.of(inst, enumerator.keys_of(mask)) for mask, _ in enumerator.minimal_cuts(cap_bound)]


def _delete_edge(inst: Instance, key: EdgeKey) -> Instance:
    return inst.with_changes(edges=tuple(e for e in inst.edges if e.key != key))


def _oriented_cut_bound(inst: Instance, e: Edge, near: str, far: str) -> Optional[int]:
    """G-e 中分离 {s,near} 与 {far,t} 的最小割容量；两侧重叠时返回 None"""
    if near == inst.t or far == inst.s:
        return None
    reduced = _delete_edge(inst, e.key)
    if near != inst.s:
        reduced = merge(reduced, inst.s, near)
    if far != inst.t:
        reduced = merge(reduced, inst.t, far)
    value, _, _ = min_cut(reduced, None, reduced.s, reduced.t)
    return value


def minimal_cut_membership(inst: Instance, e: Union[Edge, EdgeKey],
                           max_free_vertices: Optional[int] = None) -> bool:
    """是否存在容量 ≤ a 且包含 e 的极小 (s,t)-割"""
    key = e.key if isinstance(e, Edge) else edge_key(*e)
    edge = inst.edge_map[key]

    # 必要条件：两种定向下 ω(e) + 最小割 至少有一个 ≤ a
    bounds = [_oriented_cut_bound(inst, edge, edge.u, edge.v),
              _oriented_cut_bound(inst, edge, edge.v, edge.u)]
    feasible = [b for b in bounds if b is not None]
    if not feasible or edge.capacity + min(feasible) > inst.a:
        return False

    enumerator = _enumerator(inst, max_free_vertices)
    bit = 1 << inst.edges.index(edge)
    for mask, _ in enumerator.minimal_cuts(inst.a):
        if mask & bit:
            return True
    return False


def rule1_exhaust(inst: Instance, max_free_vertices: Optional[int] = None) -> Tuple[Instance, MergeTrace]:
    """穷尽应用规则 1：合并不属于任何容量 ≤ a 的极小割的边

    若需合并的边是 {s,t}，则不存在容量 ≤ a 的割，抛出
    TrivialAnswerException(YES)。枚举超出预算时停止（结果仍等价）。
    """
    trace = MergeTrace()
    while True:
        try:
            enumerator = _enumerator(inst, max_free_vertices)
        except BudgetExceededException as e:
            logger.warning(f"规则 1 枚举超出预算，停止合并: {e}")
            return inst, trace

        covered = 0
        for mask, _ in enumerator.minimal_cuts(inst.a):
            covered |= mask
        uncovered = next((e for k, e in enumerate(inst.edges) if not covered >> k & 1), None)
        if uncovered is None:
            logger.debug(f"规则 1 达到不动点，共合并 {len(trace)} 次")
            return inst, trace
        if {uncovered.u, uncovered.v} == {inst.s, inst.t}:
            logger.info("规则 1 需要合并 s 与 t，实例判定为 YES")
            raise TrivialAnswerException(Answer.YES, "edge {s,t} lies in no minimal cut of capacity <= a")

        merged = merge(inst, uncovered.u, uncovered.v)
        record = MergeRecord(uncovered.u, uncovered.v, _merged_name(inst, uncovered.u, uncovered.v))
        trace.append(record)
        logger.debug(f"规则 1 合并 {uncovered.u} 与 {uncovered.v} -> {record.merged}")
        inst = merged


def lift_defense(original: Instance, trace: MergeTrace, defense: Union[DefenseSet, Iterable[EdgeKey]]) -> DefenseSet:
    """把合并后实例上的防御集映射回原实例

    每条与合并顶点相连的受保护边 {m,x} 换成原实例中 u、w 与 x 之间
    代价最小的那条边，代价不变。
    """
    stages = [original]
    for record in trace.records:
        stages.append(merge(stages[-1], record.u, record.w))

    raw = defense.edges if isinstance(defense, DefenseSet) else defense
    keys: Set[EdgeKey] = {edge_key(x, y) for x, y in raw}
    for record, before in zip(reversed(trace.records), reversed(stages[:-1])):
        lifted: Set[EdgeKey] = set()
        for x, y in keys:
            if record.merged not in (x, y):
                lifted.add((x, y))
                continue
            other = y if x == record.merged else x
            candidates = [before.edge(end, other) for end in (record.u, record.w)]
            best = min((c for c in candidates if c is not None), key=lambda c: (c.cost, c.key))
            lifted.add(best.key)
        keys = lifted
    return DefenseSet.of(original, keys)


def to_unit_cost(inst: Instance) -> Instance:
    """代价为 c 的边替换为 c 条代价 1、容量不变的路径边"""
    if all(e.cost == 1 for e in inst.edges):
        return inst
    names = FreshNames(inst.vertices)
    vertices = list(inst.vertices)
    edges: List[Edge] = []
    for e in inst.edges:
        if e.cost == 1:
            edges.append(e)
            continue
        chain = [e.u] + [next(names) for _ in range(e.cost - 1)] + [e.v]
        vertices.extend(chain[1:-1])
        edges.extend(Edge(p, q, 1, e.capacity) for p, q in zip(chain, chain[1:]))
    return inst.with_changes(vertices=tuple(vertices), edges=tuple(edges))


def to_unit_capacity(inst: Instance) -> Instance:
    """容量为 ω 的边改为容量 1，并加 ω-1 条两边绕行路径（每边代价 c、容量 1）"""
    if inst.variant == Variant.ZWMCP:
        raise TransformNotApplicableException("to_unit_capacity 不接受 ZWMCP 实例")
    if all(e.capacity == 1 for e in inst.edges):
        return inst
    names = FreshNames(inst.vertices)
    vertices = list(inst.vertices)
    edges: List[Edge] = []
    for e in inst.edges:
        edges.append(Edge(e.u, e.v, e.cost, 1))
        for _ in range(e.capacity - 1):
            z = next(names)
            vertices.append(z)
            edges.append(Edge(e.u, z, e.cost, 1))
            edges.append(Edge(z, e.v, e.cost, 1))
    return inst.with_changes(vertices=tuple(vertices), edges=tuple(edges))


def to_mcp(inst: Instance) -> Instance:
    """WMCP -> MCP：先单位容量再单位代价"""
    if inst.variant == Variant.MCP:
        return inst
    result = to_unit_cost(to_unit_capacity(inst))
    logger.debug(f"to_mcp: {inst.m} 条边 -> {result.m} 条边")
    return result.with_changes(variant=Variant.MCP)


def subcubify(inst: Instance) -> Instance:
    """把每个顶点展开成端口路径，得到最大度 ≤ 3 的等价 WMCP 实例"""
    if inst.variant != Variant.MCP:
        raise TransformNotApplicableException("subcubify 只接受 MCP 实例")
    for terminal in (inst.s, inst.t):
        if inst.degree(terminal) == 0:
            raise TransformNotApplicableException(f"端点 {terminal} 是孤立点，无法展开")

    ports = {(u, v): f"{u}~{v}" for u in inst.vertices for v in inst.adjacency[u]}
    if len(set(ports.values())) != len(ports):
        # 名字冲突时退回编号命名
        ports = {pair: f"p#{i}" for i, pair in enumerate(sorted(ports))}

    edges: List[Edge] = []
    for u in inst.vertices:
        path = [ports[(u, v)] for v in inst.adjacency[u]]
        edges.extend(Edge(p, q, 1, inst.a + 1) for p, q in zip(path, path[1:]))
    for e in inst.edges:
        edges.append(Edge(ports[(e.u, e.v)], ports[(e.v, e.u)], 1, 1))

    return Instance(
        vertices=tuple(ports.values()),
        edges=tuple(edges),
        s=ports[(inst.s, inst.adjacency[inst.s][0])],
        t=ports[(inst.t, inst.adjacency[inst.t][0])],
        d=inst.d,
        a=inst.a,
        variant=Variant.WMCP,
    )
