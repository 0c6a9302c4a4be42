import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import networkx as nx

from models.outcome import Answer

logger = logging.getLogger(__name__)

EdgeKey = Tuple[str, str]

# 所有代价/容量之和必须能用 64 位有符号整数表示
MAX_TOTAL = 2 ** 63 - 1

_REQUIRED_KEYS = ('variant', 'vertices', 'edges', 's', 't', 'd', 'a')
_IGNORED_KEYS = ('metadata',)


class InstanceFormatException(Exception):
    """实例格式或不变量错误"""
    pass


class TrivialAnswerException(Exception):
    """实例在预处理阶段即可判定"""

    def __init__(self, answer: Answer, reason: str = ""):
        self.answer = answer
        self.reason = reason
        super().__init__(reason or f"trivial {answer.value}")


class Variant(str, Enum):
    """问题变体"""
    MCP = "MCP"
    WMCP = "WMCP"
    ZWMCP = "ZWMCP"


def edge_key(u: str, v: str) -> EdgeKey:
    """无向边的规范键（端点按字典序）"""
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Edge:
    """带代价与容量的无向边"""
    u: str
    v: str
    cost: int = 1
    capacity: int = 1

    def __post_init__(self):
        if self.v < self.u:
            u, v = self.v, self.u
            object.__setattr__(self, 'u', u)
            object.__setattr__(self, 'v', v)

    @property
    def key(self) -> EdgeKey:
        return (self.u, self.v)

    def other(self, x: str) -> str:
        return self.v if x == self.u else self.u


@dataclass(frozen=True)
class Instance:
    """MCP / WMCP / ZWMCP 实例（不可变值）

    构造时顶点按字典序排列，边按 (较小端点, 较大端点) 排列，
    并校验全部结构不变量；任何违反都会抛出 InstanceFormatException。
    """
    vertices: Tuple[str, ...]
    edges: Tuple[Edge, ...]
    s: str
    t: str
    d: int
    a: int
    variant: Variant = Variant.WMCP

    def __post_init__(self):
        object.__setattr__(self, 'vertices', tuple(sorted(self.vertices)))
        object.__setattr__(self, 'edges', tuple(sorted(self.edges, key=lambda e: e.key)))
        try:
            object.__setattr__(self, 'variant', Variant(self.variant))
        except ValueError:
            raise InstanceFormatException(f"未知的问题变体: {self.variant}")
        self._validate()

    def _validate(self):
        """校验实例不变量"""
        vertex_set = set(self.vertices)
        if len(vertex_set) != len(self.vertices):
            raise InstanceFormatException("顶点重复")
        if self.s == self.t:
            raise InstanceFormatException(f"s 与 t 相同: {self.s}")
        for terminal in (self.s, self.t):
            if terminal not in vertex_set:
                raise InstanceFormatException(f"端点未声明: {terminal}")
        for budget_name, budget in (('d', self.d), ('a', self.a)):
            if isinstance(budget, bool) or not isinstance(budget, int):
                raise InstanceFormatException(f"预算 {budget_name} 必须是整数")
            if budget < 0:
                raise InstanceFormatException(f"预算 {budget_name} 为负数: {budget}")
            if budget > MAX_TOTAL:
                raise InstanceFormatException(f"预算 {budget_name} 超出 64 位范围")

        seen = set()
        total_cost = 0
        total_capacity = 0
        for e in self.edges:
            if e.u == e.v:
                raise InstanceFormatException(f"自环: {e.u}")
            if e.u not in vertex_set or e.v not in vertex_set:
                raise InstanceFormatException(f"边的端点未声明: {e.u}-{e.v}")
            if e.key in seen:
                raise InstanceFormatException(f"重复边 (parallel edge): {e.u}-{e.v}")
            seen.add(e.key)
            if isinstance(e.cost, bool) or not isinstance(e.cost, int) or e.cost < 1:
                raise InstanceFormatException(f"边 {e.u}-{e.v} 的代价必须是 ≥ 1 的整数")
            if isinstance(e.capacity, bool) or not isinstance(e.capacity, int) or e.capacity < 0:
                raise InstanceFormatException(f"边 {e.u}-{e.v} 的容量必须是 ≥ 0 的整数")
            if self.variant == Variant.MCP and (e.cost != 1 or e.capacity != 1):
                raise InstanceFormatException(f"variant mismatch: MCP 实例中边 {e.u}-{e.v} 的权重不是 1")
            if self.variant == Variant.WMCP and e.capacity < 1:
                raise InstanceFormatException(f"variant mismatch: WMCP 实例中边 {e.u}-{e.v} 的容量为 0")
            total_cost += e.cost
            total_capacity += e.capacity
        if total_cost > MAX_TOTAL or total_capacity > MAX_TOTAL:
            raise InstanceFormatException("代价或容量总和超出 64 位范围")

    # ---- 派生视图 ----

    @cached_property
    def edge_map(self) -> Dict[EdgeKey, Edge]:
        return {e.key: e for e in self.edges}

    @cached_property
    def adjacency(self) -> Dict[str, List[str]]:
        """每个顶点的邻居（有序）"""
        adj: Dict[str, List[str]] = {v: [] for v in self.vertices}
        for e in self.edges:
            adj[e.u].append(e.v)
            adj[e.v].append(e.u)
        for v in adj:
            adj[v].sort()
        return adj

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def total_cost(self) -> int:
        return sum(e.cost for e in self.edges)

    @cached_property
    def total_capacity(self) -> int:
        return sum(e.capacity for e in self.edges)

    def degree(self, v: str) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((len(nbrs) for nbrs in self.adjacency.values()), default=0)

    def edge(self, u: str, v: str) -> Optional[Edge]:
        return self.edge_map.get(edge_key(u, v))

    def cost_of(self, keys: Iterable[EdgeKey]) -> int:
        return sum(self.edge_map[k].cost for k in keys)

    def capacity_of(self, keys: Iterable[EdgeKey]) -> int:
        return sum(self.edge_map[k].capacity for k in keys)

    def graph(self) -> nx.Graph:
        """转换为带 cost / capacity 属性的 networkx 图"""
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        for e in self.edges:
            g.add_edge(e.u, e.v, cost=e.cost, capacity=e.capacity)
        return g

    def is_unit_weight(self) -> bool:
        return all(e.cost == 1 and e.capacity == 1 for e in self.edges)

    def with_changes(self, **changes) -> 'Instance':
        """复制并修改字段（重新校验）"""
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'variant': self.variant.value,
            'vertices': list(self.vertices),
            'edges': [{'u': e.u, 'v': e.v, 'cost': e.cost, 'cap': e.capacity} for e in self.edges],
            's': self.s,
            't': self.t,
            'd': self.d,
            'a': self.a,
        }


def _require_int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceFormatException(f"{what} 必须是整数: {value!r}")
    return value


def _require_str(value: Any, what: str) -> str:
    if not isinstance(value, str):
        raise InstanceFormatException(f"{what} 必须是字符串: {value!r}")
    return value


def from_dict(data: Any) -> Instance:
    """从已解码的 JSON 对象构造实例"""
    if not isinstance(data, dict):
        raise InstanceFormatException("实例必须是 JSON 对象")
    missing = [k for k in _REQUIRED_KEYS if k not in data]
    if missing:
        raise InstanceFormatException(f"缺少字段: {', '.join(missing)}")
    unknown = [k for k in data if k not in _REQUIRED_KEYS and k not in _IGNORED_KEYS]
    if unknown:
        raise InstanceFormatException(f"未知字段: {', '.join(sorted(unknown))}")

    variant_name = _require_str(data['variant'], 'variant')
    try:
        variant = Variant(variant_name)
    except ValueError:
        raise InstanceFormatException(f"未知的问题变体: {variant_name}")

    if not isinstance(data['vertices'], list):
        raise InstanceFormatException("vertices 必须是数组")
    vertices = [_require_str(v, '顶点') for v in data['vertices']]

    if not isinstance(data['edges'], list):
        raise InstanceFormatException("edges 必须是数组")
    edges = []
    for raw in data['edges']:
        if not isinstance(raw, dict) or 'u' not in raw or 'v' not in raw:
            raise InstanceFormatException(f"边格式错误: {raw!r}")
        u = _require_str(raw['u'], '边端点')
        v = _require_str(raw['v'], '边端点')
        if variant == Variant.MCP:
            cost = _require_int(raw.get('cost', 1), 'cost')
            capacity = _require_int(raw.get('cap', 1), 'cap')
        else:
            if 'cost' not in raw or 'cap' not in raw:
                raise InstanceFormatException(f"{variant.value} 实例的边 {u}-{v} 必须给出 cost 与 cap")
            cost = _require_int(raw['cost'], 'cost')
            capacity = _require_int(raw['cap'], 'cap')
        edges.append(Edge(u, v, cost, capacity))

    return Instance(
        vertices=tuple(vertices),
        edges=tuple(edges),
        s=_require_str(data['s'], 's'),
        t=_require_str(data['t'], 't'),
        d=_require_int(data['d'], 'd'),
        a=_require_int(data['a'], 'a'),
        variant=variant,
    )


def parse(text: Union[bytes, str]) -> Instance:
    """解析 JSON 格式的实例，不做任何修复"""
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise InstanceFormatException(f"JSON 语法错误: {e}")
    return from_dict(data)


def serialize(inst: Instance) -> bytes:
    """规范化 JSON 输出（顶点、边均已排序）"""
    return json.dumps(inst.to_dict(), separators=(',', ':'), ensure_ascii=False).encode('utf-8')


def normalize(inst: Instance) -> Instance:
    """按预算截断权重并只保留包含 s 的连通分量

    s 与 t 不连通时空割即是容量为 0 的割，抛出 TrivialAnswerException(NO)。
    """
    component = nx.node_connected_component(inst.graph(), inst.s)
    if inst.t not in component:
        logger.info(f"s={inst.s} 与 t={inst.t} 不连通，实例判定为 NO")
        raise TrivialAnswerException(Answer.NO, "s and t are disconnected")

    edges = [
        Edge(e.u, e.v, min(e.cost, inst.d + 1), min(e.capacity, inst.a + 1))
        for e in inst.edges if e.u in component
    ]
    d = min(inst.d, sum(e.cost for e in edges))
    a = min(inst.a, sum(e.capacity for e in edges))
    dropped = inst.n - len(component)
    if dropped:
        logger.debug(f"删除 {dropped} 个不含 s 的分量顶点")
    return Instance(
        vertices=tuple(v for v in inst.vertices if v in component),
        edges=tuple(edges),
        s=inst.s,
        t=inst.t,
        d=d,
        a=a,
        variant=inst.variant,
    )
