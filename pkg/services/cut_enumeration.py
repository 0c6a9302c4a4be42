import logging
from typing import Iterator, List, Tuple

from models.instance import EdgeKey, Instance
from services.exceptions import BudgetExceededException

logger = logging.getLogger(__name__)


class BipartitionEnumerator:
    """按位掩码枚举 s ∈ S、t ∉ S 的顶点集合 S

    非端点顶点按字典序编号，S 由其二进制展开给出。只产生
    包含极小割 E(S, V\\S) 的 S：G[S] 连通，且每条割边都进入
    G - S 中 t 所在的分量。这样每个极小割恰好出现一次。
    """

    def __init__(self, inst: Instance, max_free_vertices: int):
        self.inst = inst
        self.logger = logging.getLogger(__name__)
        self.index = {v: i for i, v in enumerate(inst.vertices)}
        self.s_bit = 1 << self.index[inst.s]
        self.t_index = self.index[inst.t]
        self.free = [self.index[v] for v in inst.vertices if v not in (inst.s, inst.t)]
        if len(self.free) > max_free_vertices:
            raise BudgetExceededException(
                'enum_max_free_vertices', max_free_vertices,
                f"划分枚举需要 2^{len(self.free)} 次，超出上限 2^{max_free_vertices}"
            )
        self.full = (1 << inst.n) - 1
        self.adj = [0] * inst.n
        self.edge_ends: List[Tuple[int, int]] = []
        self.capacities: List[int] = []
        for e in inst.edges:
            i, j = self.index[e.u], self.index[e.v]
            self.adj[i] |= 1 << j
            self.adj[j] |= 1 << i
            self.edge_ends.append((i, j))
            self.capacities.append(e.capacity)

    def _neighborhood(self, mask: int) -> int:
        result = 0
        while mask:
            low = mask & -mask
            result |= self.adj[low.bit_length() - 1]
            mask ^= low
        return result

    def _component(self, start: int, allowed: int) -> int:
        seen = 1 << start
        frontier = seen
        while frontier:
            frontier = self._neighborhood(frontier) & allowed & ~seen
            seen |= frontier
        return seen

    def _side(self, bits: int) -> int:
        side = self.s_bit
        for k, i in enumerate(self.free):
            if bits >> k & 1:
                side |= 1 << i
        return side

    def _is_minimal_side(self, side: int) -> bool:
        s_index = self.s_bit.bit_length() - 1
        if self._component(s_index, side) != side:
            return False
        t_component = self._component(self.t_index, self.full & ~side)
        boundary = self._neighborhood(side) & ~side
        return boundary & ~t_component == 0

    def cut_of(self, side: int) -> Tuple[int, int]:
        """返回 (割边位掩码, 割容量)"""
        mask = 0
        capacity = 0
        for k, (i, j) in enumerate(self.edge_ends):
            if (side >> i & 1) != (side >> j & 1):
                mask |= 1 << k
                capacity += self.capacities[k]
        return mask, capacity

    def minimal_cuts(self, cap_bound: int) -> Iterator[Tuple[int, int]]:
        """逐个产生容量 ≤ cap_bound 的极小 (s,t)-割 (位掩码, 容量)"""
        for bits in range(1 << len(self.free)):
            side = self._side(bits)
            if not self._is_minimal_side(side):
                continue
            mask, capacity = self.cut_of(side)
            if capacity <= cap_bound:
                yield mask, capacity

    def keys_of(self, mask: int) -> List[EdgeKey]:
        edges = self.inst.edges
        return [edges[k].key for k in range(len(edges)) if mask >> k & 1]
