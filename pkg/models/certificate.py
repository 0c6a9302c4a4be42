from dataclasses import dataclass
from typing import Any, FrozenSet, Iterable, List

from models.instance import EdgeKey, Instance, InstanceFormatException, edge_key


def _checked_keys(inst: Instance, edges: Iterable[EdgeKey]) -> FrozenSet[EdgeKey]:
    keys = frozenset(edge_key(u, v) for u, v in edges)
    unknown = [k for k in keys if k not in inst.edge_map]
    if unknown:
        u, v = sorted(unknown)[0]
        raise InstanceFormatException(f"边不在实例中: {u}-{v}")
    return keys


@dataclass(frozen=True)
class DefenseSet:
    """防御者保护的边集合"""
    edges: FrozenSet[EdgeKey]
    total_cost: int

    @classmethod
    def of(cls, inst: Instance, edges: Iterable[EdgeKey]) -> 'DefenseSet':
        keys = _checked_keys(inst, edges)
        return cls(keys, inst.cost_of(keys))

    @classmethod
    def empty(cls) -> 'DefenseSet':
        return cls(frozenset(), 0)

    def sorted_edges(self) -> List[EdgeKey]:
        return sorted(self.edges)

    def to_json(self) -> List[List[str]]:
        return [[u, v] for u, v in self.sorted_edges()]

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class CutSet:
    """攻击者删除的边集合（(s,t)-割）"""
    edges: FrozenSet[EdgeKey]
    total_capacity: int

    @classmethod
    def of(cls, inst: Instance, edges: Iterable[EdgeKey]) -> 'CutSet':
        keys = _checked_keys(inst, edges)
        return cls(keys, inst.capacity_of(keys))

    def sorted_edges(self) -> List[EdgeKey]:
        return sorted(self.edges)

    def to_json(self) -> Any:
        return {'edges': [[u, v] for u, v in self.sorted_edges()], 'capacity': self.total_capacity}

    def __len__(self) -> int:
        return len(self.edges)
