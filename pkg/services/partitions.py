from functools import lru_cache
from typing import Dict, Iterator, List, Sequence, Tuple

Rgs = Tuple[int, ...]


def restricted_growth_strings(k: int) -> Iterator[Rgs]:
    """长度为 k 的全部受限增长串，即 k 元集合的全部划分"""
    if k == 0:
        yield ()
        return

    def extend(prefix: List[int], top: int):
        if len(prefix) == k:
            yield tuple(prefix)
            return
        for label in range(top + 2):
            prefix.append(label)
            yield from extend(prefix, max(top, label))
            prefix.pop()

    yield from extend([0], 0)


def canonical_rgs(labels: Sequence[int]) -> Rgs:
    """按首次出现顺序重新编号"""
    mapping: Dict[int, int] = {}
    out = []
    for label in labels:
        if label not in mapping:
            mapping[label] = len(mapping)
        out.append(mapping[label])
    return tuple(out)


def drop_position(rgs: Rgs, pos: int) -> Rgs:
    return canonical_rgs(rgs[:pos] + rgs[pos + 1:])


@lru_cache(maxsize=None)
def bell_number(k: int) -> int:
    # Bell 三角
    row = [1]
    for _ in range(k):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


class BagTables:
    """一个 bag 的划分表

    bag 为有序的顶点编号元组；edges 为 bag 内部边 (位置 i, 位置 j, 全局边位号, 容量)。
    cross_mask / cross_cap 给出每个划分跨块的 bag 内部边。
    """

    def __init__(self, bag: Tuple[int, ...], edges: List[Tuple[int, int, int, int]]):
        self.bag = bag
        self.position = {v: i for i, v in enumerate(bag)}
        self.partitions: List[Rgs] = list(restricted_growth_strings(len(bag)))
        self.index: Dict[Rgs, int] = {p: i for i, p in enumerate(self.partitions)}
        self.cross_mask: List[int] = []
        self.cross_cap: List[int] = []
        for rgs in self.partitions:
            mask = 0
            cap = 0
            for i, j, bit, capacity in edges:
                if rgs[i] != rgs[j]:
                    mask |= 1 << bit
                    cap += capacity
            self.cross_mask.append(mask)
            self.cross_cap.append(cap)

    def __len__(self) -> int:
        return len(self.partitions)


def forget_lifts(small: BagTables, large: BagTables, vertex: int) -> List[List[int]]:
    """small = large - vertex；对 small 的每个划分 P 给出 P + vertex 在 large 中的编号"""
    pos = large.position[vertex]
    lifts: List[List[int]] = [[] for _ in small.partitions]
    for idx, rgs in enumerate(large.partitions):
        lifts[small.index[drop_position(rgs, pos)]].append(idx)
    return lifts


def introduce_projection(small: BagTables, large: BagTables, vertex: int,
                         vertex_edges: List[Tuple[int, int, int]]) -> List[Tuple[int, int, int]]:
    """large = small + vertex；对 large 的每个划分 P' 给出 (P' - vertex 的编号, A_P' 位掩码, ω(A_P'))

    vertex_edges 为 (另一端顶点编号, 全局边位号, 容量)。
    """
    pos = large.position[vertex]
    result = []
    for rgs in large.partitions:
        mask = 0
        cap = 0
        for other, bit, capacity in vertex_edges:
            if rgs[large.position[other]] != rgs[pos]:
                mask |= 1 << bit
                cap += capacity
        result.append((small.index[drop_position(rgs, pos)], mask, cap))
    return result
