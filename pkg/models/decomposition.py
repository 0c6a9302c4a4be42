from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from models.instance import Instance


class DecompositionException(Exception):
    """树分解非法或超出动态规划上限"""
    pass


class NodeKind(str, Enum):
    """nice 树分解的节点类型"""
    LEAF = "leaf"
    INTRODUCE = "introduce"
    FORGET = "forget"
    JOIN = "join"


@dataclass(frozen=True)
class BagPartition:
    """bag 的规范划分：块内有序，块按最小元素排序"""
    blocks: Tuple[Tuple[str, ...], ...]

    @classmethod
    def of(cls, blocks: Iterable[Iterable[str]]) -> 'BagPartition':
        normalized = [tuple(sorted(b)) for b in blocks]
        if any(not b for b in normalized):
            raise ValueError("划分中存在空块")
        members = [v for b in normalized for v in b]
        if len(members) != len(set(members)):
            raise ValueError("划分的块相交")
        return cls(tuple(sorted(normalized)))

    @classmethod
    def from_rgs(cls, order: Sequence[str], rgs: Sequence[int]) -> 'BagPartition':
        """由受限增长串构造"""
        groups: Dict[int, List[str]] = {}
        for v, label in zip(order, rgs):
            groups.setdefault(label, []).append(v)
        return cls.of(groups.values())

    @property
    def elements(self) -> FrozenSet[str]:
        return frozenset(v for b in self.blocks for v in b)

    def rgs(self, order: Sequence[str]) -> Tuple[int, ...]:
        """按给定顶点顺序编码为受限增长串"""
        labels: Dict[int, int] = {}
        out = []
        for v in order:
            block = self.block_index(v)
            if block not in labels:
                labels[block] = len(labels)
            out.append(labels[block])
        return tuple(out)

    def block_index(self, v: str) -> int:
        for i, b in enumerate(self.blocks):
            if v in b:
                return i
        raise KeyError(v)

    def separates(self, u: str, v: str) -> bool:
        return self.block_index(u) != self.block_index(v)

    def minus(self, v: str) -> 'BagPartition':
        """P - v"""
        return BagPartition.of(rest for rest in (tuple(x for x in b if x != v) for b in self.blocks) if rest)

    def plus(self, w: str) -> List['BagPartition']:
        """P + w：把 w 放入某个已有块或单独成块"""
        if w in self.elements:
            raise ValueError(f"{w} 已在划分中")
        options = [BagPartition.of(list(self.blocks[:i]) + [b + (w,)] + list(self.blocks[i + 1:]))
                   for i, b in enumerate(self.blocks)]
        options.append(BagPartition.of(list(self.blocks) + [(w,)]))
        return options


@dataclass(frozen=True)
class DecompositionNode:
    id: int
    kind: NodeKind
    bag: FrozenSet[str]
    children: Tuple[int, ...] = ()
    vertex: Optional[str] = None


@dataclass
class NiceDecomposition:
    """有根 nice 树分解，每个 bag 都含 {s,t}"""
    nodes: Dict[int, DecompositionNode]
    root: int
    terminals: Tuple[str, str]
    strategy: str = ""
    _parents: Dict[int, int] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        for node in self.nodes.values():
            for child in node.children:
                self._parents[child] = node.id

    @property
    def width(self) -> int:
        return max(len(node.bag) for node in self.nodes.values()) - 1

    @property
    def max_join_bag(self) -> int:
        return max((len(n.bag) for n in self.nodes.values() if n.kind == NodeKind.JOIN), default=0)

    def parent(self, node_id: int) -> Optional[int]:
        return self._parents.get(node_id)

    def postorder(self) -> List[int]:
        order: List[int] = []
        stack = [(self.root, False)]
        while stack:
            node_id, expanded = stack.pop()
            if expanded:
                order.append(node_id)
                continue
            stack.append((node_id, True))
            for child in reversed(self.nodes[node_id].children):
                stack.append((child, False))
        return order

    def subtree_vertices(self, node_id: int) -> Set[str]:
        """V_x：子树中所有 bag 的并"""
        result: Set[str] = set()
        stack = [node_id]
        while stack:
            node = self.nodes[stack.pop()]
            result |= node.bag
            stack.extend(node.children)
        return result

    def validate(self, inst: Instance):
        """检查 nice 树分解的全部性质，违反时抛出 DecompositionException 并指明性质"""
        s, t = self.terminals
        terminals = {s, t}
        if self.nodes[self.root].bag != terminals:
            raise DecompositionException("root bag 必须恰好是 {s,t}")
        if len(self.postorder()) != len(self.nodes):
            raise DecompositionException("tree: 节点不连通")
        for node in self.nodes.values():
            if not terminals <= node.bag:
                raise DecompositionException(f"terminals: 节点 {node.id} 的 bag 不含 s,t")
            kids = [self.nodes[c] for c in node.children]
            if node.kind == NodeKind.LEAF:
                ok = not kids and node.bag == terminals
            elif node.kind == NodeKind.INTRODUCE:
                ok = len(kids) == 1 and node.vertex not in kids[0].bag and node.bag == kids[0].bag | {node.vertex}
            elif node.kind == NodeKind.FORGET:
                ok = len(kids) == 1 and node.vertex not in node.bag and kids[0].bag == node.bag | {node.vertex}
            else:
                ok = len(kids) == 2 and all(k.bag == node.bag for k in kids)
            if not ok:
                raise DecompositionException(f"nice: 节点 {node.id} ({node.kind.value}) 不满足定义")

        occurrences: Dict[str, List[int]] = {}
        for node in self.nodes.values():
            for v in node.bag:
                occurrences.setdefault(v, []).append(node.id)
        missing = [v for v in inst.vertices if v not in occurrences]
        if missing:
            raise DecompositionException(f"vertex cover: 顶点 {missing[0]} 不在任何 bag 中")
        for e in inst.edges:
            if {e.u, e.v} == terminals:
                continue
            if not any({e.u, e.v} <= node.bag for node in self.nodes.values()):
                raise DecompositionException(f"edge cover: 边 {e.u}-{e.v} 不在任何 bag 中")
        for v, ids in occurrences.items():
            # 出现 v 的节点中恰有一个的父节点不含 v
            tops = [i for i in ids if self.parent(i) is None or v not in self.nodes[self.parent(i)].bag]
            if len(tops) != 1:
                raise DecompositionException(f"connectivity: 含 {v} 的 bag 不构成连通子树")

    def to_td(self, inst: Instance) -> str:
        """输出 PACE .td 文本（顶点按实例顶点序从 1 编号）"""
        number = {v: i + 1 for i, v in enumerate(inst.vertices)}
        ids = {node_id: i + 1 for i, node_id in enumerate(sorted(self.nodes))}
        lines = [f"s td {len(self.nodes)} {self.width + 1} {inst.n}"]
        for node_id in sorted(self.nodes):
            members = sorted(number[v] for v in self.nodes[node_id].bag)
            lines.append(" ".join(["b", str(ids[node_id])] + [str(x) for x in members]))
        for node_id in sorted(self.nodes):
            for child in self.nodes[node_id].children:
                lines.append(f"{ids[node_id]} {ids[child]}")
        return "\n".join(lines) + "\n"


@dataclass
class RawDecomposition:
    """从 .td 读入的普通树分解（顶点编号从 1 开始）"""
    vertex_count: int
    bags: Dict[int, Set[int]]
    tree_edges: List[Tuple[int, int]]


def parse_td(text: str) -> RawDecomposition:
    """解析 PACE .td 格式"""
    header: Optional[Tuple[int, int, int]] = None
    bags: Dict[int, Set[int]] = {}
    tree_edges: List[Tuple[int, int]] = []
    for line_num, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith('c'):
            continue
        parts = line.split()
        try:
            if parts[0] == 's':
                if header is not None or len(parts) != 5 or parts[1] != 'td':
                    raise DecompositionException(f"第 {line_num} 行: 非法的 's td' 行")
                header = (int(parts[2]), int(parts[3]), int(parts[4]))
            elif parts[0] == 'b':
                if header is None:
                    raise DecompositionException(f"第 {line_num} 行: bag 出现在 's td' 行之前")
                bag_id = int(parts[1])
                if bag_id in bags:
                    raise DecompositionException(f"第 {line_num} 行: bag {bag_id} 重复")
                bags[bag_id] = {int(v) for v in parts[2:]}
            else:
                if header is None:
                    raise DecompositionException(f"第 {line_num} 行: 树边出现在 's td' 行之前")
                if len(parts) != 2:
                    raise DecompositionException(f"第 {line_num} 行: 树边必须恰好两个 bag 编号")
                tree_edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise DecompositionException(f"第 {line_num} 行: 非整数内容")
    if header is None:
        raise DecompositionException("缺少 's td' 行")
    if len(bags) != header[0]:
        raise DecompositionException(f"声明了 {header[0]} 个 bag，实际 {len(bags)} 个")
    largest = max((len(bag) for bag in bags.values()), default=0)
    if largest != header[1]:
        raise DecompositionException(f"声明的最大 bag 大小为 {header[1]}，实际为 {largest}")
    return RawDecomposition(vertex_count=header[2], bags=bags, tree_edges=tree_edges)
