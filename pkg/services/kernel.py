import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Optional, Set, Tuple

import networkx as nx

from config import Config
from models.instance import Instance, TrivialAnswerException, Variant, normalize
from models.outcome import Answer
from services.exceptions import BudgetExceededException, TransformNotApplicableException
from services.flow import gomory_hu_tree
from services.transform import merge, to_mcp

logger = logging.getLogger(__name__)

RULE_ST_DEG_ONE = 'st_deg_one'
RULE_DELETE_DEG_ONE = 'delete_deg_one'
RULE_MERGE_BIG_CUT = 'merge_big_cut'


class _BranchCounter:
    def __init__(self, limit: int):
        self.limit = limit
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.nodes > self.limit:
            raise BudgetExceededException('vc_max_branch_nodes', self.limit,
                                          f"顶点覆盖分支节点超过上限 {self.limit}")


def _cover_at_most(adj: Dict[Hashable, Set[Hashable]], k: int, counter: _BranchCounter) -> Optional[Set[Hashable]]:
    """大小 ≤ k 的顶点覆盖；不存在时返回 None"""
    counter.tick()
    adj = {v: nbrs for v, nbrs in adj.items() if nbrs}
    if not adj:
        return set()
    if k <= 0:
        return None
    edge_count = sum(len(nbrs) for nbrs in adj.values()) // 2
    v = max(sorted(adj, key=str), key=lambda x: len(adj[x]))
    if edge_count > k * len(adj[v]):
        return None

    for taken in ({v}, set(adj[v])):
        if len(taken) > k:
            continue
        rest = {x: nbrs - taken for x, nbrs in adj.items() if x not in taken}
        found = _cover_at_most(rest, k - len(taken), counter)
        if found is not None:
            return found | taken
    return None


def min_vertex_cover(graph: nx.Graph, max_branch_nodes: Optional[int] = None) -> Set[Hashable]:
    """精确最小顶点覆盖（按最大度顶点分支，逐步放宽 k）"""
    if max_branch_nodes is None:
        max_branch_nodes = Config().vc_max_branch_nodes
    adj = {v: set(graph[v]) - {v} for v in graph}
    counter = _BranchCounter(max_branch_nodes)
    lower = len(nx.maximal_matching(graph.subgraph([v for v in adj if adj[v]])))
    for k in range(lower, len(adj) + 1):
        found = _cover_at_most(adj, k, counter)
        if found is not None:
            return found
    return set(adj)


@dataclass
class KernelReport:
    """核化报告"""
    rounds: int = 0
    rules_fired: Dict[str, int] = field(default_factory=lambda: {
        RULE_ST_DEG_ONE: 0, RULE_DELETE_DEG_ONE: 0, RULE_MERGE_BIG_CUT: 0,
    })
    kernel_edges: Optional[int] = None
    kernel_vc: Optional[int] = None
    bound_2vca: Optional[int] = None
    bound_holds: Optional[bool] = None
    mcp_edges: Optional[int] = None
    bound_4vca2: Optional[int] = None
    mcp_bound_holds: Optional[bool] = None
    verdict: Optional[Answer] = None

    def to_json(self) -> Dict[str, Any]:
        report: Dict[str, Any] = {
            'rounds': self.rounds,
            'rules_fired': dict(self.rules_fired),
            'kernel_edges': self.kernel_edges,
            'kernel_vc': self.kernel_vc,
            'bound_2vca': self.bound_2vca,
            'bound_holds': self.bound_holds,
        }
        if self.mcp_edges is not None:
            report['mcp_edges'] = self.mcp_edges
            report['bound_4vca2'] = self.bound_4vca2
            report['mcp_bound_holds'] = self.mcp_bound_holds
        if self.verdict is not None:
            report['verdict'] = self.verdict.value
        return report


class KernelService:
    """(vc + a) 核化"""

    def __init__(self, config: Optional[Config] = None):
        self.config = config or Config()
        self.logger = logging.getLogger(__name__)

    def rule_st_deg_one(self, inst: Instance) -> Optional[Instance]:
        """端点只有一个邻居且该边容量 ≤ a：该边必须保护，端点前移"""
        for terminal, other in ((inst.s, inst.t), (inst.t, inst.s)):
            if inst.degree(terminal) != 1:
                continue
            w = inst.adjacency[terminal][0]
            edge = inst.edge(terminal, w)
            if edge.capacity > inst.a:
                continue
            d = inst.d - edge.cost
            if d < 0:
                raise TrivialAnswerException(Answer.NO, f"forced edge {edge.u}-{edge.v} exceeds the defender budget")
            if w == other:
                raise TrivialAnswerException(Answer.YES, "terminals coincide after protecting the forced edge")
            self.logger.debug(f"st-deg-one: 删除 {terminal}，新端点 {w}，d={d}")
            return Instance(
                vertices=tuple(v for v in inst.vertices if v != terminal),
                edges=tuple(e for e in inst.edges if e is not edge),
                s=w if terminal == inst.s else inst.s,
                t=w if terminal == inst.t else inst.t,
                d=d,
                a=inst.a,
                variant=inst.variant,
            )
        return None

    def rule_delete_deg_one(self, inst: Instance) -> Optional[Instance]:
        """删除度为 1 的非端点顶点"""
        for v in inst.vertices:
            if v in (inst.s, inst.t) or inst.degree(v) != 1:
                continue
            self.logger.debug(f"delete-deg-one: 删除 {v}")
            return inst.with_changes(
                vertices=tuple(x for x in inst.vertices if x != v),
                edges=tuple(e for e in inst.edges if v not in (e.u, e.v)),
            )
        return None

    def rule_merge_big_cut(self, inst: Instance) -> Optional[Instance]:
        """合并最小割容量 ≥ a+1 的顶点对（用 Gomory-Hu 树寻找）"""
        tree = gomory_hu_tree(inst)
        path = nx.shortest_path(tree, inst.s, inst.t)
        st_value = min(tree[p][q]['weight'] for p, q in zip(path, path[1:]))
        if st_value >= inst.a + 1:
            raise TrivialAnswerException(Answer.YES, f"min (s,t)-cut {st_value} exceeds a={inst.a}")

        heavy = sorted(
            (min(u, v), max(u, v)) for u, v, w in tree.edges(data='weight') if w >= inst.a + 1
        )
        if not heavy:
            return None
        u, v = heavy[0]
        self.logger.debug(f"merge-big-cut: 合并 {u} 与 {v}")
        return merge(inst, u, v)

    def min_vertex_cover(self, graph: nx.Graph) -> Set[Hashable]:
        return min_vertex_cover(graph, self.config.vc_max_branch_nodes)

    def kernelize(self, inst: Instance) -> Tuple[Optional[Instance], KernelReport]:
        """穷尽应用三条规则并检查核大小界"""
        if inst.variant == Variant.ZWMCP:
            raise TransformNotApplicableException("kernelize 只接受 MCP / WMCP 实例")
        report = KernelReport()
        from_mcp = inst.variant == Variant.MCP

        rules = [
            (RULE_ST_DEG_ONE, self.rule_st_deg_one),
            (RULE_DELETE_DEG_ONE, self.rule_delete_deg_one),
            (RULE_MERGE_BIG_CUT, self.rule_merge_big_cut),
        ]
        try:
            inst = normalize(inst)
            while True:
                for name, rule in rules:
                    try:
                        reduced = rule(inst)
                    except TrivialAnswerException:
                        report.rules_fired[name] += 1
                        raise
                    if reduced is not None:
                        report.rules_fired[name] += 1
                        report.rounds += 1
                        inst = reduced
                        break
                else:
                    break
        except TrivialAnswerException as e:
            report.verdict = e.answer
            self.logger.info(f"核化直接判定为 {e.answer.value}: {e.reason}")
            return None, report

        vc = len(self.min_vertex_cover(inst.graph()))
        report.kernel_edges = inst.m
        report.kernel_vc = vc
        report.bound_2vca = 2 * vc * inst.a
        report.bound_holds = inst.m <= report.bound_2vca
        if from_mcp:
            image = to_mcp(normalize(inst))
            report.mcp_edges = image.m
            report.bound_4vca2 = 4 * vc * inst.a * inst.a
            report.mcp_bound_holds = image.m <= report.bound_4vca2

        self.logger.info(
            f"核化完成: {report.rounds} 轮, |E|={inst.m}, vc={vc}, 2·vc·a={report.bound_2vca}"
        )
        if not report.bound_holds:
            self.logger.warning(f"核大小超出界: |E|={inst.m} > {report.bound_2vca}")
        return inst, report
