import logging
from itertools import combinations
from typing import Callable, Dict, FrozenSet, List, Optional, Set, Union

import networkx as nx

from config import Config
from models.certificate import DefenseSet
from models.decomposition import DecompositionException
from models.instance import EdgeKey, Instance, TrivialAnswerException, Variant, edge_key, normalize
from models.outcome import Answer, SolveOutcome
from services.cut_enumeration import BipartitionEnumerator
from services.exceptions import BudgetExceededException, SolverNotApplicableException
from services.flow import avoiding_min_cut, bipartite_min_cost_vertex_cover
from services.kernel import min_vertex_cover
from services.transform import lift_defense, rule1_exhaust
from services.twdp import dp_solve

logger = logging.getLogger(__name__)

MODE_DEFENDER = 'defender'
MODE_DOUBLE = 'double'


def verify_defense(inst: Instance, defense: Union[DefenseSet, List[EdgeKey]]) -> bool:
    """防御集代价 ≤ d 且不存在避开它、容量 ≤ a 的割"""
    keys = defense.edges if isinstance(defense, DefenseSet) else defense
    defense = DefenseSet.of(inst, keys)
    return defense.total_cost <= inst.d and avoiding_min_cut(inst, defense) is None


def _path_defense(inst: Instance, path: List[str]) -> DefenseSet:
    return DefenseSet.of(inst, [edge_key(p, q) for p, q in zip(path, path[1:])])


def _mask_cost(costs: List[int], mask: int) -> int:
    total = 0
    while mask:
        low = mask & -mask
        total += costs[low.bit_length() - 1]
        mask ^= low
    return total


class SolverService:
    """精确求解器集合"""

    def __init__(self, config: Optional[Config] = None):
        self.config = config or Config()
        self.logger = logging.getLogger(__name__)

    # ---- 暴力 ----

    def brute_force(self, inst: Instance, mode: str = MODE_DEFENDER) -> SolveOutcome:
        """枚举防御集求最小代价解

        defender：按代价从小到大枚举 D，用最小割判定；
        double：攻击方也改为枚举全部极小割，不调用最大流，再求最小代价碰撞集。
        """
        if mode == MODE_DEFENDER:
            return self._brute_defender(inst)
        if mode == MODE_DOUBLE:
            return self._brute_double(inst)
        raise ValueError(f"未知的暴力模式: {mode}")

    def _brute_defender(self, inst: Instance) -> SolveOutcome:
        if inst.m > self.config.brute_max_edges:
            raise BudgetExceededException('brute_max_edges', self.config.brute_max_edges,
                                          f"暴力求解最多支持 {self.config.brute_max_edges} 条边，实例有 {inst.m} 条")
        costs = [e.cost for e in inst.edges]
        masks = [mask for mask in range(1 << inst.m) if _mask_cost(costs, mask) <= inst.d]
        masks.sort(key=lambda mask: (_mask_cost(costs, mask), mask))

        outcome = SolveOutcome(Answer.NO, solver='brute')
        for mask in masks:
            outcome.bump('oracle_calls')
            keys = [inst.edges[k].key for k in range(inst.m) if mask >> k & 1]
            if avoiding_min_cut(inst, keys) is None:
                outcome.answer = Answer.YES
                outcome.defense = DefenseSet.of(inst, keys)
                break
        return outcome

    def _brute_double(self, inst: Instance) -> SolveOutcome:
        if inst.m > self.config.brute_double_max_edges:
            raise BudgetExceededException('brute_double_max_edges', self.config.brute_double_max_edges,
                                          f"双重暴力最多支持 {self.config.brute_double_max_edges} 条边，实例有 {inst.m} 条")
        enumerator = BipartitionEnumerator(inst, self.config.enum_max_free_vertices)
        cuts = [mask for mask, _ in enumerator.minimal_cuts(inst.a)]
        costs = [e.cost for e in inst.edges]
        outcome = SolveOutcome(Answer.NO, solver='brute')
        outcome.stats['cuts_enumerated'] = len(cuts)

        # 最小代价碰撞集：每个容量 ≤ a 的极小割至少保护一条边
        best = {'cost': inst.d + 1, 'mask': None}

        def branch(chosen: int, cost: int):
            outcome.bump('nodes_expanded')
            if cost >= best['cost']:
                return
            unhit = [c for c in cuts if not c & chosen]
            if not unhit:
                best['cost'], best['mask'] = cost, chosen
                return
            target = min(unhit, key=lambda c: (bin(c).count('1'), c))
            for k in range(inst.m):
                if target >> k & 1 and cost + costs[k] < best['cost']:
                    branch(chosen | 1 << k, cost + costs[k])

        branch(0, 0)
        if best['mask'] is not None:
            outcome.answer = Answer.YES
            outcome.defense = DefenseSet.of(inst, enumerator.keys_of(best['mask']))
        return outcome

    # ---- a^d 搜索树 ----

    def search_tree(self, inst: Instance) -> SolveOutcome:
        """每个节点取一个避开 D 的最小割 A（|A| ≤ a），分支保护 A 中的每条边"""
        if inst.variant == Variant.ZWMCP or any(e.capacity < 1 for e in inst.edges):
            raise SolverNotApplicableException("search tree requires capacities ≥ 1")

        outcome = SolveOutcome(Answer.NO, solver='search')
        outcome.stats['nodes_expanded'] = 0
        outcome.stats['oracle_calls'] = 0
        seen: Set[FrozenSet[EdgeKey]] = {frozenset()}
        limit = self.config.search_max_nodes

        def explore(protected: FrozenSet[EdgeKey], cost: int) -> Optional[FrozenSet[EdgeKey]]:
            outcome.bump('nodes_expanded')
            if outcome.stats['nodes_expanded'] > limit:
                raise BudgetExceededException('search_max_nodes', limit, f"搜索树节点数超过上限 {limit}")
            outcome.bump('oracle_calls')
            cut = avoiding_min_cut(inst, protected)
            if cut is None:
                return protected
            for key in cut.sorted_edges():
                extra = inst.edge_map[key].cost
                child = protected | {key}
                if cost + extra > inst.d or child in seen:
                    continue
                seen.add(child)
                found = explore(child, cost + extra)
                if found is not None:
                    return found
            return None

        found = explore(frozenset(), 0)
        if found is not None:
            outcome.answer = Answer.YES
            outcome.defense = DefenseSet.of(inst, found)
        self.logger.debug(f"搜索树展开 {outcome.stats['nodes_expanded']} 个节点")
        return outcome

    # ---- 最大度 ≤ 2 ----

    def degree2(self, inst: Instance) -> SolveOutcome:
        """路径或环上的多项式算法"""
        if inst.max_degree > 2:
            raise SolverNotApplicableException(f"degree2 要求最大度 ≤ 2，实例最大度为 {inst.max_degree}")
        graph = inst.graph()
        if not nx.is_connected(graph):
            raise SolverNotApplicableException("degree2 要求连通图")

        first = nx.shortest_path(graph, inst.s, inst.t)
        first_keys = [edge_key(p, q) for p, q in zip(first, first[1:])]
        if inst.m == inst.n - 1:
            # 路径：每条容量 ≤ a 的边单独就是一个割
            needed = [k for k in first_keys if inst.edge_map[k].capacity <= inst.a]
            defense = DefenseSet.of(inst, needed)
            answer = Answer.of(defense.total_cost <= inst.d)
            return SolveOutcome(answer, defense if answer == Answer.YES else None,
                                {'cover_cost': defense.total_cost}, solver='deg2')

        rest = graph.copy()
        rest.remove_edges_from(first_keys)
        second = nx.shortest_path(rest, inst.s, inst.t)
        second_keys = [edge_key(p, q) for p, q in zip(second, second[1:])]
        # 环：极小割恰好是两条路径上各取一条边
        pairs = [(x, y) for x in first_keys for y in second_keys
                 if inst.edge_map[x].capacity + inst.edge_map[y].capacity <= inst.a]
        cost = {k: inst.edge_map[k].cost for k in first_keys + second_keys}
        value, cover = bipartite_min_cost_vertex_cover(first_keys, second_keys, pairs, cost)
        outcome = SolveOutcome(Answer.of(value <= inst.d), None, {'cover_cost': value}, solver='deg2')
        if outcome.is_yes:
            outcome.defense = DefenseSet.of(inst, cover)
        return outcome

    # ---- 顶点覆盖参数 ----

    def vc_fpt(self, inst: Instance) -> SolveOutcome:
        """MCP 的顶点覆盖 FPT 算法"""
        if inst.variant != Variant.MCP:
            raise SolverNotApplicableException("vc_fpt 只接受 MCP 实例")
        try:
            inst = normalize(inst)
        except TrivialAnswerException as e:
            return SolveOutcome(e.answer, None, {}, solver='vc')

        cover = min_vertex_cover(inst.graph(), self.config.vc_max_branch_nodes)
        vc = len(cover)
        if vc > self.config.vc_fpt_max_vc:
            raise BudgetExceededException('vc_fpt_max_vc', self.config.vc_fpt_max_vc,
                                          f"顶点覆盖数 {vc} 超过上限 {self.config.vc_fpt_max_vc}")
        outcome = SolveOutcome(Answer.NO, solver='vc')
        outcome.stats['vertex_cover'] = vc
        if inst.d >= 2 * vc:
            path = nx.shortest_path(inst.graph(), inst.s, inst.t)
            outcome.answer = Answer.YES
            outcome.defense = _path_defense(inst, path)
            return outcome

        core = set(cover) | {inst.s, inst.t}
        classes: Dict[FrozenSet[str], List[str]] = {}
        for v in inst.vertices:
            if v not in core:
                classes.setdefault(frozenset(inst.adjacency[v]), []).append(v)
        candidates: Set[EdgeKey] = {e.key for e in inst.edges if e.u in core and e.v in core}
        for neighborhood, members in classes.items():
            for v in sorted(members)[:len(neighborhood)]:
                candidates |= {edge_key(v, x) for x in neighborhood}
        ordered = sorted(candidates)
        outcome.stats['candidate_edges'] = len(ordered)

        limit = self.config.vc_fpt_max_subsets
        for size in range(min(inst.d, len(ordered)) + 1):
            for subset in combinations(ordered, size):
                outcome.bump('oracle_calls')
                if outcome.stats['oracle_calls'] > limit:
                    raise BudgetExceededException('vc_fpt_max_subsets', limit, f"候选子集数超过上限 {limit}")
                if avoiding_min_cut(inst, subset) is None:
                    outcome.answer = Answer.YES
                    outcome.defense = DefenseSet.of(inst, subset)
                    return outcome
        return outcome

    # ---- (d, Δ) 包装 ----

    def mcp_degree_wrapper(self, inst: Instance) -> SolveOutcome:
        """短路径直接保护；a 相对 (d/2+1)·Δ 足够大时直接判否；否则交给搜索树"""
        if inst.variant != Variant.MCP:
            raise SolverNotApplicableException("mcp_degree_wrapper 只接受 MCP 实例")
        try:
            inst = normalize(inst)
        except TrivialAnswerException as e:
            return SolveOutcome(e.answer, None, {}, solver='wrapper')

        path = nx.shortest_path(inst.graph(), inst.s, inst.t)
        if len(path) - 1 <= inst.d:
            return SolveOutcome(Answer.YES, _path_defense(inst, path), {'nodes_expanded': 0}, solver='wrapper')
        if 2 * inst.a >= (inst.d + 2) * inst.max_degree:
            return SolveOutcome(Answer.NO, None, {'nodes_expanded': 0}, solver='wrapper')
        outcome = self.search_tree(inst)
        outcome.solver = 'wrapper'
        return outcome

    # ---- 树分解 ----

    def dp(self, inst: Instance) -> SolveOutcome:
        try:
            inst = normalize(inst)
        except TrivialAnswerException as e:
            return SolveOutcome(e.answer, None, {'table_entries': 0}, solver='dp')
        return dp_solve(inst, config=self.config)

    # ---- 自动调度 ----

    def auto(self, inst: Instance) -> SolveOutcome:
        """按实例结构选择求解器"""
        original = inst
        try:
            inst = normalize(inst)
        except TrivialAnswerException as e:
            self.logger.info(f"规范化直接判定: {e.reason}")
            return SolveOutcome(e.answer, None, {}, solver='normalize')

        outcome = self._dispatch(inst)
        if outcome.defense is not None:
            outcome.defense = DefenseSet.of(original, outcome.defense.edges)
        return outcome

    def _dispatch(self, inst: Instance) -> SolveOutcome:
        if inst.max_degree <= 2:
            self.logger.info("最大度 ≤ 2，使用 degree2")
            return self.degree2(inst)

        if inst.variant == Variant.MCP:
            try:
                vc = len(min_vertex_cover(inst.graph(), self.config.vc_max_branch_nodes))
                if vc <= self.config.auto_vc_max:
                    self.logger.info(f"顶点覆盖数 {vc}，使用 vc_fpt")
                    return self.vc_fpt(inst)
            except BudgetExceededException as e:
                self.logger.warning(f"vc_fpt 超出预算，继续尝试其他求解器: {e}")

        try:
            reduced, trace = rule1_exhaust(inst, self.config.enum_max_free_vertices)
        except TrivialAnswerException as e:
            self.logger.info(f"规则 1 直接判定: {e.reason}")
            return SolveOutcome(e.answer, DefenseSet.empty() if e.answer == Answer.YES else None, {}, solver='rule1')

        try:
            outcome = dp_solve(reduced, config=self.config, max_width=self.config.auto_width_cap)
            self.logger.info(f"规则 1 合并 {len(trace)} 次后使用树分解动态规划")
            if outcome.defense is not None:
                outcome.defense = lift_defense(inst, trace, outcome.defense)
            outcome.stats['rule1_merges'] = len(trace)
            return outcome
        except (DecompositionException, BudgetExceededException) as e:
            self.logger.info(f"动态规划不适用: {e}")

        try:
            if inst.variant != Variant.ZWMCP:
                self.logger.info("使用搜索树")
                return self.search_tree(inst)
            self.logger.info("使用暴力枚举")
            return self.brute_force(inst, MODE_DOUBLE)
        except BudgetExceededException as e:
            self.logger.error(f"没有在预算内可用的求解器: {e}")
            raise SolverNotApplicableException(f"no applicable solver within budgets: {e}")

    def algorithms(self) -> Dict[str, Callable[[Instance], SolveOutcome]]:
        """CLI 算法名到求解函数"""
        return {
            'auto': self.auto,
            'brute': self.brute_force,
            'search': self.search_tree,
            'deg2': self.degree2,
            'vc': self.vc_fpt,
            'dp': self.dp,
            'wrapper': self.mcp_degree_wrapper,
        }


def brute_force(inst: Instance, mode: str = MODE_DEFENDER, config: Optional[Config] = None) -> SolveOutcome:
    return SolverService(config).brute_force(inst, mode)


def search_tree(inst: Instance, config: Optional[Config] = None) -> SolveOutcome:
    return SolverService(config).search_tree(inst)


def degree2(inst: Instance) -> SolveOutcome:
    return SolverService().degree2(inst)


def vc_fpt(inst: Instance, config: Optional[Config] = None) -> SolveOutcome:
    return SolverService(config).vc_fpt(inst)


def mcp_degree_wrapper(inst: Instance, config: Optional[Config] = None) -> SolveOutcome:
    return SolverService(config).mcp_degree_wrapper(inst)


def auto(inst: Instance, config: Optional[Config] = None) -> SolveOutcome:
    return SolverService(config).auto(inst)
