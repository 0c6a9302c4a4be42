import logging
import os
from dataclasses import dataclass
from dotenv import load_dotenv

load_dotenv()

@dataclass
class Config:
    # 暴力求解配置
    brute_max_edges: int = int(os.getenv('MCP_BRUTE_MAX_EDGES', '16'))
    brute_double_max_edges: int = int(os.getenv('MCP_BRUTE_DOUBLE_MAX_EDGES', '12'))
    enum_max_free_vertices: int = int(os.getenv('MCP_ENUM_MAX_FREE_VERTICES', '22'))  # n ≤ 24

    # 顶点覆盖 / 搜索树配置
    vc_max_branch_nodes: int = int(os.getenv('MCP_VC_MAX_BRANCH_NODES', '200000'))
    vc_fpt_max_vc: int = int(os.getenv('MCP_VC_FPT_MAX_VC', '8'))
    vc_fpt_max_subsets: int = int(os.getenv('MCP_VC_FPT_MAX_SUBSETS', '2000000'))
    search_max_nodes: int = int(os.getenv('MCP_SEARCH_MAX_NODES', '1000000'))

    # 树分解动态规划配置
    twdp_max_bag: int = int(os.getenv('MCP_TWDP_MAX_BAG', '7'))
    twdp_max_join_bag: int = int(os.getenv('MCP_TWDP_MAX_JOIN_BAG', '3'))  # Bell(3) = 5
    twdp_max_join_combinations: int = int(os.getenv('MCP_TWDP_MAX_JOIN_COMBINATIONS', '100000'))
    twdp_prune_join: bool = os.getenv('MCP_TWDP_PRUNE_JOIN', 'true').lower() == 'true'

    # 自动调度配置
    auto_vc_max: int = int(os.getenv('MCP_AUTO_VC_MAX', '4'))
    auto_width_cap: int = int(os.getenv('MCP_AUTO_WIDTH_CAP', '4'))

    # 日志配置
    log_level: str = os.getenv('MCP_LOG_LEVEL', 'INFO')
    log_file: str = os.getenv('MCP_LOG_FILE', '')

    def validate(self) -> bool:
        """验证配置是否合法"""
        budgets = [
            self.brute_max_edges, self.brute_double_max_edges,
            self.enum_max_free_vertices, self.vc_max_branch_nodes,
            self.vc_fpt_max_vc, self.vc_fpt_max_subsets,
            self.search_max_nodes, self.twdp_max_bag,
            self.twdp_max_join_bag, self.twdp_max_join_combinations,
        ]
        if not all(budget > 0 for budget in budgets):
            return False
        if self.auto_vc_max < 0 or self.auto_width_cap < 0:
            return False
        return isinstance(logging.getLevelName(self.log_level.upper()), int)
