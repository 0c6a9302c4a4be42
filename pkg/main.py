import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx

from config import Config
from models.decomposition import DecompositionException, parse_td
from models.instance import (
    Instance, InstanceFormatException, TrivialAnswerException, edge_key, normalize, parse,
)
from models.outcome import Answer, SolveOutcome
from services.batch_runner import BatchRunner
from services.exceptions import (
    BudgetExceededException, SolverNotApplicableException, TransformNotApplicableException,
)
from services.flow import avoiding_min_cut
from services.generator import FAMILIES, GeneratorException, GeneratorService
from services.kernel import KernelService
from services.solver import MODE_DEFENDER, MODE_DOUBLE, SolverService, verify_defense
from services.transform import rule1_exhaust, subcubify, to_mcp, to_unit_capacity, to_unit_cost
from services.twdp import decomposition_from_td, dp_solve

EXIT_YES = 0
EXIT_NO = 1
EXIT_ERROR = 2

ALGORITHMS = ('auto', 'brute', 'search', 'deg2', 'vc', 'dp', 'wrapper')

# 这些异常转换为退出码 2 与 {"error": ...}
HANDLED_ERRORS = (
    InstanceFormatException, BudgetExceededException, SolverNotApplicableException,
    TransformNotApplicableException, DecompositionException, GeneratorException,
    ValueError, OSError,
)


class CliException(Exception):
    """命令行参数或输入错误"""
    pass


def _read_text(path: str) -> str:
    if path == '-':
        return sys.stdin.read()
    return Path(path).read_text(encoding='utf-8')


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(',', ':'))


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise CliException(f"需要逗号分隔的整数列表: {text}")


def _pair_list(text: str) -> List[Tuple[int, int]]:
    pairs = []
    for chunk in (c for c in text.split(',') if c.strip()):
        try:
            x, y = chunk.split('-')
            pairs.append((int(x), int(y)))
        except ValueError:
            raise CliException(f"边必须写成 x-y: {chunk}")
    return pairs


def _solve(inst: Instance, algo: str, config: Config, mode: str = MODE_DEFENDER,
           td_text: Optional[str] = None) -> SolveOutcome:
    service = SolverService(config)
    if algo == 'brute':
        return service.brute_force(inst, mode)
    if algo == 'dp' and td_text is not None:
        decomposition = decomposition_from_td(inst, parse_td(td_text))
        return dp_solve(inst, decomposition, config)
    return service.algorithms()[algo](inst)


def solve_report(inst: Instance, algo: str, config: Config, certificate: bool = False, stats: bool = False,
                 mode: str = MODE_DEFENDER, td_text: Optional[str] = None) -> Dict[str, Any]:
    """求解并生成报告；--certificate 时 YES 必须附带已验证的防御集"""
    outcome = _solve(inst, algo, config, mode, td_text)
    if certificate and outcome.is_yes:
        if outcome.defense is None or not verify_defense(inst, outcome.defense):
            raise SolverNotApplicableException(f"求解器 {outcome.solver} 的防御集未通过验证")
    report = outcome.to_report(with_defense=certificate, with_stats=stats)
    if stats:
        report['solver'] = outcome.solver
    return report


def solve_file(path: str, algo: str, config: Config, certificate: bool, stats: bool, mode: str) -> Dict[str, Any]:
    """批量模式下求解单个文件，错误写进报告"""
    try:
        report = solve_report(parse(_read_text(path)), algo, config, certificate, stats, mode)
    except HANDLED_ERRORS as e:
        report = {'error': str(e)}
    return {'file': path, **report}


class MinCutPreventionApp:
    """命令行应用"""

    def __init__(self, argv: Optional[Sequence[str]] = None):
        self.parser = build_parser()
        self.args = self.parser.parse_args(argv)
        self.config = self._build_config()
        self.logger = self._setup_logging()

    def _build_config(self) -> Config:
        """环境变量给出默认值，命令行参数覆盖"""
        config = Config()
        overrides = {}
        for name in ('brute_max_edges', 'brute_double_max_edges', 'enum_max_free_vertices',
                     'vc_max_branch_nodes', 'search_max_nodes', 'twdp_max_bag', 'twdp_max_join_bag',
                     'twdp_max_join_combinations', 'log_level', 'log_file'):
            value = getattr(self.args, name, None)
            if value is not None:
                overrides[name] = value
        if getattr(self.args, 'no_prune_join', False):
            overrides['twdp_prune_join'] = False
        return replace(config, **overrides)

    def _setup_logging(self) -> logging.Logger:
        """设置日志（stdout 留给 JSON 报告）"""
        handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
        if self.config.log_file:
            handlers.append(logging.FileHandler(self.config.log_file, encoding='utf-8'))
        level = logging.getLevelName(self.config.log_level.upper())
        logging.basicConfig(
            level=level if isinstance(level, int) else logging.INFO,
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=handlers,
        )
        return logging.getLogger(__name__)

    def _write(self, obj: Any):
        out = getattr(self.args, 'out', None)
        if out:
            Path(out).write_text(_dumps(obj) + "\n", encoding='utf-8')
        else:
            print(_dumps(obj))

    def run(self) -> int:
        """执行子命令，返回退出码"""
        if not self.config.validate():
            self.logger.error("配置验证失败，请检查环境变量与命令行参数")
            print(_dumps({'error': 'invalid configuration'}))
            return EXIT_ERROR
        handlers = {
            'solve': self.cmd_solve,
            'kernelize': self.cmd_kernelize,
            'transform': self.cmd_transform,
            'generate': self.cmd_generate,
            'verify': self.cmd_verify,
        }
        try:
            return handlers[self.args.command]()
        except (CliException, *HANDLED_ERRORS) as e:
            self.logger.error(f"{self.args.command} 失败: {e}")
            print(_dumps({'error': str(e)}))
            return EXIT_ERROR

    def cmd_solve(self) -> int:
        args = self.args
        target = Path(args.instance)
        if args.instance != '-' and target.is_dir():
            if args.td:
                raise CliException("--td 只能用于单个实例文件，不能与目录一起使用")
            return self._solve_directory(target)

        td_text = None
        if args.td:
            if args.algo != 'dp':
                raise CliException("--td 只能与 --algo dp 一起使用")
            td_text = _read_text(args.td)
        inst = parse(_read_text(args.instance))
        report = solve_report(inst, args.algo, self.config, args.certificate, args.stats, args.mode, td_text)
        self._write(report)
        return EXIT_YES if report['answer'] == Answer.YES.value else EXIT_NO

    def _solve_directory(self, directory: Path) -> int:
        files = sorted(str(p) for p in directory.glob('*.json'))
        runner = BatchRunner(self.args.jobs)
        for path in files:
            runner.add_job(solve_file, path, self.args.algo, self.config, self.args.certificate,
                           self.args.stats, self.args.mode, job_id=path)
        status = EXIT_YES
        for _, report in runner.run_all():
            if isinstance(report, Exception):
                raise report
            print(_dumps(report))
            if 'error' in report:
                status = EXIT_ERROR
            elif report['answer'] == Answer.NO.value and status == EXIT_YES:
                status = EXIT_NO
        self.logger.info(f"批量求解完成: {len(files)} 个文件")
        return status

    def cmd_kernelize(self) -> int:
        inst = parse(_read_text(self.args.instance))
        kernel, report = KernelService(self.config).kernelize(inst)
        self._write({'report': report.to_json(), 'instance': kernel.to_dict() if kernel is not None else None})
        return EXIT_YES

    def cmd_transform(self) -> int:
        args = self.args
        inst = parse(_read_text(args.instance))
        metadata: Dict[str, Any] = {}
        if args.rule1:
            try:
                result, trace = rule1_exhaust(normalize(inst), self.config.enum_max_free_vertices)
            except TrivialAnswerException as e:
                self._write({'answer': e.answer.value, 'reason': e.reason})
                return EXIT_YES
            metadata = {'transform': 'rule1', 'merges': trace.to_json()}
        elif args.to_unit_cost:
            result, metadata = to_unit_cost(inst), {'transform': 'to_unit_cost'}
        elif args.to_unit_capacity:
            result, metadata = to_unit_capacity(inst), {'transform': 'to_unit_capacity'}
        elif args.to_mcp:
            result, metadata = to_mcp(inst), {'transform': 'to_mcp'}
        else:
            result, metadata = subcubify(inst), {'transform': 'subcubify'}
        self._write({**result.to_dict(), 'metadata': metadata})
        return EXIT_YES

    def cmd_generate(self) -> int:
        args = self.args
        service = GeneratorService(args.seed)
        if args.seed is not None:
            generated = service.random(args.family)
        elif args.family == 'is':
            graph = nx.Graph()
            graph.add_nodes_from(range(self._required('vertices')))
            graph.add_edges_from(_pair_list(args.edges or ''))
            generated = service.regular_is(graph, self._required('k'))
        elif args.family == 'knapsack':
            generated = service.knapsack(_int_list(self._required('items')), _int_list(self._required('values')),
                                         self._required('B'), self._required('C'))
        elif args.family == 'binpacking':
            generated = service.binpacking(_int_list(self._required('items')), self._required('B'),
                                           self._required('k'))
        else:
            left = list(range(1, self._required('left') + 1))
            right = list(range(1, self._required('right') + 1))
            generated = service.biclique(left, right, _pair_list(args.edges or ''), self._required('k'))
        if not args.witness:
            generated.metadata.pop('witness', None)
        self._write(generated.to_dict())
        return EXIT_YES

    def _required(self, name: str) -> Any:
        value = getattr(self.args, name)
        if value is None:
            raise CliException(f"generate {self.args.family} 需要参数 --{name}")
        return value

    def cmd_verify(self) -> int:
        inst = parse(_read_text(self.args.instance))
        try:
            raw = json.loads(_read_text(self.args.defense))
        except json.JSONDecodeError as e:
            raise CliException(f"防御集文件不是合法 JSON: {e}")
        if isinstance(raw, dict):
            raw = raw.get('defense', [])
        if not isinstance(raw, list) or any(not isinstance(p, list) or len(p) != 2 for p in raw):
            raise CliException("防御集必须是 [u, v] 对的数组")
        keys = [(str(u), str(v)) for u, v in raw]
        accepted = verify_defense(inst, keys)
        report: Dict[str, Any] = {'valid': accepted, 'cost': inst.cost_of({edge_key(u, v) for u, v in keys})}
        if not accepted:
            cut = avoiding_min_cut(inst, keys)
            if cut is not None:
                report['cut'] = cut.to_json()
        self._write(report)
        return EXIT_YES if accepted else EXIT_NO


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    budgets = common.add_argument_group('预算（默认值来自环境变量）')
    budgets.add_argument('--brute-max-edges', dest='brute_max_edges', type=int)
    budgets.add_argument('--brute-double-max-edges', dest='brute_double_max_edges', type=int)
    budgets.add_argument('--enum-max-free-vertices', dest='enum_max_free_vertices', type=int)
    budgets.add_argument('--vc-max-branch-nodes', dest='vc_max_branch_nodes', type=int)
    budgets.add_argument('--search-max-nodes', dest='search_max_nodes', type=int)
    budgets.add_argument('--twdp-max-bag', dest='twdp_max_bag', type=int)
    budgets.add_argument('--twdp-max-join-bag', dest='twdp_max_join_bag', type=int)
    budgets.add_argument('--twdp-max-join-combinations', dest='twdp_max_join_combinations', type=int)
    budgets.add_argument('--no-prune-join', dest='no_prune_join', action='store_true')
    common.add_argument('--log-level', dest='log_level')
    common.add_argument('--log-file', dest='log_file')
    common.add_argument('--out', help='输出文件（默认 stdout）')

    parser = argparse.ArgumentParser(prog='mincut-prevention', description='Min-(s,t)-Cut Prevention 精确求解器')
    commands = parser.add_subparsers(dest='command', required=True)

    solve = commands.add_parser('solve', parents=[common], help='求解实例')
    solve.add_argument('instance', help="实例文件、目录或 '-'（stdin）")
    solve.add_argument('--algo', choices=ALGORITHMS, default='auto')
    solve.add_argument('--mode', choices=(MODE_DEFENDER, MODE_DOUBLE), default=MODE_DEFENDER,
                       help='brute 的枚举模式')
    solve.add_argument('--certificate', action='store_true', help='YES 时输出已验证的防御集')
    solve.add_argument('--td', help='PACE .td 树分解文件（仅 dp）')
    solve.add_argument('--stats', action='store_true')
    solve.add_argument('--jobs', type=int, default=1, help='目录模式下的并行进程数')

    kernelize = commands.add_parser('kernelize', parents=[common], help='核化')
    kernelize.add_argument('instance')

    transform = commands.add_parser('transform', parents=[common], help='等价变换')
    transform.add_argument('instance')
    kinds = transform.add_mutually_exclusive_group(required=True)
    kinds.add_argument('--rule1', action='store_true')
    kinds.add_argument('--to-unit-cost', dest='to_unit_cost', action='store_true')
    kinds.add_argument('--to-unit-capacity', dest='to_unit_capacity', action='store_true')
    kinds.add_argument('--to-mcp', dest='to_mcp', action='store_true')
    kinds.add_argument('--subcubify', action='store_true')

    generate = commands.add_parser('generate', parents=[common], help='由归约构造生成实例')
    generate.add_argument('family', choices=FAMILIES)
    generate.add_argument('--seed', type=int, help='随机源实例模式')
    generate.add_argument('--witness', action='store_true', help='元数据中附带源解对应的防御集')
    generate.add_argument('--vertices', type=int, help='is: 顶点数（顶点为 0..n-1）')
    generate.add_argument('--edges', help="is / biclique: 逗号分隔的边，如 0-1,1-2")
    generate.add_argument('--left', type=int, help='biclique: X 侧顶点数')
    generate.add_argument('--right', type=int, help='biclique: Y 侧顶点数')
    generate.add_argument('--items', help='knapsack / binpacking: 物品大小，如 2,3')
    generate.add_argument('--values', help='knapsack: 物品价值')
    generate.add_argument('--B', dest='B', type=int, help='knapsack 预算 / binpacking 箱子容量')
    generate.add_argument('--C', dest='C', type=int, help='knapsack 目标价值')
    generate.add_argument('--k', dest='k', type=int, help='is / binpacking / biclique 的 k')

    verify = commands.add_parser('verify', parents=[common], help='验证防御集')
    verify.add_argument('instance')
    verify.add_argument('--defense', required=True, help='防御集 JSON 文件')
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """主函数"""
    app = MinCutPreventionApp(argv)
    return app.run()


if __name__ == "__main__":
    sys.exit(run())
