import json

import pytest

from main import EXIT_ERROR, EXIT_NO, EXIT_YES, run
from models.instance import Variant, parse, serialize
from tests.conftest import make_instance


def write_instance(directory, inst, name='instance.json'):
    path = directory / name
    path.write_bytes(serialize(inst))
    return str(path)


def run_json(capsys, argv):
    """运行命令行，返回 (退出码, stdout 中逐行解析的 JSON)"""
    code = run(argv)
    lines = capsys.readouterr().out.strip().splitlines()
    return code, [json.loads(line) for line in lines]


def test_solve_yes_with_certificate(tmp_path, capsys, path_instance):
    path = write_instance(tmp_path, path_instance)
    code, (report,) = run_json(capsys, ['solve', path, '--certificate', '--stats'])
    assert code == EXIT_YES
    assert report['answer'] == 'yes'
    assert report['defense'] == [['s', 'v'], ['t', 'v']]
    assert report['solver'] == 'deg2'
    assert 'stats' in report


def test_solve_no(tmp_path, capsys, diamond):
    path = write_instance(tmp_path, diamond.with_changes(d=1))
    code, (report,) = run_json(capsys, ['solve', path])
    assert code == EXIT_NO
    assert report == {'answer': 'no'}


@pytest.mark.parametrize('algo', ['brute', 'search', 'deg2', 'vc', 'dp', 'wrapper'])
def test_solve_every_algorithm(tmp_path, capsys, diamond, algo):
    path = write_instance(tmp_path, diamond)
    code, (report,) = run_json(capsys, ['solve', path, '--algo', algo, '--certificate'])
    assert code == EXIT_YES
    assert len(report['defense']) == 2


def test_solve_brute_double_mode(tmp_path, capsys, k4):
    path = write_instance(tmp_path, k4.with_changes(a=3, d=3))
    code, (report,) = run_json(capsys, ['solve', path, '--algo', 'brute', '--mode', 'double'])
    assert code in (EXIT_YES, EXIT_NO)
    code_defender, (other,) = run_json(capsys, ['solve', path, '--algo', 'brute'])
    assert (code, report['answer']) == (code_defender, other['answer'])


def test_solve_search_rejects_zero_capacity(tmp_path, capsys):
    inst = make_instance([('s', 'v', 1, 0), ('v', 't', 1, 1)], d=1, a=0, variant=Variant.ZWMCP)
    path = write_instance(tmp_path, inst)
    code, (report,) = run_json(capsys, ['solve', path, '--algo', 'search'])
    assert code == EXIT_ERROR
    assert 'capacities' in report['error']


def test_solve_malformed_instance(tmp_path, capsys):
    path = tmp_path / 'broken.json'
    path.write_text('{"variant": "mcp"', encoding='utf-8')
    code, (report,) = run_json(capsys, ['solve', str(path)])
    assert code == EXIT_ERROR
    assert 'error' in report


def test_solve_with_td_file(tmp_path, capsys):
    inst = make_instance([('s', 'v1'), ('v1', 'v2'), ('v2', 't')], d=3, a=1, variant=Variant.MCP)
    path = write_instance(tmp_path, inst)
    td = tmp_path / 'path.td'
    td.write_text("s td 1 2 4\nb 1 3 4\n", encoding='utf-8')
    code, (report,) = run_json(capsys, ['solve', path, '--algo', 'dp', '--td', str(td), '--certificate'])
    assert code == EXIT_YES
    assert len(report['defense']) == 3

    bad = tmp_path / 'bad.td'
    bad.write_text("s td 1 1 4\nb 1 3\n", encoding='utf-8')
    code, (report,) = run_json(capsys, ['solve', path, '--algo', 'dp', '--td', str(bad)])
    assert code == EXIT_ERROR
    assert 'vertex cover' in report['error']


def test_td_requires_dp(tmp_path, capsys, path_instance):
    path = write_instance(tmp_path, path_instance)
    code, (report,) = run_json(capsys, ['solve', path, '--algo', 'search', '--td', path])
    assert code == EXIT_ERROR
    assert 'error' in report


def test_solve_writes_out_file(tmp_path, capsys, path_instance):
    path = write_instance(tmp_path, path_instance)
    out = tmp_path / 'report.json'
    assert run(['solve', path, '--out', str(out)]) == EXIT_YES
    assert capsys.readouterr().out == ''
    assert json.loads(out.read_text(encoding='utf-8')) == {'answer': 'yes'}


@pytest.mark.parametrize('jobs', ['1', '2'])
def test_solve_directory(tmp_path, capsys, path_instance, diamond, jobs):
    write_instance(tmp_path, path_instance, 'a.json')
    write_instance(tmp_path, diamond.with_changes(d=1), 'b.json')
    code, reports = run_json(capsys, ['solve', str(tmp_path), '--jobs', jobs])
    assert code == EXIT_NO
    assert [r['answer'] for r in reports] == ['yes', 'no']
    assert reports[0]['file'].endswith('a.json')


def test_solve_directory_rejects_td(tmp_path, capsys, path_instance):
    write_instance(tmp_path, path_instance, 'a.json')
    td = tmp_path / 'path.td'
    td.write_text("s td 1 2 3\nb 1 2 3\n", encoding='utf-8')
    code, (report,) = run_json(capsys, ['solve', str(tmp_path), '--algo', 'dp', '--td', str(td)])
    assert code == EXIT_ERROR
    assert '--td' in report['error']


def test_solve_directory_with_broken_file(tmp_path, capsys, path_instance):
    write_instance(tmp_path, path_instance, 'a.json')
    (tmp_path / 'b.json').write_text('[]', encoding='utf-8')
    code, reports = run_json(capsys, ['solve', str(tmp_path)])
    assert code == EXIT_ERROR
    assert reports[0]['answer'] == 'yes'
    assert 'error' in reports[1]


def test_invalid_budget(tmp_path, capsys, path_instance):
    path = write_instance(tmp_path, path_instance)
    code, (report,) = run_json(capsys, ['solve', path, '--twdp-max-bag', '0'])
    assert code == EXIT_ERROR
    assert report['error'] == 'invalid configuration'


def test_kernelize(tmp_path, capsys, diamond):
    path = write_instance(tmp_path, diamond)
    code, (output,) = run_json(capsys, ['kernelize', path])
    assert code == EXIT_YES
    assert output['report']['kernel_edges'] == 4
    assert parse(json.dumps(output['instance'])) == diamond


def test_kernelize_trivial_and_rejected(tmp_path, capsys, diamond):
    path = write_instance(tmp_path, diamond.with_changes(a=1))
    code, (output,) = run_json(capsys, ['kernelize', path])
    assert code == EXIT_YES
    assert output['instance'] is None
    assert output['report']['verdict'] == 'yes'

    zero = make_instance([('s', 't', 1, 0)], d=1, a=0, variant=Variant.ZWMCP)
    code, (output,) = run_json(capsys, ['kernelize', write_instance(tmp_path, zero, 'zero.json')])
    assert code == EXIT_ERROR


def test_transform_to_mcp(tmp_path, capsys):
    inst = make_instance([('s', 'v', 2, 2), ('v', 't', 1, 1)], d=2, a=1)
    code, (output,) = run_json(capsys, ['transform', write_instance(tmp_path, inst), '--to-mcp'])
    assert code == EXIT_YES
    assert output['metadata'] == {'transform': 'to_mcp'}
    result = parse(json.dumps(output))
    assert result.variant == Variant.MCP
    assert result.is_unit_weight()


def test_transform_subcubify(tmp_path, capsys, k4):
    code, (output,) = run_json(capsys, ['transform', write_instance(tmp_path, k4), '--subcubify'])
    assert code == EXIT_YES
    assert parse(json.dumps(output)).max_degree <= 3


def test_transform_rule1(tmp_path, capsys, path_instance):
    pendant = make_instance([('s', 'v'), ('v', 't'), ('v', 'x')], d=2, a=1)
    code, (output,) = run_json(capsys, ['transform', write_instance(tmp_path, pendant), '--rule1'])
    assert code == EXIT_YES
    assert output['metadata']['merges'] == [['v', 'x', 'v+x']]

    trivial = path_instance.with_changes(a=0, d=0)
    code, (output,) = run_json(capsys, ['transform', write_instance(tmp_path, trivial, 't.json'), '--rule1'])
    assert code == EXIT_YES
    assert output['answer'] == 'yes'


def test_transform_requires_kind(tmp_path, path_instance):
    with pytest.raises(SystemExit):
        run(['transform', write_instance(tmp_path, path_instance)])


def test_generate_knapsack(capsys):
    argv = ['generate', 'knapsack', '--items', '2,3', '--values', '5,4', '--B', '2', '--C', '5', '--witness']
    code, (output,) = run_json(capsys, argv)
    assert code == EXIT_YES
    assert (output['d'], output['a']) == (2, 6)
    assert output['metadata']['expected'] == 'yes'
    assert output['metadata']['witness'] == [['s', 'u1']]


def test_generate_without_witness(capsys):
    code, (output,) = run_json(capsys, ['generate', 'is', '--vertices', '3', '--edges', '0-1,1-2,0-2', '--k', '1'])
    assert code == EXIT_YES
    assert (output['d'], output['a']) == (1, 4)
    assert 'witness' not in output['metadata']


def test_generate_biclique(capsys):
    argv = ['generate', 'biclique', '--left', '2', '--right', '2', '--edges', '1-1,1-2,2-1,2-2', '--k', '2']
    code, (output,) = run_json(capsys, argv)
    assert code == EXIT_YES
    assert output['variant'] == 'ZWMCP'
    assert output['d'] == 24
    assert output['metadata']['expected'] == 'yes'


def test_generate_missing_parameter(capsys):
    code, (output,) = run_json(capsys, ['generate', 'binpacking', '--items', '2,2', '--B', '2'])
    assert code == EXIT_ERROR
    assert '--k' in output['error']


def test_generate_seeded_is_reproducible(capsys):
    _, (first,) = run_json(capsys, ['generate', 'binpacking', '--seed', '3'])
    _, (second,) = run_json(capsys, ['generate', 'binpacking', '--seed', '3'])
    assert first == second
    assert first['metadata']['seed'] == 3


def test_verify(tmp_path, capsys, path_instance):
    path = write_instance(tmp_path, path_instance)
    good = tmp_path / 'good.json'
    good.write_text(json.dumps({'defense': [['s', 'v'], ['v', 't']]}), encoding='utf-8')
    code, (report,) = run_json(capsys, ['verify', path, '--defense', str(good)])
    assert code == EXIT_YES
    assert report == {'valid': True, 'cost': 2}

    weak = tmp_path / 'weak.json'
    weak.write_text(json.dumps([['s', 'v']]), encoding='utf-8')
    code, (report,) = run_json(capsys, ['verify', path, '--defense', str(weak)])
    assert code == EXIT_NO
    assert report['valid'] is False
    assert report['cut']['capacity'] <= path_instance.a


def test_verify_rejects_bad_defense_file(tmp_path, capsys, path_instance):
    path = write_instance(tmp_path, path_instance)
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps([['s']]), encoding='utf-8')
    code, (report,) = run_json(capsys, ['verify', path, '--defense', str(bad)])
    assert code == EXIT_ERROR
    assert 'error' in report
