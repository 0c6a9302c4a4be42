import pytest

from config import Config
from models.instance import Edge, Instance, Variant


def make_instance(edges, d, a, variant=Variant.WMCP, s='s', t='t', extra_vertices=()):
    """由 (u, v[, cost, cap]) 元组构造实例"""
    built = [Edge(*e) for e in edges]
    vertices = {s, t, *extra_vertices}
    for e in built:
        vertices |= {e.u, e.v}
    return Instance(vertices=tuple(vertices), edges=tuple(built), s=s, t=t, d=d, a=a, variant=variant)


@pytest.fixture
def path_instance():
    """s–v–t，单位权重，d=2，a=1"""
    return make_instance([('s', 'v'), ('v', 't')], d=2, a=1, variant=Variant.MCP)


@pytest.fixture
def diamond():
    """s–v–t 与 s–w–t 两条路径，单位权重，d=2，a=2"""
    return make_instance([('s', 'v'), ('v', 't'), ('s', 'w'), ('w', 't')], d=2, a=2, variant=Variant.MCP)


@pytest.fixture
def k4():
    return make_instance([('s', 'v'), ('s', 'w'), ('s', 't'), ('v', 'w'), ('v', 't'), ('w', 't')],
                         d=2, a=2, variant=Variant.MCP)


@pytest.fixture
def config():
    return Config()
