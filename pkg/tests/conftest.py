import numpy as np
import pytest

from homfem import data_path, parse_problem


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def piezo_micro_path():
    return data_path('piezo_micro.json')


@pytest.fixture(scope='session')
def heat_conf():
    return parse_problem(data_path('heat_cond.json'))


def pytest_terminal_summary(terminalreporter):
    module = __import__('sys').modules.get('test_acceptance')
    lines = getattr(module, 'RESULTS', [])
    if lines:
        terminalreporter.section('acceptance criteria')
        for line in lines:
            terminalreporter.write_line(line)
