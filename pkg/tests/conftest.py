import numpy as np
import pytest

from reactive_ro.config import load_config, parse_config, shipped_config

_ACCEPTANCE = {}


def small_config_text(nx=12, ny=6, K=0.1, dt=1e-3, t_end=0.01, p_out=1.8e6, extra=""):
    return f"""
[geometry]
L = 0.02
H = 0.003
nx = {nx}
ny = {ny}

[fluid]
rho = 1000
mu = 1e-3

[inlet]
u_av = 0.1

[pressure]
p_out = {p_out}

[species.a]
phi_in = 201.85
phi_init = 201.85

[species.b]
phi_in = 201.85
phi_init = 201.85

[reaction.1]
reactants = a:1, b:1
products = s:1
K = {K}

[solid.s]
molar_volume = 27e-6

[membrane]
k0 = 1e-16
epsilon0 = 0.7
ell = 1e-4

[controls]
dt = {dt}
t_end = {t_end}
output_times = {t_end}

[initial]
velocity = developed
{extra}
"""


@pytest.fixture
def small_config():
    return parse_config(small_config_text())


@pytest.fixture
def make_config():
    def make(**kw):
        return parse_config(small_config_text(**kw))
    return make


@pytest.fixture
def table1():
    return load_config(shipped_config("table1"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def report():
    """Record one acceptance verdict: ``report(n, ok, detail)``."""
    def record(n, ok, detail):
        _ACCEPTANCE[n] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
