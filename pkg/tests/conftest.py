import pytest

from renosc import _kernels, builtin_catalog, load_problem


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # trigger JIT compilation once so timed tests measure computation only
    _kernels.warmup()


@pytest.fixture(scope="session")
def example1():
    return load_problem(builtin_catalog("example1"))


@pytest.fixture(scope="session")
def example2():
    return load_problem(builtin_catalog("example2"))


@pytest.fixture(scope="session")
def example3():
    return load_problem(builtin_catalog("example3"))


@pytest.fixture(scope="session")
def example3_narrow():
    cfg = builtin_catalog("example3")
    cfg.lam = (-3.0, 1.0)
    return load_problem(cfg)


@pytest.fixture(scope="session")
def harmonic_dirichlet():
    return load_problem(builtin_catalog("harmonic-dirichlet"))


@pytest.fixture(scope="session")
def harmonic_neumann():
    return load_problem(builtin_catalog("harmonic-neumann"))
