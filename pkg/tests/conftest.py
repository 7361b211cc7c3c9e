import pytest

from lploc.potential import tower_hierarchy


@pytest.fixture(scope="session")
def tower1():
    """d=1, base 2: periods 2, 4, 16, 256, 65536, 2^32."""
    return tower_hierarchy(1, 2, 6)


@pytest.fixture(scope="session")
def tower2():
    return tower_hierarchy(2, 2, 6)


@pytest.fixture(scope="session")
def system256(tower1):
    """d=1, box [0,255], eps = 0.01, identity hull point truncated at level 5."""
    from lploc.bands import assemble
    from lploc.hull import hull_identity
    from lploc.lattice import Box
    from lploc.spectral import eig_sym

    H = assemble(hull_identity(tower1, 5), Box.cube(1, 256), 0.01, level=5)
    return eig_sym(H)


ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
