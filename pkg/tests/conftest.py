import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mixedbounds.mesh import builtin_mesh, refine  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def meshes():
    """Builtin meshes at levels 0..2, keyed by (name, level)."""
    out = {}
    for name in ("lshape_fig1", "square_fig3", "cook_fig4"):
        m = builtin_mesh(name)
        for level in range(3):
            out[name, level] = m if level == 0 else refine(m, level)
    return out


@pytest.fixture
def acceptance():
    def record(criterion, passed, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
