import pathlib
import subprocess
import sys

import pytest

from fkexact import lattice
from fkexact.enumeration import SparseBoxTable
from fkexact.exactfk import RefinedTable, build_refined_table

FIXTURE_DIR = pathlib.Path(__file__).parent / "fixtures"
T4_TABLE = FIXTURE_DIR / "t4_boxtable.npz"
T4_TRACKED = (0, 1, 2, 3)


@pytest.fixture(scope="session")
def t3():
    return lattice.build_torus(2, 3)


@pytest.fixture(scope="session")
def t4():
    return lattice.build_torus(2, 4)


@pytest.fixture(scope="session")
def ct22(t4):
    """The 2x2 coarse torus (d=2, N=4, L=1)."""
    return lattice.build_coarse(t4, 1)


@pytest.fixture(scope="session")
def t3_refined(t3):
    """Refined table of the 3x3 torus tracking edges 0..3."""
    return build_refined_table(t3, T4_TRACKED)


@pytest.fixture(scope="session")
def t4_sparse():
    """Exact per-box table of the 4x4 torus (committed; regenerated if lost)."""
    if not T4_TABLE.exists():
        script = pathlib.Path(__file__).parent.parent / "tools" / "make_t4_fixture.py"
        print("\nt4 fixture missing; regenerating (about 10 minutes)...", file=sys.stderr)
        subprocess.run([sys.executable, str(script)], check=True)
    return SparseBoxTable.load(T4_TABLE)


@pytest.fixture(scope="session")
def t4_refined(t4, t4_sparse):
    return RefinedTable(t4_sparse.mks_array(), T4_TRACKED, 32, 16,
                        "periodic", t4.graph_hash())
