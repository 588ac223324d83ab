import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from expr_core import Chart            # noqa: E402
from families import lehbel_structure  # noqa: E402
from run_config import RunConfig       # noqa: E402


@pytest.fixture
def cfg():
    return RunConfig()


@pytest.fixture
def xyz():
    return Chart.of("x", "y", "z")


@pytest.fixture
def lehbel():
    return lehbel_structure()


@pytest.fixture
def structures_dir():
    return ROOT / "structures"
