import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pointray.geometry import default_intrinsics


@pytest.fixture(scope="session")
def intr():
    return default_intrinsics()
