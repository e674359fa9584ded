import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tracegen import make_trace


@pytest.fixture
def all_spot():
    def build(n):
        return make_trace([1] * n)
    return build


@pytest.fixture
def no_spot():
    def build(n):
        return make_trace([0] * n)
    return build
