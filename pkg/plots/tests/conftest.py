import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toydata import COLUMNS, HEADER, toy_rows


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "results.csv"
    path.write_text(HEADER + "\n" + COLUMNS + "\n" + "\n".join(toy_rows()) + "\n")
    return path
