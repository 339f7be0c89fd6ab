import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oshealth.data import series_from_matrix  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def make_series(n_months: int, project_id: str = "acme/widget", start: str = "2016-01", seed: int = 0):
    """Small deterministic series: month i has feature j equal to (i * (j + 1) + seed) % 17."""
    rows = [[(i * (j + 1) + seed) % 17 for j in range(12)] for i in range(1, n_months + 1)]
    return series_from_matrix(project_id, start, rows)


@pytest.fixture
def series60():
    return make_series(60)


# criterion number -> (title, passed, detail); filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
