import os

import pytest


@pytest.fixture(scope="session", autouse=True)
def matrix_cache(tmp_path_factory):
    """Keep assembled matrices in a per-session directory unless one is given."""
    if os.environ.get("BGBOLTZ_CACHE"):
        yield os.environ["BGBOLTZ_CACHE"]
        return
    path = tmp_path_factory.mktemp("bgboltz-cache")
    os.environ["BGBOLTZ_CACHE"] = str(path)
    yield str(path)
    del os.environ["BGBOLTZ_CACHE"]


def pytest_terminal_summary(terminalreporter):
    """Print the one-line-per-criterion acceptance table when it was run."""
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
