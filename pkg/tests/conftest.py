import pytest

ACCEPTANCE_KEY = pytest.StashKey[dict]()
N_CRITERIA = 13


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance result: ``criterion(k, title, ok, detail)`` returns ``ok``."""
    results = request.config.stash[ACCEPTANCE_KEY]

    def record(number, title, ok, detail=""):
        ok = bool(ok)
        results[number] = (title, ok, detail)
        print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        if k in results:
            title, ok, detail = results[k]
            terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        else:
            terminalreporter.write_line(f"criterion {k:2d} NOT RUN  (deselected, or errored before recording a result)")
