import pytest

_ACCEPTANCE: dict[str, dict] = {}


@pytest.fixture
def acceptance(request):
    """Record a one-line detail for an acceptance criterion; printed in the summary."""
    entry = _ACCEPTANCE.setdefault(request.node.nodeid, {"label": request.node.name, "detail": ""})

    def record(label: str, detail: str = ""):
        entry["label"], entry["detail"] = label, detail

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.nodeid in _ACCEPTANCE and (rep.when == "call" or rep.failed):
        _ACCEPTANCE[item.nodeid].setdefault("outcome", rep.outcome)
        if rep.failed:
            _ACCEPTANCE[item.nodeid]["outcome"] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for entry in _ACCEPTANCE.values():
        flag = "PASS" if entry.get("outcome") == "passed" else "FAIL"
        terminalreporter.write_line(f"{flag}  {entry['label']}  {entry['detail']}")
