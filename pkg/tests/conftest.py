import pytest

_RESULTS: dict[tuple, bool] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    key = tuple(marker.args)
    if rep.when == "call" or rep.failed:
        _RESULTS[key] = _RESULTS.get(key, True) and rep.passed


def _order(key):
    label = str(key[0])
    digits = "".join(ch for ch in label if ch.isdigit())
    return int(digits or 0), label


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(_RESULTS, key=_order):
        status = "PASS" if _RESULTS[key] else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {key[0]}: {key[1]}")
