import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_AC_RESULTS = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_ac"):
        return
    key = name[len("test_"):].split("_")[0].upper()
    if report.when == "call" or report.outcome != "passed":
        prev = _AC_RESULTS.get(key, "PASS")
        _AC_RESULTS[key] = "PASS" if (report.passed and prev == "PASS") else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_AC_RESULTS, key=lambda k: int(k[2:])):
        terminalreporter.write_line(f"{key}: {_AC_RESULTS[key]}")
