import time

import pytest

from gazecomp.checkpoint import save_checkpoint
from gazecomp.cli import main
from gazecomp.config import RunConfig
from gazecomp.experiments import detection_summary

_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    key = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _OUTCOMES[key] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), verdict in sorted(_OUTCOMES.items()):
        terminalreporter.write_line(f"{verdict} [{number:>2}] {title}")


@pytest.fixture(scope="session")
def default_run():
    return RunConfig()


@pytest.fixture(scope="session")
def detection(default_run):
    """Headline variants trained and scored on the default synthetic benchmark."""
    t0 = time.perf_counter()
    summary = detection_summary(default_run)
    return summary, time.perf_counter() - t0


@pytest.fixture(scope="session")
def default_report_dir(detection, default_run, tmp_path_factory):
    """CLI ``report`` output for the default configuration.

    The CH+CORR one-class model from ``detection`` is the model ``train``
    would produce (same config, same derived seeds), so it is saved as the
    run checkpoint instead of training a second time.
    """
    summary, _ = detection
    out = tmp_path_factory.mktemp("default") / "run"
    assert main(["generate", "--out", str(out)]) == 0
    save_checkpoint(out / "model.gzck", summary.models["both/one_class"],
                    {"run_config": default_run.to_dict()})
    for cmd in ("score", "report"):
        assert main([cmd, "--out", str(out)]) == 0
    return out
