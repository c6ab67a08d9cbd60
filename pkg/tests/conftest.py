import pytest

from ridgesketch.config import ExperimentConfig
from ridgesketch.experiments import run_experiment


@pytest.fixture(scope="session")
def cv_gamma07_table():
    """Synthetic K=5 cross-validation at n=1000, p=700, alpha=sigma=1 over 50 seeds."""
    cfg = ExperimentConfig(kind="cv", n=1000, p=700, alpha=1.0, sigma=1.0, folds=5, replicates=50, seed=0)
    return run_experiment(cfg)


CRITERIA = {}
CRITERION_COUNT = 12


@pytest.fixture
def criterion():
    """``record(k, ok, detail)`` stores one pass/fail line per acceptance criterion."""
    def record(k, ok, detail):
        CRITERIA[k] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, CRITERION_COUNT + 1):
        ok, detail = CRITERIA.get(k, (False, "not run or errored before recording"))
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
