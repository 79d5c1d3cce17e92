import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unit(rng, n, count=None):
    shape = (n,) if count is None else (count, n)
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number: int, title: str, checks: list[tuple[str, bool]]):
        failed = [name for name, ok in checks if not ok]
        status = "FAIL" if failed else "PASS"
        detail = "; ".join(name for name, _ in checks) if not failed else "failed: " + "; ".join(failed)
        line = f"criterion {number:2d} {status}  {title}  [{detail}]"
        lines[number] = line
        print(line)
        assert not failed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
