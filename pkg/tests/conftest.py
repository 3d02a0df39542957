import numpy as np
import pytest

from tinysv.config import ModelConfig, toy_config
from tinysv.pipeline import Model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def default_cfg():
    return ModelConfig().validate()


@pytest.fixture(scope="session")
def default_model(default_cfg):
    return Model.random(default_cfg, seed=0)


@pytest.fixture(scope="session")
def toy_model():
    return Model.random(toy_config(blocks=2, repeats=2, kernel=5), seed=7)


def noise_pcm(n, seed=0, scale=3000):
    r = np.random.default_rng(seed)
    return np.clip(r.standard_normal(n) * scale, -32768, 32767).astype(np.int16)


@pytest.fixture
def criterion(request):
    """Context manager that logs one PASS/FAIL line for an acceptance criterion."""
    import contextlib

    log = request.config.__dict__.setdefault("_acceptance_lines", [])

    @contextlib.contextmanager
    def run(number, title):
        notes = []
        try:
            yield notes
        except BaseException as exc:
            line = f"criterion {number} FAIL  {title}: {type(exc).__name__}: {exc}".splitlines()[0]
            log.append(line)
            print(line)
            raise
        line = f"criterion {number} PASS  {title}" + (f"  [{'; '.join(notes)}]" if notes else "")
        log.append(line)
        print(line)

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
