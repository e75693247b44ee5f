import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cdlsim import dataset, model  # noqa: E402


def random_problem(rng, max_params=200):
    """Random small network and labelled batch with at most ``max_params`` parameters."""
    while True:
        input_dim = int(rng.integers(1, 6))
        hidden = [int(h) for h in rng.integers(1, 7, size=rng.integers(0, 3))]
        num_classes = int(rng.integers(2, 5))
        spec = model.ModelSpec(input_dim, num_classes, tuple(hidden))
        if spec.num_params <= max_params:
            break
    params = model.init_params(spec, int(rng.integers(2**31)))
    params += 0.1 * rng.standard_normal(spec.num_params)
    rows = int(rng.integers(1, 8))
    batch = model.Minibatch(rng.standard_normal((rows, input_dim)),
                            rng.integers(0, num_classes, size=rows))
    return spec, params, batch


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blobs():
    return dataset.synth_generate(3, 40, 2, 8.0, seed=3)


@pytest.fixture
def aras_file(tmp_path):
    def write(lines, name="DAY_1.txt"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return path
    return write


def aras_line(sensors=(), act1=1, act2=1):
    row = [0] * dataset.NUM_SENSORS
    for s in sensors:
        row[s] = 1
    return " ".join(str(v) for v in row + [act1, act2])


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
