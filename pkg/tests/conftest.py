import numpy as np
import pytest

from afu.nn import MlpNet

ACCEPTANCE_LINES: list[str] = []


def affine_net(weight, bias, name="net"):
    """Single linear layer with the given weight matrix and bias vector."""
    weight = np.atleast_2d(np.asarray(weight, dtype=np.float64))
    bias = np.atleast_1d(np.asarray(bias, dtype=np.float64))
    net = MlpNet(weight.shape[:1] + bias.shape, name=name)
    net.weights[0][...] = weight
    net.biases[0][...] = bias
    return net


def constant_net(n_in, values, name="net"):
    """Linear layer whose output ignores its input and equals ``values``."""
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    return affine_net(np.zeros((n_in, values.size)), values, name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
