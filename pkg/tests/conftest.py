import numpy as np
import pytest
import torch

from ddpg_e2e.nets import NetworkSpec

TOY_SPEC = NetworkSpec(
    tx_channels=(6, 5, 4),
    rx_channels=(6, 5, 4, 3),
    critic_branch=5,
    critic_hidden=(6, 6),
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_spec():
    return TOY_SPEC


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS, summary_lines

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in summary_lines():
            terminalreporter.write_line(line)
