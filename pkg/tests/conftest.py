import numpy as np
import pytest
import torch

from slpretrain.config import RunConfig
from slpretrain.synthetic import SynthesisConfig, generate_samples

torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def syn_cfg():
    return SynthesisConfig(vocab_size=10, seed=0)


@pytest.fixture(scope="session")
def small_corpus(syn_cfg):
    return generate_samples(syn_cfg, 24)


@pytest.fixture
def tiny_rc():
    """Desk preset shrunk further so end-to-end tests finish in seconds."""
    return RunConfig({"model.d_g": 16, "model.d1": 16, "model.d2": 16, "model.N": 1,
                      "model.heads": 2, "sim.d_e": 16, "model.d_t": 16, "model.decoder_hidden": 32,
                      "train.batch_size": 8, "train.epochs": 2, "optim.base_lr": 1e-3})


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture(scope="session")
def acceptance(request):
    """Collector for one pass/fail line per acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(name: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
