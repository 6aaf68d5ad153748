import numpy as np
import pytest

from lsre import autoencoder, bbob, ela
from lsre.config import RunConfig
from lsre.seeding import derive_seed

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def desk_config():
    return RunConfig.load(None, "desk", env={})


@pytest.fixture(scope="session")
def desk_data(desk_config):
    """240-instance desk distribution with its ELA vectors."""
    spec = desk_config.distribution_spec()
    cfg = desk_config.ela_config()
    insts = bbob.build_distribution(spec)
    vecs = [
        ela.compute_ela(p, ela.ELAConfig(**{**cfg.__dict__, "seed": derive_seed(cfg.seed, k)}))
        for k, p in enumerate(insts)
    ]
    return insts, vecs


@pytest.fixture(scope="session")
def desk_model(desk_config, desk_data):
    _, vecs = desk_data
    data = np.array([v.values for v in vecs if v.valid])
    return autoencoder.train(data, desk_config.train_config()).model


@pytest.fixture(scope="session")
def small_gp(desk_config):
    """A GP config small enough for unit tests."""
    from dataclasses import replace

    return replace(
        desk_config.gp_config(),
        pop_size=16, tournament_size=4, generations=3, init_depth=(2, 4), mutate_depth=(2, 4),
        max_depth=8, local_search_dims=(2, 5), eval_workers=1, stopping_criteria=None,
    )
