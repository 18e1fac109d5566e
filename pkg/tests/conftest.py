import numpy as np
import pytest

from dfs_gzsl.afg import AfgConfig, train_afg
from dfs_gzsl.data_io import SyntheticBenchmarkSpec, generate_synthetic_benchmark
from dfs_gzsl.sfg import SfgConfig, train_sfg

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {key}: {detail}")


SMALL_SPEC = SyntheticBenchmarkSpec(num_seen=3, num_unseen=2, visual_dim=6, semantic_dim=4,
                                    samples_per_class=10, semantic_rank=2, within_rank=2, seed=3)


def small_afg_config(**kw) -> AfgConfig:
    base = dict(aligned_dim=3, e_sem_hidden=(8,), d_sem_hidden=(8,), e_vis_hidden=(8,),
                d_vis_hidden=(8,), epochs=4, batch_size=8, seed=1)
    base.update(kw)
    return AfgConfig(**base)


def small_sfg_config(**kw) -> SfgConfig:
    base = dict(e3_hidden=(8,), d3_hidden=(8,), epochs=4, batch_size=8, seed=1)
    base.update(kw)
    return SfgConfig(**base)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic_benchmark(SMALL_SPEC)


@pytest.fixture(scope="session")
def small_models(small_dataset):
    afg = train_afg(small_dataset, small_afg_config())
    sfg = train_sfg(small_dataset, afg, small_sfg_config())
    return afg, sfg


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
