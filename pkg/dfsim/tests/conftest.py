import pytest

from dfsim.fock import make_registry
from dfsim.protocol import ExperimentConfig


@pytest.fixture()
def two_modes():
    """
    Реестр из двух мод для простых проверок делителя:
    индексы 0 и 2 -- H-моды меток "a" и "b" (V-моды остаются пустыми).
    """
    return make_registry(["a", "b"])


@pytest.fixture()
def ab_registry():
    """Пара A, B без временных двойников (4 моды)."""
    return make_registry(["A", "B"])


@pytest.fixture()
def split_registry():
    """
    Реестр с временными двойниками у R и меткой потерь L (тоже с двойниками),
    как у импульса R в протоколе.
    """
    return make_registry(["A", ("R", True), ("L", True)])


@pytest.fixture()
def ideal_config() -> ExperimentConfig:
    """
    Идеальные детекторы без тёмных отсчётов, одна пара в источнике.
    В этой точке протокол должен отдавать |phi+> почти без примесей.
    """
    return ExperimentConfig(
        gamma=1e-3,
        mu=1e-2,
        transmittance=0.5,
        eta=1.0,
        eta_g=1.0,
        dark_count=0.0,
        dark_count_e=0.0,
        dark_count_f=0.0,
        overlap=1.0,
        source_fidelity=1.0,
        cutoff=3,
        pair_cutoff=1,
    )


@pytest.fixture()
def experiment_config() -> ExperimentConfig:
    """Параметры эксперимента (значения по умолчанию ExperimentConfig)."""
    return ExperimentConfig()


@pytest.fixture()
def small_config() -> ExperimentConfig:
    """Неидеальная, но маленькая конфигурация для сверки с плотным оракулом."""
    return ExperimentConfig(
        gamma=0.02,
        mu=0.1,
        transmittance=0.3,
        eta=0.6,
        eta_g=0.5,
        dark_count=1e-3,
        dark_count_e=2e-3,
        dark_count_f=1e-3,
        overlap=0.8,
        gp_reflectance=0.2,
        source_fidelity=0.95,
        phase_steps=4,
        phase_delta=0.1,
        cutoff=3,
    )
