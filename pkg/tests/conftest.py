import numpy as np
import pytest

from app.config.settings import OUTPUT_DIR_ENV, CDOptions, ConeOptions, DistanceOptions, ShootingOptions


@pytest.fixture
def fast_distance() -> DistanceOptions:
    return DistanceOptions(
        segments=16,
        restarts=2,
        maxiter=1000,
        polish_maxiter=500,
        certificate_steps=400,
        seed=7,
    )


@pytest.fixture
def fast_shooting() -> ShootingOptions:
    return ShootingOptions(starts=8, steps=100, seed=7)


@pytest.fixture
def fast_cone() -> ConeOptions:
    return ConeOptions(nodes=24, starts=2, maxiter=1500, seed=7)


@pytest.fixture
def cd_opts() -> CDOptions:
    return CDOptions(times=(0.25, 0.5, 0.75))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def no_output_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
