"""
Pytest configuration and shared fixtures.
"""
import numpy as np
import pytest
from fastapi.testclient import TestClient

from models import EnsembleSpec, ExperimentConfig, SparseSignal
from services.measurements import make_phase, sample_matrix, sample_signal


@pytest.fixture(scope="module")
def client():
    """Create a test client for the FastAPI app."""
    from app import app
    return TestClient(app)


@pytest.fixture
def rng():
    """Seeded generator for test inputs."""
    return np.random.default_rng(20240611)


@pytest.fixture
def small_truth():
    """A 2-sparse ground truth of length 8."""
    return SparseSignal(values=[0.0, 1.5, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0], sparsity_budget=2)


@pytest.fixture
def gaussian_phase():
    """Factory for a seeded gaussian measurement phase of a fresh K-sparse signal."""
    def make(m, n, k, seed=0):
        truth = sample_signal(n, k, seed)
        matrix = sample_matrix(EnsembleSpec(family="gaussian"), m, n, seed + 1)
        return truth, make_phase(matrix, truth)
    return make


@pytest.fixture
def identity_config():
    """Experiment config whose identity ensemble recovers in one step."""
    return ExperimentConfig(
        master_seed=1,
        n=8,
        t=3,
        k_grid=(2,),
        trials=4,
        ensemble="identity",
        workers=1,
    )


@pytest.fixture
def small_gaussian_config():
    """Desk-size gaussian experiment, fast enough for unit tests."""
    return ExperimentConfig(
        master_seed=11,
        n=40,
        t=10,
        k_grid=(1, 2),
        trials=3,
        mode="siht",
        a=20,
        b=30,
        workers=1,
    )
