import numpy as np
import pytest

from core.dynamics import IntegratorConfig, manufacture_forcing, shear_mode_steady_state
from core.lattice import FlowParameters, WaveVectorLattice, random_field, zeros


@pytest.fixture(autouse=True)
def _quiet_outputs(tmp_path, monkeypatch):
    monkeypatch.setenv("NSSTAT_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("NSSTAT_LOG_DIR", str(tmp_path / "logs"))


@pytest.fixture
def lattice8():
    return WaveVectorLattice(8)


@pytest.fixture
def lattice16():
    return WaveVectorLattice(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unforced(lattice8):
    return FlowParameters(0.1, zeros(lattice8))


@pytest.fixture
def shear_flow(lattice8):
    """Shear steady state u* and its flow parameters (f = nu lambda_1 u*)."""
    u_star, forcing = shear_mode_steady_state(lattice8, 0.1, amplitude=1.0)
    return u_star, FlowParameters(0.1, forcing)


@pytest.fixture
def manufactured_flow(lattice8, rng):
    """A random low-mode steady state and the forcing that makes it steady."""
    u_star = random_field(lattice8, rng, max_mode=2, l2_norm=1.0)
    return u_star, FlowParameters(0.1, manufacture_forcing(u_star, 0.1))


@pytest.fixture
def cn_config():
    return IntegratorConfig(dt=1e-3, stride=5)
